"""Contour perturbation engines and the seeded synthesis pipeline.

Three independent engines produce controlled segmentation errors from a
ground-truth contour:

  * Fourier-descriptor editing: smooth the shape by keeping the D lowest
    frequencies, then jitter the R highest kept ones.
  * Boundary spiculation: add a Gaussian radial bump in polar coordinates
    about the vertex centroid.
  * Affine: resize about the centroid, rotate, then shift.

All randomness flows through one SeededRng per synthesis call, with a fixed
draw order, so a (mask, config, seed) triple always produces the identical
output, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ContourError, RasterError, SynthesisError
from .mask_io import BinaryMask, Contour, Point, centroid, extract_contour, rasterize

TWO_PI = 2.0 * math.pi

DEFAULT_STAGE_ORDER = ("fourier", "spiculation", "affine")


# ---------------------------------------------------------------------------
# deterministic randomness

class SeededRng:
    """Deterministic uniform stream: NumPy PCG64 behind a SeedSequence.

    PCG64 draw sequences are stable across platforms and NumPy releases
    (covered by NumPy's stream-compatibility policy), which is what makes
    whole-battery byte reproducibility possible.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    def uniform(self, lo: float, hi: float) -> float:
        """One draw from the half-open interval [lo, hi)."""
        return float(self._gen.uniform(lo, hi))

    def integers(self, lo: int, hi: int) -> int:
        """One draw from the inclusive integer range [lo, hi]."""
        return int(self._gen.integers(lo, hi + 1))

    def coin(self) -> int:
        """Fair coin, 0 or 1."""
        return int(self._gen.integers(0, 2))


def derive_cell_seed(master_seed: int, patient_id: str, segmentor_id: str) -> int:
    """Stable per-cell seed for a battery run.

    blake2b over the (master seed, patient, segmentor) triple, so adding or
    removing patients never perturbs any other cell's stream. Python's
    builtin hash() is salted per process and must not be used here.
    """
    key = f"{int(master_seed)}\x1f{patient_id}\x1f{segmentor_id}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class AffineParams:
    """Resize about the vertex centroid, rotate, then translate."""

    resize_x: float = 1.0
    resize_y: float = 1.0
    rotate: float = 0.0  # radians, counter-clockwise over (x, y)
    shift_dx: float = 0.0
    shift_dy: float = 0.0

    def __post_init__(self):
        for name in ("resize_x", "resize_y", "rotate", "shift_dx", "shift_dy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.resize_x <= 0 or self.resize_y <= 0:
            raise ValueError("resize ratios must be positive")


@dataclass(frozen=True)
class SpiculationParams:
    """One Gaussian radial bump: rho'(phi) = rho(phi) + h * exp(-((phi-c)/w)^2)."""

    center: float  # radians; normalized into [0, 2*pi)
    height: float  # pixels; negative pulls inward
    width: float   # radians, > 0

    def __post_init__(self):
        for name in ("center", "height", "width"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.width <= 0:
            raise ValueError("width must be positive")
        object.__setattr__(self, "center", self.center % TWO_PI)


@dataclass(frozen=True)
class FdParams:
    """Fourier-descriptor edit: keep detail*N low frequencies, perturb the
    range*N highest kept ones by uniform jitter scaled by magnitude."""

    detail: float
    range: float = 0.0
    magnitude: float = 0.0

    def __post_init__(self):
        for name in ("detail", "range", "magnitude"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0 < self.detail <= 1:
            raise ValueError("detail must be in (0, 1]")
        if not 0 <= self.range <= 1:
            raise ValueError("range must be in [0, 1]")
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")


@dataclass(frozen=True)
class SpiculationRange:
    """Per-segmentor spiculation randomization intervals."""

    count: tuple  # (lo, hi) bumps, inclusive integers
    height: tuple  # (lo, hi) magnitude in pixels, both positive
    width_deg: tuple  # (lo, hi) Gaussian width in degrees
    mode: str  # outward | inward | mixture

    def __post_init__(self):
        if self.mode not in ("outward", "inward", "mixture"):
            raise ValueError(f"unknown spiculation mode {self.mode!r}")
        lo, hi = self.count
        if not (0 <= lo <= hi):
            raise ValueError("count range must satisfy 0 <= lo <= hi")
        if not (0 < self.height[0] <= self.height[1]):
            raise ValueError("height magnitudes must be positive and ordered")
        if not (0 < self.width_deg[0] <= self.width_deg[1]):
            raise ValueError("widths must be positive and ordered")


@dataclass(frozen=True)
class SegmentorConfig:
    """One synthetic segmentor: FD edit plus optional spiculation and affine
    randomization intervals."""

    id: str
    fd: FdParams
    resize: tuple = (1.0, 1.0)
    rotate: float = 0.0
    shift: tuple = (0.0, 0.0)  # (lo, hi) displacement magnitude in pixels
    spiculation: Optional[SpiculationRange] = None

    def __post_init__(self):
        rx, ry = self.resize
        if rx <= 0 or ry <= 0:
            raise ValueError("resize ratios must be positive")
        lo, hi = self.shift
        if not (0 <= lo <= hi):
            raise ValueError("shift range must satisfy 0 <= lo <= hi")

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "fd": {"detail": self.fd.detail, "range": self.fd.range,
                   "magnitude": self.fd.magnitude},
            "resize": list(self.resize),
            "rotate": self.rotate,
            "shift": list(self.shift),
            "spiculation": None,
        }
        if self.spiculation is not None:
            d["spiculation"] = {
                "count": list(self.spiculation.count),
                "height": list(self.spiculation.height),
                "width_deg": list(self.spiculation.width_deg),
                "mode": self.spiculation.mode,
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentorConfig":
        spic = None
        if d.get("spiculation"):
            s = d["spiculation"]
            spic = SpiculationRange(
                count=tuple(s["count"]), height=tuple(s["height"]),
                width_deg=tuple(s["width_deg"]), mode=s["mode"],
            )
        fd = d["fd"]
        return cls(
            id=str(d["id"]),
            fd=FdParams(detail=fd["detail"], range=fd.get("range", 0.0),
                        magnitude=fd.get("magnitude", 0.0)),
            resize=tuple(d.get("resize", (1.0, 1.0))),
            rotate=float(d.get("rotate", 0.0)),
            shift=tuple(d.get("shift", (0.0, 0.0))),
            spiculation=spic,
        )


def load_segmentor_configs(path) -> list:
    """Read a segmentor config file: a JSON list of config objects, an
    object with a "segmentors" list, or a single bare config object."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        rows = doc["segmentors"] if "segmentors" in doc else [doc]
    else:
        rows = doc
    configs = []
    for i, row in enumerate(rows):
        try:
            configs.append(SegmentorConfig.from_dict(row))
        except KeyError as exc:
            raise ValueError(
                f"segmentor config #{i + 1} is missing required key {exc}"
            ) from exc
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate segmentor ids in config file")
    return configs


def builtin_segmentors_path() -> str:
    """Path of the packaged ten-segmentor table."""
    from importlib.resources import files

    return str(files("segsynth.data") / "segmentors_table1.json")


# ---------------------------------------------------------------------------
# polar form and spiculation

def to_polar(contour: Contour):
    """Polar form about the vertex centroid: (rho, phi, center).

    phi is normalized into [0, 2*pi). Raises if a point coincides with
    the centroid (its angle would be meaningless).
    """
    c = centroid(contour)
    dx = contour.points[:, 0] - c.x
    dy = contour.points[:, 1] - c.y
    rho = np.hypot(dx, dy)
    if np.any(rho < 1e-12):
        raise ContourError("contour point coincides with the centroid; no polar form")
    phi = np.mod(np.arctan2(dy, dx), TWO_PI)
    phi[phi >= TWO_PI] = 0.0  # mod can round a tiny negative up to 2*pi itself
    return rho, phi, c


def from_polar(rho: np.ndarray, phi: np.ndarray, center: Point) -> Contour:
    x = center.x + rho * np.cos(phi)
    y = center.y + rho * np.sin(phi)
    return Contour(np.column_stack((x, y)))


def _wrap_angle(delta: np.ndarray) -> np.ndarray:
    """Wrap angular differences into (-pi, pi]."""
    m = np.mod(delta, TWO_PI)
    return np.where(m <= math.pi, m, m - TWO_PI)


def add_spiculation(contour: Contour, params: SpiculationParams) -> Contour:
    """Apply one Gaussian radial bump about the current vertex centroid.

    Points are modified in place (no resampling); a bump that would drive
    any radius to zero or below is an error rather than a silent clamp.
    """
    try:
        rho, phi, c = to_polar(contour)
    except ContourError as exc:
        raise SynthesisError("spiculation", str(exc)) from exc
    delta = _wrap_angle(phi - params.center)
    rho2 = rho + params.height * np.exp(-((delta / params.width) ** 2))
    bad = np.nonzero(rho2 <= 0)[0]
    if bad.size:
        raise SynthesisError(
            "spiculation",
            f"radius driven to {rho2[bad[0]]:.4g} at point {int(bad[0])}; "
            "reduce the bump height",
        )
    return from_polar(rho2, phi, c)


# ---------------------------------------------------------------------------
# Fourier descriptors

@dataclass(frozen=True, eq=False)
class FourierDescriptors:
    """Complex descriptors f(u) = (1/N) * sum_k (x_k + i y_k) e^{-2 pi i u k / N}.

    f(0) is the vertex centroid; u and N-u form the +/-u frequency pair.
    """

    coefficients: np.ndarray  # (N,) complex128

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.ndim != 1 or c.shape[0] < 3:
            raise ValueError(f"need at least 3 descriptors, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("descriptors contain non-finite values")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def dc(self) -> complex:
        return complex(self.coefficients[0])


def to_fourier(contour: Contour) -> FourierDescriptors:
    """Forward transform; the 1/N normalization sits here, not in the inverse."""
    p = contour.points[:, 0] + 1j * contour.points[:, 1]
    return FourierDescriptors(np.fft.fft(p) / p.shape[0])


def from_fourier(fds: FourierDescriptors, n_points: Optional[int] = None) -> Contour:
    """Inverse transform, optionally resampling to n_points via the signed
    frequencies (u > N/2 reads as u - N; an even-N Nyquist term stays +N/2)."""
    f = fds.coefficients
    n = fds.n
    if n_points is None or n_points == n:
        p = np.fft.ifft(f) * n
    else:
        if n_points < 3:
            raise ValueError(f"n_points must be at least 3, got {n_points}")
        u = np.arange(n)
        u_signed = np.where(u <= n // 2, u, u - n)
        k = np.arange(n_points)
        basis = np.exp(2j * math.pi * np.outer(k, u_signed) / n_points)
        p = basis @ f
    return Contour(np.column_stack((p.real, p.imag)))


def fd_keep_order(n: int) -> np.ndarray:
    """Descriptor indices by ascending |frequency|, +u before -u, DC first."""
    order = [0]
    for u in range(1, n // 2 + 1):
        order.append(u)
        if u != n - u:
            order.append(n - u)
    return np.array(order, dtype=np.int64)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def fd_counts(n: int, params: FdParams):
    """(D, R): descriptors kept and perturbed for an n-point contour.

    D = round(detail * n), error below 3 (a two-descriptor shape carries no
    geometry worth synthesizing); R = round(range * n) clamped to [0, D-1]
    so the DC term is never perturbed.
    """
    d = max(1, _round_half_up(params.detail * n))
    if d < 3:
        raise SynthesisError(
            "fourier",
            f"detail {params.detail} keeps only {d} of {n} descriptors; need at least 3",
        )
    r = min(max(_round_half_up(params.range * n), 0), d - 1)
    return d, r


def _modify_fd_detailed(fds: FourierDescriptors, params: FdParams, rng: SeededRng):
    n = fds.n
    d, r = fd_counts(n, params)
    order = fd_keep_order(n)
    kept = order[:d]
    out = np.zeros(n, dtype=np.complex128)
    out[kept] = fds.coefficients[kept]
    # perturb the R highest-|frequency| kept descriptors, in keep order;
    # draws r then s per descriptor, consumed whenever R > 0 so the draw
    # count depends only on (n, detail, range), not on magnitude
    perturbations = []
    for idx in kept[d - r:] if r > 0 else []:
        dr = rng.uniform(-0.5, 0.5)
        ds = rng.uniform(-0.5, 0.5)
        out[idx] += complex(dr * params.magnitude, ds * params.magnitude)
        u_signed = int(idx) if idx <= n // 2 else int(idx) - n
        perturbations.append({"index": int(idx), "u": u_signed, "r": dr, "s": ds})
    return FourierDescriptors(out), d, r, perturbations


def modify_fd(fds: FourierDescriptors, params: FdParams, rng: SeededRng) -> FourierDescriptors:
    """Zero all but the D lowest-|frequency| descriptors, then jitter the R
    highest kept ones: alpha' = alpha + r*m, beta' = beta + s*m with
    r, s ~ U(-0.5, 0.5). The DC term is always kept and never jittered."""
    out, _, _, _ = _modify_fd_detailed(fds, params, rng)
    return out


# ---------------------------------------------------------------------------
# affine

def affine_transform(contour: Contour, params: AffineParams) -> Contour:
    """Scale about the vertex centroid, rotate about it, then translate."""
    c = centroid(contour)
    pts = contour.points - (c.x, c.y)
    pts = pts * (params.resize_x, params.resize_y)
    if params.rotate != 0.0:
        cos, sin = math.cos(params.rotate), math.sin(params.rotate)
        pts = pts @ np.array([[cos, sin], [-sin, cos]])  # row-vector rotation
    pts = pts + (c.x + params.shift_dx, c.y + params.shift_dy)
    return Contour(pts)


# ---------------------------------------------------------------------------
# pipeline

class SynthesisResult(NamedTuple):
    mask: BinaryMask
    contour: Contour
    provenance: dict


def apply_pipeline(
    contour: Contour,
    fd_params: Optional[FdParams],
    spiculations: Sequence[SpiculationParams],
    affine: Optional[AffineParams],
    rng: Optional[SeededRng] = None,
    stage_order: Sequence[str] = DEFAULT_STAGE_ORDER,
) -> Contour:
    """Run the explicit-parameter pipeline over a contour.

    fd_params needs an rng when its range keeps any descriptor jittered;
    spiculation bumps apply sequentially, each about the then-current
    centroid.
    """
    if sorted(stage_order) != sorted(DEFAULT_STAGE_ORDER):
        raise ValueError(f"stage_order must permute {DEFAULT_STAGE_ORDER}, got {stage_order}")
    for stage in stage_order:
        if stage == "fourier" and fd_params is not None:
            if rng is None:
                raise ValueError("fourier stage needs an rng")
            fds = to_fourier(contour)
            contour = from_fourier(modify_fd(fds, fd_params, rng))
        elif stage == "spiculation":
            for sp in spiculations:
                contour = add_spiculation(contour, sp)
        elif stage == "affine" and affine is not None:
            contour = affine_transform(contour, affine)
    return contour


def synthesize(
    truth: BinaryMask,
    config: SegmentorConfig,
    seed: int,
    stage_order: Sequence[str] = DEFAULT_STAGE_ORDER,
) -> SynthesisResult:
    """Produce one synthetic segmentation of a ground-truth mask.

    Deterministic in (truth, config, seed, stage_order). Draw order is fixed
    and follows the stage order; within a stage:

      fourier      r, s per perturbed descriptor in keep order
      spiculation  bump count, then per bump: center, height, width
                   (mixture height: magnitude, then sign coin)
      affine       shift direction, then shift length (only when the
                   config's shift interval is non-degenerate)

    Every drawn value lands in the provenance record.
    """
    if sorted(stage_order) != sorted(DEFAULT_STAGE_ORDER):
        raise ValueError(f"stage_order must permute {DEFAULT_STAGE_ORDER}, got {stage_order}")
    rng = SeededRng(seed)
    contour = extract_contour(truth)
    provenance = {
        "seed": int(seed),
        "segmentor": config.id,
        "rng": SeededRng.algorithm,
        "stage_order": list(stage_order),
        "config": config.to_dict(),
        "n_points": contour.n_points,
    }

    for stage in stage_order:
        if stage == "fourier":
            fds = to_fourier(contour)
            new_fds, d, r, perturbations = _modify_fd_detailed(fds, config.fd, rng)
            contour = from_fourier(new_fds)
            provenance["fourier"] = {
                "detail_count": d, "range_count": r, "perturbations": perturbations,
            }
        elif stage == "spiculation":
            drawn = []
            if config.spiculation is not None:
                spec = config.spiculation
                k = rng.integers(spec.count[0], spec.count[1])
                for _ in range(k):
                    center_deg = rng.uniform(0.0, 360.0)
                    magnitude = rng.uniform(spec.height[0], spec.height[1])
                    if spec.mode == "outward":
                        h = magnitude
                    elif spec.mode == "inward":
                        h = -magnitude
                    else:  # mixture: fair coin picks the side
                        h = magnitude if rng.coin() == 0 else -magnitude
                    width_deg = rng.uniform(spec.width_deg[0], spec.width_deg[1])
                    contour = add_spiculation(contour, SpiculationParams(
                        center=math.radians(center_deg),
                        height=h,
                        width=math.radians(width_deg),
                    ))
                    drawn.append({"center_deg": center_deg, "height": h,
                                  "width_deg": width_deg})
            provenance["spiculation"] = drawn
        elif stage == "affine":
            dx = dy = 0.0
            direction = length = None
            if config.shift[1] > 0:
                direction = rng.uniform(0.0, TWO_PI)
                length = rng.uniform(config.shift[0], config.shift[1])
                dx = length * math.cos(direction)
                dy = length * math.sin(direction)
            params = AffineParams(
                resize_x=config.resize[0], resize_y=config.resize[1],
                rotate=config.rotate, shift_dx=dx, shift_dy=dy,
            )
            contour = affine_transform(contour, params)
            provenance["affine"] = {
                "resize": list(config.resize), "rotate": config.rotate,
                "shift": [dx, dy], "shift_direction": direction,
                "shift_length": length,
            }

    try:
        mask = rasterize(contour, truth.width, truth.height)
    except RasterError as exc:
        raise SynthesisError("rasterize", str(exc)) from exc
    return SynthesisResult(mask, contour, provenance)
