"""Binary mask I/O, boundary tracing, and contour rasterization.

Coordinate convention: x = column, y = row, pixel centers at integer
coordinates. Contours are closed rings of sub-pixel points; the last point
connects back to the first implicitly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    ContourError,
    DegenerateContourError,
    EmptyMaskError,
    MaskFormatError,
    RasterError,
)


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Immutable 2-D boolean raster."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise MaskFormatError(f"mask must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != bool:
            px = px.astype(bool)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.pixels.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed ring of sub-pixel points, consecutive points distinct."""

    points: np.ndarray  # (n, 2) float64, columns x, y

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ContourError(f"contour points must be (n, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ContourError(f"contour needs at least 3 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ContourError("contour contains non-finite coordinates")
        # closing edge included: point i compared against point (i+1) mod n
        gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if np.any(gaps < 1e-9):
            raise ContourError("degenerate contour: consecutive points coincide")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        x1, y1 = np.roll(x, -1), np.roll(y, -1)
        return float(0.5 * np.sum(x * y1 - x1 * y))

    def __eq__(self, other):
        if not isinstance(other, Contour):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )


def centroid(contour: Contour) -> Point:
    """Vertex centroid: plain mean of the contour points."""
    m = contour.points.mean(axis=0)
    return Point(float(m[0]), float(m[1]))


# ---------------------------------------------------------------------------
# file I/O

def _image_to_mask(im: Image.Image, threshold: int) -> BinaryMask:
    if im.format not in (None, "PPM", "PNG"):
        raise MaskFormatError(f"unsupported image format {im.format!r}; need PGM (P5) or PNG")
    if im.mode == "1":
        im = im.convert("L")
    if im.mode != "L":
        raise MaskFormatError(
            f"unsupported pixel mode {im.mode!r}; need a single 8-bit grayscale channel"
        )
    if im.width == 0 or im.height == 0:
        raise MaskFormatError("image has a zero dimension")
    arr = np.asarray(im, dtype=np.uint8)
    return BinaryMask(arr > threshold)


def load_mask(path, threshold: int = 0) -> BinaryMask:
    """Read a PGM (binary P5) or single-channel 8-bit PNG as a binary mask.

    Foreground is any pixel with intensity strictly greater than threshold.
    """
    try:
        with Image.open(path) as im:
            im.load()
            return _image_to_mask(im, threshold)
    except MaskFormatError:
        raise
    except Exception as exc:
        raise MaskFormatError(f"cannot read mask {path}: {exc}") from exc


def load_mask_bytes(data: bytes, threshold: int = 0) -> BinaryMask:
    """Same as load_mask but from an in-memory encoded image."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            return _image_to_mask(im, threshold)
    except MaskFormatError:
        raise
    except Exception as exc:
        raise MaskFormatError(f"cannot decode mask bytes: {exc}") from exc


def mask_to_bytes(mask: BinaryMask, fmt: str) -> bytes:
    """Encode a mask; foreground 255, background 0. fmt is 'png' or 'pgm'."""
    fmt = fmt.lower().lstrip(".")
    arr = np.where(mask.pixels, 255, 0).astype(np.uint8)
    im = Image.fromarray(arr, mode="L")
    buf = io.BytesIO()
    if fmt == "pgm":
        im.save(buf, format="PPM")  # mode L writes binary P5
    elif fmt == "png":
        im.save(buf, format="PNG")
    else:
        raise MaskFormatError(f"unsupported output format {fmt!r}; need png or pgm")
    return buf.getvalue()


def save_mask(path, mask: BinaryMask) -> None:
    """Write the mask in the format implied by the file extension."""
    path = str(path)
    fmt = path.rsplit(".", 1)[-1] if "." in path else ""
    data = mask_to_bytes(mask, fmt)
    with open(path, "wb") as fh:
        fh.write(data)


def pad(mask: BinaryMask, border: int) -> BinaryMask:
    """Surround the mask with a background border of the given width."""
    if border < 0:
        raise ValueError("border must be non-negative")
    if border == 0:
        return mask
    return BinaryMask(np.pad(mask.pixels, border, constant_values=False))


# ---------------------------------------------------------------------------
# contour interchange text: one "x,y" pair per line

def contour_to_text(contour: Contour) -> str:
    return "\n".join(f"{float(x)!r},{float(y)!r}" for x, y in contour.points) + "\n"


def contour_from_text(text: str) -> Contour:
    pts = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ContourError(f"line {lineno}: expected 'x,y', got {line!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ContourError(f"line {lineno}: {exc}") from exc
    if len(pts) < 3:
        raise ContourError(f"contour text has {len(pts)} point(s); need at least 3")
    return Contour(np.array(pts, dtype=np.float64))


# ---------------------------------------------------------------------------
# boundary tracing

# Moore neighbourhood in clockwise order starting at north-west, (dy, dx).
_NBRS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _trace_ring(labeled: np.ndarray, label_id: int, start: tuple) -> list:
    """Moore-neighbour boundary walk around one connected pixel component.

    Walks the deterministic successor map on (pixel, scan-start direction)
    states and returns the pixel cycle found at the first repeated state.
    This closes correctly even when the outer boundary passes through a
    pixel more than once (one-pixel-wide spurs, diagonal bridges), where a
    plain stop-at-start-pixel rule would truncate the ring.
    """
    h, w = labeled.shape
    state = (start, 0)
    seen = {state: 0}
    trail = [state]
    while True:
        (py, px), b = state
        nxt = None
        for i in range(8):
            idx = (b + i) % 8
            qy, qx = py + _NBRS[idx][0], px + _NBRS[idx][1]
            if 0 <= qy < h and 0 <= qx < w and labeled[qy, qx] == label_id:
                nxt = ((qy, qx), (idx + 5) % 8)
                break
        if nxt is None:
            return [start]  # isolated pixel
        if nxt in seen:
            return [s[0] for s in trail[seen[nxt]:]]
        seen[nxt] = len(trail)
        trail.append(nxt)
        state = nxt


def _label_components(pixels: np.ndarray):
    """8-connected component labels plus (size, label) list, label order."""
    labeled, n = ndimage.label(pixels, structure=np.ones((3, 3), dtype=bool))
    counts = np.bincount(labeled.ravel(), minlength=n + 1)
    return labeled, [(int(counts[i]), i) for i in range(1, n + 1)]


def _component_starts(labeled: np.ndarray, n_labels: int) -> list:
    """Uppermost-then-leftmost pixel per component, one pass over the frame.

    That pixel is each label's first occurrence in row-major order. Writing
    flat indices in reverse lets the smallest index win, so no per-label
    scan or sort is needed. Entry k-1 belongs to label k.
    """
    flat = labeled.ravel()
    fg = np.flatnonzero(flat)  # ascending
    first = np.zeros(n_labels + 1, dtype=np.int64)
    first[flat[fg[::-1]]] = fg[::-1]
    w = labeled.shape[1]
    return [(int(f) // w, int(f) % w) for f in first[1:]]


def extract_contour(mask: BinaryMask) -> Contour:
    """Trace the outer boundary of the largest foreground component.

    The ring starts at the component's uppermost-then-leftmost pixel and is
    oriented counter-clockwise in image coordinates (positive shoelace area
    over (x, y)). Equal-size components tie-break to the first in raster
    order. Holes are ignored; only the outer boundary is returned.
    """
    if mask.foreground_count == 0:
        raise EmptyMaskError("empty mask: no foreground pixels")
    labeled, comps = _label_components(mask.pixels)
    size, label_id = max(comps, key=lambda c: (c[0], -c[1]))
    if size < 3:
        raise DegenerateContourError(
            f"largest foreground component has {size} pixel(s); need at least 3"
        )
    ring = _trace_ring(labeled, label_id,
                       _component_starts(labeled, len(comps))[label_id - 1])
    pts = np.array([(x, y) for y, x in ring], dtype=np.float64)
    if Contour(pts).signed_area() < 0:
        pts = pts[::-1].copy()
    # rotate so the ring starts at the uppermost-then-leftmost pixel
    first = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])
    return Contour(np.roll(pts, -first, axis=0))


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """Outer-boundary pixel set over all components, as (k, 2) (x, y) ints.

    Components too small to trace contribute their own pixels. Used by the
    boundary-distance metrics; deduplicated, sorted row-major.
    """
    if mask.foreground_count == 0:
        return np.empty((0, 2), dtype=np.int64)
    labeled, comps = _label_components(mask.pixels)
    starts = _component_starts(labeled, len(comps))
    acc = set()
    for size, label_id in comps:
        start = starts[label_id - 1]
        if size == 1:
            acc.add(start)
        else:
            acc.update(_trace_ring(labeled, label_id, start))
    arr = np.array(sorted(acc), dtype=np.int64)  # (y, x) sorted
    return arr[:, ::-1].copy()  # return as (x, y)


# ---------------------------------------------------------------------------
# rasterization

def rasterize(contour: Contour, width: int, height: int) -> BinaryMask:
    """Paint a closed contour into a width x height frame.

    Interior via even-odd scanline fill (edges counted on the half-open
    [ymin, ymax) span, crossing x linearly interpolated, pixel centres at
    integer coordinates); boundary pixels stroked on top so every edge
    leaves pixels. Coordinates are snapped to a 1e-6 grid first: sub-pixel
    inputs are honoured, but transform noise around exact pixel centres
    must not flip scanline crossings. Pixels outside the frame are clipped;
    a fully clipped result raises.
    """
    if width <= 0 or height <= 0:
        raise RasterError(f"frame must be positive, got {width}x{height}")
    pts = np.round(contour.points * 1e6) / 1e6
    x0, y0 = pts[:, 0], pts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)

    # pass 1: collect (row, crossing-x) for every non-horizontal edge
    keep = y0 != y1
    ex0, ey0, ex1, ey1 = x0[keep], y0[keep], x1[keep], y1[keep]
    lo = np.minimum(ey0, ey1)
    hi = np.maximum(ey0, ey1)
    row_lo = np.maximum(np.ceil(lo), 0.0)
    row_hi = np.minimum(np.ceil(hi) - 1.0, float(height - 1))  # [lo, hi) half-open
    counts = np.maximum(row_hi - row_lo + 1.0, 0.0).astype(np.int64)
    grid = np.zeros((height, width), dtype=bool)
    if counts.sum() > 0:
        edge_idx = np.repeat(np.arange(len(counts)), counts)
        offsets = np.arange(counts.sum()) - np.repeat(
            np.concatenate(([0], np.cumsum(counts)[:-1])), counts
        )
        rows = (row_lo[edge_idx] + offsets).astype(np.int64)
        t = (rows - ey0[edge_idx]) / (ey1[edge_idx] - ey0[edge_idx])
        xcross = ex0[edge_idx] + t * (ex1[edge_idx] - ex0[edge_idx])
        order = np.lexsort((xcross, rows))
        rows, xcross = rows[order], xcross[order]
        # pair consecutive crossings within each row (even-odd rule)
        _, starts = np.unique(rows, return_index=True)
        counts_per_row = np.diff(np.concatenate((starts, [len(rows)])))
        # positions within each row group
        pos = np.arange(len(rows)) - np.repeat(starts, counts_per_row)
        is_open = (pos % 2 == 0) & (pos + 1 < np.repeat(counts_per_row, counts_per_row))
        open_idx = np.nonzero(is_open)[0]
        close_idx = open_idx + 1
        a = np.ceil(xcross[open_idx] - 1e-6).astype(np.int64)
        b = np.floor(xcross[close_idx] + 1e-6).astype(np.int64)
        a = np.clip(a, 0, width)  # a == width drops out below
        b = np.clip(b, -1, width - 1)
        span_rows = rows[open_idx]
        valid = a <= b
        if valid.any():
            diff = np.zeros((height, width + 1), dtype=np.int32)
            np.add.at(diff, (span_rows[valid], a[valid]), 1)
            np.add.at(diff, (span_rows[valid], b[valid] + 1), -1)
            grid = np.cumsum(diff, axis=1)[:, :-1] > 0

    # pass 2: stroke the edges so boundary pixels are foreground
    dx, dy = x1 - x0, y1 - y0
    steps = np.maximum(1, np.ceil(np.maximum(np.abs(dx), np.abs(dy)) / 0.5)).astype(np.int64)
    edge_idx = np.repeat(np.arange(len(steps)), steps + 1)
    k = np.arange(len(edge_idx)) - np.repeat(
        np.concatenate(([0], np.cumsum(steps + 1)[:-1])), steps + 1
    )
    t = k / steps[edge_idx]
    sxf = x0[edge_idx] + t * dx[edge_idx]
    syf = y0[edge_idx] + t * dy[edge_idx]
    # a sample exactly on a pixel corner has no nearest pixel; painting either
    # side leaks outside thin or convex shapes, so skip it (vertices excepted:
    # every edge must leave pixels, and unit edges paint their endpoints)
    corner = ((sxf - np.floor(sxf)) == 0.5) & ((syf - np.floor(syf)) == 0.5)
    vertex = (k == 0) | (k == steps[edge_idx])
    sx = np.floor(sxf + 0.5).astype(np.int64)
    sy = np.floor(syf + 0.5).astype(np.int64)
    inside = ((sx >= 0) & (sx < width) & (sy >= 0) & (sy < height)
              & (vertex | ~corner))
    grid[sy[inside], sx[inside]] = True

    if not grid.any():
        raise RasterError("contour rasterized to an empty mask (entirely outside the frame?)")
    return BinaryMask(grid)
