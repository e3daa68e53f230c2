"""Shared mask factories for the test suite."""
import numpy as np

from segsynth.mask_io import BinaryMask


def block(h, w, rows, cols) -> BinaryMask:
    """Rectangular block; rows and cols are half-open (start, stop) spans."""
    px = np.zeros((h, w), dtype=bool)
    px[rows[0]:rows[1], cols[0]:cols[1]] = True
    return BinaryMask(px)


def disc(h, w, cy, cx, r) -> BinaryMask:
    yy, xx = np.mgrid[0:h, 0:w]
    return BinaryMask((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)


def ellipse(h, w, cy, cx, ry, rx) -> BinaryMask:
    yy, xx = np.mgrid[0:h, 0:w]
    return BinaryMask((yy - cy) ** 2 / ry ** 2 + (xx - cx) ** 2 / rx ** 2 <= 1.0)


def star_blob(rng, h=64, w=64, base=None, wobble=0.35) -> BinaryMask:
    """Random star-shaped blob: a disc whose radius waves with the angle.

    Star-shaped about its center, so the result is simply connected.
    """
    cy = h / 2 + rng.uniform(-h * 0.04, h * 0.04)
    cx = w / 2 + rng.uniform(-w * 0.04, w * 0.04)
    if base is None:
        base = min(h, w) * 0.28
    yy, xx = np.mgrid[0:h, 0:w]
    theta = np.arctan2(yy - cy, xx - cx)
    rad = np.full(theta.shape, float(base))
    for k in (2, 3, 5):
        amp = rng.uniform(0.0, wobble / 3.0) * base
        rad += amp * np.cos(k * theta + rng.uniform(0.0, 2.0 * np.pi))
    return BinaryMask(np.hypot(yy - cy, xx - cx) <= rad)


def overlapping_pair(rng, h=48, w=48):
    """Random (truth, pred) disc pair guaranteed to have tp, fp and fn."""
    for _ in range(200):
        r = rng.uniform(6.0, min(h, w) * 0.24)
        cy = rng.uniform(h * 0.38, h * 0.62)
        cx = rng.uniform(w * 0.38, w * 0.62)
        truth = disc(h, w, cy, cx, r)
        pred = disc(h, w,
                    cy + rng.uniform(-0.6, 0.6) * r,
                    cx + rng.uniform(-0.6, 0.6) * r,
                    r * rng.uniform(0.75, 1.25))
        t, p = truth.pixels, pred.pixels
        if (t & p).any() and (t & ~p).any() and (~t & p).any():
            return truth, pred
    raise AssertionError("could not build an overlapping pair")


def half_overlap_4x4():
    """truth = left half, pred = top half; tp = fp = fn = tn = 4."""
    return block(4, 4, (0, 4), (0, 2)), block(4, 4, (0, 2), (0, 4))


def shifted_columns_4x4():
    """truth = columns 0..1, pred = columns 1..2; the docs worked example."""
    return block(4, 4, (0, 4), (0, 2)), block(4, 4, (0, 4), (1, 3))
