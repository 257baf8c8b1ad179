"""Procedural test scenes with exact ground truth.

:func:`layered_stereo` renders fronto-parallel textured layers at integer
disparities.  The second view is the reference (ground truth is given on it)
and satisfies ``I2[k, l] = I1[k, l + d(k, l)]`` wherever the point is
visible in both views, which matches the nonnegative disparity convention of
the stereo label space.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import GroundTruth, ImagePair


def texture(shape, rng, smooth=1.5, contrast=1.0) -> np.ndarray:
    """Band-limited random texture scaled to roughly [0, 255]."""
    t = gaussian_filter(rng.standard_normal(shape), smooth)
    t = (t - t.mean()) / (t.std() + 1e-12)
    return np.clip(128 + 45 * contrast * t, 0, 255)


def layered_stereo(shape=(48, 64), disparities=(2, 5, 8), seed=0, smooth=1.5, noise=0.0,
                   n_layers=None) -> ImagePair:
    """Stereo pair of a background plus rectangular foreground layers.

    ``disparities[0]`` is the background; every further entry is a
    rectangle drawn nearer (larger disparities should come later).
    """
    rng = np.random.default_rng(seed)
    n1, n2 = shape
    dmax = max(disparities)
    width = n2 + dmax
    # textures live in reference coordinates, extended to the right so the
    # other view never reads outside a layer
    layers = [(disparities[0], np.ones((n1, width), bool), texture((n1, width), rng, smooth))]
    for d in disparities[1 : n_layers]:
        h = rng.integers(n1 // 4, n1 // 2 + 1)
        w = rng.integers(n2 // 5, n2 // 3 + 1)
        r0 = rng.integers(0, n1 - h + 1)
        c0 = rng.integers(0, n2 - w + 1)
        mask = np.zeros((n1, width), bool)
        mask[r0 : r0 + h, c0 : c0 + w] = True
        layers.append((d, mask, texture((n1, width), rng, smooth, contrast=1.2)))

    ref = np.zeros((n1, n2))
    disp = np.zeros((n1, n2))
    other = np.zeros((n1, n2))
    cols = np.arange(n2)
    for d, mask, tex in layers:  # far to near: nearer layers overwrite
        m = mask[:, :n2]
        ref[m] = tex[:, :n2][m]
        disp[m] = d
        # reference column l shows up at column l + d of the other view
        src = cols - d
        ok = src >= 0
        vis = mask[:, src[ok]]
        block = other[:, ok]
        block[vis] = tex[:, src[ok]][vis]
        other[:, ok] = block
    # columns of the other view left uncovered by every layer
    uncovered = np.zeros((n1, n2), bool)
    uncovered[:, : disparities[0]] = True
    other[uncovered] = layers[0][2][:, : n2][uncovered]
    if noise:
        ref = np.clip(ref + rng.normal(0, noise, shape), 0, 255)
        other = np.clip(other + rng.normal(0, noise, shape), 0, 255)
    gt = GroundTruth(disp, None, None, 1)
    return ImagePair(other, ref, gt, name=f"synthetic-{seed}", stereo=True)


def shifted_pair(shape=(32, 32), shift=2, seed=0, smooth=1.0) -> ImagePair:
    """``I2`` is ``I1`` circularly shifted left by ``shift`` columns."""
    rng = np.random.default_rng(seed)
    i1 = texture(shape, rng, smooth)
    i2 = np.roll(i1, -shift, axis=1)
    gt = GroundTruth(np.full(shape, float(shift)), None, None, 1)
    return ImagePair(i1, i2, gt, name=f"shift-{shift}", stereo=True)


def block_motion_pair(shape=(48, 64), block=4, window=(3, 3), seed=0, smooth=2.0) -> ImagePair:
    """Video-style pair: piecewise-constant block motion inside ``window``."""
    from .core import MotionField
    from .warp import build_warp

    rng = np.random.default_rng(seed)
    i1 = texture(shape, rng, smooth)
    g = MotionField.zeros(shape, window, block).grid_shape
    coarse = (max(1, g[0] // 3), max(1, g[1] // 3))
    mh = rng.integers(-window[0], window[0] + 1, coarse)
    mv = rng.integers(-window[1], window[1] + 1, coarse)
    rep = (-(-g[0] // coarse[0]), -(-g[1] // coarse[1]))
    mh = np.kron(mh, np.ones(rep, dtype=int))[: g[0], : g[1]]
    mv = np.kron(mv, np.ones(rep, dtype=int))[: g[0], : g[1]]
    field = MotionField(mh, mv, shape, window, block)
    i2 = build_warp(field).predict(i1)
    px_h, px_v = field.to_pixels()
    gt = GroundTruth(px_h, px_v, None, 1)
    return ImagePair(i1, i2, gt, name=f"blockflow-{seed}", stereo=False)
