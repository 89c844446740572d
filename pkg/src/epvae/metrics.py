"""Desk-scale evaluation: reconstruction SSE and a pixel-space MMD sample-quality proxy.

The MMD number is a proxy for sample quality only; it is not comparable to FID.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .chn import NumericalDivergenceError


def eval_reconstruction(reconstruct, images):
    """Mean over images of 1/2 |x_hat - x|^2.

    ``reconstruct`` maps a batch of images to reconstructions. Images whose
    settling diverges are skipped; returns ``(mean_sse, n_skipped)``.
    """
    images = np.atleast_2d(np.asarray(images, dtype=np.float64))
    try:
        x_hat = reconstruct(images)
        keep = np.ones(len(images), dtype=bool)
    except NumericalDivergenceError:
        # fall back to one image at a time to isolate the failures
        x_hat = np.zeros_like(images)
        keep = np.zeros(len(images), dtype=bool)
        for i, x in enumerate(images):
            try:
                x_hat[i] = reconstruct(x[None])[0]
                keep[i] = True
            except NumericalDivergenceError:
                pass
    d = x_hat[keep] - images[keep]
    per_image = 0.5 * np.sum(d * d, axis=1)
    mean = math.fsum(per_image) / len(per_image) if len(per_image) else float("nan")
    return mean, int((~keep).sum())


def median_bandwidth(a, b):
    """Median pairwise Euclidean distance over the pooled samples."""
    z = np.concatenate([np.atleast_2d(a), np.atleast_2d(b)])
    return float(np.median(pdist(z)))


def pixel_mmd(samples_a, samples_b, bandwidth=None) -> float:
    """Unbiased MMD^2 with kernel exp(-|x - y|^2 / (2 bw^2)).

    ``bandwidth=None`` uses :func:`median_bandwidth`. Sums are exactly rounded,
    so the value does not depend on sample order or argument order.
    """
    a = np.atleast_2d(np.asarray(samples_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(samples_b, dtype=np.float64))
    m, n = len(a), len(b)
    if m < 2 or n < 2:
        raise ValueError("each sample set needs at least two points")
    bw = median_bandwidth(a, b) if bandwidth is None else float(bandwidth)
    if bw <= 0:
        raise ValueError("bandwidth must be positive")

    def k(x, y):
        return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * bw * bw))

    kaa, kbb, kab = k(a, a), k(b, b), k(a, b)
    saa = math.fsum(kaa[~np.eye(m, dtype=bool)]) / (m * (m - 1))
    sbb = math.fsum(kbb[~np.eye(n, dtype=bool)]) / (n * (n - 1))
    sab = math.fsum(kab.ravel()) / (m * n)
    return math.fsum([saa, sbb, -2.0 * sab])
