"""Spectral distances and metric-based vector gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError

__all__ = [
    "SpectralTableStats",
    "table_stats",
    "spectral_distance",
    "vector_gradient",
    "normalize",
    "probabilistic_gradient",
]


@dataclass(frozen=True)
class SpectralTableStats:
    channel_sums: np.ndarray  # f_.j, shape (L,)
    pixel_sums: np.ndarray  # f_i., shape (H, W)
    grand_total: float


def _cube(img):
    data = getattr(img, "data", None)
    if data is None:
        data = getattr(img, "coords", img)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3:
        raise DataError("expected an (L, H, W) vector image")
    return data


def table_stats(img) -> SpectralTableStats:
    """Channel, pixel and grand sums over the whole raster."""
    data = _cube(img)
    return SpectralTableStats(data.sum(axis=(1, 2)), data.sum(axis=0), float(data.sum()))


def spectral_distance(kind: str, x, y, img, stats: SpectralTableStats | None = None) -> float:
    """Euclidean or chi-squared distance between the spectra at pixels ``x``, ``y``.

    ``x`` and ``y`` are ``(row, col)`` pairs.
    """
    data = _cube(img)
    fx = data[:, x[0], x[1]]
    fy = data[:, y[0], y[1]]
    if kind == "euclidean":
        return float(np.sqrt(((fx - fy) ** 2).sum()))
    if kind != "chi2":
        raise ConfigError(f"unknown distance {kind!r}")
    if stats is None:
        stats = table_stats(data)
    for p, f in ((x, fx), (y, fy)):
        if f.sum() <= 0:
            raise DataError(f"pixel {tuple(p)} has a zero spectrum sum")
    weights = stats.grand_total / stats.channel_sums
    diff = fx / fx.sum() - fy / fy.sum()
    return float(np.sqrt((weights * diff ** 2).sum()))


def _neighbour_distances(data, kind, eps=0.0):
    """Distances from every pixel to its 8 neighbours; NaN off the raster."""
    L, h, w = data.shape
    if kind == "chi2":
        if eps:
            data = data + eps
        sums = data.sum(axis=0)
        if np.any(sums <= 0):
            i, j = np.argwhere(sums <= 0)[0]
            raise DataError(
                f"pixel ({i}, {j}) has a zero spectrum sum; chi-squared profile "
                "undefined (use a small eps to offset the data)"
            )
        col = data.sum(axis=(1, 2))
        feat = data / sums * np.sqrt(data.sum() / col)[:, None, None]
    elif kind == "euclidean":
        feat = data
    else:
        raise ConfigError(f"unknown distance {kind!r}")
    out = np.full((8, h, w), np.nan)
    k = 0
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            src = feat[:, max(di, 0):h + min(di, 0), max(dj, 0):w + min(dj, 0)]
            dst = feat[:, max(-di, 0):h + min(-di, 0), max(-dj, 0):w + min(-dj, 0)]
            d = np.sqrt(((src - dst) ** 2).sum(axis=0))
            out[k, max(-di, 0):h + min(-di, 0), max(-dj, 0):w + min(-dj, 0)] = d
            k += 1
    return out


def normalize(field) -> np.ndarray:
    """Min-max rescale to ``[0, 1]``; a constant field maps to zeros."""
    f = np.asarray(field, dtype=np.float64)
    lo, hi = f.min(), f.max()
    if not hi > lo:
        return np.zeros_like(f)
    return (f - lo) / (hi - lo)


def vector_gradient(img, kind: str = "chi2", eps: float = 0.0) -> np.ndarray:
    """Sup minus inf of the distances to the 8 neighbours, normalized to [0, 1].

    Use ``"chi2"`` on raw multispectral data and ``"euclidean"`` on factor
    coordinates. ``eps`` offsets every sample before chi-squared profiles are
    formed and is the only remedy for all-zero pixels.
    """
    data = _cube(img)
    d = _neighbour_distances(data, kind, eps)
    if data.shape[1] * data.shape[2] == 1:
        return np.zeros(data.shape[1:])
    grad = np.nanmax(d, axis=0) - np.nanmin(d, axis=0)
    return normalize(grad)


def probabilistic_gradient(mpdf, grad) -> np.ndarray:
    """Normalized sum of a contour pdf and a gradient, rescaled to [0, 1]."""
    mpdf = np.asarray(mpdf, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if mpdf.shape != grad.shape:
        raise DataError(f"shape mismatch: {mpdf.shape} vs {grad.shape}")
    return normalize(normalize(mpdf) + normalize(grad))
