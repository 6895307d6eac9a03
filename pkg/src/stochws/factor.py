"""Correspondence analysis of multiband images and spatial axis selection.

The pixel x channel table is decomposed through the standardized residuals
``(p_ij - r_i c_j) / sqrt(r_i c_j)``. Row coordinates are scaled so that
Euclidean distances between pixels in the full factor space equal the
chi-squared distances between their spectral profiles.

Axis numbers in this module are 1-based (axis 1 carries the most inertia).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .exceptions import DataError, DegenerateError
from .morphology import opening, square
from .raster import MultispectralImage

__all__ = [
    "FactorImage",
    "AxisDiagnostics",
    "fca_fit_transform",
    "fca_reconstruct",
    "spatial_covariance",
    "covariance_origin",
    "axis_snr",
    "axis_diagnostics",
    "select_axes",
]


@dataclass(frozen=True)
class FactorImage:
    """Pixel factors on the first ``K`` axes plus the full decomposition.

    Attributes
    ----------
    coords : ndarray, shape (K, H, W)
        Factor coordinates, axis ``k`` at ``coords[k - 1]``.
    eigenvalues : ndarray, shape (K,)
        Principal inertias, non-increasing.
    inertias : ndarray, shape (K,)
        ``eigenvalues / total_inertia``.
    total_inertia : float
        Chi-squared statistic of the table divided by its grand total.
    retained : tuple of int
        Axes kept after SNR screening (empty until set by the caller).
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    inertias: np.ndarray
    total_inertia: float
    row_mass: np.ndarray = field(repr=False)
    col_mass: np.ndarray = field(repr=False)
    grand_total: float = field(repr=False)
    left: np.ndarray = field(repr=False)  # (P, L-1) singular vectors
    singular: np.ndarray = field(repr=False)  # (L-1,)
    right: np.ndarray = field(repr=False)  # (L, L-1)
    retained: tuple[int, ...] = ()

    @property
    def n_axes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_computed(self) -> int:
        return self.singular.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.coords.shape[1], self.coords.shape[2]

    def axis(self, k: int) -> np.ndarray:
        return self.coords[k - 1]

    def full_coords(self) -> np.ndarray:
        """Coordinates on every computed axis, shape ``(P, n_computed)``."""
        return self.left * self.singular / np.sqrt(self.row_mass)[:, None]

    def with_retained(self, axes: Sequence[int]) -> "FactorImage":
        return replace(self, retained=tuple(int(a) for a in axes))

    def retained_coords(self) -> np.ndarray:
        """``(len(retained), H, W)`` planes of the retained axes."""
        axes = self.retained or tuple(range(1, self.n_axes + 1))
        return np.stack([self.axis(k) for k in axes])

    def retained_weights(self) -> np.ndarray:
        """Inertia weights of the retained axes renormalized to sum to 1."""
        axes = self.retained or tuple(range(1, self.n_axes + 1))
        w = np.array([self.inertias[k - 1] for k in axes], dtype=np.float64)
        s = w.sum()
        return w / s if s > 0 else np.full(len(axes), 1.0 / len(axes))

    def save(self, path) -> None:
        np.savez(
            path, coords=self.coords, eigenvalues=self.eigenvalues,
            inertias=self.inertias, total_inertia=self.total_inertia,
            row_mass=self.row_mass, col_mass=self.col_mass,
            grand_total=self.grand_total, left=self.left,
            singular=self.singular, right=self.right,
            retained=np.array(self.retained, dtype=np.int64),
        )

    @classmethod
    def load(cls, path) -> "FactorImage":
        try:
            with np.load(path) as z:
                return cls(
                    coords=z["coords"], eigenvalues=z["eigenvalues"],
                    inertias=z["inertias"], total_inertia=float(z["total_inertia"]),
                    row_mass=z["row_mass"], col_mass=z["col_mass"],
                    grand_total=float(z["grand_total"]), left=z["left"],
                    singular=z["singular"], right=z["right"],
                    retained=tuple(int(a) for a in z["retained"]),
                )
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot load factor image {path}: {exc}") from exc


def fca_fit_transform(img: MultispectralImage, K: int | None = None) -> FactorImage:
    """Correspondence analysis of the image's pixel x channel table.

    Parameters
    ----------
    img : MultispectralImage
        Non-negative image with no all-zero pixel and no all-zero channel.
    K : int, optional
        Number of axes to expose in ``coords``. Defaults to ``L - 1``; larger
        requests are clamped with a warning.

    Returns
    -------
    FactorImage
    """
    X = img.table()
    P, L = X.shape
    if L < 2:
        raise DataError("correspondence analysis needs at least two channels")
    n = X.sum()
    if n <= 0:
        raise DataError("table total is zero")
    row = X.sum(axis=1)
    col = X.sum(axis=0)
    if np.any(col <= 0):
        j = int(np.flatnonzero(col <= 0)[0])
        raise DataError(f"channel {j} ({img.channel_names[j]!r}) sums to zero")
    if np.any(row <= 0):
        p = int(np.flatnonzero(row <= 0)[0])
        raise DataError(f"pixel (row={p // img.width}, col={p % img.width}) sums to zero")

    r = row / n
    c = col / n
    expected = np.outer(r, c)
    S = (X / n - expected) / np.sqrt(expected)
    U, s, Vt = np.linalg.svd(S, full_matrices=False)
    n_axes = min(L, P) - 1
    n_axes = max(n_axes, 0)
    U, s, V = U[:, :n_axes], s[:n_axes], Vt[:n_axes].T

    # orient each axis so its largest-magnitude channel loading is positive
    for k in range(n_axes):
        if V[np.argmax(np.abs(V[:, k])), k] < 0:
            V[:, k] *= -1
            U[:, k] *= -1

    eig = s ** 2
    total = float((S ** 2).sum())
    if K is None:
        K = n_axes
    if K > n_axes:
        warnings.warn(f"K={K} exceeds the {n_axes} available axes; clamped", stacklevel=2)
        K = n_axes
    coords_flat = U[:, :K] * s[:K] / np.sqrt(r)[:, None]
    coords = coords_flat.T.reshape(K, img.height, img.width)
    inertias = eig / total if total > 0 else np.zeros_like(eig)
    return FactorImage(
        coords=coords, eigenvalues=eig[:K], inertias=inertias[:K],
        total_inertia=total, row_mass=r, col_mass=c, grand_total=float(n),
        left=U, singular=s, right=V,
    )


def fca_reconstruct(factors: FactorImage, axes: Sequence[int]) -> MultispectralImage:
    """Rebuild the image from the independence model plus the given axes.

    Truncated reconstructions can dip below zero; such cells are clipped to 0.
    """
    axes = sorted({int(a) for a in axes})
    for a in axes:
        if not 1 <= a <= factors.n_computed:
            raise DataError(f"unknown axis {a} (have 1..{factors.n_computed})")
    r, c = factors.row_mass, factors.col_mass
    P = np.outer(r, c)
    if axes:
        idx = np.array(axes) - 1
        low = (factors.left[:, idx] * factors.singular[idx]) @ factors.right[:, idx].T
        P = P + np.sqrt(r)[:, None] * low * np.sqrt(c)[None, :]
    X = P * factors.grand_total
    h, w = factors.shape
    X = np.clip(X, 0.0, None)
    return MultispectralImage(X.T.reshape(-1, h, w))


# --------------------------------------------------------------------------
# spatial covariance and SNR


def covariance_origin(shape) -> tuple[int, int]:
    """Index of lag ``(0, 0)`` in the centred covariance raster."""
    return shape[0] // 2, shape[1] // 2


def spatial_covariance(plane) -> np.ndarray:
    """Circular centred covariance ``E[c(x) c(x + h)]`` via a 2-D FFT.

    The result is ``fftshift``-ed: lag ``(0, 0)`` sits at
    :func:`covariance_origin` (``(H // 2, W // 2)``).
    """
    c = np.asarray(plane, dtype=np.float64)
    if c.ndim != 2 or c.size == 0:
        raise DataError("expected a non-empty 2-D plane")
    c = c - c.mean()
    F = np.fft.fft2(c)
    g = np.fft.ifft2(F * np.conj(F)).real / c.size
    return np.fft.fftshift(g)


@dataclass(frozen=True)
class AxisDiagnostics:
    axis: int
    covariance: np.ndarray = field(repr=False)
    var_signal: float
    var_noise: float
    snr: float  # inf when the noise residue vanishes, nan for a flat plane
    inertia: float = float("nan")

    @property
    def degenerate(self) -> bool:
        return math.isnan(self.snr)


_NOISE_TOL = 1e-12


def axis_snr(plane, axis: int = 0, inertia: float = float("nan")) -> AxisDiagnostics:
    """Signal/noise split of a factor plane from its opened covariance.

    The covariance peak at the origin holds signal plus noise variance; an
    opening with the 3x3 square removes the narrow noise spike, so the opened
    value at the origin estimates the signal variance.
    """
    g = spatial_covariance(plane)
    o = covariance_origin(g.shape)
    g0 = float(g[o])
    if not g0 > 0:
        return AxisDiagnostics(axis, g, 0.0, 0.0, float("nan"), inertia)
    # a pure-noise plane can open to a slightly negative origin value
    signal = max(float(opening(g, square(3))[o]), 0.0)
    noise = g0 - signal
    if noise <= _NOISE_TOL * g0:
        noise = 0.0
        signal = g0
        snr = float("inf")
    else:
        snr = signal / noise
    return AxisDiagnostics(axis, g, signal, noise, snr, inertia)


def axis_diagnostics(factors: FactorImage) -> list[AxisDiagnostics]:
    return [
        axis_snr(factors.axis(k), k, float(factors.inertias[k - 1]))
        for k in range(1, factors.n_axes + 1)
    ]


def select_axes(snrs, threshold: float = 1.0) -> list[int]:
    """Axes (1-based, in inertia order) whose SNR reaches ``threshold``.

    ``snrs`` may be a :class:`FactorImage`, a list of
    :class:`AxisDiagnostics` or plain SNR values for axes ``1..K``.
    Flat planes (NaN SNR) are always rejected; infinite SNR is kept.
    """
    if isinstance(snrs, FactorImage):
        snrs = axis_diagnostics(snrs)
    values = [d.snr if isinstance(d, AxisDiagnostics) else float(d) for d in snrs]
    kept = [k for k, v in enumerate(values, start=1) if not math.isnan(v) and v >= threshold]
    if not kept:
        raise DegenerateError(
            f"no factor axis reaches SNR >= {threshold}; lower the threshold "
            "or inspect the axis diagnostics"
        )
    return kept
