"""Marker-controlled and volume-hierarchical watersheds with explicit lines.

Flooding is 8-connected and driven by a priority queue ordered by
``(level, insertion order)``; a pixel reached by two different labels becomes
a watershed-line pixel (label 0). Levels are the raw real-valued relief.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import ConfigError, DataError
from .morphology import reconstruct

__all__ = [
    "Segmentation",
    "MinimaTree",
    "regional_minima",
    "impose_minima",
    "marker_components",
    "marker_watershed",
    "volume_extinctions",
    "hierarchical_volume_ws",
]


@dataclass(frozen=True)
class Segmentation:
    """Regions ``1..R`` with ``0`` on the one-pixel watershed lines."""

    regions: np.ndarray

    @property
    def contours(self) -> np.ndarray:
        return self.regions == 0

    @property
    def region_count(self) -> int:
        return int(self.regions.max()) if self.regions.size else 0


@dataclass(frozen=True)
class MinimaTree:
    """Regional minima and their volume extinction values.

    Index ``m - 1`` of each array refers to minimum label ``m``. The survivor
    has infinite extinction, NaN merge level and absorber 0.
    """

    minima: np.ndarray
    extinction: np.ndarray
    merge_level: np.ndarray
    absorbed_by: np.ndarray

    @property
    def n_minima(self) -> int:
        return len(self.extinction)

    def ranking(self) -> np.ndarray:
        """Minimum labels sorted by decreasing extinction, ties to lower label."""
        labels = np.arange(1, self.n_minima + 1)
        return labels[np.lexsort((labels, -self.extinction))]


def _relief(relief):
    f = np.asarray(relief, dtype=np.float64)
    if f.ndim != 2:
        raise DataError("relief must be a 2-D raster")
    if not np.all(np.isfinite(f)):
        raise DataError("relief contains non-finite values")
    return f


def regional_minima(relief) -> np.ndarray:
    """Label the 8-connected plateaus that have no lower neighbour."""
    labels, _ = _kernels.regional_minima(_relief(relief))
    return labels


def marker_components(markers) -> np.ndarray:
    """Split every marker label into its 8-connected components, 1..n.

    Components are numbered in raster order of their first pixel, so adjacent
    markers with different labels stay distinct.
    """
    markers = np.asarray(markers)
    if markers.dtype.kind not in "biu":
        raise DataError("markers must be a boolean or integer raster")
    return _kernels.equal_components(markers.astype(np.int64))[0]


def impose_minima(relief, markers) -> np.ndarray:
    """Homotopy modification: the marker components become the only minima.

    Marker pixels are set one below the global minimum and the remaining
    relief is rebuilt by reconstruction by erosion.
    """
    f = _relief(relief)
    m = np.asarray(markers) > 0
    if m.shape != f.shape:
        raise DataError("relief and markers differ in shape")
    if not m.any():
        raise DataError("empty marker set")
    low = f.min() - 1.0
    high = f.max() + 1.0
    marker = np.where(m, low, high)
    mask = np.where(m, low, f)
    return reconstruct(marker, mask, "by_erosion")


def marker_watershed(relief, markers) -> Segmentation:
    """Flood ``relief`` from the marker components.

    The markers seed the flood directly; no minima imposition pass is run.
    Every non-marker pixel is reached at ``max(relief, current level)``.
    """
    f = _relief(relief)
    comps = marker_components(markers)
    if comps.shape != f.shape:
        raise DataError("relief and markers differ in shape")
    if comps.max(initial=0) == 0:
        raise DataError("empty marker set")
    return Segmentation(_kernels.flood(f, comps))


def volume_extinctions(relief) -> MinimaTree:
    """Volume extinction value of every regional minimum.

    The relief is flooded from all minima at once. When basins meet at
    level ``v`` the one with the smaller volume ``sum(v - f(p))`` dies and
    records that volume; ties keep the lower minimum label alive.
    """
    f = _relief(relief)
    minima, n = _kernels.regional_minima(f)
    ext, level, absorber = _kernels.volume_extinction(f, minima, n)
    return MinimaTree(minima, ext[1:], level[1:], absorber[1:])


def hierarchical_volume_ws(relief, R: int) -> Segmentation:
    """Watershed from the ``R`` minima with the largest volume extinction."""
    f = _relief(relief)
    tree = volume_extinctions(f)
    if R < 1:
        raise ConfigError("R must be >= 1")
    if R > tree.n_minima:
        raise ConfigError(f"R={R} exceeds the {tree.n_minima} regional minima")
    keep = np.zeros(tree.n_minima + 1, dtype=bool)
    keep[tree.ranking()[:R]] = True
    markers = np.where(keep[tree.minima], tree.minima, 0)
    return marker_watershed(f, markers)
