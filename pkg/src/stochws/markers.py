"""Turn a spectral classification into watershed markers.

Each class indicator is eroded (small classes vanish), small holes are
filled by a closing by reconstruction, the transformed indicators are merged
and split into 8-connected components. Whatever no component claims forms
the void class, label 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DegenerateError
from .morphology import (
    StructuringElement,
    closing_by_reconstruction,
    erode,
    label_components,
    square,
)

__all__ = ["TransformedClassification", "class_index", "transform_classification"]


@dataclass(frozen=True)
class TransformedClassification:
    """Connected classes ``1..n`` plus the void class ``0``.

    ``areas[k - 1]`` and ``origin_class[k - 1]`` describe component ``k``.
    """

    labels: np.ndarray
    areas: np.ndarray
    origin_class: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.areas)

    @property
    def void(self) -> np.ndarray:
        return self.labels == 0


def _labels_of(kappa):
    return np.asarray(getattr(kappa, "labels", kappa))


def class_index(kappa, n: int) -> np.ndarray:
    """Indicator of spectral class ``n``."""
    labels = _labels_of(kappa)
    Q = getattr(kappa, "Q", int(labels.max()) if labels.size else 0)
    if not 1 <= n <= Q:
        raise ConfigError(f"unknown class id {n} (classes are 1..{Q})")
    return labels == n


def transform_classification(
    kappa,
    erode_se: StructuringElement | None = None,
    close_marker_se: StructuringElement | None = None,
    S: int = 10,
) -> TransformedClassification:
    """Erode, hole-fill, merge and relabel the classes of ``kappa``.

    Parameters
    ----------
    kappa : Classification or ndarray
        Class labels ``1..Q``.
    erode_se : StructuringElement
        Erosion element, default 5x5 square. Pixels outside the raster count
        as background, so classes recede from the image frame as well.
    close_marker_se : StructuringElement
        Dilation giving the marker of the closing by reconstruction, default
        3x3 square.
    S : int
        Components smaller than ``S`` pixels go to the void class.

    Notes
    -----
    Hole filling can make two transformed classes overlap; lower class ids
    win such pixels.
    """
    erode_se = erode_se or square(5)
    close_marker_se = close_marker_se or square(3)
    labels = _labels_of(kappa)
    Q = getattr(kappa, "Q", int(labels.max()) if labels.size else 0)

    owner = np.zeros(labels.shape, dtype=np.int64)
    for n in range(1, Q + 1):
        h = labels == n
        if not h.any():
            continue
        core = erode(h, erode_se, border=0)
        if not core.any():
            continue
        filled = closing_by_reconstruction(core, close_marker_se)
        owner[(owner == 0) & filled] = n

    comps = []
    for n in range(1, Q + 1):
        lab, count = label_components(owner == n, 8)
        if count == 0:
            continue
        areas = np.bincount(lab.ravel(), minlength=count + 1)
        flat = lab.ravel()
        first = np.full(count + 1, flat.size)
        np.minimum.at(first, flat, np.arange(flat.size))
        for c in range(1, count + 1):
            if areas[c] >= S:
                comps.append((first[c], n, lab == c, areas[c]))

    if not comps:
        raise DegenerateError(
            "transformed classification has no connected class; reduce the "
            "erosion size or the minimal area S"
        )
    comps.sort(key=lambda t: t[0])
    out = np.zeros(labels.shape, dtype=np.int64)
    for k, (_, _, region, _) in enumerate(comps, start=1):
        out[region] = k
    return TransformedClassification(
        labels=out,
        areas=np.array([a for *_, a in comps], dtype=np.int64),
        origin_class=np.array([n for _, n, _, _ in comps], dtype=np.int64),
    )
