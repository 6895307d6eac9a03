"""Flat grey-level morphology on 2-D rasters.

Borders are handled by restricting the structuring element to the image
domain, which is the same as padding with ``+inf`` for erosions and
``-inf`` for dilations. A finite ``border`` value pads with that constant
instead (binary sets treat the outside as background with ``border=0``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .exceptions import ConfigError, DataError

__all__ = [
    "StructuringElement",
    "square",
    "disk",
    "erode",
    "dilate",
    "opening",
    "closing",
    "flat_morph",
    "reconstruct",
    "closing_by_reconstruction",
    "label_components",
    "area_open",
    "morph_gradient",
]


@dataclass(frozen=True)
class StructuringElement:
    """A flat structuring element given by its integer offsets ``(di, dj)``."""

    offsets: tuple[tuple[int, int], ...]
    descriptor: str = "custom"

    def __post_init__(self):
        offs = tuple(sorted({(int(a), int(b)) for a, b in self.offsets}))
        if not offs:
            raise ConfigError("structuring element must be non-empty")
        object.__setattr__(self, "offsets", offs)

    @property
    def radius(self) -> int:
        return max(max(abs(a), abs(b)) for a, b in self.offsets)

    def footprint(self) -> np.ndarray:
        r = self.radius
        fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        for a, b in self.offsets:
            fp[a + r, b + r] = True
        return fp

    def is_symmetric(self) -> bool:
        return set(self.offsets) == {(-a, -b) for a, b in self.offsets}


def square(n: int = 3) -> StructuringElement:
    """``n x n`` square centred on the origin (``n`` odd)."""
    if n < 1 or n % 2 == 0:
        raise ConfigError("square size must be a positive odd integer")
    r = n // 2
    offs = [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1)]
    return StructuringElement(tuple(offs), f"square{n}")


def disk(r: int) -> StructuringElement:
    """Euclidean disk: offsets with ``di**2 + dj**2 <= r**2``."""
    if r < 0:
        raise ConfigError("radius must be non-negative")
    offs = [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1)
            if a * a + b * b <= r * r]
    return StructuringElement(tuple(offs), f"disk{r}")


_UNIT = square(3)


def _as_float(img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise DataError("expected a 2-D raster")
    return img.astype(np.float64), img.dtype


def _restore(out, dtype):
    if dtype.kind == "b":
        return out > 0.5
    if dtype.kind in "iu":
        return out.astype(dtype)
    return out


def erode(img, se: StructuringElement = _UNIT, border=None):
    """Neighbourhood infimum ``min_{b in B} f(x + b)``."""
    f, dtype = _as_float(img)
    cval = np.inf if border is None else float(border)
    out = ndimage.grey_erosion(f, footprint=se.footprint(), mode="constant", cval=cval)
    return _restore(out, dtype)


def dilate(img, se: StructuringElement = _UNIT, border=None):
    """Neighbourhood supremum ``max_{b in B} f(x - b)``."""
    f, dtype = _as_float(img)
    cval = -np.inf if border is None else float(border)
    out = ndimage.grey_dilation(f, footprint=se.footprint(), mode="constant", cval=cval)
    return _restore(out, dtype)


def opening(img, se: StructuringElement = _UNIT):
    return dilate(erode(img, se), se)


def closing(img, se: StructuringElement = _UNIT):
    return erode(dilate(img, se), se)


_KINDS = {"erode": erode, "dilate": dilate, "open": opening, "close": closing}


def flat_morph(kind: str, img, se: StructuringElement = _UNIT):
    """Dispatch one of ``erode``, ``dilate``, ``open`` or ``close``."""
    try:
        op = _KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown morphological operation {kind!r}") from None
    return op(img, se)


def reconstruct(marker, mask, polarity: str = "by_dilation"):
    """Geodesic reconstruction with the unit 8-connected element.

    ``by_dilation`` needs ``marker <= mask`` and grows the marker under the
    mask; ``by_erosion`` needs ``marker >= mask`` and is its dual.
    """
    m, dtype = _as_float(marker)
    g, _ = _as_float(mask)
    if m.shape != g.shape:
        raise DataError("marker and mask shapes differ")
    if polarity == "by_dilation":
        if np.any(m > g):
            raise DataError("reconstruction by dilation requires marker <= mask")
        out = _kernels.reconstruct_dilation(m, g)
    elif polarity == "by_erosion":
        if np.any(m < g):
            raise DataError("reconstruction by erosion requires marker >= mask")
        out = -_kernels.reconstruct_dilation(-m, -g)
    else:
        raise ConfigError(f"unknown polarity {polarity!r}")
    return _restore(out, dtype)


def closing_by_reconstruction(img, se: StructuringElement = _UNIT):
    """Reconstruction by erosion of ``dilate(img, se)`` above ``img``."""
    return reconstruct(dilate(img, se), img, "by_erosion")


def _structure(connectivity):
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ConfigError("connectivity must be 4 or 8")


def label_components(mask, connectivity: int = 8):
    """Label connected components ``1..n`` in raster order of first pixel."""
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_structure(connectivity))
    return labels.astype(np.int64), n


def area_open(mask, S: int, connectivity: int = 8):
    """Remove connected components with fewer than ``S`` pixels."""
    if S < 0:
        raise ConfigError("minimal area must be >= 0")
    labels, n = label_components(mask, connectivity)
    if n == 0:
        return np.zeros_like(labels, dtype=bool)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    keep = areas >= S
    keep[0] = False
    return keep[labels]


def morph_gradient(img):
    """Symmetric morphological gradient ``dilate - erode`` with a 3x3 square."""
    f, _ = _as_float(img)
    return dilate(f) - erode(f)
