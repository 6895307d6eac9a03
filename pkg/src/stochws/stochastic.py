"""Monte-Carlo estimation of a probability density of contours.

Each realization draws random germs, floods a gradient from them and keeps
the watershed lines. Averaging the line indicators and smoothing them with a
Gaussian Parzen kernel gives the contour pdf.

Every realization owns a random stream derived from
``SeedSequence(seed, spawn_key=(channel, realization))``, so results do not
depend on how many worker threads run the realizations. Line indicators are
summed as integers, which keeps the reduction exact in any order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .exceptions import ConfigError, DataError
from .gradients import vector_gradient
from .morphology import morph_gradient
from .raster import MultispectralImage

log = logging.getLogger(__name__)

__all__ = [
    "SimulationConfig",
    "GermSet",
    "PdfField",
    "realization_rng",
    "uniform_point_germs",
    "regionalized_ball_germs",
    "parzen_kernel",
    "parzen_accumulate",
    "contour_realizations",
    "marginal_pdf",
    "vectorial_pdf",
]

GERM_MODES = ("uniform_points", "regionalized_balls")
PDF_MODES = ("marginal", "vectorial")
SPACES = ("MIS", "FIS")


@dataclass(frozen=True)
class SimulationConfig:
    N: int = 50
    M: int = 100
    sigma: float = 3.0
    Rmax: int = 30
    S: int = 10
    seed: int = 0
    germ_mode: str = "regionalized_balls"
    pdf_mode: str = "marginal"
    space: str = "MIS"

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ConfigError("N and M must be >= 1")
        if not self.sigma > 0:
            raise ConfigError("sigma must be > 0")
        if self.Rmax < 1 or self.S < 0:
            raise ConfigError("need Rmax >= 1 and S >= 0")
        if self.germ_mode not in GERM_MODES:
            raise ConfigError(f"germ_mode must be one of {GERM_MODES}")
        if self.pdf_mode not in PDF_MODES:
            raise ConfigError(f"pdf_mode must be one of {PDF_MODES}")
        if self.space not in SPACES:
            raise ConfigError(f"space must be one of {SPACES}")


@dataclass
class GermSet:
    """Germs of one realization; germ ``k`` is ``labels == k``.

    ``centers``, ``radii`` and ``classes`` have one entry per germ (radius 0
    and class 0 for point germs).
    """

    labels: np.ndarray
    centers: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    classes: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.centers)


@dataclass
class PdfField:
    """Contour pdf in ``[0, 1]`` (float32 values) with its provenance."""

    values: np.ndarray
    provenance: dict = field(default_factory=dict)
    germ_counts: np.ndarray | None = None
    realizations: list = field(default_factory=list)


def realization_rng(seed: int, channel: int, realization: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(channel), int(realization)))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# germs


def uniform_point_germs(shape, N: int, rng: np.random.Generator) -> GermSet:
    """``N`` uniform pixel draws; repeated draws collapse into one germ."""
    if N < 0:
        raise ConfigError("N must be >= 0")
    h, w = shape
    labels = np.zeros((h, w), dtype=np.int64)
    if N == 0:
        return GermSet(labels)
    picks = np.unique(rng.integers(0, h * w, size=N))
    labels.ravel()[picks] = np.arange(1, len(picks) + 1)
    centers = [(int(p // w), int(p % w)) for p in picks]
    return GermSet(labels, centers, [0] * len(centers), [0] * len(centers))


def regionalized_ball_germs(
    kappa_hat,
    N: int,
    Rmax: int,
    S: int,
    rng: np.random.Generator,
    background_class=None,
) -> GermSet:
    """Random balls regionalized by the connected classes of ``kappa_hat``.

    Each of the ``N`` uniform draws is kept only if it falls in a connected
    class of area at least ``S`` that has not been hit yet; the germ is then
    the disk of integer radius ``U[1, Rmax]`` around the draw, clipped to
    that class. The void class ``0`` and any ``background_class`` label(s)
    are never hit.
    """
    labels_hat = np.asarray(getattr(kappa_hat, "labels", kappa_hat))
    h, w = labels_hat.shape
    n_cls = int(labels_hat.max(initial=0))
    areas = np.bincount(labels_hat.ravel(), minlength=n_cls + 1)
    marked = areas < S
    marked[0] = True
    if background_class is not None:
        marked[np.atleast_1d(background_class)] = True

    out = GermSet(np.zeros((h, w), dtype=np.int64))
    for _ in range(N):
        p = int(rng.integers(0, h * w))
        ci, cj = divmod(p, w)
        k = labels_hat[ci, cj]
        if marked[k]:
            continue
        r = int(rng.integers(1, Rmax + 1))
        i0, i1 = max(ci - r, 0), min(ci + r + 1, h)
        j0, j1 = max(cj - r, 0), min(cj + r + 1, w)
        ii, jj = np.ogrid[i0:i1, j0:j1]
        ball = (ii - ci) ** 2 + (jj - cj) ** 2 <= r * r
        germ = ball & (labels_hat[i0:i1, j0:j1] == k)
        out.labels[i0:i1, j0:j1][germ] = out.count + 1
        out.centers.append((ci, cj))
        out.radii.append(r)
        out.classes.append(int(k))
        marked[k] = True
    return out


# --------------------------------------------------------------------------
# Parzen smoothing


def parzen_kernel(sigma: float) -> np.ndarray:
    """1-D unit-mass Gaussian truncated at ``ceil(3 sigma)``."""
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    r = int(math.ceil(3 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _smooth(field, sigma):
    g = parzen_kernel(sigma)
    out = ndimage.convolve1d(field, g, axis=0, mode="reflect")
    return ndimage.convolve1d(out, g, axis=1, mode="reflect")


def _as_pdf(values):
    return np.clip(values, 0.0, 1.0).astype(np.float32)


def parzen_accumulate(masks, sigma: float, weights=None) -> PdfField:
    """Weighted mean of contour masks smoothed by the Parzen kernel.

    ``weights`` defaults to ``1 / len(masks)`` each and must sum to 1.
    Borders reflect, so the smoothing preserves total mass.
    """
    masks = [np.asarray(m) for m in masks]
    if not masks:
        raise DataError("no realizations given")
    shape = masks[0].shape
    if any(m.shape != shape for m in masks):
        raise DataError("realizations differ in shape")
    if weights is None:
        weights = np.full(len(masks), 1.0 / len(masks))
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(masks) or not math.isclose(weights.sum(), 1.0, rel_tol=1e-9):
        raise ConfigError("need one weight per mask, summing to 1")
    mean = np.zeros(shape, dtype=np.float64)
    for wgt, m in zip(weights, masks):
        mean += wgt * m
    return PdfField(_as_pdf(_smooth(mean, sigma)), {"sigma": sigma})


# --------------------------------------------------------------------------
# realizations


def _draw(cfg, shape, rng, kappa_hat, background_class):
    if cfg.germ_mode == "uniform_points":
        return uniform_point_germs(shape, cfg.N, rng)
    if kappa_hat is None:
        raise ConfigError("regionalized germs need a transformed classification")
    return regionalized_ball_germs(kappa_hat, cfg.N, cfg.Rmax, cfg.S, rng, background_class)


def contour_realizations(
    gradient,
    cfg: SimulationConfig,
    channel: int = 0,
    count: int | None = None,
    kappa_hat=None,
    background_class=None,
    workers: int = 1,
    dump: int = 0,
):
    """Run ``count`` (default ``cfg.M``) germ draws + watersheds on ``gradient``.

    Returns ``(line_counts, germ_counts, dumped)`` where ``line_counts`` is the
    integer number of realizations with a line at each pixel, ``germ_counts``
    the effective germ count per realization and ``dumped`` the first
    ``dump`` ``(GermSet, contour mask)`` pairs.
    """
    relief = np.asarray(gradient, dtype=np.float64)
    if relief.ndim != 2 or not np.all(np.isfinite(relief)):
        raise DataError("gradient must be a finite 2-D raster")
    count = cfg.M if count is None else count

    def one(i):
        rng = realization_rng(cfg.seed, channel, i)
        germs = _draw(cfg, relief.shape, rng, kappa_hat, background_class)
        if germs.count == 0:
            log.info("realization %d of channel %d drew no germ", i, channel)
            return germs, np.zeros(relief.shape, dtype=bool)
        return germs, _kernels.flood(relief, germs.labels) == 0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(count)))
    else:
        results = [one(i) for i in range(count)]

    lines = np.zeros(relief.shape, dtype=np.int64)
    for _, contour in results:
        lines += contour
    germ_counts = np.array([g.count for g, _ in results], dtype=np.int64)
    return lines, germ_counts, results[:dump]


def _channels(source, cfg):
    """Planes, per-plane weights and space for a multispectral or factor image."""
    from .factor import FactorImage

    if isinstance(source, FactorImage):
        return source.retained_coords(), source.retained_weights(), "FIS"
    if isinstance(source, MultispectralImage):
        L = source.n_channels
        return source.data, np.full(L, 1.0 / L), "MIS"
    data = np.asarray(source, dtype=np.float64)
    if data.ndim == 2:
        data = data[None]
    L = data.shape[0]
    return data, np.full(L, 1.0 / L), cfg.space


def marginal_pdf(
    source,
    cfg: SimulationConfig = SimulationConfig(),
    kappa_hat=None,
    weights=None,
    background_class=None,
    workers: int = 1,
    dump: int = 0,
) -> PdfField:
    """Weighted mean of per-channel contour pdfs.

    Each channel's morphological gradient is flooded from ``cfg.M`` germ
    draws. Weights are ``1/L`` on multispectral data and the renormalized
    axis inertias on a :class:`~stochws.factor.FactorImage`; ``weights``
    overrides both.
    """
    planes, default_w, space = _channels(source, cfg)
    w = default_w if weights is None else np.asarray(weights, dtype=np.float64)
    if len(w) != len(planes) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
        raise ConfigError("need one weight per channel, summing to 1")
    acc = np.zeros(planes.shape[1:], dtype=np.float64)
    germ_counts, dumped = [], []
    for j, plane in enumerate(planes):
        lines, counts, d = contour_realizations(
            morph_gradient(plane), cfg, channel=j, kappa_hat=kappa_hat,
            background_class=background_class, workers=workers, dump=dump if j == 0 else 0,
        )
        acc += w[j] * _smooth(lines / cfg.M, cfg.sigma)
        germ_counts.append(counts)
        dumped.extend(d)
    prov = asdict(cfg) | {"pdf_mode": "marginal", "space": space, "weights": w.tolist()}
    return PdfField(_as_pdf(acc), prov, np.stack(germ_counts), dumped)


def vectorial_pdf(
    source,
    cfg: SimulationConfig = SimulationConfig(),
    kappa_hat=None,
    background_class=None,
    workers: int = 1,
    dump: int = 0,
    eps: float = 0.0,
) -> PdfField:
    """Contour pdf of ``M x L`` germ draws on one vector gradient.

    The gradient uses the chi-squared distance on multispectral data and the
    Euclidean distance on factor coordinates.
    """
    planes, _, space = _channels(source, cfg)
    kind = "chi2" if space == "MIS" else "euclidean"
    grad = vector_gradient(planes, kind, eps=eps)
    total = cfg.M * len(planes)
    lines, counts, dumped = contour_realizations(
        grad, cfg, channel=0, count=total, kappa_hat=kappa_hat,
        background_class=background_class, workers=workers, dump=dump,
    )
    pdf = _smooth(lines / total, cfg.sigma)
    prov = asdict(cfg) | {"pdf_mode": "vectorial", "space": space, "distance": kind}
    return PdfField(_as_pdf(pdf), prov, counts[None], dumped)
