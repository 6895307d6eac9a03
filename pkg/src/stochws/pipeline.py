"""End-to-end segmentation chain and synthetic test scenes.

The chain is: correspondence analysis, SNR axis screening, CLARA
classification on the retained axes, marker transform, contour pdf with
regionalized ball germs, and a final watershed of the pdf (from the
transformed classes, or from the ``R`` most voluminous minima).
"""

from __future__ import annotations

import json
import logging
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .classify import Classification, clara_classify
from .exceptions import ConfigError, DataError, StochWSError
from .factor import FactorImage, axis_diagnostics, fca_fit_transform, select_axes
from .markers import TransformedClassification, transform_classification
from .morphology import dilate, square
from .raster import (
    MultispectralImage,
    export_artifact,
    load_multispectral,
    rgb_composite,
    write_pfm,
    write_ppm,
)
from .stochastic import PdfField, SimulationConfig, marginal_pdf, vectorial_pdf
from .watershed import Segmentation, hierarchical_volume_ws, marker_watershed

log = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "run_pipeline",
    "generate_synthetic_scene",
    "bundled_scene",
    "boundary_f1",
    "contour_overlay",
    "json_safe",
]


@dataclass(frozen=True)
class PipelineConfig:
    input: str | None = None
    Q: int = 3
    N: int = 50
    M: int = 100
    sigma: float = 3.0
    Rmax: int = 30
    S: int = 10
    seed: int = 0
    space: str = "MIS"
    pdf_mode: str = "marginal"
    germ_mode: str = "regionalized_balls"
    final_mode: str = "mrk"
    R: int | None = None
    snr_threshold: float = 1.0
    erode_size: int = 5
    close_size: int = 3
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.final_mode not in ("mrk", "vol"):
            raise ConfigError("final_mode must be 'mrk' or 'vol'")
        if self.final_mode == "vol" and (self.R is None or self.R < 1):
            raise ConfigError("final_mode='vol' needs R >= 1")
        if self.Q < 1:
            raise ConfigError("Q must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.simulation()  # validates the Monte-Carlo fields

    def simulation(self) -> SimulationConfig:
        return SimulationConfig(
            N=self.N, M=self.M, sigma=self.sigma, Rmax=self.Rmax, S=self.S,
            seed=self.seed, germ_mode=self.germ_mode, pdf_mode=self.pdf_mode,
            space=self.space,
        )

    @classmethod
    def from_json(cls, path, **overrides) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass
class PipelineResult:
    image: MultispectralImage
    factors: FactorImage
    classification: Classification
    transformed: TransformedClassification
    pdf: PdfField
    segmentation: Segmentation
    report: dict


@contextmanager
def _stage(name):
    try:
        yield
    except StochWSError as exc:
        raise type(exc)(f"stage {name!r}: {exc}") from exc


def json_safe(obj):
    """Replace non-finite floats (not valid JSON) by ``"inf"``/``"-inf"``/``None``."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def run_pipeline(cfg: PipelineConfig, image: MultispectralImage | None = None) -> PipelineResult:
    """Run the whole chain; ``image`` overrides ``cfg.input`` when given."""
    with _stage("load"):
        if image is None:
            if cfg.input is None:
                raise ConfigError("no input image")
            image = load_multispectral(cfg.input)

    with _stage("fca"):
        factors = fca_fit_transform(image)
        diags = axis_diagnostics(factors)
    with _stage("snr"):
        retained = select_axes(diags, cfg.snr_threshold)
        factors = factors.with_retained(retained)
    log.info("retained axes %s", retained)

    with _stage("classify"):
        kappa = clara_classify(factors, cfg.Q, seed=cfg.seed, workers=cfg.workers)
    with _stage("markers"):
        kappa_hat = transform_classification(
            kappa, square(cfg.erode_size), square(cfg.close_size), cfg.S
        )
    log.info("%d connected classes", kappa_hat.n_classes)

    sim = cfg.simulation()
    with _stage("pdf"):
        source = image if cfg.space == "MIS" else factors
        estimator = marginal_pdf if cfg.pdf_mode == "marginal" else vectorial_pdf
        pdf = estimator(source, sim, kappa_hat=kappa_hat, workers=cfg.workers)

    with _stage("segment"):
        if cfg.final_mode == "mrk":
            seg = marker_watershed(pdf.values, kappa_hat.labels)
        else:
            seg = hierarchical_volume_ws(pdf.values, cfg.R)

    report = {
        "config": asdict(cfg),
        "image": {"width": image.width, "height": image.height,
                  "channels": list(image.channel_names)},
        "axes": [
            {"axis": d.axis, "inertia": d.inertia, "snr": d.snr,
             "var_signal": d.var_signal, "var_noise": d.var_noise,
             "retained": d.axis in retained}
            for d in diags
        ],
        "retained_axes": list(retained),
        "classification": {
            "Q": kappa.Q, "cost": kappa.cost, "medoids": kappa.medoids,
            "class_areas": np.bincount(kappa.labels.ravel(), minlength=kappa.Q + 1)[1:],
        },
        "markers": {
            "n_classes": kappa_hat.n_classes, "areas": kappa_hat.areas,
            "origin_class": kappa_hat.origin_class,
            "void_pixels": int(kappa_hat.void.sum()),
        },
        "pdf": {
            "mode": cfg.pdf_mode, "space": cfg.space,
            "mean_effective_germs": float(pdf.germ_counts.mean()),
            "min": float(pdf.values.min()), "max": float(pdf.values.max()),
        },
        "segmentation": {"mode": cfg.final_mode, "R": cfg.R,
                         "region_count": seg.region_count},
    }
    report = json_safe(report)
    result = PipelineResult(image, factors, kappa, kappa_hat, pdf, seg, report)
    if cfg.output:
        with _stage("export"):
            export_results(result, cfg.output)
    return result


def contour_overlay(seg: Segmentation) -> np.ndarray:
    """Watershed lines dilated by a 3x3 square, for display only."""
    return dilate(seg.contours, square(3))


def export_results(result: PipelineResult, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    result.factors.save(out / "factors.npz")
    for k in range(1, result.factors.n_axes + 1):
        write_pfm(out / f"axis{k}.pfm", result.factors.axis(k))
    kappa = result.classification
    export_artifact(kappa.labels, out / "kappa.pgm", legend={
        "classes": list(range(1, kappa.Q + 1)), "medoids": kappa.medoids.tolist()})
    kh = result.transformed
    export_artifact(kh.labels, out / "kappa_hat.pgm", legend=json_safe({
        "void": 0, "areas": kh.areas, "origin_class": kh.origin_class}))
    export_artifact(result.pdf.values, out / "pdf.pfm")
    export_artifact(result.segmentation.regions, out / "segmentation.pgm")
    export_artifact(contour_overlay(result.segmentation), out / "contours.pgm")
    if result.image.n_channels >= 3:
        write_ppm(out / "rgb.ppm", rgb_composite(result.image))
    (out / "report.json").write_text(json.dumps(result.report, indent=2))


# --------------------------------------------------------------------------
# synthetic scenes


def generate_synthetic_scene(
    shape=(64, 64),
    n_regions: int = 4,
    spectra=None,
    noise: float = 0.0,
    seed: int = 0,
    layout: str = "voronoi",
    region_class=None,
    n_channels: int = 4,
    texture=None,
):
    """Piecewise-constant multiband scene with its ground-truth partition.

    Parameters
    ----------
    shape : (int, int)
        Raster size.
    n_regions : int
        Number of regions (Voronoi cells or vertical stripes).
    spectra : array_like, shape (n_classes, L), optional
        Mean spectrum of each class; random positive spectra when omitted.
    noise : float
        Standard deviation of the additive Gaussian noise. Samples are
        rounded and clipped at 0.
    seed : int
        Seed for layout, spectra and noise.
    layout : {"voronoi", "rectangles"}
    region_class : sequence of int, optional
        Class (row of ``spectra``) of each region; region ``k`` uses class
        ``k`` by default.
    texture : (ndarray, array_like), optional
        ``(mask, offset)`` adding ``offset`` (length ``L``) on ``mask``.

    Returns
    -------
    image : MultispectralImage
    truth : ndarray of int
        Region labels ``1..n_regions``.
    """
    if n_regions < 1:
        raise DataError("need at least one region")
    rng = np.random.default_rng(seed)
    h, w = shape
    if spectra is None:
        if n_channels < 2:
            raise DataError("need at least two channels")
        n_cls = n_regions if region_class is None else int(max(region_class)) + 1
        spectra = rng.uniform(40.0, 220.0, size=(n_cls, n_channels))
    spectra = np.asarray(spectra, dtype=np.float64)
    if spectra.ndim != 2 or spectra.shape[1] < 2:
        raise DataError("spectra must be (n_classes, L) with L >= 2")
    if np.any(spectra < 0):
        raise DataError("spectra must be non-negative")
    if region_class is None:
        region_class = np.arange(n_regions)
    region_class = np.asarray(region_class, dtype=np.int64)
    if len(region_class) != n_regions or region_class.max() >= len(spectra):
        raise DataError("region_class must map every region to a spectrum row")

    if layout == "voronoi":
        sites = np.column_stack([rng.uniform(0, h, n_regions), rng.uniform(0, w, n_regions)])
        ii, jj = np.mgrid[0:h, 0:w]
        d = (ii[None] - sites[:, 0, None, None]) ** 2 + (jj[None] - sites[:, 1, None, None]) ** 2
        truth = np.argmin(d, axis=0) + 1
    elif layout == "rectangles":
        edges = np.linspace(0, w, n_regions + 1).round().astype(int)
        truth = np.zeros((h, w), dtype=np.int64)
        for k in range(n_regions):
            truth[:, edges[k]:edges[k + 1]] = k + 1
    else:
        raise DataError(f"unknown layout {layout!r}")
    truth = truth.astype(np.int64)

    cube = spectra[region_class[truth - 1]].transpose(2, 0, 1).copy()
    if texture is not None:
        mask, offset = texture
        cube += np.asarray(offset, dtype=np.float64)[:, None, None] * np.asarray(mask, dtype=bool)
    if noise > 0:
        cube += rng.normal(0.0, noise, size=cube.shape)
    cube = np.clip(np.round(cube), 0.0, None)
    names = tuple(f"band{j + 1}" for j in range(cube.shape[0]))
    return MultispectralImage(cube, names), truth


# spectral signatures of the bundled scene: four distinct profiles
_BUNDLED_SPECTRA = np.array([
    [60.0, 90.0, 140.0, 200.0],
    [180.0, 150.0, 100.0, 60.0],
    [100.0, 180.0, 90.0, 120.0],
    [150.0, 70.0, 160.0, 90.0],
])


def bundled_scene(noise: float = 8.0, seed: int = 7):
    """The reference 64x64, 4-class, 4-band Voronoi scene."""
    return generate_synthetic_scene(
        (64, 64), n_regions=4, spectra=_BUNDLED_SPECTRA, noise=noise, seed=seed,
    )


# --------------------------------------------------------------------------
# evaluation


def _boundary(labels):
    labels = np.asarray(labels)
    b = np.zeros(labels.shape, dtype=bool)
    dv = labels[1:, :] != labels[:-1, :]
    dh = labels[:, 1:] != labels[:, :-1]
    b[1:, :] |= dv
    b[:-1, :] |= dv
    b[:, 1:] |= dh
    b[:, :-1] |= dh
    return b


def boundary_f1(contours, truth, tolerance: float = 2.0):
    """Boundary precision, recall and F1 with a pixel distance tolerance.

    ``contours`` is a boolean line mask (or a :class:`Segmentation`);
    ground-truth boundaries are the pixels with a 4-neighbour of another
    label.
    """
    if isinstance(contours, Segmentation):
        contours = contours.contours
    pred = np.asarray(contours, dtype=bool)
    gt = _boundary(truth)
    if not pred.any() or not gt.any():
        both_empty = not pred.any() and not gt.any()
        return (1.0, 1.0, 1.0) if both_empty else (0.0, 0.0, 0.0)
    dist_gt = ndimage.distance_transform_edt(~gt)
    dist_pred = ndimage.distance_transform_edt(~pred)
    precision = float((dist_gt[pred] <= tolerance).mean())
    recall = float((dist_pred[gt] <= tolerance).mean())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1
