"""Command line entry point; every stage reads and writes exported artifacts.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
stage (nothing retained, empty marker set).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classify import clara_classify
from .exceptions import ConfigError, DataError, DegenerateError, StochWSError
from .factor import FactorImage, axis_diagnostics, fca_fit_transform, select_axes
from .gradients import vector_gradient
from .markers import TransformedClassification, transform_classification
from .morphology import square
from .pipeline import (
    PipelineConfig,
    bundled_scene,
    contour_overlay,
    generate_synthetic_scene,
    json_safe,
    run_pipeline,
)
from .raster import export_artifact, import_artifact, load_multispectral, save_multispectral, write_pfm
from .stochastic import SimulationConfig, marginal_pdf, vectorial_pdf
from .watershed import hierarchical_volume_ws, marker_watershed

log = logging.getLogger("stochws")

EXIT_CODES = {ConfigError: 2, DataError: 3, DegenerateError: 4}


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(json_safe(obj), indent=2))


def _source(args):
    """Multispectral image (``--manifest``) or factor image (``--factors``)."""
    if args.space == "fis":
        if not args.factors:
            raise ConfigError("--space fis needs --factors")
        return FactorImage.load(args.factors)
    if not args.manifest:
        raise ConfigError("--space mis needs --manifest")
    return load_multispectral(args.manifest)


def _kappa_hat(path):
    labels = import_artifact(path)
    n = int(labels.max())
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return TransformedClassification(labels, areas, np.zeros(n, dtype=np.int64))


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    out = _outdir(args.out)
    if args.bundled:
        img, truth = bundled_scene()
    else:
        img, truth = generate_synthetic_scene(
            tuple(args.size), n_regions=args.regions, noise=args.noise,
            seed=args.seed, layout=args.layout, n_channels=args.channels,
        )
    manifest = save_multispectral(img, out)
    export_artifact(truth, out / "truth.pgm")
    print(manifest)


def cmd_fca(args):
    out = _outdir(args.out)
    factors = fca_fit_transform(load_multispectral(args.manifest), args.k)
    factors.save(out / "factors.npz")
    for k in range(1, factors.n_axes + 1):
        write_pfm(out / f"axis{k}.pfm", factors.axis(k))
    _write_json(out / "fca.json", {
        "eigenvalues": factors.eigenvalues, "inertias": factors.inertias,
        "total_inertia": factors.total_inertia,
    })


def cmd_snr(args):
    out = _outdir(args.out)
    factors = FactorImage.load(args.factors)
    diags = axis_diagnostics(factors)
    for d in diags:
        write_pfm(out / f"covariance{d.axis}.pfm", d.covariance)
    retained = []
    try:
        retained = select_axes(diags, args.threshold)
    finally:
        _write_json(out / "snr.json", [
            {"axis": d.axis, "inertia": d.inertia, "snr": d.snr, "retained": d.axis in retained}
            for d in diags
        ])
    factors.with_retained(retained).save(out / "factors.npz")


def cmd_classify(args):
    out = _outdir(args.out)
    factors = FactorImage.load(args.factors)
    kappa = clara_classify(
        factors, args.q, seed=args.seed, samples=args.samples,
        sample_size=args.sample_size, workers=args.threads,
    )
    export_artifact(kappa.labels, out / "kappa.pgm")
    _write_json(out / "kappa.json", {
        "Q": kappa.Q, "medoids": kappa.medoids, "medoid_index": kappa.medoid_index,
        "cost": kappa.cost, "axes": list(factors.retained),
    })


def cmd_markers(args):
    out = _outdir(args.out)
    kappa = import_artifact(args.kappa)
    kh = transform_classification(kappa, square(args.erode), square(args.close), args.s)
    export_artifact(kh.labels, out / "kappa_hat.pgm", legend=json_safe({
        "void": 0, "areas": kh.areas, "origin_class": kh.origin_class}))


def cmd_gradient(args):
    src = _source(args)
    if args.space == "fis":
        planes = src.retained_coords()
    else:
        planes = src.data
    grad = vector_gradient(planes, args.metric, eps=args.chi2_eps)
    write_pfm(args.out, grad)


def cmd_pdf(args):
    out = _outdir(args.out)
    germs = {"points": "uniform_points", "balls": "regionalized_balls"}[args.germs]
    cfg = SimulationConfig(
        N=args.n, M=args.m, sigma=args.sigma, Rmax=args.rmax, S=args.s,
        seed=args.seed, germ_mode=germs, pdf_mode=args.mode, space=args.space.upper(),
    )
    src = _source(args)
    kh = _kappa_hat(args.markers) if args.markers else None
    if germs == "regionalized_balls" and kh is None:
        raise ConfigError("--germs balls needs --markers (a transformed classification)")
    common = dict(kappa_hat=kh, background_class=args.background_class,
                  workers=args.threads, dump=args.dump_realizations)
    if args.mode == "marginal":
        pdf = marginal_pdf(src, cfg, **common)
    else:
        pdf = vectorial_pdf(src, cfg, eps=args.chi2_eps, **common)
    export_artifact(pdf.values, out / "pdf.pfm")
    _write_json(out / "pdf.json", {
        "provenance": pdf.provenance,
        "germ_counts": pdf.germ_counts,
        "mean_effective_germs": float(pdf.germ_counts.mean()),
    })
    for k, (germ, contour) in enumerate(pdf.realizations):
        export_artifact(germ.labels, out / f"germs{k}.pgm")
        export_artifact(contour, out / f"contour{k}.pgm")


def cmd_segment(args):
    out = _outdir(args.out)
    relief = import_artifact(args.pdf)
    if args.mode == "mrk":
        if not args.markers:
            raise ConfigError("--mode mrk needs --markers")
        seg = marker_watershed(relief, import_artifact(args.markers))
    else:
        if args.r is None:
            raise ConfigError("--mode vol needs --r")
        seg = hierarchical_volume_ws(relief, args.r)
    export_artifact(seg.regions, out / "segmentation.pgm")
    export_artifact(contour_overlay(seg), out / "contours.pgm")
    _write_json(out / "segment.json", {"mode": args.mode, "R": args.r,
                                       "region_count": seg.region_count})
    print(seg.region_count)


_OVERRIDES = {
    "q": "Q", "n": "N", "m": "M", "sigma": "sigma", "rmax": "Rmax", "s": "S",
    "seed": "seed", "mode": "final_mode", "r": "R", "snr_threshold": "snr_threshold",
    "pdf_mode": "pdf_mode",
}


def cmd_pipeline(args):
    overrides = {dst: getattr(args, src) for src, dst in _OVERRIDES.items()}
    if args.space:
        overrides["space"] = args.space.upper()
    overrides["input"] = args.manifest
    overrides["output"] = args.out
    overrides["workers"] = args.threads
    if args.config:
        cfg = PipelineConfig.from_json(args.config, **overrides)
    else:
        cfg = PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = run_pipeline(cfg)
    print(result.segmentation.region_count)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochws", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker cap (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic multiband scene and its ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--bundled", action="store_true", help="the reference 64x64 4-class scene")
    s.add_argument("--size", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    s.add_argument("--regions", type=int, default=4)
    s.add_argument("--channels", type=int, default=4)
    s.add_argument("--noise", type=float, default=8.0)
    s.add_argument("--layout", choices=("voronoi", "rectangles"), default="voronoi")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fca", help="correspondence analysis of a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fca)

    s = sub.add_parser("snr", help="axis SNR diagnostics and selection")
    s.add_argument("--factors", required=True)
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_snr)

    s = sub.add_parser("classify", help="CLARA classification of retained axes")
    s.add_argument("--factors", required=True)
    s.add_argument("--q", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=5)
    s.add_argument("--sample-size", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("markers", help="transform a classification into connected classes")
    s.add_argument("--kappa", required=True)
    s.add_argument("--s", type=int, default=10)
    s.add_argument("--erode", type=int, default=5)
    s.add_argument("--close", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_markers)

    def source_args(s):
        s.add_argument("--space", choices=("mis", "fis"), default="mis")
        s.add_argument("--manifest")
        s.add_argument("--factors")
        s.add_argument("--chi2-eps", type=float, default=0.0)

    s = sub.add_parser("gradient", help="metric-based vector gradient")
    source_args(s)
    s.add_argument("--metric", choices=("chi2", "euclidean"), default="chi2")
    s.add_argument("--out", required=True, help="output PFM file")
    s.set_defaults(func=cmd_gradient)

    s = sub.add_parser("pdf", help="probability density of contours")
    source_args(s)
    s.add_argument("--germs", choices=("points", "balls"), default="balls")
    s.add_argument("--mode", choices=("marginal", "vectorial"), default="marginal")
    s.add_argument("--markers", help="transformed classification (kappa_hat.pgm)")
    s.add_argument("--background-class", type=int, nargs="*", default=None)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--m", type=int, default=100)
    s.add_argument("--sigma", type=float, default=3.0)
    s.add_argument("--rmax", type=int, default=30)
    s.add_argument("--s", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dump-realizations", type=int, default=0, metavar="K")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pdf)

    s = sub.add_parser("segment", help="final watershed of a pdf")
    s.add_argument("--pdf", required=True)
    s.add_argument("--mode", choices=("mrk", "vol"), default="mrk")
    s.add_argument("--markers")
    s.add_argument("--r", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("pipeline", help="run every stage and export all intermediates")
    s.add_argument("--manifest")
    s.add_argument("--config", help="JSON file with PipelineConfig fields")
    s.add_argument("--out", required=True)
    s.add_argument("--space", choices=("mis", "fis"), default=None)
    s.add_argument("--pdf-mode", choices=("marginal", "vectorial"), default=None)
    s.add_argument("--mode", choices=("mrk", "vol"), default=None)
    for name, typ in (("q", int), ("n", int), ("m", int), ("sigma", float), ("rmax", int),
                      ("s", int), ("seed", int), ("r", int), ("snr-threshold", float)):
        s.add_argument(f"--{name}", type=typ, default=None)
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except StochWSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
