# # A probability density of contours
#
# Each Monte-Carlo realization picks random germs, floods a gradient from
# them and records the watershed lines. Averaging many realizations and
# smoothing with a Gaussian kernel gives the density of contours. Strong
# boundaries are found by almost every realization; weak ones only rarely.

# %%

import numpy as np

from stochws import bundled_scene, run_pipeline, PipelineConfig
from stochws.pipeline import _boundary
from stochws.stochastic import SimulationConfig, marginal_pdf, vectorial_pdf

img, truth = bundled_scene()
kappa_hat = run_pipeline(PipelineConfig(M=1), img).transformed
on_edge = _boundary(truth)

# Uniform point germs versus random balls restricted to the connected
# classes (at most one ball per class and per realization).

# %%

variants = {
    "marginal, points": (marginal_pdf, "uniform_points"),
    "marginal, balls": (marginal_pdf, "regionalized_balls"),
    "vectorial, points": (vectorial_pdf, "uniform_points"),
    "vectorial, balls": (vectorial_pdf, "regionalized_balls"),
}
for name, (estimator, germs) in variants.items():
    cfg = SimulationConfig(M=50, N=50, germ_mode=germs)
    field = estimator(img, cfg, kappa_hat=kappa_hat)
    pdf = field.values
    print(f"{name:18s} mean pdf on boundaries {pdf[on_edge].mean():.3f}, "
          f"elsewhere {pdf[~on_edge].mean():.3f}, germs/realization "
          f"{field.germ_counts.mean():.1f}")

# Ball germs regionalized by the classification drop spurious contours inside
# the regions: the density off the boundaries is much lower.
#
# The estimate settles quickly as realizations accumulate.

# %%

ref = marginal_pdf(img, SimulationConfig(M=100), kappa_hat=kappa_hat).values.astype(float)
for M in (5, 10, 20, 50):
    p = marginal_pdf(img, SimulationConfig(M=M), kappa_hat=kappa_hat).values
    print(f"M={M:3d}  sup |pdf_M - pdf_100| = {np.abs(p - ref).max():.3f}")
