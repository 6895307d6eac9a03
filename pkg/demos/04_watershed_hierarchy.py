# # Final segmentation: markers or volume hierarchy
#
# The density of contours is itself a relief. It can be flooded from the
# connected classes (one region per class) or segmented hierarchically,
# keeping the R minima whose basins hold the largest flooding volume.

# %%

import numpy as np

from stochws import bundled_scene, boundary_f1, run_pipeline, PipelineConfig
from stochws.watershed import hierarchical_volume_ws, marker_watershed, volume_extinctions

img, truth = bundled_scene()
res = run_pipeline(PipelineConfig(), img)
pdf = res.pdf.values

# %%

seg = marker_watershed(pdf, res.transformed.labels)
print("marker-controlled:", seg.region_count, "regions, F1",
      round(boundary_f1(seg, truth)[2], 3))

tree = volume_extinctions(pdf)
print("regional minima of the pdf:", tree.n_minima)
print("largest finite extinction volumes:",
      np.round(np.sort(tree.extinction[np.isfinite(tree.extinction)])[::-1][:5], 2))

# %%

for R in (2, 4, min(8, tree.n_minima)):
    seg = hierarchical_volume_ws(pdf, R)
    print(f"volume hierarchy R={R}: {seg.region_count} regions, F1 "
          f"{boundary_f1(seg, truth)[2]:.3f}")
