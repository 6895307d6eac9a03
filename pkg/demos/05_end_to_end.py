# # End to end, with every intermediate exported
#
# ``run_pipeline`` chains correspondence analysis, axis selection,
# classification, marker extraction, the contour density and the final
# watershed. With an output directory it writes each stage as PGM/PFM
# rasters plus a JSON report, the same files the ``stochws`` subcommands read
# and write.
#
#     python demos/05_end_to_end.py [output-directory]

# %%

import json
import sys
import tempfile

from stochws import bundled_scene, boundary_f1, run_pipeline, PipelineConfig

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="stochws-")
img, truth = bundled_scene()
res = run_pipeline(PipelineConfig(output=out), img)

# %%

report = json.loads(open(f"{out}/report.json").read())
print("retained axes:     ", report["retained_axes"])
print("connected classes: ", report["markers"]["n_classes"])
print("germs/realization: ", round(report["pdf"]["mean_effective_germs"], 2))
print("regions:           ", report["segmentation"]["region_count"])
p, r, f1 = boundary_f1(res.segmentation, truth)
print(f"boundary F1 (2 px): {f1:.3f}  precision {p:.3f}  recall {r:.3f}")
print("exported to", out)
