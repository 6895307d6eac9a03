# # From a pixel classification to watershed markers
#
# The retained factor axes are clustered with CLARA (k-medoids on random
# subsets, scored on the whole image). The classification is then made
# spatially reliable: every class is eroded, small holes are closed, classes
# are split into connected components and tiny components are dropped. What
# remains are the connected classes; everything else becomes the void class 0.

# %%

import numpy as np

from stochws import bundled_scene
from stochws.classify import clara_classify
from stochws.factor import axis_diagnostics, fca_fit_transform, select_axes
from stochws.markers import transform_classification

img, truth = bundled_scene()
factors = fca_fit_transform(img)
factors = factors.with_retained(select_axes(axis_diagnostics(factors)))
print("retained axes:", factors.retained)

# %%

kappa = clara_classify(factors, 3, seed=0)
print("medoid cost:", round(kappa.cost, 4))
print("class areas:", np.bincount(kappa.labels.ravel())[1:])

# Three classes for four regions: two regions share a class. The transform
# splits that class into two connected classes, so every region gets a marker.

# %%

kappa_hat = transform_classification(kappa, S=10)
print("connected classes:", kappa_hat.n_classes)
print("origin class of each:", kappa_hat.origin_class.tolist())
print("areas:", kappa_hat.areas.tolist(), " void pixels:", int(kappa_hat.void.sum()))

# The void class is a band along every class border, a few pixels wide.

# %%

for k in range(1, kappa_hat.n_classes + 1):
    regions = np.unique(truth[kappa_hat.labels == k])
    print(f"connected class {k} lies in ground-truth region(s) {regions.tolist()}")
