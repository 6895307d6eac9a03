"""Classification-driven stochastic watershed for multispectral images."""

from .exceptions import ConfigError, DataError, DegenerateError, StochWSError
from .raster import MultispectralImage, load_multispectral, downsample_average, export_artifact
from .morphology import square, disk, erode, dilate, opening, closing, reconstruct, area_open, morph_gradient
from .factor import FactorImage, fca_fit_transform, fca_reconstruct, spatial_covariance, axis_snr, select_axes
from .classify import Classification, clara_classify, pam
from .markers import TransformedClassification, class_index, transform_classification
from .gradients import spectral_distance, vector_gradient, probabilistic_gradient
from .watershed import (
    Segmentation, regional_minima, impose_minima, marker_watershed,
    volume_extinctions, hierarchical_volume_ws,
)
from .stochastic import (
    SimulationConfig, PdfField, uniform_point_germs, regionalized_ball_germs,
    parzen_accumulate, marginal_pdf, vectorial_pdf,
)

from .pipeline import (
    PipelineConfig, PipelineResult, run_pipeline, generate_synthetic_scene,
    bundled_scene, boundary_f1,
)

__version__ = "0.1.0"
