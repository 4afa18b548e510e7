"""Wavelet-shrinkage features and minimum-distance / LDA decoding of multichannel time series."""
from .wavelet import DAUB4, DAUB8, HAAR, CoeffPyramid, WaveletFamily, dwt, get_family, idwt, pad_to_dyadic
from .shrink import (
    PipelineShrinkConfig,
    ThresholdRule,
    hard_threshold,
    pipeline_shrink,
    soft_threshold,
    universal_estimate,
    universal_threshold,
)
from .seqmodel import (
    BesovBody,
    besov_norm,
    identity_estimator,
    mc_sup_risk,
    observe,
    rate_experiment,
    regression_to_sequence,
    sample_boundary_theta,
    zero_estimator,
)
from .decoder import ClassFamily, PrototypeClass, consistency_experiment, l2_distance, measure_separation, min_distance_decode
from .data import Dataset, GeneratorSpec, Trial, generate, import_csv, load, make_prototypes, preset, save
from .learn import (
    PipelineConfig,
    cross_validate,
    extract_features,
    fit_pipeline,
    fourier_features,
    grid_search,
    lda_fit,
    lda_predict,
    pca_fit,
    pca_transform,
)

__version__ = "0.1.0"
