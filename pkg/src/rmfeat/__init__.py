"""Multi-resolution regional-attention descriptors for image retrieval.

Pipeline: per-resolution convolutional feature maps -> multi-scale square
regions -> max/sum pooling -> PCA-whitening to a compact descriptor ->
IDF attention weights from a visual-word dictionary -> weighted sum ->
unit-normalized image descriptor, searched exhaustively by Euclidean
distance.
"""

from .aggregate import BatchReport, ImageDescriptor, PipelineConfig, describe, describe_batch
from .attention import (
    AttentionDictionary,
    attend,
    attend_batch,
    build_dictionary,
    compute_idf,
    fit_dictionary,
    quantize,
    quantize_batch,
    read_dictionary,
    write_dictionary,
)
from .backbone import BackboneConfig, make_backbone, preprocess
from .errors import (
    BatchError,
    ConfigError,
    EvaluationError,
    FitError,
    FormatError,
    InputError,
    NumericError,
    RmfeatError,
)
from .pooling import PoolingMode, pool, pool_region_batch
from .regions import RegionSpec, crop, region_grid
from .retrieval import (
    DescriptorIndex,
    RankingResult,
    average_precision_at_k,
    build_index,
    evaluate,
    index_from_arrays,
    map_at_k,
    nar,
    read_ground_truth,
    search,
    search_batch,
)
from .tensorio import (
    FeatureMap,
    l2_normalize,
    read_descriptors,
    read_feature_map,
    read_tensor,
    write_descriptors,
    write_feature_map,
    write_tensor,
)
from .whitening import WhiteningModel, apply, apply_batch, fit, read_whitening, write_whitening

__version__ = "0.1.0"
