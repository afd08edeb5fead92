"""Handwritten signature verification from wrist-worn motion sensors.

Pipeline: per-channel z-normalization, truncated DCT, per-channel DTW to a
user's reference signatures, minimum over references, then a single global
classifier over the nine resulting distances.
"""

__version__ = "0.1.0"

from .signal import (  # noqa: E402
    CoefficientVector,
    CompressedSignature,
    Dimension,
    Label,
    MotionSignal,
    SignatureRecording,
    dct_compress,
    normalize,
    preprocess,
)
from .dtw import DtwResult, dtw_distance  # noqa: E402
from .features import (  # noqa: E402
    FeatureSubset,
    FeatureVector,
    ReferenceSet,
    dissimilarity,
    extract_features,
    filter_features,
    select_references,
)
from .corpus import SignatureCorpus, UserRecord  # noqa: E402

__all__ = [
    "CoefficientVector",
    "CompressedSignature",
    "Dimension",
    "DtwResult",
    "FeatureSubset",
    "FeatureVector",
    "Label",
    "MotionSignal",
    "ReferenceSet",
    "SignatureCorpus",
    "SignatureRecording",
    "UserRecord",
    "dct_compress",
    "dissimilarity",
    "dtw_distance",
    "extract_features",
    "filter_features",
    "normalize",
    "preprocess",
    "select_references",
]
