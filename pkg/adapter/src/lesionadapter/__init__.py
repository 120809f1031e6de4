"""File-based bridge between segmentation models and the evaluation toolkit.

Runs an arbitrary model command over every (case, timepoint) CT named in a
dataset manifest, validates the produced masks against their source
geometry, and assembles the prediction store that the evaluation's external
segmenter consumes. Coupling to both sides is purely through files and
subprocesses; the package imports nothing from either.
"""

from .adapter import (
    MANIFEST_NAME,
    STATUS_MISSING_INPUT,
    STATUS_MISSING_OUTPUT,
    STATUS_NON_BINARY,
    STATUS_OK,
    STATUS_PROCESS_FAILURE,
    STATUS_SHAPE_MISMATCH,
    STATUS_UNREADABLE,
    AdapterConfig,
    AdapterError,
    BatchResult,
    InferenceEntry,
    case_ids_from_manifest,
    run_inference_batch,
)
from .nifti_lite import HeaderInfo, NiftiLiteError, load_flat, read_header

__version__ = "0.1.0"

__all__ = [
    "MANIFEST_NAME",
    "STATUS_MISSING_INPUT",
    "STATUS_MISSING_OUTPUT",
    "STATUS_NON_BINARY",
    "STATUS_OK",
    "STATUS_PROCESS_FAILURE",
    "STATUS_SHAPE_MISMATCH",
    "STATUS_UNREADABLE",
    "AdapterConfig",
    "AdapterError",
    "BatchResult",
    "HeaderInfo",
    "InferenceEntry",
    "NiftiLiteError",
    "case_ids_from_manifest",
    "load_flat",
    "read_header",
    "run_inference_batch",
    "__version__",
]
