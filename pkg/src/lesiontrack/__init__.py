"""Longitudinal lesion tracking evaluation toolkit.

Quantifies how a centre-biased single-lesion segmentation model behaves
when its volume-of-interest assumption is stressed: VOIs extracted around
baseline lesion centroids, propagated (registration-derived) centroids at
follow-up, and controlled displacement sweeps. Ships a synthetic phantom
generator and a caricature segmenter so the full pipeline runs end to end
without any model weights or clinical data.
"""

__version__ = "0.1.0"

from .correspondence import OUTCOMES, OutcomeRecord, Selection, classify_outcome, select_component
from .errors import LesionTrackError
from .labeling import LabeledComponents, label_components, overlap_matrix
from .manifest import LesionRecord, load_manifest, save_manifest
from .metrics import PairedSample, WilcoxonResult, dice, histogram, registration_error, wilcoxon_signed_rank
from .nifti import load_volume, save_volume
from .phantom import CaseBundle, PhantomConfig, RegErrorModel, generate_case, generate_dataset
from .segmenters import CenterBiasParams, PredictionStore, SyntheticSegmenter, segment_external, segment_synthetic
from .voi import DEFAULT_MAGNITUDES_MM, DEFAULT_VOI_SHAPE, Voi, VoiSpec, displacement_schedule, extract_voi
from .volume import Kind, VolumeGrid

__all__ = [
    "__version__",
    "CaseBundle",
    "CenterBiasParams",
    "DEFAULT_MAGNITUDES_MM",
    "DEFAULT_VOI_SHAPE",
    "Kind",
    "LabeledComponents",
    "LesionRecord",
    "LesionTrackError",
    "OUTCOMES",
    "OutcomeRecord",
    "PairedSample",
    "PhantomConfig",
    "PredictionStore",
    "RegErrorModel",
    "Selection",
    "SyntheticSegmenter",
    "Voi",
    "VoiSpec",
    "VolumeGrid",
    "WilcoxonResult",
    "classify_outcome",
    "dice",
    "displacement_schedule",
    "extract_voi",
    "generate_case",
    "generate_dataset",
    "histogram",
    "label_components",
    "load_manifest",
    "load_volume",
    "overlap_matrix",
    "registration_error",
    "save_manifest",
    "save_volume",
    "segment_external",
    "segment_synthetic",
    "select_component",
    "wilcoxon_signed_rank",
]
