"""Object-of-interest segmentation for low depth-of-field photographs."""

from dofseg.colorspace import LabImage, delta_e, delta_e_max, srgb_to_lab
from dofseg.pipeline import PipelineParams, SegmentationReport, segment

__all__ = [
    "LabImage",
    "PipelineParams",
    "SegmentationReport",
    "delta_e",
    "delta_e_max",
    "segment",
    "srgb_to_lab",
]

__version__ = "0.1.0"
