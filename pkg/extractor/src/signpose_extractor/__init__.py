"""signpose-extractor: video to pose-keypoint files for the signpose toolkit."""

from .engines import BlobMarkerEngine, Detection, MediaPipeEngine, make_engine
from .extract import ExtractionConfig, extract_video
from .imaging import grayscale_normalize, mask_frame

__version__ = "0.1.0"

__all__ = [
    "BlobMarkerEngine",
    "Detection",
    "ExtractionConfig",
    "MediaPipeEngine",
    "extract_video",
    "grayscale_normalize",
    "make_engine",
    "mask_frame",
    "__version__",
]
