"""Fingerspelling detection, alignment, and sign-suggestion toolkit.

Works on pose-keypoint representations of sign-language video: detects the
frame spans where the signer fingerspells, aligns each span to the English
word it spells, and looks up candidate lexical signs for those words.
"""

__version__ = "0.1.0"

from .data_model import (
    AlignedSpan,
    FingerspellingAnnotation,
    FoldPlan,
    FrameSpan,
    VideoRecord,
)
from .errors import FingerspellError, ModelError, ParseError, ValidationError

__all__ = [
    "AlignedSpan",
    "FingerspellingAnnotation",
    "FoldPlan",
    "FrameSpan",
    "VideoRecord",
    "FingerspellError",
    "ModelError",
    "ParseError",
    "ValidationError",
    "__version__",
]
