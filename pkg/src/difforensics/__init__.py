"""Differential imaging forensics.

Compare a scene image with a reference baseline of the same view, filter
the difference and amplify its positive and negative parts separately so
that faint reflections and occlusions become visible.
"""
from ._backend import BACKEND
from .errors import DataError, DifForensicsError, FormatError, ParameterError, ShapeError
from .forgery import ConsistencyReport, RegionSpec, forgery_check, forgery_score, split
from .image import AnalysisParams, FloatImage, decode_to_float, subtract
from .io import read_float_dump, read_image, write_float_dump, write_image
from .pipeline import (AmplifiedPair, GaussianKernel, amplify_split, analyze_pair,
                       build_kernel, masked_spatial_filter, spatial_filter)
from .synth import (EvidenceField, SceneSpec, evaluate_recovery, generate_pair,
                    generate_stream)
from .video import (FrameStream, ReferenceSpec, VideoResult, analyze_video,
                    temporal_average, temporal_filter)

__version__ = "0.1.0"
