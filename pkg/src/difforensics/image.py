"""Floating-point image container and per-pixel arithmetic.

Images are stored interleaved, as a ``(height, width, channels)`` float64
array. Decoded images hold values in ``[0, 1]``; difference images may be
negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, FormatError, ParameterError, ShapeError

DEFAULT_SIGMA = 9.0
DEFAULT_TEMPORAL_WINDOW = 11
DEFAULT_ZERO_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class FloatImage:
    """Immutable W x H x C image of float64 samples.

    Parameters
    ----------
    data : ndarray
        Array of shape ``(height, width, channels)`` or ``(height, width)``
        (treated as one channel). Converted to float64; a read-only view is
        kept.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError(f"image array must be 2-D or 3-D, got {arr.ndim}-D")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ShapeError(f"image must be at least 1x1, got {w}x{h}")
        if c not in (1, 3):
            raise ShapeError(f"image must have 1 or 3 channels, got {c}")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        view = arr.view()
        view.flags.writeable = False
        object.__setattr__(self, "data", view)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(width, height, channels)``."""
        return self.width, self.height, self.channels

    def __len__(self):
        return self.data.size

    def __repr__(self):
        return f"FloatImage({self.width}x{self.height}x{self.channels})"

    def copy_array(self) -> np.ndarray:
        """Writable copy of the samples."""
        return self.data.copy()

    @classmethod
    def full(cls, width: int, height: int, channels: int, value: float) -> "FloatImage":
        return cls(np.full((height, width, channels), value, dtype=np.float64))


@dataclass(frozen=True)
class AnalysisParams:
    """Parameters shared by the pair, video and forgery pipelines.

    ``sigma = 0`` disables spatial filtering. ``truncation_radius`` defaults to
    ``ceil(3 * sigma)``. ``workers`` only controls internal parallelism and
    never changes results.
    """

    sigma: float = DEFAULT_SIGMA
    truncation_radius: Optional[int] = None
    temporal_window: int = DEFAULT_TEMPORAL_WINDOW
    zero_floor: float = DEFAULT_ZERO_FLOOR
    workers: int = 1

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ParameterError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.truncation_radius is not None and self.truncation_radius < 1:
            raise ParameterError(
                f"truncation radius must be >= 1, got {self.truncation_radius}")
        if self.temporal_window < 1 or self.temporal_window % 2 == 0:
            raise ParameterError(
                f"temporal window must be odd and >= 1, got {self.temporal_window}")
        if not self.zero_floor >= 0:
            raise ParameterError(f"zero floor must be >= 0, got {self.zero_floor}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")

    @property
    def radius(self) -> int:
        if self.truncation_radius is not None:
            return int(self.truncation_radius)
        return max(1, math.ceil(3 * self.sigma))


def decode_to_float(raw, bits: int) -> FloatImage:
    """Map a decoded integer raster to ``[0, 1]`` by ``v / (2**bits - 1)``."""
    if bits not in (8, 16):
        raise FormatError(f"unsupported bit depth {bits}; expected 8 or 16")
    arr = np.asarray(raw)
    if arr.dtype.kind not in "ui":
        raise FormatError(f"raw raster must be integer typed, got {arr.dtype}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise FormatError(f"unsupported raster shape {arr.shape}; need 1 or 3 channels")
    top = (1 << bits) - 1
    if arr.size and (arr.min() < 0 or arr.max() > top):
        raise FormatError(f"raster values exceed {bits}-bit range")
    return FloatImage(arr.astype(np.float64) / top)


def check_same_shape(a: FloatImage, b: FloatImage, what: str = "images"):
    if a.shape != b.shape:
        raise ShapeError(
            f"{what} differ in shape: {a.width}x{a.height}x{a.channels} "
            f"vs {b.width}x{b.height}x{b.channels}")


def subtract(p: FloatImage, p_ref: FloatImage) -> FloatImage:
    """Difference image ``d = p - p_ref``, channel-wise and pixel-wise.

    No resizing or registration is attempted; mismatched shapes raise
    :class:`ShapeError`.
    """
    check_same_shape(p, p_ref)
    return FloatImage(p.data - p_ref.data)


def require_finite(img: FloatImage, what: str = "image"):
    if not np.isfinite(img.data).all():
        raise DataError(f"{what} contains non-finite samples")
