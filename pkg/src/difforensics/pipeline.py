"""Single-pair analysis: Gaussian spatial filtering and signed amplification.

The pipeline is ``d = p - p_ref``, ``D = d * G_sigma`` (separable, mirror
boundary, per channel), then ``D+ = A+ max(D, 0)`` and ``D- = A- |min(D, 0)|``
with the gains chosen so that each output peaks at exactly 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .errors import DataError, ParameterError, ShapeError
from .image import AnalysisParams, FloatImage, require_finite, subtract


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    """Truncated, normalized 1-D Gaussian used for both axes."""

    sigma: float
    radius: int
    weights_1d: np.ndarray

    @property
    def taps(self) -> int:
        return len(self.weights_1d)

    def sum_squares_2d(self) -> float:
        """Sum of squared weights of the equivalent 2-D kernel."""
        return float(np.sum(self.weights_1d ** 2)) ** 2

    def dense_2d(self) -> np.ndarray:
        return np.outer(self.weights_1d, self.weights_1d)


def build_kernel(params: AnalysisParams) -> GaussianKernel:
    if params.sigma <= 0:
        raise ParameterError(f"a Gaussian kernel needs sigma > 0, got {params.sigma}")
    r = params.radius
    j = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(j * j) / (2.0 * params.sigma ** 2))
    w /= w.sum()
    w.flags.writeable = False
    return GaussianKernel(float(params.sigma), r, w)


def mirror_indices(n: int, radius: int) -> np.ndarray:
    """Source index for each padded position ``-radius .. n + radius - 1``.

    Symmetric (edge-repeating) reflection, applied periodically so that radii
    larger than the image are still well defined.
    """
    t = np.arange(-radius, n + radius)
    m = np.mod(t, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m).astype(np.intp)


def _filter_array(arr: np.ndarray, kernel: GaussianKernel, workers: int,
                  backend: Optional[str]) -> np.ndarray:
    kern = _backend.get_kernels(backend)
    h, w, _ = arr.shape
    weights = np.ascontiguousarray(kernel.weights_1d, dtype=np.float64)
    src = np.ascontiguousarray(arr, dtype=np.float64)
    tmp = np.empty_like(src)
    kern.convolve_axis(src, weights, mirror_indices(w, kernel.radius), 1, tmp, workers)
    out = np.empty_like(src)
    kern.convolve_axis(tmp, weights, mirror_indices(h, kernel.radius), 0, out, workers)
    return out


def spatial_filter(d: FloatImage, kernel: GaussianKernel, workers: int = 1,
                   backend: Optional[str] = None) -> FloatImage:
    """Convolve each channel of ``d`` with the separable Gaussian ``kernel``.

    Boundaries are handled by symmetric mirror reflection. The result is
    bit-identical for any ``workers`` count and either backend.
    """
    require_finite(d, "difference image")
    return FloatImage(_filter_array(d.data, kernel, workers, backend))


def masked_spatial_filter(d: FloatImage, kernel: GaussianKernel, valid: np.ndarray,
                          workers: int = 1, backend: Optional[str] = None) -> FloatImage:
    """Normalized convolution over the valid pixels only.

    Computes ``conv(d * m) / conv(m)`` per pixel, so invalid pixels contribute
    nothing and the remaining weights are renormalized. Invalid pixels are
    zero in the output. An all-valid mask reduces to :func:`spatial_filter`.
    """
    require_finite(d, "difference image")
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (d.height, d.width):
        raise ShapeError(f"mask shape {valid.shape} does not match image "
                         f"{d.height}x{d.width}")
    if valid.all():
        return spatial_filter(d, kernel, workers, backend)
    m = valid.astype(np.float64)[:, :, None]
    num = _filter_array(d.data * m, kernel, workers, backend)
    den = _filter_array(m, kernel, workers, backend)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=(den > 0) & valid[:, :, None])
    return FloatImage(out)


@dataclass(frozen=True, eq=False)
class AmplifiedPair:
    """Positive and negative amplified difference images.

    ``d_minus`` holds magnitudes (the underlying differences are <= 0, see
    ``minus_sign``). A degenerate side is all zeros with gain 0.
    """

    d_plus: FloatImage
    d_minus: FloatImage
    gain_plus: float
    gain_minus: float
    degenerate_plus: bool
    degenerate_minus: bool
    minus_sign: int = -1

    def argmax_plus(self):
        """``(x, y, channel)`` of the largest D+ sample, or None if degenerate."""
        return None if self.degenerate_plus else _argmax(self.d_plus)

    def argmax_minus(self):
        return None if self.degenerate_minus else _argmax(self.d_minus)


def _argmax(img: FloatImage):
    y, x, c = np.unravel_index(int(np.argmax(img.data)), img.data.shape)
    return int(x), int(y), int(c)


def _normalize_side(part: np.ndarray, zero_floor: float):
    peak = float(part.max())
    if peak <= zero_floor:
        return np.zeros_like(part), 0.0, True
    return part / peak, 1.0 / peak, False


def amplify_split(D: FloatImage, zero_floor: float = 1e-9) -> AmplifiedPair:
    """Split ``D`` by sign and rescale each side so its maximum equals 1.

    One gain per side is shared by all channels, which keeps hue intact. A
    side whose extreme magnitude is at or below ``zero_floor`` is returned
    as zeros with its degenerate flag set rather than blown up to full scale.
    """
    if not np.isfinite(D.data).all():
        raise DataError("filtered difference image contains non-finite samples")
    plus, gp, dp = _normalize_side(np.maximum(D.data, 0.0), zero_floor)
    minus, gm, dm = _normalize_side(np.maximum(-D.data, 0.0), zero_floor)
    return AmplifiedPair(FloatImage(plus), FloatImage(minus), gp, gm, dp, dm)


def filter_difference(d: FloatImage, params: AnalysisParams,
                      backend: Optional[str] = None) -> FloatImage:
    """Spatial stage on its own; identity when ``params.sigma == 0``."""
    if params.sigma == 0:
        require_finite(d, "difference image")
        return d
    return spatial_filter(d, build_kernel(params), params.workers, backend)


def analyze_pair(p: FloatImage, p_ref: FloatImage, params: AnalysisParams = AnalysisParams(),
                 backend: Optional[str] = None) -> AmplifiedPair:
    """Subtract, filter and amplify a scene image against its reference."""
    D = filter_difference(subtract(p, p_ref), params, backend)
    return amplify_split(D, params.zero_floor)


def filtered_noise_factor(kernel: GaussianKernel) -> float:
    """Std of filtered unit-variance i.i.d. noise, ``sqrt(sum w^2)``."""
    return math.sqrt(kernel.sum_squares_2d())
