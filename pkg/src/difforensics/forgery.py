"""Split-based consistency check for suspected forged regions.

The suspect region (the query part) is removed from the analysis: the rest of
the image is differenced against the reference with mask-aware filtering, so
the forged pixels cannot dominate the amplification. Recovered evidence is
then compared with the query region by mean (r, g) chromaticity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, ShapeError
from .image import AnalysisParams, FloatImage, check_same_shape, subtract
from .pipeline import AmplifiedPair, amplify_split, build_kernel, masked_spatial_filter

DEFAULT_TAU = 0.15
DEFAULT_EVIDENCE_THRESHOLD = 0.5
DEFAULT_MIN_SUPPORT = 1e-4

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"
INSUFFICIENT = "insufficient-evidence"


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """Query region given either as ``rect=(x, y, w, h)`` or a boolean ``mask``."""

    rect: Optional[tuple[int, int, int, int]] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.rect is None) == (self.mask is None):
            raise ParameterError("region needs exactly one of rect or mask")
        if self.rect is not None:
            x, y, w, h = (int(v) for v in self.rect)
            if w < 1 or h < 1 or x < 0 or y < 0:
                raise ParameterError(f"invalid region rectangle {self.rect}")
            object.__setattr__(self, "rect", (x, y, w, h))

    def to_mask(self, width: int, height: int) -> np.ndarray:
        if self.rect is not None:
            x, y, w, h = self.rect
            if x + w > width or y + h > height:
                raise ParameterError(f"region {self.rect} exceeds image {width}x{height}")
            m = np.zeros((height, width), dtype=bool)
            m[y:y + h, x:x + w] = True
            return m
        m = np.asarray(self.mask)
        if m.ndim == 3:
            m = m.max(axis=2)
        if m.shape != (height, width):
            raise ShapeError(f"region mask shape {m.shape} does not match image {width}x{height}")
        m = m > 0.5 if m.dtype.kind == "f" else m.astype(bool)
        if not m.any():
            raise ParameterError("region mask is empty")
        return m


@dataclass(frozen=True, eq=False)
class SplitImage:
    """``p_prime`` with its validity mask, and the query pixels ``p_dprime``."""

    p_prime: FloatImage
    valid: np.ndarray
    p_dprime: np.ndarray  # (n_region_pixels, C)
    region: np.ndarray

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())


def split(p: FloatImage, region: RegionSpec) -> SplitImage:
    """Separate the analysis part from the query region.

    Region pixels are zeroed in ``p_prime`` and flagged invalid; every later
    filter, maximum and mean skips them.
    """
    reg = region.to_mask(p.width, p.height)
    if reg.all():
        raise ParameterError("region covers the entire image; nothing left to analyze")
    valid = ~reg
    data = p.copy_array()
    data[reg] = 0.0
    return SplitImage(FloatImage(data), valid, p.data[reg].copy(), reg)


def chromaticity(rgb: np.ndarray) -> np.ndarray:
    """Per-pixel ``(r, g) = (R, G) / (R + G + B)`` for an ``(n, 3)`` array.

    Rows with a non-positive sum are dropped.
    """
    rgb = np.asarray(rgb, dtype=np.float64).reshape(-1, 3)
    s = rgb.sum(axis=1)
    keep = s > 0
    return rgb[keep, :2] / s[keep, None]


def mean_chromaticity(rgb: np.ndarray) -> Optional[tuple[float, float]]:
    ch = chromaticity(rgb)
    if len(ch) == 0:
        return None
    r, g = ch.mean(axis=0)
    return float(r), float(g)


@dataclass(frozen=True)
class ConsistencyReport:
    evidence_chroma: Optional[tuple[float, float]]
    query_chroma: Optional[tuple[float, float]]
    chroma_distance: Optional[float]
    evidence_mask_fraction: float
    verdict: str
    degenerate: bool
    gain_plus: float
    tau: float
    evidence_threshold: float
    min_support: float

    def as_lines(self) -> list[str]:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, tuple):
                return ",".join(f"{x:.6f}" for x in v)
            if isinstance(v, bool):
                return str(v).lower()
            if isinstance(v, float):
                return f"{v:.6g}"
            return str(v)

        keys = ["verdict", "evidence_chroma", "query_chroma", "chroma_distance",
                "evidence_mask_fraction", "degenerate", "gain_plus", "tau",
                "evidence_threshold", "min_support"]
        return [f"{k}: {fmt(getattr(self, k))}" for k in keys]


@dataclass(frozen=True, eq=False)
class ForgeryResult:
    report: ConsistencyReport
    pair: AmplifiedPair
    evidence_mask: np.ndarray
    split: Optional[SplitImage]


def evidence_pair(p: FloatImage, p_ref: FloatImage, valid: Optional[np.ndarray],
                  params: AnalysisParams, backend=None) -> AmplifiedPair:
    """Amplified pair of ``p`` vs ``p_ref`` restricted to ``valid`` pixels."""
    d = subtract(p, p_ref)
    if valid is None:
        valid = np.ones((p.height, p.width), dtype=bool)
    if params.sigma > 0:
        D = masked_spatial_filter(d, build_kernel(params), valid, params.workers, backend)
    else:
        D = FloatImage(np.where(valid[:, :, None], d.data, 0.0))
    return amplify_split(D, params.zero_floor)


def forgery_check(p: FloatImage, p_ref: FloatImage, region: Optional[RegionSpec],
                  params: AnalysisParams = AnalysisParams(),
                  evidence_threshold: float = DEFAULT_EVIDENCE_THRESHOLD,
                  min_support: float = DEFAULT_MIN_SUPPORT, tau: float = DEFAULT_TAU,
                  backend=None) -> ForgeryResult:
    """Full forgery workflow; see :func:`forgery_score` for the report alone."""
    check_same_shape(p, p_ref)
    if p.channels != 3:
        raise ShapeError("forgery check needs RGB images")
    if not 0 < evidence_threshold <= 1:
        raise ParameterError(f"evidence threshold must lie in (0, 1], got {evidence_threshold}")
    if not 0 <= min_support <= 1:
        raise ParameterError(f"min support must lie in [0, 1], got {min_support}")
    if tau < 0:
        raise ParameterError(f"tau must be >= 0, got {tau}")

    if region is None:
        parts, valid, query = None, None, None
        analysed = p
    else:
        parts = split(p, region)
        valid, query, analysed = parts.valid, parts.p_dprime, parts.p_prime
    pair = evidence_pair(analysed, p_ref, valid, params, backend)

    n_valid = p.width * p.height if valid is None else int(valid.sum())
    emask = pair.d_plus.data.max(axis=2) >= evidence_threshold
    if valid is not None:
        emask &= valid
    if pair.degenerate_plus:
        emask[...] = False
    fraction = float(emask.sum()) / n_valid

    ev_chroma = mean_chromaticity(pair.d_plus.data[emask]) if emask.any() else None
    q_chroma = mean_chromaticity(query) if query is not None else None
    dist = None
    if ev_chroma is not None and q_chroma is not None:
        dist = math.dist(ev_chroma, q_chroma)

    if pair.degenerate_plus or fraction < min_support or fraction == 0 or dist is None:
        verdict = INSUFFICIENT
    elif dist > tau:
        verdict = INCONSISTENT
    else:
        verdict = CONSISTENT
    report = ConsistencyReport(ev_chroma, q_chroma, dist, fraction, verdict,
                               pair.degenerate_plus, pair.gain_plus, tau,
                               evidence_threshold, min_support)
    return ForgeryResult(report, pair, emask, parts)


def forgery_score(p: FloatImage, p_ref: FloatImage, region: Optional[RegionSpec],
                  params: AnalysisParams = AnalysisParams(),
                  evidence_threshold: float = DEFAULT_EVIDENCE_THRESHOLD,
                  min_support: float = DEFAULT_MIN_SUPPORT,
                  tau: float = DEFAULT_TAU, backend=None) -> ConsistencyReport:
    return forgery_check(p, p_ref, region, params, evidence_threshold,
                         min_support, tau, backend).report
