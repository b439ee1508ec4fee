"""Synthetic scenes with known, sub-perceptual evidence fields.

Scenes are a smooth base (constant, gradient or value-noise texture) plus
cosine-tapered reflection (+) or occlusion (-) fields, with independent
Gaussian sensor noise on every capture. Noise comes from counter-based
Philox streams keyed by ``(seed, stream id)``, so any frame can be rebuilt
alone and all outputs are reproducible.

Config file format (``key: value`` lines, ``#`` comments, ``evidence`` may
repeat)::

    width: 256
    height: 192
    base: textured            # constant | linear-gradient | textured
    base_level: 0.4
    base_contrast: 0.1
    texture_scale: 32
    noise_std: 1/255
    seed: 7
    frames: 120               # optional, stream mode
    entry_frame: 60           # optional, stream mode
    evidence: reflection ellipse cx=128 cy=96 rx=40 ry=30 peak=2/255 chroma=0.2,0.6,0.2 taper=0.5

Numbers accept fractions such as ``2/255``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError, ShapeError
from .forgery import mean_chromaticity
from .image import FloatImage
from .pipeline import AmplifiedPair
from .video import FrameStream, LazyFrames

REFLECTION = "reflection"
OCCLUSION = "occlusion"
MAX_PEAK = 8 / 255
BASES = ("constant", "linear-gradient", "textured")

_STREAM_TEXTURE = 0
_STREAM_REFERENCE = 1
_STREAM_SCENE = 2
_STREAM_FRAME0 = 1 << 20


@dataclass(frozen=True)
class EvidenceField:
    """Smooth additive field with a flat core and a cosine-tapered rim.

    ``shape`` is ``ellipse`` (radial taper) or ``rect`` (separable taper);
    ``(cx, cy)`` is the center and ``(rx, ry)`` the half-extents in pixels.
    ``taper`` is the fraction of the half-extent covered by the rim. The
    channel with the largest ``chroma`` component reaches ``peak``.
    """

    kind: str = REFLECTION
    shape: str = "ellipse"
    cx: float = 0.0
    cy: float = 0.0
    rx: float = 10.0
    ry: float = 10.0
    peak: float = 2 / 255
    chroma: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    taper: float = 0.5

    def __post_init__(self):
        if self.kind not in (REFLECTION, OCCLUSION):
            raise ParameterError(f"unknown evidence kind {self.kind!r}")
        if self.shape not in ("ellipse", "rect"):
            raise ParameterError(f"unknown evidence shape {self.shape!r}")
        if self.rx <= 0 or self.ry <= 0:
            raise ParameterError("evidence half-extents must be positive")
        if not 0 < self.peak <= MAX_PEAK * (1 + 1e-12):
            raise ParameterError(f"peak amplitude must lie in (0, 8/255], got {self.peak}")
        if not 0 < self.taper <= 1:
            raise ParameterError(f"taper must lie in (0, 1], got {self.taper}")
        c = np.asarray(self.chroma, dtype=np.float64)
        if c.shape != (3,) or (c < 0).any() or c.sum() <= 0:
            raise ParameterError(f"chroma must be 3 nonnegative values, got {self.chroma}")
        object.__setattr__(self, "chroma", tuple(float(v) for v in c / c.sum()))

    @property
    def sign(self) -> int:
        return 1 if self.kind == REFLECTION else -1

    def profile(self, width: int, height: int) -> np.ndarray:
        """Unit-peak ``(height, width)`` profile; zero outside the support."""
        y, x = np.mgrid[0:height, 0:width].astype(np.float64)
        u = (x - self.cx) / self.rx
        v = (y - self.cy) / self.ry
        if self.shape == "ellipse":
            return _taper(np.hypot(u, v), self.taper)
        return _taper(np.abs(u), self.taper) * _taper(np.abs(v), self.taper)

    def values(self, width: int, height: int, channels: int = 3) -> np.ndarray:
        prof = self.profile(width, height)
        if channels == 1:
            scale = np.ones(1)
        else:
            c = np.asarray(self.chroma)
            scale = c / c.max()
        return self.sign * self.peak * prof[:, :, None] * scale[None, None, :]


def _taper(u: np.ndarray, taper: float) -> np.ndarray:
    core = 1.0 - taper
    t = np.clip((u - core) / taper, 0.0, 1.0)
    out = 0.5 * (1.0 + np.cos(np.pi * t))
    out[u >= 1.0] = 0.0
    return out


@dataclass(frozen=True)
class SceneSpec:
    width: int = 256
    height: int = 256
    base: str = "textured"
    base_level: float = 0.4
    base_contrast: float = 0.1
    texture_scale: int = 32
    channels: int = 3
    evidence: tuple[EvidenceField, ...] = ()
    noise_std: float = 1 / 255
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("scene dimensions must be positive")
        if self.base not in BASES:
            raise ParameterError(f"unknown base {self.base!r}; choose from {BASES}")
        if self.channels not in (1, 3):
            raise ParameterError("scene must have 1 or 3 channels")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be >= 0")
        if self.texture_scale < 1:
            raise ParameterError("texture_scale must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "evidence", tuple(self.evidence))


@dataclass(eq=False)
class SyntheticScene:
    p: FloatImage
    p_ref: FloatImage
    truth: list[np.ndarray]
    spec: SceneSpec

    @property
    def truth_union(self) -> np.ndarray:
        if not self.truth:
            return np.zeros((self.spec.height, self.spec.width), dtype=bool)
        return np.logical_or.reduce(self.truth)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(stream << 64) | seed))


def _base(spec: SceneSpec) -> np.ndarray:
    shape = (spec.height, spec.width, spec.channels)
    if spec.base == "constant":
        return np.full(shape, spec.base_level)
    if spec.base == "linear-gradient":
        ramp = np.linspace(-0.5, 0.5, spec.width) if spec.width > 1 else np.zeros(1)
        return np.broadcast_to(spec.base_level + spec.base_contrast * ramp[None, :, None],
                               shape).copy()
    # value noise: random lattice, smoothstep-bilinear interpolation, per channel
    s = spec.texture_scale
    gh, gw = spec.height // s + 2, spec.width // s + 2
    lattice = _rng(spec.seed, _STREAM_TEXTURE).random((gh, gw, spec.channels)) - 0.5
    ys = np.arange(spec.height) / s
    xs = np.arange(spec.width) / s
    y0, x0 = ys.astype(int), xs.astype(int)
    ty, tx = ys - y0, xs - x0
    ty, tx = ty * ty * (3 - 2 * ty), tx * tx * (3 - 2 * tx)
    ty, tx = ty[:, None, None], tx[None, :, None]
    a = lattice[y0][:, x0]
    b = lattice[y0][:, x0 + 1]
    c = lattice[y0 + 1][:, x0]
    d = lattice[y0 + 1][:, x0 + 1]
    v = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty
    return spec.base_level + spec.base_contrast * v


def _clean_images(spec: SceneSpec):
    base = _base(spec)
    fields = [f.values(spec.width, spec.height, spec.channels) for f in spec.evidence]
    scene = base.copy()
    for f in fields:
        scene += f
    for name, arr in (("base", base), ("base + evidence", scene)):
        if arr.min() < 0 or arr.max() > 1:
            raise ParameterError(f"scene spec rejected: {name} leaves [0, 1] "
                                 f"(range {arr.min():.4g}..{arr.max():.4g})")
    truth = [f.profile(spec.width, spec.height) > 0 for f in spec.evidence]
    return base, scene, truth


def _noisy(clean: np.ndarray, spec: SceneSpec, stream: int) -> FloatImage:
    if spec.noise_std == 0:
        return FloatImage(clean)
    noise = _rng(spec.seed, stream).standard_normal(clean.shape) * spec.noise_std
    return FloatImage(np.clip(clean + noise, 0.0, 1.0))


def generate_pair(spec: SceneSpec) -> SyntheticScene:
    """Reference ``base + noise`` and scene ``base + fields + noise``."""
    base, scene, truth = _clean_images(spec)
    return SyntheticScene(_noisy(scene, spec, _STREAM_SCENE),
                          _noisy(base, spec, _STREAM_REFERENCE), truth, spec)


def generate_stream(spec: SceneSpec, frames: int, entry_frame: int):
    """Frames ``0..frames-1``; evidence present from ``entry_frame`` on.

    Each frame has its own noise draw and is synthesized on access, so long
    streams need not be resident. ``entry_frame == frames`` gives a clip with
    no evidence at all.
    """
    if frames < 1:
        raise ParameterError("stream needs at least one frame")
    if not 0 <= entry_frame <= frames:
        raise ParameterError(f"entry frame {entry_frame} outside 0..{frames}")
    base, scene, truth = _clean_images(spec)

    def load(k):
        clean = scene if k >= entry_frame else base
        return _noisy(clean, spec, _STREAM_FRAME0 + k)

    stream = FrameStream(list(range(frames)), LazyFrames(frames, load))
    return stream, truth


@dataclass(frozen=True)
class RecoveryMetrics:
    iou: float
    argmax_hit: bool
    chroma_error: Optional[float]

    def as_lines(self) -> list[str]:
        ce = "none" if self.chroma_error is None else f"{self.chroma_error:.6g}"
        return [f"iou: {self.iou:.6g}", f"argmax_hit: {str(self.argmax_hit).lower()}",
                f"chroma_error: {ce}"]


def evaluate_recovery(pair: AmplifiedPair, truth_mask: np.ndarray, threshold: float = 0.5,
                      chroma: Optional[Sequence[float]] = None) -> RecoveryMetrics:
    """Score D+ against a ground-truth support mask.

    ``chroma`` is the injected RGB direction; without it ``chroma_error`` is
    None.
    """
    truth = np.asarray(truth_mask, dtype=bool)
    if truth.ndim == 3:
        truth = truth.any(axis=2)
    dp = pair.d_plus
    if truth.shape != (dp.height, dp.width):
        raise ShapeError(f"truth mask shape {truth.shape} does not match "
                         f"D+ {dp.height}x{dp.width}")
    if not truth.any():
        raise ParameterError("truth mask is empty")
    if pair.degenerate_plus:
        detected = np.zeros_like(truth)
    else:
        detected = dp.data.max(axis=2) >= threshold
    union = np.logical_or(detected, truth).sum()
    iou = float(np.logical_and(detected, truth).sum() / union)
    hit = False
    if not pair.degenerate_plus:
        x, y, _ = pair.argmax_plus()
        hit = bool(truth[y, x])
    err = None
    if chroma is not None and dp.channels == 3:
        c = np.asarray(chroma, dtype=np.float64)
        c = c / c.sum()
        got = mean_chromaticity(dp.data[truth])
        if got is not None:
            err = math.dist(got, (c[0], c[1]))
    return RecoveryMetrics(iou, hit, err)


# -- config files -------------------------------------------------------------

def parse_number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"not a number: {text!r}") from None


def parse_evidence(text: str) -> EvidenceField:
    """Parse ``<kind> <shape> key=value ...`` into an :class:`EvidenceField`."""
    tokens = text.split()
    if len(tokens) < 2:
        raise ParameterError(f"evidence line needs kind and shape: {text!r}")
    kwargs: dict = {"kind": tokens[0], "shape": tokens[1]}
    for tok in tokens[2:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParameterError(f"expected key=value in evidence line, got {tok!r}")
        if key == "chroma":
            kwargs[key] = tuple(parse_number(v) for v in val.split(","))
        elif key in ("cx", "cy", "rx", "ry", "peak", "taper"):
            kwargs[key] = parse_number(val)
        else:
            raise ParameterError(f"unknown evidence key {key!r}")
    return EvidenceField(**kwargs)


_INT_KEYS = {"width", "height", "texture_scale", "channels", "seed", "frames", "entry_frame"}
_FLOAT_KEYS = {"base_level", "base_contrast", "noise_std"}


def parse_scene_config(text: str):
    """Return ``(SceneSpec, stream_options)`` from config text.

    ``stream_options`` holds ``frames`` / ``entry_frame`` when present.
    """
    kwargs: dict = {}
    evidence = []
    stream: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition(":")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ParameterError(f"line {lineno}: expected 'key: value'")
        if key == "evidence":
            evidence.append(parse_evidence(val))
        elif key == "base":
            kwargs["base"] = val
        elif key in _INT_KEYS:
            num = parse_number(val)
            if num != int(num):
                raise ParameterError(f"line {lineno}: {key} must be an integer")
            (stream if key in ("frames", "entry_frame") else kwargs)[key] = int(num)
        elif key in _FLOAT_KEYS:
            kwargs[key] = parse_number(val)
        else:
            raise ParameterError(f"line {lineno}: unknown key {key!r}")
    return SceneSpec(evidence=tuple(evidence), **kwargs), stream


def format_scene_config(spec: SceneSpec, **stream) -> str:
    lines = [f"width: {spec.width}", f"height: {spec.height}", f"base: {spec.base}",
             f"base_level: {spec.base_level!r}", f"base_contrast: {spec.base_contrast!r}",
             f"texture_scale: {spec.texture_scale}", f"channels: {spec.channels}",
             f"noise_std: {spec.noise_std!r}", f"seed: {spec.seed}"]
    for key, val in stream.items():
        lines.append(f"{key}: {val}")
    for f in spec.evidence:
        chroma = ",".join(repr(c) for c in f.chroma)
        lines.append(f"evidence: {f.kind} {f.shape} cx={f.cx!r} cy={f.cy!r} rx={f.rx!r} "
                     f"ry={f.ry!r} peak={f.peak!r} chroma={chroma} taper={f.taper!r}")
    return "\n".join(lines) + "\n"


def with_seed(spec: SceneSpec, seed: int) -> SceneSpec:
    return replace(spec, seed=seed)
