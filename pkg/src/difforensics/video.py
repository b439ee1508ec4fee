"""Video analysis against a temporal-average (or external, or lagged) reference.

Per analyzed frame ``i``: ``d_i = p_i - p_ref``; the ``d`` sequence is box
filtered in time (centered window, shrunk symmetrically near the ends of the
analyzed range), then each frame is spatially filtered and amplified like a
single pair. The energy signal is the mean of ``max(D_i, 0)`` before
amplification, so it is comparable across frames.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import ParameterError, ShapeError
from .image import AnalysisParams, FloatImage, check_same_shape, subtract
from .pipeline import AmplifiedPair, amplify_split, filter_difference

FRAME_RANGE_AVERAGE = "frame-range-average"
EXTERNAL_IMAGE = "external-image"
ADJACENT_FRAME = "adjacent-frame"


class LazyFrames(Sequence):
    """Sequence of frames loaded on access through ``loader(i)``."""

    def __init__(self, count: int, loader: Callable[[int], FloatImage]):
        self._count = count
        self._loader = loader

    def __len__(self):
        return self._count

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self._count))]
        if i < 0:
            i += self._count
        if not 0 <= i < self._count:
            raise IndexError(i)
        return self._loader(i)


@dataclass(eq=False)
class FrameStream:
    """Ordered frames with strictly increasing integer indices.

    ``frames`` may be a list or any lazy sequence; shape agreement is checked
    eagerly for lists and on access otherwise.
    """

    indices: Sequence[int]
    frames: Sequence[FloatImage]
    fps: Optional[float] = None

    def __post_init__(self):
        self.indices = [int(i) for i in self.indices]
        if len(self.indices) != len(self.frames):
            raise ParameterError("frame count and index count differ")
        if not self.indices:
            raise ParameterError("frame stream is empty")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ParameterError("frame indices must be strictly increasing")
        self._pos = {idx: k for k, idx in enumerate(self.indices)}
        self._shape = None
        if isinstance(self.frames, (list, tuple)):
            for f in self.frames:
                self._check(f)

    @classmethod
    def from_frames(cls, frames: Sequence[FloatImage], start: int = 0, fps=None):
        return cls(list(range(start, start + len(frames))), list(frames), fps)

    def _check(self, frame: FloatImage):
        if self._shape is None:
            self._shape = frame.shape
        elif frame.shape != self._shape:
            raise ShapeError(f"frame shape {frame.shape} differs from stream shape {self._shape}")
        return frame

    def __len__(self):
        return len(self.indices)

    @property
    def shape(self):
        if self._shape is None:
            self._check(self.frames[0])
        return self._shape

    def has(self, index: int) -> bool:
        return index in self._pos

    def frame(self, index: int) -> FloatImage:
        try:
            k = self._pos[index]
        except KeyError:
            raise ParameterError(f"frame {index} is not in the stream") from None
        return self._check(self.frames[k])

    def indices_in(self, start: int, end: int) -> list[int]:
        """Indices within ``[start, end]``; both ends must lie in the stream span."""
        if end < start:
            raise ParameterError(f"empty frame range {start}:{end}")
        if start < self.indices[0] or end > self.indices[-1]:
            raise ParameterError(
                f"frame range {start}:{end} outside stream {self.indices[0]}:{self.indices[-1]}")
        sel = [i for i in self.indices if start <= i <= end]
        if not sel:
            raise ParameterError(f"no frames in range {start}:{end}")
        return sel


@dataclass(frozen=True)
class ReferenceSpec:
    mode: str = FRAME_RANGE_AVERAGE
    range: Optional[tuple[int, int]] = None
    image: Optional[FloatImage] = None
    lag: int = 1

    def __post_init__(self):
        if self.mode not in (FRAME_RANGE_AVERAGE, EXTERNAL_IMAGE, ADJACENT_FRAME):
            raise ParameterError(f"unknown reference mode {self.mode!r}")
        if self.mode == FRAME_RANGE_AVERAGE:
            if self.range is None or self.range[1] < self.range[0]:
                raise ParameterError("frame-range-average needs a range with end >= start")
        if self.mode == EXTERNAL_IMAGE and self.image is None:
            raise ParameterError("external-image reference needs an image")
        if self.lag < 1:
            raise ParameterError(f"lag must be >= 1, got {self.lag}")

    @classmethod
    def frame_range(cls, start: int, end: int):
        return cls(FRAME_RANGE_AVERAGE, range=(int(start), int(end)))

    @classmethod
    def external(cls, image: FloatImage):
        return cls(EXTERNAL_IMAGE, image=image)

    @classmethod
    def adjacent(cls, lag: int = 1):
        return cls(ADJACENT_FRAME, lag=int(lag))


@dataclass(eq=False)
class VideoResult:
    frame_indices: list[int]
    per_frame: list[AmplifiedPair]
    energy: list[float]
    reference_used: Optional[FloatImage]
    params: AnalysisParams = field(default_factory=AnalysisParams)


def temporal_average(stream: FrameStream, frame_range: tuple[int, int]) -> FloatImage:
    """Per-sample mean of the frames whose index lies in ``[start, end]``."""
    sel = stream.indices_in(*frame_range)
    if len(sel) == 1:
        return stream.frame(sel[0])
    total = np.zeros(stream.frame(sel[0]).data.shape)
    for i in sel:
        total += stream.frame(i).data
    return FloatImage(total / len(sel))


def _box_stream(items: Iterable[np.ndarray], n: int, window: int) -> Iterator[np.ndarray]:
    """Centered box mean over a stream of ``n`` arrays, window shrunk at ends.

    At most ``window`` inputs are held at once.
    """
    half = window // 2
    buf: deque = deque()
    first = 0  # position of buf[0]
    it = iter(items)
    fed = 0
    for i in range(n):
        h = min(half, i, n - 1 - i)
        while fed <= i + h:
            buf.append(next(it))
            fed += 1
        while first < i - h:
            buf.popleft()
            first += 1
        lo = i - h - first
        acc = np.zeros_like(buf[lo])
        for k in range(lo, lo + 2 * h + 1):
            acc += buf[k]
        yield acc / (2 * h + 1)


def temporal_filter(d_seq: Sequence[FloatImage], window: int) -> list[FloatImage]:
    """Centered uniform (box) mean over time.

    Near the ends the window shrinks symmetrically rather than padding, so
    output ``i`` averages ``2h+1`` frames with ``h = min(window//2, i, n-1-i)``.
    """
    n = len(d_seq)
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"temporal window must be odd and >= 1, got {window}")
    if window > n:
        raise ParameterError(f"temporal window {window} exceeds sequence length {n}")
    if n:
        for f in d_seq[1:]:
            check_same_shape(d_seq[0], f, "difference frames")
    return [FloatImage(a) for a in _box_stream((f.data for f in d_seq), n, window)]


def _resolve_reference(stream: FrameStream, ref: ReferenceSpec) -> Optional[FloatImage]:
    if ref.mode == FRAME_RANGE_AVERAGE:
        return temporal_average(stream, ref.range)
    if ref.mode == EXTERNAL_IMAGE:
        if ref.image.shape != stream.shape:
            raise ShapeError(f"reference image shape {ref.image.shape} does not match "
                             f"stream shape {stream.shape}")
        return ref.image
    return None


def iter_video(stream: FrameStream, ref: ReferenceSpec, params: AnalysisParams = AnalysisParams(),
               analyze_range: Optional[tuple[int, int]] = None, backend: Optional[str] = None):
    """Yield ``(frame_index, AmplifiedPair, energy)`` in frame order.

    Streaming form of :func:`analyze_video`; keeps O(window) frames resident.
    The first item yielded is the resolved reference (None in adjacent mode)
    so callers can record it.
    """
    if analyze_range is None:
        analyze_range = (stream.indices[0], stream.indices[-1])
    sel = stream.indices_in(*analyze_range)
    if params.temporal_window > len(sel):
        raise ParameterError(f"temporal window {params.temporal_window} exceeds the "
                             f"{len(sel)} analyzed frames")
    reference = _resolve_reference(stream, ref)
    if ref.mode == ADJACENT_FRAME:
        missing = [i for i in sel if not stream.has(i - ref.lag)]
        if missing:
            raise ParameterError(f"adjacent reference frame {missing[0] - ref.lag} "
                                 f"(lag {ref.lag}) is not in the stream")

    def diffs():
        for i in sel:
            base = stream.frame(i - ref.lag) if reference is None else reference
            yield subtract(stream.frame(i), base).data

    yield reference
    for i, avg in zip(sel, _box_stream(diffs(), len(sel), params.temporal_window)):
        D = filter_difference(FloatImage(avg), params, backend)
        energy = float(np.maximum(D.data, 0.0).mean())
        yield i, amplify_split(D, params.zero_floor), energy


def analyze_video(stream: FrameStream, ref: ReferenceSpec, params: AnalysisParams = AnalysisParams(),
                  analyze_range: Optional[tuple[int, int]] = None,
                  backend: Optional[str] = None) -> VideoResult:
    """Run the video pipeline over ``analyze_range`` (default: whole stream)."""
    gen = iter_video(stream, ref, params, analyze_range, backend)
    reference = next(gen)
    idx, pairs, energy = [], [], []
    for i, pair, e in gen:
        idx.append(i)
        pairs.append(pair)
        energy.append(e)
    return VideoResult(idx, pairs, energy, reference, params)


def change_point(energy: Sequence[float], frame_indices: Optional[Sequence[int]] = None) -> int:
    """Frame index with the largest energy increase from its predecessor."""
    e = np.asarray(energy, dtype=np.float64)
    if len(e) < 2:
        raise ParameterError("need at least two energy samples")
    k = int(np.argmax(np.diff(e))) + 1
    return int(frame_indices[k]) if frame_indices is not None else k
