"""Image, float-dump, manifest and report files.

Supported rasters: PNG (8/16-bit grey or RGB, alpha dropped) and binary
PGM/PPM (``P5``/``P6``, maxval 255 or 65535). Lossless analysis results go
through the float dump format::

    DIFD <W> <H> <C>\\n
    <W*H*C little-endian float32, row-major, channels interleaved>
"""
from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import png

from .errors import DataError, FormatError, ParameterError
from .image import FloatImage, decode_to_float
from .video import FrameStream, LazyFrames

DUMP_MAGIC = b"DIFD"
_DUMP_HEADER = re.compile(rb"DIFD (\d+) (\d+) (\d+)\n")


# -- PNM ----------------------------------------------------------------------

def _pnm_tokens(buf: bytes, count: int):
    """First ``count`` header tokens and the offset of the raster data."""
    tokens, pos, n = [], 0, len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise FormatError("malformed PNM header")
    return tokens, pos + 1


def _read_pnm(buf: bytes) -> FloatImage:
    (magic, w, h, maxval), off = _pnm_tokens(buf, 4)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM type {magic!r}; only binary P5/P6")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-numeric PNM header field") from None
    if maxval == 255:
        bits, dtype = 8, np.uint8
    elif maxval == 65535:
        bits, dtype = 16, np.dtype(">u2")
    else:
        raise FormatError(f"unsupported PNM maxval {maxval}; need 255 or 65535")
    c = 3 if magic == b"P6" else 1
    need = w * h * c * np.dtype(dtype).itemsize
    if w < 1 or h < 1 or len(buf) - off < need:
        raise FormatError("PNM raster is truncated or empty")
    raw = np.frombuffer(buf, dtype=dtype, count=w * h * c, offset=off).reshape(h, w, c)
    return decode_to_float(raw.astype(np.uint16 if bits == 16 else np.uint8), bits)


def _write_pnm(path, q: np.ndarray, depth: int):
    h, w, c = q.shape
    magic = b"P6" if c == 3 else b"P5"
    maxval = (1 << depth) - 1
    payload = q.astype(">u2" if depth == 16 else np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n%d\n" % (magic, w, h, maxval))
        fh.write(payload)


# -- PNG ----------------------------------------------------------------------

def _read_png(path) -> FloatImage:
    try:
        w, h, rows, info = png.Reader(filename=str(path)).asDirect()
        planes = info["planes"]
        bits = info["bitdepth"]
        dtype = np.uint16 if bits > 8 else np.uint8
        arr = np.vstack([np.asarray(r, dtype=dtype) for r in rows])
    except png.Error as exc:
        raise FormatError(f"cannot decode PNG {path}: {exc}") from None
    if bits not in (8, 16):
        raise FormatError(f"unsupported PNG bit depth {bits}")
    arr = arr.reshape(h, w, planes)
    if planes == 2:
        arr = arr[:, :, :1]
    elif planes == 4:
        arr = arr[:, :, :3]
    return decode_to_float(arr, bits)


def _write_png(path, q: np.ndarray, depth: int):
    h, w, c = q.shape
    writer = png.Writer(w, h, greyscale=(c == 1), bitdepth=depth, compression=6)
    rows = q.reshape(h, w * c).astype(np.uint16 if depth == 16 else np.uint8)
    with open(path, "wb") as fh:
        writer.write(fh, rows)


# -- public image API ----------------------------------------------------------

def read_image(path) -> FloatImage:
    """Decode a PNG, PGM/PPM or float dump into a :class:`FloatImage`."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from None
    if head.startswith(b"\x89PNG"):
        return _read_png(path)
    if head[:2] in (b"P5", b"P6"):
        return _read_pnm(path.read_bytes())
    if head.startswith(DUMP_MAGIC):
        return read_float_dump(path)
    raise FormatError(f"unrecognized image format: {path}")


def quantize(img: FloatImage, depth: int) -> np.ndarray:
    """Round ``v * (2**depth - 1)`` half away from zero; values must be in [0, 1]."""
    if depth not in (8, 16):
        raise ParameterError(f"unsupported output depth {depth}")
    data = img.data
    if not np.isfinite(data).all() or data.min() < 0 or data.max() > 1:
        raise DataError("image samples outside [0, 1] cannot be written as a raster")
    top = (1 << depth) - 1
    return np.floor(data * top + 0.5).astype(np.uint32)


def write_image(img: FloatImage, path, depth: int = 8):
    """Write by extension: ``.png``, ``.pgm``/``.ppm`` (or ``.pnm``), ``.difd``."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".difd":
        write_float_dump(img, path)
        return
    q = quantize(img, depth)
    if ext == ".png":
        _write_png(path, q, depth)
    elif ext in (".pgm", ".ppm", ".pnm"):
        if ext == ".pgm" and img.channels != 1 or ext == ".ppm" and img.channels != 3:
            raise FormatError(f"{ext} cannot hold {img.channels}-channel images")
        _write_pnm(path, q, depth)
    else:
        raise FormatError(f"unsupported output extension {ext!r}")


def write_mask(mask: np.ndarray, path):
    """Write a boolean mask as an 8-bit grey PNG (0 / 255)."""
    m = np.asarray(mask, dtype=bool)
    write_image(FloatImage(m.astype(np.float64)), path, 8)


# -- float dumps ---------------------------------------------------------------

def write_float_dump(img: FloatImage, path):
    h, w, c = img.data.shape
    data = img.data.astype("<f4")
    if not np.isfinite(data).all():
        raise DataError("float dump requires finite samples representable as float32")
    with open(path, "wb") as fh:
        fh.write(b"DIFD %d %d %d\n" % (w, h, c))
        fh.write(data.tobytes())


def read_float_dump(path) -> FloatImage:
    buf = Path(path).read_bytes()
    m = _DUMP_HEADER.match(buf)
    if not m:
        raise FormatError(f"{path}: missing or malformed DIFD header")
    w, h, c = (int(g) for g in m.groups())
    payload = buf[m.end():]
    if len(payload) != 4 * w * h * c:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, "
                          f"header implies {4 * w * h * c}")
    if w < 1 or h < 1 or c not in (1, 3):
        raise FormatError(f"{path}: invalid dimensions {w}x{h}x{c}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    return FloatImage(arr.astype(np.float64))


# -- manifests -----------------------------------------------------------------

def read_manifest(path) -> tuple[list[int], list[Path], Optional[float]]:
    """Parse ``index<TAB>path`` lines; ``# fps: <value>`` sets the frame rate.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from None
    indices, files, fps = [], [], None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, val = stripped[1:].partition(":")
            if key.strip().lower() == "fps" and val.strip():
                fps = float(val)
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'index<TAB>path'")
        try:
            idx = int(parts[0])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad frame index {parts[0]!r}") from None
        if indices and idx <= indices[-1]:
            raise FormatError(f"{path}:{lineno}: frame indices must be strictly increasing")
        f = Path(parts[1])
        indices.append(idx)
        files.append(f if f.is_absolute() else path.parent / f)
    if not indices:
        raise FormatError(f"{path}: manifest lists no frames")
    return indices, files, fps


def write_manifest(path, entries: Iterable[tuple[int, str]], fps: Optional[float] = None):
    with open(path, "w") as fh:
        if fps is not None:
            fh.write(f"# fps: {fps}\n")
        for idx, name in entries:
            fh.write(f"{idx}\t{name}\n")


def load_stream(manifest_path) -> FrameStream:
    """Frame stream whose frames are decoded lazily from the manifest's files."""
    indices, files, fps = read_manifest(manifest_path)
    return FrameStream(indices, LazyFrames(len(files), lambda k: read_image(files[k])), fps)


# -- reports -------------------------------------------------------------------

def write_report(path, lines: Sequence[str]):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line.rstrip("\n") + "\n")


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, sep, val = line.partition(":")
        if sep:
            out[key.strip()] = val.strip()
    return out


def write_energy_csv(path, frame_indices: Sequence[int], energy: Sequence[float]):
    with open(path, "w") as fh:
        fh.write("frame_index,energy\n")
        for i, e in zip(frame_indices, energy):
            fh.write(f"{i},{e!r}\n")


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
