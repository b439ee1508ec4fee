"""Pure numpy implementation of the convolution passes.

Same contract and bit-for-bit the same results as the compiled kernels:
each output is accumulated from ``0.0`` in tap order. Work is split into
row blocks, which bounds temporary memory and lets ``num_threads`` run
blocks concurrently (numpy releases the GIL inside ufuncs).
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_ROWS = 128


def _rows_pass(src, weights, index_map, out, y0, y1):
    block = src[y0:y1].take(index_map, axis=1)
    w = src.shape[1]
    acc = out[y0:y1]
    acc[...] = 0.0
    for j, wj in enumerate(weights):
        acc += wj * block[:, j:j + w]


def _cols_pass(src, weights, index_map, out, y0, y1):
    acc = out[y0:y1]
    acc[...] = 0.0
    for j, wj in enumerate(weights):
        acc += wj * src[index_map[y0 + j:y1 + j]]


def convolve_axis(src, weights, index_map, axis, out, num_threads=1):
    h, w, _ = src.shape
    taps = len(weights)
    weights = [float(v) for v in weights]
    if axis == 1:
        if len(index_map) != w + taps - 1:
            raise ValueError("index map length does not match image width")
        fn = _rows_pass
    elif axis == 0:
        if len(index_map) != h + taps - 1:
            raise ValueError("index map length does not match image height")
        fn = _cols_pass
    else:
        raise ValueError("axis must be 0 or 1")
    index_map = np.asarray(index_map, dtype=np.intp)
    blocks = [(y, min(y + BLOCK_ROWS, h)) for y in range(0, h, BLOCK_ROWS)]
    if num_threads <= 1 or len(blocks) == 1:
        for y0, y1 in blocks:
            fn(src, weights, index_map, out, y0, y1)
        return
    with ThreadPoolExecutor(max_workers=num_threads) as pool:
        futures = [pool.submit(fn, src, weights, index_map, out, y0, y1)
                   for y0, y1 in blocks]
        for f in futures:
            f.result()
