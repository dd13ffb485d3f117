"""Pure-numpy versions of the convolution kernels in ``_kernels.pyx``.

Both modules expose the same functions on channels-last batches:

* ``im2col(x, k, pad)``: ``x`` is ``(N, H, W, C)``; returns a
  ``(N * Ho * Wo, k * k * C)`` matrix whose row ``(n, i, j)`` holds the
  receptive field of output cell ``(i, j)`` of sample ``n``, ordered
  ``(di, dj, c)``.
* ``col2im(cols, shape, k, pad)``: adjoint of ``im2col``; overlapping
  receptive fields are summed back into an array of ``shape``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(x, k, pad):
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    n, h, w, c = x.shape
    ho, wo = h - k + 1, w - k + 1
    win = sliding_window_view(x, (k, k), axis=(1, 2))  # n, ho, wo, c, k, k
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, k * k * c)


def col2im(cols, shape, k, pad):
    n, h, w, c = shape
    hp, wp = h + 2 * pad, w + 2 * pad
    ho, wo = hp - k + 1, wp - k + 1
    blocks = cols.reshape(n, ho, wo, k, k, c)
    out = np.zeros((n, hp, wp, c), dtype=cols.dtype)
    for di in range(k):
        for dj in range(k):
            out[:, di:di + ho, dj:dj + wo, :] += blocks[:, :, :, di, dj, :]
    if pad:
        out = out[:, pad:-pad, pad:-pad, :]
    return np.ascontiguousarray(out)
