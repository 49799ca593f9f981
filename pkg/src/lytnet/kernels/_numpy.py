"""Pure-numpy fallback for the patch gather/scatter kernels.

Both functions loop only over the k*k kernel offsets; each iteration is a
vectorised strided copy (im2col) or strided add (col2im). For a fixed offset
the strided destinations are disjoint, so `+=` on the view is safe, and the
offset-major accumulation order matches the compiled backend bit for bit.
"""

import numpy as np


def im2col(xpad, k, stride, oh, ow, out):
    """Gather kernel patches: xpad (N,C,Hp,Wp) -> out (N,C,k*k,oh*ow)."""
    n, c = xpad.shape[:2]
    for u in range(k):
        for v in range(k):
            patch = xpad[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride]
            out[:, :, u * k + v, :] = patch.reshape(n, c, oh * ow)
    return out


def col2im(cols, k, stride, oh, ow, xpad):
    """Scatter-add kernel patches: cols (N,C,k*k,oh*ow) += into xpad (N,C,Hp,Wp)."""
    n, c = xpad.shape[:2]
    for u in range(k):
        for v in range(k):
            view = xpad[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride]
            view += cols[:, :, u * k + v, :].reshape(n, c, oh, ow)
    return xpad
