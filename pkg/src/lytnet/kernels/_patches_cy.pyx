# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled patch gather/scatter kernels for the convolution hot path.

im2col copies every kernel placement of a padded feature map into a column
buffer so the convolution itself becomes one BLAS matmul; col2im is its
transpose (scatter-add), used by the backward pass.

Loop order matters: col2im accumulates per kernel offset (u, v) outermost,
which is the exact summation order of the numpy fallback, so both backends
produce bit-identical results.
"""

ctypedef fused floating:
    float
    double


def im2col(floating[:, :, :, ::1] xpad, int k, int stride, int oh, int ow,
           floating[:, :, :, ::1] out):
    """Gather kernel patches: xpad (N,C,Hp,Wp) -> out (N,C,k*k,oh*ow)."""
    cdef Py_ssize_t n, c, u, v, i, j
    cdef Py_ssize_t N = xpad.shape[0], C = xpad.shape[1]
    cdef Py_ssize_t q, base
    with nogil:
        for n in range(N):
            for c in range(C):
                for u in range(k):
                    for v in range(k):
                        q = u * k + v
                        for i in range(oh):
                            base = i * ow
                            for j in range(ow):
                                out[n, c, q, base + j] = xpad[n, c, u + i * stride,
                                                              v + j * stride]


def col2im(floating[:, :, :, ::1] cols, int k, int stride, int oh, int ow,
           floating[:, :, :, ::1] xpad):
    """Scatter-add kernel patches: cols (N,C,k*k,oh*ow) += into xpad (N,C,Hp,Wp)."""
    cdef Py_ssize_t n, c, u, v, i, j
    cdef Py_ssize_t N = cols.shape[0], C = cols.shape[1]
    cdef Py_ssize_t q, base
    with nogil:
        for u in range(k):
            for v in range(k):
                q = u * k + v
                for n in range(N):
                    for c in range(C):
                        for i in range(oh):
                            base = i * ow
                            for j in range(ow):
                                xpad[n, c, u + i * stride, v + j * stride] += \
                                    cols[n, c, q, base + j]
