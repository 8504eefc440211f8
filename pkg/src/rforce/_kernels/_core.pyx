# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Forward-Euler / RLS inner loop.

Mirrors :func:`rforce._kernels._fallback.integrate` step for step.  The
inverse-correlation matrix is updated on one triangle only (``dsyr``) and
mirrored back to full symmetric storage when the chunk returns.
"""

from libc.math cimport tanh, fabs, isfinite, sqrt
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport dgemv, dsymv, dsyr, dger, ddot

DIVERGENCE_LIMIT = 1e6
cdef double _LIMIT = 1e6


cdef void _mirror_lower_to_upper(double[:, ::1] P) noexcept nogil:
    # Fortran 'U' on a C-contiguous buffer is the C lower triangle.
    cdef Py_ssize_t i, j, n = P.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            P[i, j] = P[j, i]


def integrate(double[:, ::1] M, double g, double[:, ::1] w_feedback,
              double[:, ::1] w_readout, double[::1] x, double dt,
              Py_ssize_t n_steps, double[:, ::1] z_out,
              double[:, ::1] P=None, double[:, ::1] target=None,
              Py_ssize_t update_interval=1, Py_ssize_t phase_offset=0,
              double[:, ::1] injection=None, double[::1] dw_out=None):
    cdef int n = <int>M.shape[0]
    cdef int k = <int>w_readout.shape[1]
    cdef bint training = P is not None
    cdef bint has_feedback = w_feedback is not None
    cdef bint train_reservoir = injection is not None
    cdef bint record_dw = dw_out is not None
    cdef Py_ssize_t dw_cap = dw_out.shape[0] if record_dw else 0
    cdef int one = 1
    cdef double d_one = 1.0, d_zero = 0.0, d_mone = -1.0
    cdef double neg_c, rpr, c, e_norm2, kc_norm2
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef char uplo = b'U'
    cdef Py_ssize_t step, i, j, n_updates = 0
    cdef double xi
    cdef double *r = <double *>malloc(n * sizeof(double))
    cdef double *mr = <double *>malloc(n * sizeof(double))
    cdef double *fb = <double *>malloc(n * sizeof(double))
    cdef double *kvec = <double *>malloc(n * sizeof(double))
    cdef double *inj = <double *>malloc(n * sizeof(double))
    cdef double *z = <double *>malloc(k * sizeof(double))
    cdef double *err = <double *>malloc(k * sizeof(double))
    cdef Py_ssize_t completed = n_steps
    if (r == NULL or mr == NULL or fb == NULL or kvec == NULL or inj == NULL
            or z == NULL or err == NULL):
        free(r); free(mr); free(fb); free(kvec); free(inj); free(z); free(err)
        raise MemoryError()

    try:
        with nogil:
            for step in range(n_steps):
                for i in range(n):
                    r[i] = tanh(x[i])
                # z = w^T r; Fortran sees w as a k-by-n matrix
                dgemv(&trans_n, &k, &n, &d_one, &w_readout[0, 0], &k, r, &one,
                      &d_zero, z, &one)
                for j in range(k):
                    z_out[step, j] = z[j]

                if training and (phase_offset + step) % update_interval == 0:
                    dsymv(&uplo, &n, &d_one, &P[0, 0], &n, r, &one, &d_zero, kvec, &one)
                    rpr = ddot(&n, r, &one, kvec, &one)
                    c = 1.0 / (1.0 + rpr)
                    neg_c = -c
                    dsyr(&uplo, &n, &neg_c, kvec, &one, &P[0, 0], &n)
                    kc_norm2 = 0.0
                    for i in range(n):
                        kvec[i] = kvec[i] * c
                        kc_norm2 = kc_norm2 + kvec[i] * kvec[i]
                    e_norm2 = 0.0
                    for j in range(k):
                        err[j] = z[j] - target[step, j]
                        e_norm2 = e_norm2 + err[j] * err[j]
                    # w^T -= e (P r)^T
                    dger(&k, &n, &d_mone, err, &one, kvec, &one, &w_readout[0, 0], &k)
                    if train_reservoir:
                        # M^T -= (P r) (inj e)^T, i.e. row i of M -= (inj e)_i (P r)
                        dgemv(&trans_t, &k, &n, &d_one, &injection[0, 0], &k, err, &one,
                              &d_zero, inj, &one)
                        dger(&n, &n, &d_mone, kvec, &one, inj, &one, &M[0, 0], &n)
                    if record_dw and n_updates < dw_cap:
                        dw_out[n_updates] = sqrt(kc_norm2 * e_norm2)
                    n_updates = n_updates + 1
                    if not isfinite(rpr) or not isfinite(e_norm2):
                        completed = step
                        break

                # M r; Fortran sees the C-ordered M as its transpose
                dgemv(&trans_t, &n, &n, &d_one, &M[0, 0], &n, r, &one, &d_zero, mr, &one)
                if has_feedback:
                    dgemv(&trans_t, &k, &n, &d_one, &w_feedback[0, 0], &k, z, &one,
                          &d_zero, fb, &one)
                else:
                    for i in range(n):
                        fb[i] = 0.0
                for i in range(n):
                    xi = x[i]
                    x[i] = xi + dt * (-xi + g * mr[i] + fb[i])
                for i in range(n):
                    if not isfinite(x[i]) or fabs(x[i]) > _LIMIT:
                        completed = step
                        break
                if completed != n_steps:
                    break
            if training:
                _mirror_lower_to_upper(P)
    finally:
        free(r); free(mr); free(fb); free(kvec); free(inj); free(z); free(err)
    return completed
