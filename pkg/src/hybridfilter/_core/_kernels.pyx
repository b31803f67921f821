# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SME and QEKF integration loops.

Operators arrive dense and are reduced to lists of nonzero entries, so one
SME step costs O(nnz * d) rather than O(d^3).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport zpotrf, zheev

from ._common import raise_for_status, n_outputs

cnp.import_array()

ctypedef double complex cplx

cdef extern from "complex.h" nogil:
    double creal(double complex)
    double cimag(double complex)
    double complex conj(double complex)

cdef enum:
    OK = 0
    NONFINITE = 1
    PROJECTION = 2
    NOT_PSD = 3


cdef struct Sparse:
    int nnz
    int *row
    int *col
    cplx *val


cdef Sparse to_sparse(cplx[:, ::1] A):
    cdef Sparse s
    cdef int d = A.shape[0]
    cdef int i, j, k = 0
    s.nnz = 0
    for i in range(d):
        for j in range(d):
            if A[i, j] != 0:
                s.nnz += 1
    s.row = <int *> malloc(max(s.nnz, 1) * sizeof(int))
    s.col = <int *> malloc(max(s.nnz, 1) * sizeof(int))
    s.val = <cplx *> malloc(max(s.nnz, 1) * sizeof(cplx))
    for i in range(d):
        for j in range(d):
            if A[i, j] != 0:
                s.row[k] = i
                s.col[k] = j
                s.val[k] = A[i, j]
                k += 1
    return s


cdef void free_sparse(Sparse *s) nogil:
    free(s.row)
    free(s.col)
    free(s.val)


cdef inline void sp_left(Sparse *A, cplx scale, cplx *X, cplx *out, int d) noexcept nogil:
    # out += scale * A @ X
    cdef int k, j, r, c
    cdef cplx v
    for k in range(A.nnz):
        r = A.row[k]
        c = A.col[k]
        v = scale * A.val[k]
        for j in range(d):
            out[r * d + j] += v * X[c * d + j]


cdef inline void sp_right_dag(Sparse *A, cplx scale, cplx *X, cplx *out, int d) noexcept nogil:
    # out += scale * X @ A^dagger
    cdef int k, i, r, c
    cdef cplx v
    for k in range(A.nnz):
        r = A.row[k]
        c = A.col[k]
        v = scale * conj(A.val[k])
        for i in range(d):
            out[i * d + r] += v * X[i * d + c]


cdef inline double sp_trace_real2(Sparse *A, cplx *X, int d) noexcept nogil:
    # 2 Re Tr[A X] = Tr[(A + A^dagger) X] for Hermitian X
    cdef int k
    cdef cplx acc = 0
    for k in range(A.nnz):
        acc += A.val[k] * X[A.col[k] * d + A.row[k]]
    return 2.0 * creal(acc)


cdef int project(cplx *rho, cplx *work, cplx *zwork, int lwork, double *w, double *rwork,
                 int d, double tau_psd, double *change, int *clipped) noexcept nogil:
    cdef int i, j, k, info = 0, n = d, lda = d
    cdef cplx a, b
    cdef double tr = 0.0, neg = 0.0, wsum = 0.0
    cdef char uplo = b'L'
    cdef char jobz = b'V'
    clipped[0] = 0
    for i in range(d):
        for j in range(i, d):
            a = rho[i * d + j]
            b = rho[j * d + i]
            rho[i * d + j] = 0.5 * (a + conj(b))
            rho[j * d + i] = conj(rho[i * d + j])
        tr += creal(rho[i * d + i])
    if not isfinite(tr):
        return NONFINITE
    for i in range(d * d):
        work[i] = rho[i]
    for i in range(d):
        work[i * d + i] += tau_psd
    zpotrf(&uplo, &n, work, &lda, &info)
    if info == 0:
        for i in range(d * d):
            rho[i] = rho[i] / tr
        change[0] = fabs(tr - 1.0)
        return OK
    # eigen-clip path; row-major rho is read by LAPACK as conj(rho), whose
    # eigenvectors are the conjugates of rho's
    for i in range(d * d):
        work[i] = rho[i]
    zheev(&jobz, &uplo, &n, work, &lda, w, zwork, &lwork, rwork, &info)
    if info != 0:
        return NONFINITE
    for k in range(d):
        if w[k] < 0:
            neg -= w[k]
            w[k] = 0.0
        wsum += w[k]
    if not (wsum > 0):
        return NONFINITE
    for i in range(d):
        for j in range(d):
            a = 0
            for k in range(d):
                a += (w[k] / wsum) * conj(work[k * d + i]) * work[k * d + j]
            rho[i * d + j] = a
    change[0] = neg + fabs(tr - 1.0)
    clipped[0] = 1
    return OK


def integrate_sme(rho0, G, Hvar, coef, jumps, Lmeas, signal, double dt, bint generate,
                  Py_ssize_t stride, double tau_psd, double tau_proj):
    """Euler-Maruyama SME with per-step projection.

    ``G`` is the static effective generator ``-iH - sum(L*L)/2``; the step-``n``
    Hamiltonian adds ``coef[n] * Hvar``. In ``generate`` mode ``signal`` holds
    innovation increments and measurement increments are produced; otherwise
    ``signal`` holds measurement increments.

    Returns ``(snapshots, dY, max_change, n_clipped)``.
    """
    cdef cplx[:, ::1] rho0_v = np.ascontiguousarray(rho0, dtype=complex)
    cdef int d = rho0_v.shape[0]
    cdef double[::1] sig = np.ascontiguousarray(signal, dtype=float)
    cdef double[::1] cf = np.ascontiguousarray(coef, dtype=float)
    cdef Py_ssize_t n_steps = sig.shape[0]
    cdef bint has_coef = cf.shape[0] > 0
    if has_coef and cf.shape[0] != n_steps:
        raise ValueError("coefficient sequence length differs from the signal length")
    jumps = np.ascontiguousarray(jumps, dtype=complex).reshape(-1, d, d)
    cdef int m = jumps.shape[0]

    out_np = np.empty((n_outputs(n_steps, stride), d, d), dtype=complex)
    dY_np = np.empty(n_steps, dtype=float)
    cdef cplx[:, :, ::1] snaps = out_np
    cdef double[::1] dYv = dY_np

    cdef Sparse sG = to_sparse(np.ascontiguousarray(G, dtype=complex))
    cdef Sparse sH = to_sparse(np.ascontiguousarray(Hvar, dtype=complex))
    cdef Sparse sM = to_sparse(np.ascontiguousarray(Lmeas, dtype=complex))
    cdef Sparse *sJ = <Sparse *> malloc(max(m, 1) * sizeof(Sparse))
    cdef int j
    for j in range(m):
        sJ[j] = to_sparse(jumps[j])

    cdef int lwork = 64 * d
    cdef cplx *rho = <cplx *> malloc(d * d * sizeof(cplx))
    cdef cplx *new = <cplx *> malloc(d * d * sizeof(cplx))
    cdef cplx *tmp = <cplx *> malloc(d * d * sizeof(cplx))
    cdef cplx *work = <cplx *> malloc(d * d * sizeof(cplx))
    cdef cplx *zwork = <cplx *> malloc(lwork * sizeof(cplx))
    cdef double *w = <double *> malloc(d * sizeof(double))
    cdef double *rwork = <double *> malloc(max(3 * d - 2, 1) * sizeof(double))

    cdef Py_ssize_t n, k, i, o = 1
    cdef int status = OK, clipped = 0, n_clipped = 0
    cdef double x, dW, dYn, change = 0.0, max_change = 0.0
    cdef cplx a, mi = -1j

    for i in range(d):
        for k in range(d):
            rho[i * d + k] = rho0_v[i, k]
            snaps[0, i, k] = rho0_v[i, k]

    with nogil:
        for n in range(n_steps):
            x = sp_trace_real2(&sM, rho, d)
            if generate:
                dW = sig[n]
                dYn = x * dt + dW
            else:
                dYn = sig[n]
                dW = dYn - x * dt
            dYv[n] = dYn

            for i in range(d * d):
                tmp[i] = 0
            sp_left(&sG, 1.0, rho, tmp, d)
            if has_coef and cf[n] != 0:
                sp_left(&sH, mi * cf[n], rho, tmp, d)
            # new = rho + dt (G rho + (G rho)^dagger)
            for i in range(d):
                for k in range(d):
                    new[i * d + k] = rho[i * d + k] + dt * (tmp[i * d + k] + conj(tmp[k * d + i]))
            for j in range(m):
                for i in range(d * d):
                    tmp[i] = 0
                sp_left(&sJ[j], 1.0, rho, tmp, d)
                sp_right_dag(&sJ[j], dt, tmp, new, d)
            for i in range(d * d):
                tmp[i] = 0
            sp_left(&sM, 1.0, rho, tmp, d)
            for i in range(d):
                for k in range(d):
                    new[i * d + k] += dW * (tmp[i * d + k] + conj(tmp[k * d + i]) - x * rho[i * d + k])

            status = project(new, work, zwork, lwork, w, rwork, d, tau_psd, &change, &clipped)
            if status != OK:
                break
            if change > max_change:
                max_change = change
            if change > tau_proj:
                status = PROJECTION
                break
            n_clipped += clipped
            for i in range(d * d):
                rho[i] = new[i]
            if (n + 1) % stride == 0:
                for i in range(d):
                    for k in range(d):
                        snaps[o, i, k] = rho[i * d + k]
                o += 1

    free_sparse(&sG)
    free_sparse(&sH)
    free_sparse(&sM)
    for j in range(m):
        free_sparse(&sJ[j])
    free(sJ)
    free(rho)
    free(new)
    free(tmp)
    free(work)
    free(zwork)
    free(w)
    free(rwork)
    raise_for_status(status, n, change)
    return out_np, dY_np, max_change, n_clipped


cdef void qekf_drift(double *x, double k1, double k2, double alpha, double *f) noexcept nogil:
    f[0] = -(2 * x[3] / alpha) * x[1] - 0.5 * k1 * x[0]
    f[1] = (2 * x[3] / alpha) * x[0] - 0.5 * k1 * x[1]
    f[2] = -k1 * (1 + x[2])
    f[3] = -0.5 * k2 * x[3]
    f[4] = -x[2] / (2 * alpha) - 0.5 * k2 * x[4]


cdef void qekf_jacobian(double *x, double k1, double k2, double alpha, double *F) noexcept nogil:
    cdef int i
    for i in range(25):
        F[i] = 0
    F[0] = -0.5 * k1
    F[1] = -2 * x[3] / alpha
    F[3] = -2 * x[1] / alpha
    F[5] = 2 * x[3] / alpha
    F[6] = -0.5 * k1
    F[8] = 2 * x[0] / alpha
    F[12] = -k1
    F[18] = -0.5 * k2
    F[22] = -1 / (2 * alpha)
    F[24] = -0.5 * k2


cdef double chol_min_pivot(double *P, double shift) noexcept nogil:
    # smallest Cholesky pivot of P + shift*I; negative means not PSD
    cdef double L[25]
    cdef int i, j, k
    cdef double s
    for i in range(5):
        for j in range(i + 1):
            s = P[i * 5 + j] + (shift if i == j else 0.0)
            for k in range(j):
                s -= L[i * 5 + k] * L[j * 5 + k]
            if i == j:
                if s <= 0:
                    return s
                L[i * 5 + i] = sqrt(s)
            else:
                L[i * 5 + j] = s / L[j * 5 + j]
    return 1.0


cdef void qekf_gain(double *x, double *P, double k1, bint printed_s, double *S, double *K) noexcept nogil:
    cdef double sk1 = sqrt(k1)
    cdef int i
    S[0] = (k1 if printed_s else sk1) * x[2]
    S[1] = 0
    S[2] = -sk1 * x[0]
    S[3] = 0
    S[4] = 0
    for i in range(5):
        K[i] = P[i * 5] * sk1 + S[i]


def integrate_qekf(x0, P0, signal, double dt, double k1, double k2, double alpha,
                   double lam, double mu, bint printed_s, Py_ssize_t stride, double tau_psd):
    """Explicit-Euler QEKF over a record of measurement increments.

    Returns ``(x_snaps, P_snaps, K_snaps, innovations)``.
    """
    cdef double[::1] sig = np.ascontiguousarray(signal, dtype=float)
    cdef Py_ssize_t n_steps = sig.shape[0]
    cdef Py_ssize_t n_out = n_outputs(n_steps, stride)
    xs_np = np.empty((n_out, 5))
    Ps_np = np.empty((n_out, 5, 5))
    Ks_np = np.empty((n_out, 5))
    innov_np = np.empty(n_steps)
    cdef double[:, ::1] xs = xs_np
    cdef double[:, :, ::1] Ps = Ps_np
    cdef double[:, ::1] Ks = Ks_np
    cdef double[::1] innov = innov_np
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=float)
    cdef double[:, ::1] P0v = np.ascontiguousarray(P0, dtype=float)

    cdef double x[5]
    cdef double P[25]
    cdef double Pn[25]
    cdef double F[25]
    cdef double f[5]
    cdef double S[5]
    cdef double K[5]
    cdef double FP, PP, e, sk1 = sqrt(k1), piv = 1.0
    cdef int i, j, l, status = OK
    cdef Py_ssize_t n, o = 1

    for i in range(5):
        x[i] = x0v[i]
        for j in range(5):
            P[i * 5 + j] = P0v[i, j]

    with nogil:
        qekf_gain(x, P, k1, printed_s, S, K)
        for i in range(5):
            xs[0, i] = x[i]
            Ks[0, i] = K[i]
            for j in range(5):
                Ps[0, i, j] = P[i * 5 + j]
        for n in range(n_steps):
            qekf_drift(x, k1, k2, alpha, f)
            qekf_jacobian(x, k1, k2, alpha, F)
            qekf_gain(x, P, k1, printed_s, S, K)
            e = sig[n] - sk1 * x[0] * dt
            innov[n] = e
            for i in range(5):
                for j in range(i, 5):
                    FP = 0
                    PP = 0
                    for l in range(5):
                        FP += F[i * 5 + l] * P[l * 5 + j] + P[i * 5 + l] * F[j * 5 + l]
                        PP += P[i * 5 + l] * P[l * 5 + j]
                    Pn[i * 5 + j] = P[i * 5 + j] + dt * (
                        FP + (mu if i == j else 0.0) + S[i] * S[j] + lam * PP - K[i] * K[j])
                    Pn[j * 5 + i] = Pn[i * 5 + j]
            for i in range(5):
                x[i] = x[i] + f[i] * dt + K[i] * e
                if not isfinite(x[i]):
                    status = NONFINITE
            for i in range(25):
                P[i] = Pn[i]
                if not isfinite(P[i]):
                    status = NONFINITE
            if status != OK:
                break
            piv = chol_min_pivot(P, tau_psd)
            if piv <= 0:
                status = NOT_PSD
                break
            if (n + 1) % stride == 0:
                qekf_gain(x, P, k1, printed_s, S, K)
                for i in range(5):
                    xs[o, i] = x[i]
                    Ks[o, i] = K[i]
                    for j in range(5):
                        Ps[o, i, j] = P[i * 5 + j]
                o += 1
    raise_for_status(status, n, piv)
    return xs_np, Ps_np, Ks_np, innov_np
