# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SA inner loop for affine scalar models.

Mirrors ``_pykernels.sa_loop`` operation for operation; see that module for
the contract. Draws come straight from the numpy BitGenerator through its C
API, so both paths consume the identical Gaussian stream.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport pow, rint, frexp, ldexp, isfinite, fabs, sqrt
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cdef enum:
    QUANTILE = 0
    LINEAR = 1


cdef inline void _lattice(double sd, int bits, double* q, double* inv_q) noexcept nogil:
    cdef int e
    frexp(sd, &e)
    q[0] = ldexp(1.0, e - bits)
    inv_q[0] = ldexp(1.0, bits - e)


def sa_loop_affine(object bit_generator, double x0, double b0, double b1, double s0, double s1,
                   double horizon, long n, int R, bint shared, long M, int field_kind,
                   double field_param, double gamma0, double beta, double lo, double hi,
                   double bound, double[::1] theta, const long long[::1] record_steps,
                   double[:, ::1] record_out, int lattice_bits):
    cdef bitgen_t* rng
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    rng = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")
    if theta.shape[0] != R:
        raise ValueError("theta must have length R")

    cdef long L = 1
    cdef long a, b, t_
    cdef int r, j, status = 0, fail_level = 0
    cdef long k, i, m, p = 0, n_rec = record_steps.shape[0], k_rec = 0
    cdef long per_step
    cdef double g, x, dw, t, h, z

    # lcm(1..R)
    for r in range(2, R + 1):
        a = L
        b = r
        while b:
            t_ = a % b
            a = b
            b = t_
        L = L // a * r
    if shared:
        per_step = n * L
    else:
        per_step = n * R * (R + 1) // 2

    cdef double* xs = <double*> malloc(R * sizeof(double))
    cdef double* dts = <double*> malloc(R * sizeof(double))
    cdef double* qs = <double*> malloc(R * sizeof(double))
    cdef double* iqs = <double*> malloc(R * sizeof(double))
    cdef double* sds = <double*> malloc(R * sizeof(double))
    cdef double* buf = <double*> malloc(L * sizeof(double))
    cdef double* th = <double*> malloc(R * sizeof(double))
    cdef double sd_fine, q_fine, iq_fine
    if xs == NULL or dts == NULL or qs == NULL or iqs == NULL or sds == NULL or buf == NULL or th == NULL:
        free(xs); free(dts); free(qs); free(iqs); free(sds); free(buf); free(th)
        raise MemoryError()

    for r in range(R):
        th[r] = theta[r]
        dts[r] = horizon / (n * (r + 1))
        sds[r] = sqrt(horizon / (n * (r + 1)))
        _lattice(sds[r], lattice_bits, &qs[r], &iqs[r])
    sd_fine = sqrt(horizon / (n * L))
    _lattice(sd_fine, lattice_bits, &q_fine, &iq_fine)

    with bit_generator.lock, nogil:
        while p < M:
            p += 1
            # one coupled innovation
            for r in range(R):
                xs[r] = x0
            if shared:
                for k in range(n):
                    for i in range(L):
                        z = random_standard_normal(rng)
                        buf[i] = rint((z * sd_fine) * iq_fine) * q_fine
                    for r in range(R):
                        m = L // (r + 1)
                        for j in range(r + 1):
                            dw = buf[j * m]
                            for i in range(j * m + 1, (j + 1) * m):
                                dw += buf[i]
                            x = xs[r]
                            xs[r] = x + (b0 + b1 * x) * dts[r] + (s0 + s1 * x) * dw
            else:
                for r in range(R):
                    x = x0
                    for k in range(n * (r + 1)):
                        z = random_standard_normal(rng)
                        dw = rint((z * sds[r]) * iqs[r]) * qs[r]
                        x = x + (b0 + b1 * x) * dts[r] + (s0 + s1 * x) * dw
                    xs[r] = x
            # Robbins-Monro update of every chain with the same gain
            g = gamma0 / pow(<double> p, beta)
            for r in range(R):
                x = xs[r]
                if not isfinite(x):
                    status = 2
                    fail_level = r + 1
                    break
                if field_kind == QUANTILE:
                    h = 1.0 if x < th[r] else field_param
                else:
                    h = th[r] - x
                t = th[r] - g * h
                if t < lo:
                    t = lo
                elif t > hi:
                    t = hi
                th[r] = t
                if not fabs(t) <= bound:
                    status = 1
                    fail_level = r + 1
                    break
            if status != 0:
                break
            if k_rec < n_rec and record_steps[k_rec] == p:
                for r in range(R):
                    record_out[k_rec, r] = th[r]
                k_rec += 1

    for r in range(R):
        theta[r] = th[r]
    free(xs); free(dts); free(qs); free(iqs); free(sds); free(buf); free(th)
    return status, (p if status else 0), fail_level, p, p * per_step
