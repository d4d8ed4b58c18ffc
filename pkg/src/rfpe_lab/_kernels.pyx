# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop for the rejection-filtering update.

Accumulates accepted-sample moments in two frames (original, and shifted
by pi) around the prior mean, so the caller can pick the seam-free frame.
Centering keeps the variance accumulation stable for very tight priors.
"""

from libc.math cimport cos, fmod, M_PI


def rejection_accumulate(double[::1] samples, double[::1] uniforms,
                         int outcome, double m, double theta, double kappa,
                         double mu):
    cdef double two_pi = 2.0 * M_PI
    cdef Py_ssize_t i, n = samples.shape[0]
    cdef long n_acc = 0
    cdef double c0, cpi, x, xs, c, lik, z
    cdef double s1 = 0.0, s2 = 0.0, s1p = 0.0, s2p = 0.0

    c0 = fmod(mu, two_pi)
    if c0 < 0.0:
        c0 += two_pi
    cpi = c0 + M_PI
    if cpi >= two_pi:
        cpi -= two_pi

    for i in range(n):
        x = fmod(samples[i], two_pi)
        if x < 0.0:
            x += two_pi
        c = cos(0.5 * m * (x - theta))
        lik = c * c
        if outcome != 0:
            lik = 1.0 - lik
        if lik >= kappa * uniforms[i]:
            n_acc += 1
            z = x - c0
            s1 += z
            s2 += z * z
            xs = x + M_PI
            if xs >= two_pi:
                xs -= two_pi
            z = xs - cpi
            s1p += z
            s2p += z * z
    return n_acc, s1, s2, s1p, s2p
