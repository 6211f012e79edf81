"""Independent reference values used by several test modules."""

import math

import numpy as np

from nlsubdiff.specfun import MLIndices, mittag_leffler


def spectral_propagator(x, xi, t, alpha, modes=200, remainder=True):
    """2 sum_k E_a(-(k pi)^2 t^a) sin(k pi x) sin(k pi xi) on the tensor grid.

    The series converges like sum 1/k^2 on the diagonal, so ``remainder``
    adds the leading term of the dropped tail in closed form: for large k
    E_a(-l t^a) ~ 1/(l t^a Gamma(1-a)) and
    sum_k 2 sin(k pi x) sin(k pi xi)/(k pi)^2 = min(x, xi)(1 - max(x, xi)).
    """
    x, xi = np.asarray(x, float), np.asarray(xi, float)
    k = np.arange(1, modes + 1)
    lam = (k * np.pi) ** 2
    e = mittag_leffler(MLIndices(alpha, 1.0), -lam * t**alpha)
    sx, sxi = np.sin(np.outer(x, k * np.pi)), np.sin(np.outer(xi, k * np.pi))
    K = 2.0 * (sx * e) @ sxi.T
    if remainder:
        head = 2.0 * (sx / lam) @ sxi.T
        X, XI = np.meshgrid(x, xi, indexing="ij")
        full = np.minimum(X, XI) * (1.0 - np.maximum(X, XI))
        K += (full - head) / (t**alpha * math.gamma(1.0 - alpha))
    return K


def single_mode_F(x, alpha, T):
    """F for f = sin(pi x): sin(pi x) (1 - E_a(-pi^2 T^a)) / pi^2."""
    e = float(mittag_leffler(MLIndices(alpha, 1.0), -np.pi**2 * T**alpha))
    return np.sin(np.pi * np.asarray(x)) * (1.0 - e) / np.pi**2
