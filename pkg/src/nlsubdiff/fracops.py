"""Fractional calculus on grids and weakly singular quadrature.

The propagator kernel

    K(x, xi; t) = D^{alpha-1}_{0t} G(x, t, xi, 0)
                = 1/Gamma(1-alpha) int_0^t (t-eta)^(-alpha) G(x, eta, xi, 0) d eta

reads D^{alpha-1} as the Riemann-Liouville integral of order 1 - alpha.
The eta-integrand has two endpoint singularities: the power weight at
eta = t, and near eta = 0 the Green's function itself behaves like
eta^(alpha/2 - 1) with a boundary layer of width ~|x - xi|^(2/alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import AccuracyError, DomainError
from .greenfn import lattice_kernel, lattice_to_matrix
from .specfun import rgamma


@dataclass(frozen=True)
class GridFunction:
    """Values of a function on a uniform partition of an interval."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("a grid needs at least two nodes")
        if values.shape[0] != nodes.size:
            raise DomainError("nodes and values differ in length")
        steps = np.diff(nodes)
        if np.max(np.abs(steps - steps[0])) > 1e-14 * max(1.0, abs(nodes[-1])):
            raise DomainError("grid is not uniform")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, fn, n: int, length: float = 1.0) -> "GridFunction":
        x = np.linspace(0.0, length, n + 1)
        return cls(x, fn(x))

    @property
    def step(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


@dataclass(frozen=True)
class PropagatorKernel:
    """K(x_i, xi_j; t) on the tensor grid, with xi-quadrature weights."""

    t: float
    matrix: np.ndarray
    weights: np.ndarray
    nodes: np.ndarray
    mass: float = field(default=float("nan"))

    def apply(self, values: np.ndarray) -> np.ndarray:
        """int_0^1 K(x, xi; t) values(xi) d xi at every x node."""
        return self.matrix @ (self.weights * values)


# {{{ grid operators


def rl_integral(h: GridFunction, sigma: float) -> GridFunction:
    """Riemann-Liouville integral of order sigma by product integration.

    h is interpolated piecewise linearly and the power kernel integrated
    exactly, giving the fractional trapezoidal rule (exact for linear h,
    second order for smooth h).
    """
    if sigma <= 0:
        raise DomainError(f"order must be positive, got {sigma}")
    dt = h.step
    f = h.values
    n_pts = f.size
    out = np.zeros_like(f)
    scale = dt**sigma * rgamma(sigma + 2.0)
    for n in range(1, n_pts):
        j = np.arange(1, n)
        a = np.empty(n + 1)
        a[0] = (n - 1.0) ** (sigma + 1) - (n - sigma - 1.0) * n**sigma
        a[1:n] = (
            (n - j + 1.0) ** (sigma + 1) - 2.0 * (n - j) ** (sigma + 1.0) + (n - j - 1.0) ** (sigma + 1)
        )
        a[n] = 1.0
        out[n] = scale * np.dot(a, f[: n + 1])
    return GridFunction(h.nodes, out)


def l1_weights(n: int, alpha: float) -> np.ndarray:
    """b_k = (k+1)^(1-alpha) - k^(1-alpha), k = 0..n-1, without cancellation."""
    k = np.arange(n, dtype=float)
    b = np.empty(n)
    b[0] = 1.0
    kk = k[1:]
    b[1:] = kk ** (1 - alpha) * np.expm1((1 - alpha) * np.log1p(1.0 / kk))
    return b


def caputo_l1(h: GridFunction, alpha: float) -> GridFunction:
    """Caputo derivative of order alpha by the L1 scheme; 0 at the first node."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    f = h.values
    if f.shape[0] < 2:
        raise DomainError("the L1 scheme needs at least two time points")
    diffs = np.diff(f, axis=0)
    b = l1_weights(f.shape[0] - 1, alpha)
    out = np.zeros_like(f)
    scale = h.step ** (-alpha) * rgamma(2.0 - alpha)
    for n in range(1, f.shape[0]):
        # sum_k b_k (f_{n-k} - f_{n-k-1})
        out[n] = scale * np.tensordot(b[:n], diffs[n - 1 :: -1][:n], axes=(0, 0))
    return GridFunction(h.nodes, out)


# }}}


# {{{ weighted quadrature


@lru_cache(maxsize=64)
def _jacobi(n: int, a: float, b: float):
    return roots_jacobi(n, a, b)


@lru_cache(maxsize=8)
def _legendre(n: int):
    return roots_legendre(n)


def jacobi_rule(a: float, b: float, t: float, n: int):
    """Nodes and weights for int_0^t (t-eta)^a eta^b f(eta) d eta (Gauss-Jacobi)."""
    if a <= -1 or b <= -1:
        raise DomainError(f"weight exponents must exceed -1, got ({a}, {b})")
    u, w = _jacobi(n, a, b)
    return t * (1.0 + u) / 2.0, w * (t / 2.0) ** (a + b + 1.0)


def graded_rule(a: float, b: float, t: float, n_upper: int = 32, panels: int = 20,
                panel_order: int = 10):
    """Nodes and weights for int_0^t (t-eta)^a eta^b f(eta) d eta with f layered near 0.

    [t/2, t] uses Gauss-Jacobi for the (t-eta)^a weight. [0, t/2] is cut into
    dyadic panels down to 2^-panels; the innermost carries eta^b as a Jacobi
    weight, the others as a factor, which is analytic on each panel since
    every panel sits one width away from 0. A layer of width w is resolved
    by the panels of size ~w.
    """
    if a <= -1 or b <= -1:
        raise DomainError(f"weight exponents must exceed -1, got ({a}, {b})")
    c = t / 2.0
    u, w = _jacobi(n_upper, a, 0.0)
    up_nodes = c + c * (1.0 + u) / 2.0
    up_weights = w * (c / 2.0) ** (a + 1.0) * up_nodes**b

    gl_u, gl_w = _legendre(panel_order)
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(panels, -1, -1.0)])
    lo, hi = edges[1:-1, None], edges[2:, None]
    r = (lo + (hi - lo) * (gl_u + 1.0) / 2.0).ravel()
    wr = ((hi - lo) / 2.0 * gl_w).ravel()
    first = c * 2.0**-panels
    u0, w0 = _jacobi(panel_order, 0.0, b)
    in_nodes = first * (1.0 + u0) / 2.0
    in_weights = w0 * (first / 2.0) ** (b + 1.0)
    out_nodes = c * r
    out_weights = wr * c * out_nodes**b
    low_nodes = np.concatenate([in_nodes, out_nodes])
    low_weights = np.concatenate([in_weights, out_weights]) * (t - low_nodes) ** a
    return np.concatenate([low_nodes, up_nodes]), np.concatenate([low_weights, up_weights])


def layer_depth(alpha: float, n: int, t: float, panels: int) -> int:
    """Dyadic panels needed below t/2 so the innermost one sees no Wright layer.

    The offset-h term W(-h eta^(-beta)) decays like exp(-k z^(1/(1-beta)))
    in z = h eta^(-beta); it is below 1e-16 of its peak once z exceeds
    z_neg = (37/k)^(1-beta), i.e. for eta < (h/z_neg)^(1/beta). For small
    alpha that is dozens of octaves below the scale h^(2/alpha).
    """
    beta = alpha / 2.0
    k = beta ** (beta / (1.0 - beta)) * (1.0 - beta)
    z_neg = (37.0 / k) ** (1.0 - beta)
    octaves = math.log2(max(t, 1e-300) / 2.0) + (math.log2(n) + math.log2(z_neg)) / beta
    return max(panels, int(math.ceil(octaves)) + 2)


def singular_double_weight_quad(w1_exp: float, w2_exp: float, smooth, t: float,
                                order: int = 32, rtol: float = 1e-7, max_order: int = 1024):
    """int_0^t (t-eta)^w1_exp eta^w2_exp smooth(eta) d eta by Gauss-Jacobi.

    Exact for polynomial ``smooth`` of degree < 2*order. The rule is
    compared against one with twice the nodes and doubled until the two
    agree to ``rtol``.
    """
    if w1_exp <= -1 or w2_exp <= -1:
        raise DomainError(
            f"divergent integral: exponents must exceed -1, got ({w1_exp}, {w2_exp})"
        )
    if t <= 0:
        raise DomainError("upper limit must be positive")

    def rule(n):
        x, w = jacobi_rule(w1_exp, w2_exp, t, n)
        return float(np.dot(w, smooth(x)))

    n = order
    value = rule(n)
    while n < max_order:
        finer = rule(2 * n)
        if abs(finer - value) <= rtol * max(abs(finer), 1e-300):
            return finer
        n, value = 2 * n, finer
    raise AccuracyError(
        "weighted quadrature did not settle", estimate=abs(finer - value) / abs(finer)
    )


# }}}


def trapezoid_weights(n: int, length: float = 1.0) -> np.ndarray:
    w = np.full(n + 1, length / n)
    w[0] = w[-1] = 0.5 * length / n
    return w


def assemble_propagator(t: float, alpha: float, n: int, *, n_upper: int = 32,
                        panels: int = 20, panel_order: int = 10,
                        tail_tol: float = 1e-14, check: bool = True,
                        max_doublings: int = 3) -> PropagatorKernel:
    """Propagator K(x_i, xi_j; t) on the uniform grid with n intervals.

    The eta-integral uses the weights (t-eta)^(-alpha) and eta^(alpha/2-1);
    the remaining factor eta^(1-alpha/2) G(x, eta, xi, 0) is a sum of
    bounded Wright-function terms. Because G depends on x and xi only
    through the lattice offsets (i -/+ j)/n, the quadrature is carried out
    once per offset and scattered into the matrix.

    With ``check`` the rule is repeated with doubled node counts until two
    successive lattice kernels agree to 1e-7 of the kernel scale; after
    ``max_doublings`` failed attempts an AccuracyError is raised.
    """
    if t <= 0:
        raise DomainError("the propagator is defined for t > 0")
    beta = alpha / 2.0
    h = 1.0 / n

    def lattice(n_up, n_pan, order):
        nodes, weights = graded_rule(-alpha, beta - 1.0, t, n_up, n_pan, order)
        acc = np.zeros(3 * n + 1)
        for eta, w in zip(nodes, weights):
            # the rule already carries eta^(beta-1)
            acc += w * lattice_kernel(alpha, eta, h, n, tail_tol, scaled=True)
        return acc * rgamma(1.0 - alpha)

    panels = layer_depth(alpha, n, t, panels)
    R = lattice(n_upper, panels, panel_order)
    if check:
        for _ in range(max_doublings):
            n_upper, panels, panel_order = 2 * n_upper, panels + 4, 2 * panel_order
            R2 = lattice(n_upper, panels, panel_order)
            err = float(np.max(np.abs(R2 - R)))
            R = R2
            if err <= 1e-7 * float(np.max(np.abs(R2))):
                break
        else:
            raise AccuracyError("propagator quadrature self-check failed", estimate=err)
    matrix = lattice_to_matrix(R, n)
    weights = trapezoid_weights(n)
    nodes = np.linspace(0.0, 1.0, n + 1)
    mass = float(np.max(matrix @ weights))
    return PropagatorKernel(t=t, matrix=matrix, weights=weights, nodes=nodes, mass=mass)
