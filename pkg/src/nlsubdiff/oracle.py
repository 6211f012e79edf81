"""Reference solvers that avoid the Green's function pipeline.

* ``fd_forward_solve``: implicit L1 scheme in time, centred differences in
  space.
* ``spectral_forward_solve``: sine-series solution with Mittag-Leffler
  mode evolution and a Duhamel integral for the source.
* ``nonlocal_oracle_solve``: outer fixed point phi <- g(x, u_phi(x, T)) on
  top of either forward solver.

Only ``specfun`` is shared with the primary path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.fft import dst
from scipy.linalg import solve_banded
from scipy.special import roots_legendre

from .errors import DomainError, GateRejected, NonConvergence
from .fracops import GridFunction
from .solver import SpaceTimeField
from .specfun import MLIndices, mittag_leffler, rgamma

Source = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ForwardProblem:
    alpha: float
    T: float
    phi: GridFunction
    f: Source | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.T <= 0:
            raise DomainError("T must be positive")
        ends = np.abs(self.phi.values[[0, -1]])
        if np.max(ends) > 1e-12:
            raise DomainError(
                f"initial data must vanish at both ends, got {ends[0]:.3e}, {ends[1]:.3e}"
            )

    def source(self, x: np.ndarray, t) -> np.ndarray:
        if self.f is None:
            return np.zeros(np.broadcast(x, t).shape)
        return np.broadcast_to(self.f(x, t), np.broadcast(x, t).shape)


def _history_weights(n: int, alpha: float) -> np.ndarray:
    k = np.arange(1, n, dtype=float)
    b = np.empty(n)
    b[0] = 1.0
    b[1:] = k ** (1 - alpha) * np.expm1((1 - alpha) * np.log1p(1.0 / k))
    return b


def fd_forward_solve(p: ForwardProblem, nt: int) -> SpaceTimeField:
    """Implicit L1 / centred-difference solution on the phi grid with nt steps.

    The L1 history sum is accumulated in extended precision.
    """
    if nt < 1:
        raise DomainError("need at least one time step")
    x = p.phi.nodes
    nx = x.size - 1
    h = x[1] - x[0]
    dt = p.T / nt
    t = np.linspace(0.0, p.T, nt + 1)
    c = dt ** (-p.alpha) * rgamma(2.0 - p.alpha)
    b = _history_weights(nt, p.alpha)

    m = nx - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -1.0 / h**2
    ab[1, :] = c + 2.0 / h**2
    ab[2, :-1] = -1.0 / h**2

    u = np.zeros((nt + 1, nx + 1))
    u[0] = p.phi.values
    u[0, [0, -1]] = 0.0
    diffs = np.zeros((nt, m), dtype=np.longdouble)
    for n in range(1, nt + 1):
        # sum_{k=1}^{n-1} b_k (u^{n-k} - u^{n-k-1})
        if n > 1:
            hist = (b[1:n].astype(np.longdouble) @ diffs[n - 2 :: -1][: n - 1]).astype(float)
        else:
            hist = 0.0
        rhs = p.source(x[1:-1], t[n]) + c * (u[n - 1, 1:-1] - hist)
        u[n, 1:-1] = solve_banded((1, 1), ab, rhs)
        diffs[n - 1] = np.asarray(u[n, 1:-1], np.longdouble) - u[n - 1, 1:-1]
    if not np.all(np.isfinite(u)):
        raise DomainError("finite-difference solve produced non-finite values")
    return SpaceTimeField(x, t, u, {"method": "fd-l1"})


def _sine_coefficients(values: np.ndarray) -> np.ndarray:
    """b_k = 2 int_0^1 v sin(k pi x) dx by the trapezoidal rule, k = 1..n-1."""
    n = values.shape[-1] - 1
    return dst(values[..., 1:-1], type=1, axis=-1) / n


def _duhamel_rule(t: float, alpha: float, panels: int = 40, order: int = 12):
    """Nodes rho in [0, t^alpha] with geometric panels toward rho = 0."""
    top = t**alpha
    edges = np.concatenate([[0.0], top * 2.0 ** -np.arange(panels, -1, -1.0)])
    u, w = roots_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    rho = (lo + (hi - lo) * (u + 1) / 2).ravel()
    wr = ((hi - lo) / 2 * w).ravel()
    return rho, wr


def spectral_forward_solve(p: ForwardProblem, modes: int | None = None,
                           times=None) -> SpaceTimeField:
    """Truncated sine-series solution at the requested times (default T only).

    u_k(t) = phi_k E_a(-l_k t^a) + int_0^t s^(a-1) E_{a,a}(-l_k s^a) f_k(t - s) ds.
    The Duhamel integral is taken in rho = s^alpha, where it loses its
    singular weight.
    """
    a = p.alpha
    x = p.phi.nodes
    nx = x.size - 1
    modes = nx - 1 if modes is None else modes
    if not 1 <= modes <= nx - 1:
        raise DomainError(f"mode count must lie in [1, {nx - 1}]")
    times = np.atleast_1d(np.asarray(p.T if times is None else times, float))
    k = np.arange(1, modes + 1)
    lam = (k * np.pi) ** 2
    phik = _sine_coefficients(p.phi.values)[:modes]
    basis = np.sin(np.outer(k, np.pi * x))

    out = np.empty((times.size, nx + 1))
    for i, t in enumerate(times):
        coef = phik * mittag_leffler(MLIndices(a, 1.0), -lam * t**a) if t > 0 else phik.copy()
        if p.f is not None and t > 0:
            rho, w = _duhamel_rule(t, a)
            s = rho ** (1.0 / a)
            fk = _sine_coefficients(p.source(x[None, :], (t - s)[:, None]))[:, :modes]
            ml = mittag_leffler(MLIndices(a, a), -np.outer(rho, lam))
            coef = coef + np.sum(w[:, None] * ml * fk, axis=0) / a
        out[i] = coef @ basis
    out[:, [0, -1]] = 0.0
    return SpaceTimeField(x, times, out, {"method": "spectral", "modes": modes})


@dataclass
class OracleReport:
    iterations: int
    increments: list[float]
    converged: bool


def nonlocal_oracle_solve(spec, nx: int, nt: int, *, tol: float = 1e-12, max_iter: int = 500,
                          delta: float | None = None, method: str = "fd",
                          modes: int | None = None) -> tuple[GridFunction, OracleReport]:
    """v = u(., T) at the fixed point of phi <- g(x, forward(phi)(x, T)).

    ``delta`` is the contraction constant from the primary gate; the
    iteration refuses to start when it is >= 1. Divergence raises
    NonConvergence as in the primary solver.
    """
    if delta is not None and delta >= 1.0:
        raise GateRejected(delta, f"oracle refused: delta = {delta:.6g} >= 1")
    x = np.linspace(0.0, 1.0, nx + 1)

    def forward(phi):
        prob = ForwardProblem(spec.alpha, spec.T, GridFunction(x, phi), spec.f)
        if method == "fd":
            return fd_forward_solve(prob, nt).values[-1]
        if method == "spectral":
            return spectral_forward_solve(prob, modes).values[-1]
        raise DomainError(f"unknown forward method {method!r}")

    v = forward(np.zeros_like(x))
    rep = OracleReport(0, [], False)
    for it in range(1, max_iter + 1):
        phi = np.asarray(spec.g(x, v), float).copy()
        phi[[0, -1]] = np.where(np.abs(phi[[0, -1]]) <= 1e-12, 0.0, phi[[0, -1]])
        v_new = forward(phi)
        inc = float(np.max(np.abs(v_new - v)))
        rep.increments.append(inc)
        rep.iterations = it
        v = v_new
        if not np.all(np.isfinite(v)) or (it > 5 and inc > 1e8 * rep.increments[0]):
            raise NonConvergence(f"oracle iteration diverged after {it} steps", rep, diverged=True)
        if inc <= tol:
            rep.converged = True
            return GridFunction(x, v), rep
    raise NonConvergence(f"oracle did not converge in {max_iter} iterations", rep)
