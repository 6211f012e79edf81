"""Special functions: Gamma, Beta, two-parameter Mittag-Leffler, Wright-type.

Negative real arguments are the regime the solvers need. There the power
series of both entire functions cancel catastrophically, so beyond a small
radius they are evaluated from their Hankel-contour integral
representations, discretised by the trapezoidal rule on a parabolic
contour

    sigma(u) = a (1 + i u)^2,  u in R,

which crosses the positive real axis at ``a`` and wraps around the branch
cut on the negative axis. For the Wright-type function ``a`` is placed on
the saddle point of the integrand, which keeps the accuracy relative even
when the value is exponentially small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import AccuracyError, DomainError

# series truncation: three consecutive terms below SERIES_RTOL * |sum|
SERIES_RTOL = 1e-16
SERIES_MAX_TERMS = 2000

ML_ASYMPTOTIC_RADIUS = 30.0
SERIES_RADIUS = 1.0

# trapezoidal rule on the parabolic contour
_CONTOUR_NODES = 64
_CONTOUR_DECAY = 60.0


def gamma_fn(a):
    """Euler's Gamma function; raises DomainError at the poles."""
    arr = np.asarray(a, dtype=float)
    if np.any((arr <= 0) & (arr == np.round(arr))):
        raise DomainError(f"Gamma has a pole at nonpositive integer {a!r}")
    if arr.ndim == 0:
        return math.gamma(float(arr))
    return sc.gamma(arr)


def rgamma(a):
    """Reciprocal Gamma function, entire; exactly 0 at nonpositive integers."""
    out = sc.rgamma(np.asarray(a, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def beta_fn(a, b):
    """Beta function through the Gamma identity."""
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(a_arr <= 0) or np.any(b_arr <= 0):
        raise DomainError(f"Beta function needs positive arguments, got ({a!r}, {b!r})")
    # log-space keeps large arguments finite
    out = np.exp(sc.gammaln(a_arr) + sc.gammaln(b_arr) - sc.gammaln(a_arr + b_arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MLIndices:
    rho: float
    mu: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise DomainError(f"Mittag-Leffler index rho must lie in (0, 1], got {self.rho}")


@dataclass(frozen=True)
class WrightIndices:
    """Indices of the Wright-type function sum z^n / (Gamma(gamma n + mu) Gamma(delta - beta n))."""

    mu: float
    delta: float
    gamma: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and self.gamma > self.beta):
            raise DomainError(
                f"Wright-type series needs gamma > 0 and gamma > beta, got "
                f"gamma={self.gamma}, beta={self.beta}"
            )


def _series(z: np.ndarray, coef) -> np.ndarray:
    """Sum_n coef(n) z^n with the three-small-terms stopping rule.

    Returns the sum and the largest term magnitude seen (for cancellation
    estimates).
    """
    total = np.zeros_like(z)
    biggest = np.zeros_like(z)
    power = np.ones_like(z)
    quiet = np.zeros(z.shape, dtype=int)
    for n in range(SERIES_MAX_TERMS):
        term = coef(n) * power
        total = total + term
        biggest = np.maximum(biggest, np.abs(term))
        small = np.abs(term) <= SERIES_RTOL * (np.abs(total) + 1e-300)
        quiet = np.where(small, quiet + 1, 0)
        if np.all(quiet >= 3):
            return total, biggest
        power = power * z
    est = float(np.max(np.abs(term) / (np.abs(total) + 1e-300)))
    raise AccuracyError("power series did not converge within the term cap", estimate=est)


def _parabola(a: np.ndarray, nodes: int = _CONTOUR_NODES):
    """Trapezoid nodes on sigma = a (1 + i u)^2, u in [0, U], per entry of ``a``.

    Returns (sigma, dsigma/du * weight) with the trailing axis over nodes.
    By conjugate symmetry the Hankel integral equals (1/pi) Im of the
    half-line integral.
    """
    a = a[..., None]
    umax = np.maximum(np.sqrt(_CONTOUR_DECAY / a), 3.0)
    h = umax / nodes
    u = np.arange(nodes + 1) * h
    w = np.full(nodes + 1, 1.0)
    w[0] = 0.5
    one_iu = 1.0 + 1j * u
    return a * one_iu**2, 2j * a * one_iu * (w * h)


def _asarray(z):
    z_arr = np.asarray(z, dtype=float)
    return z_arr, z_arr.ndim == 0


def _out(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


# {{{ Mittag-Leffler


def _ml_series(rho, mu, z):
    total, biggest = _series(z, lambda n: rgamma(rho * n + mu))
    return total


def _ml_contour(rho, mu, z):
    # E_{rho,mu}(z) = 1/(2 pi i) int_Ha e^s s^(rho-mu) / (s^rho - z) ds;
    # for z < 0 and rho < 1 the poles are off the principal sheet, and for
    # rho = 1 the single pole at s = z is enclosed by the parabola
    a = np.ones_like(z)
    umax2 = (_CONTOUR_DECAY + np.abs(z)) / a
    nodes = _CONTOUR_NODES + int(np.max(np.sqrt(umax2)))
    sig, dsig = _parabola(a, nodes)
    zc = z[..., None]
    integrand = np.exp(sig) * sig ** (rho - mu) / (sig**rho - zc) * dsig
    return np.sum(integrand.imag, axis=-1) / np.pi


def _ml_asymptotic(rho, mu, z):
    # E_{rho,mu}(z) ~ -sum_k z^-k / Gamma(mu - rho k), |arg(-z)| < (1 - rho/2) pi
    total = np.zeros_like(z)
    inv = 1.0 / z
    power = inv.copy()
    smallest = np.full_like(z, np.inf)
    active = np.ones(z.shape, bool)
    quiet = np.zeros(z.shape, int)
    for k in range(1, 400):
        term = -power * rgamma(mu - rho * k)
        mag = np.abs(term)
        nonzero = mag > 0
        # the expansion diverges: freeze each entry once its terms start growing
        growing = nonzero & (mag > smallest) & (smallest < 1e-8 * np.abs(total))
        active &= ~growing
        total = total + np.where(active, term, 0.0)
        smallest = np.where(nonzero, np.minimum(smallest, mag), smallest)
        tiny = nonzero & (mag <= SERIES_RTOL * np.abs(total))
        quiet = np.where(tiny, quiet + 1, np.where(nonzero, 0, quiet))
        active &= quiet < 3
        if not np.any(active):
            break
        power = power * inv
    return total


def _asymptotic_ok(rho, z):
    # the neglected remainder scales like exp(-c |z|^(1/rho)); near rho = 1
    # and rho = 2/3 the constant c degrades, so the switch point moves out
    c = max(abs(math.cos(math.pi / rho)), 0.2)
    with np.errstate(over="ignore"):
        decay = c * np.abs(z) ** (1.0 / rho)
    return (z < -ML_ASYMPTOTIC_RADIUS) & (decay > 45.0)


def mittag_leffler(idx: MLIndices, z):
    """Two-parameter Mittag-Leffler function E_{rho,mu}(z) for real z.

    Positive arguments use the power series. Negative arguments use the
    series near the origin, the Hankel contour integral at moderate
    distance, and the algebraic asymptotic expansion for |z| > 30 once its
    exponentially small remainder is below double precision.
    """
    rho, mu = idx.rho, idx.mu
    z_arr, scalar = _asarray(z)
    out = np.empty_like(z_arr)

    near = z_arr >= -SERIES_RADIUS
    far = _asymptotic_ok(rho, z_arr)
    mid = (z_arr < -SERIES_RADIUS) & ~far

    if np.any(near):
        zn = z_arr[near]
        if np.any(zn > 0):
            # positive argument: terms do not cancel, only overflow matters
            bound = np.max(zn) ** (1.0 / rho)
            if bound > 700:
                raise AccuracyError(
                    "Mittag-Leffler value overflows for this positive argument", np.inf
                )
        out[near] = _ml_series(rho, mu, zn)
    if rho == 1.0 and float(mu).is_integer() and mu >= 1:
        # E_{1,m}(z) = z^(1-m) (e^z - sum_{j<m-1} z^j / j!); the contour
        # would recover the exponentially small residue e^z only absolutely
        closed = mid | far
        mid = far = np.zeros_like(closed)
        if np.any(closed):
            zc = z_arr[closed]
            m = int(mu)
            head = sum(zc**j / math.factorial(j) for j in range(m - 1))
            out[closed] = zc ** (1 - m) * (np.exp(zc) - head)
    if np.any(mid):
        out[mid] = _ml_contour(rho, mu, z_arr[mid])
    if np.any(far):
        out[far] = _ml_asymptotic(rho, mu, z_arr[far])
    return _out(out, scalar)


# }}}


# {{{ Wright-type function


def _wright_series(idx: WrightIndices, z):
    def coef(n):
        return rgamma(idx.gamma * n + idx.mu) * rgamma(idx.delta - idx.beta * n)

    return _series(z, coef)


def _wright_contour(delta, beta, x):
    # e^{1,delta}_{1,beta}(-x) = 1/(2 pi i) int_Ha exp(s - x s^beta) s^-delta ds
    # with the parabola through the saddle s0 = (beta x)^(1/(1-beta))
    saddle = (beta * x) ** (1.0 / (1.0 - beta))
    a = np.maximum(saddle, 1.0)
    sig, dsig = _parabola(a)
    integrand = np.exp(sig - x[..., None] * sig**beta) * sig ** (-delta) * dsig
    return np.sum(integrand.imag, axis=-1) / np.pi


def wright_e(idx: WrightIndices, z):
    """Wright-type function e^{mu,delta}_{gamma,beta}(z) for real z.

    With gamma = mu = 1 and 0 < beta < 1 the negative half-line is handled
    by the saddle-point contour integral, giving relative accuracy near
    machine precision even where the value is exponentially small. Other
    index sets fall back to the power series, guarded by a cancellation
    estimate.
    """
    z_arr, scalar = _asarray(z)
    out = np.empty_like(z_arr)
    contour_ok = idx.gamma == 1.0 and idx.mu == 1.0 and 0.0 < idx.beta < 1.0
    use_contour = (z_arr < -SERIES_RADIUS) if contour_ok else np.zeros(z_arr.shape, bool)

    if np.any(~use_contour):
        zs = z_arr[~use_contour]
        total, biggest = _wright_series(idx, zs)
        est = np.max(biggest * 1e-16 / (np.abs(total) + 1e-300), initial=0.0)
        if est > 1e-8:
            raise AccuracyError(
                "Wright-type series loses too many digits to cancellation", float(est)
            )
        out[~use_contour] = total
    if np.any(use_contour):
        out[use_contour] = _wright_contour(idx.delta, idx.beta, -z_arr[use_contour])
    return _out(out, scalar)


# }}}


# {{{ lemma predicates


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of the positivity, monotonicity and envelope checks at one point.

    Flags are True/False, or None where the lemma hypotheses do not hold.
    """

    value: float
    envelope: float | None
    positivity_holds: bool | None
    monotone_holds: bool | None
    envelope_holds: bool | None


def lemma_envelope(delta: float, beta: float, x):
    """(1/Gamma(delta)) exp(-x^(1/(1-beta)) beta^(beta/(1-beta)) (1-beta))."""
    k = beta ** (beta / (1.0 - beta)) * (1.0 - beta)
    return rgamma(delta) * np.exp(-k * np.asarray(x, float) ** (1.0 / (1.0 - beta)))


def check_lemma_bounds(idx: WrightIndices, x: float, neighbor: float = 1e-3) -> LemmaReport:
    """Evaluate e^{1,delta}_{1,beta}(-x) and test it against the lemma bounds.

    Monotonicity is probed by comparing against the value at x(1 + neighbor).
    """
    if x <= 0:
        raise DomainError(f"lemma checks need x > 0, got {x}")
    if not (idx.gamma == 1.0 and idx.mu == 1.0):
        raise DomainError("lemma checks apply to gamma = mu = 1 only")
    delta, beta = idx.delta, idx.beta
    value = wright_e(idx, -x)

    in_unit = 0.0 < beta < 1.0
    positivity = (value > 0) if (delta >= 0 and in_unit) else None
    monotone = None
    if delta >= beta and in_unit:
        monotone = bool(wright_e(idx, -x * (1.0 + neighbor)) < value)
    envelope = envelope_ok = None
    if delta >= 1 and in_unit:
        envelope = float(lemma_envelope(delta, beta, x))
        envelope_ok = bool(0 < value <= envelope * (1 + 1e-12))
    return LemmaReport(
        value=value,
        envelope=envelope,
        positivity_holds=None if positivity is None else bool(positivity),
        monotone_holds=monotone,
        envelope_holds=envelope_ok,
    )


# }}}
