"""Green's function of the Dirichlet subdiffusion problem on the unit interval.

The free-space kernel is

    P(y, s) = s^(beta - 1) / 2 * e^{1,beta}_{1,beta}(-|y| s^(-beta)),  beta = alpha / 2,

and the Dirichlet Green's function is its odd 2-periodic image sum

    G(x, t, xi, tau) = sum_m P(2m + x - xi, t - tau) - P(2m + x + xi, t - tau).

``green_spectral`` evaluates the same function from its sine series and is
kept as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, DomainError
from .specfun import MLIndices, WrightIndices, mittag_leffler, rgamma, wright_e


@dataclass(frozen=True)
class GreenEvalConfig:
    alpha: float
    image_cutoff: int = 8
    adaptive: bool = True
    tail_tol: float = 1e-14
    max_images: int = 400

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.image_cutoff < 1:
            raise DomainError("image_cutoff must be at least 1")
        if self.tail_tol <= 0:
            raise DomainError("tail_tol must be positive")


@dataclass(frozen=True)
class GreenEnvelope:
    """Constant C in |G| <= C (t - tau)^(alpha/2 - 1), estimated from samples."""

    C: float
    alpha: float
    raw_max: float
    safety: float
    decade_maxima: tuple[float, ...] = field(default=())


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def p_kernel(x, s, alpha: float):
    """Free-space kernel P(x, s); positive for every x and s > 0."""
    _check_alpha(alpha)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("p_kernel needs s > 0")
    beta = alpha / 2.0
    z = -np.abs(np.asarray(x, dtype=float)) * s_arr ** (-beta)
    return 0.5 * s_arr ** (beta - 1.0) * wright_e(WrightIndices(1.0, beta, 1.0, beta), z)


def _image_count(alpha: float, s_max: float, cfg: GreenEvalConfig) -> int:
    """Number of image shells M so the dropped tail is below tail_tol.

    For x, xi in [0, 1] every image with |m| > M sits at distance >= 2|m| - 2,
    P is decreasing in |y|, and the terms decay faster than geometrically,
    so the tail is bounded by 4 P(2M, s) / (1 - r) with r the ratio of
    consecutive shells. The tolerance is relative to the peak P(0, s).
    """
    m = cfg.image_cutoff
    if not cfg.adaptive:
        return m
    peak = float(p_kernel(0.0, s_max, alpha))
    while m <= cfg.max_images:
        here = float(p_kernel(2.0 * m, s_max, alpha))
        nxt = float(p_kernel(2.0 * m + 2.0, s_max, alpha))
        ratio = nxt / here if here > 0 else 0.0
        if ratio < 1.0 and 4.0 * here / (1.0 - ratio) <= cfg.tail_tol * peak:
            return m
        m += 1
    raise AccuracyError(
        f"image series needs more than {cfg.max_images} shells", estimate=4.0 * here / peak
    )


def green(x, t, xi, tau, cfg: GreenEvalConfig):
    """Image-series Green's function G(x, t, xi, tau); arguments broadcast."""
    t_arr, tau_arr = np.asarray(t, float), np.asarray(tau, float)
    if np.any(tau_arr >= t_arr):
        raise DomainError("green needs tau < t")
    s = t_arr - tau_arr
    x_arr, xi_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
    m_max = _image_count(cfg.alpha, float(np.max(s)), cfg)
    total = np.zeros(np.broadcast(x_arr, s).shape)
    for m in range(-m_max, m_max + 1):
        total = total + p_kernel(2 * m + x_arr - xi_arr, s, cfg.alpha)
        total = total - p_kernel(2 * m + x_arr + xi_arr, s, cfg.alpha)
    return float(total) if total.ndim == 0 else total


def green_spectral(x, t, xi, tau, alpha: float, modes: int):
    """Sine-series Green's function.

    2 sum_k s^(alpha-1) E_{alpha,alpha}(-(k pi)^2 s^alpha) sin(k pi x) sin(k pi xi).
    Only trustworthy for s = t - tau bounded away from zero, where the modes
    decay fast enough for the truncation.
    """
    _check_alpha(alpha)
    if modes < 1:
        raise DomainError("need at least one mode")
    s = np.asarray(t, float) - np.asarray(tau, float)
    if np.any(s <= 0):
        raise DomainError("green_spectral needs tau < t")
    k = np.arange(1, modes + 1)
    s_b = s[..., None]
    lam = (k * np.pi) ** 2
    amp = s_b ** (alpha - 1.0) * mittag_leffler(MLIndices(alpha, alpha), -lam * s_b**alpha)
    x_b = np.asarray(x, float)[..., None]
    xi_b = np.asarray(xi, float)[..., None]
    out = 2.0 * np.sum(amp * np.sin(k * np.pi * x_b) * np.sin(k * np.pi * xi_b), axis=-1)
    return float(out) if out.ndim == 0 else out


def estimate_envelope(
    alpha: float,
    t_range: tuple[float, float],
    sample_density: int = 16,
    safety: float = 1.1,
    per_decade: int = 6,
    cfg: GreenEvalConfig | None = None,
) -> GreenEnvelope:
    """Estimate C = safety * max |G| (t - tau)^(1 - alpha/2) over a sample set.

    Space samples are the interior lattice k / (density + 1) in both x and xi
    (so the diagonal x = xi is included); time gaps are log-spaced over
    ``t_range``, which must span at least two decades.
    """
    _check_alpha(alpha)
    lo, hi = t_range
    if not (0 < lo < hi):
        raise DomainError("t_range must satisfy 0 < lo < hi")
    decades = math.log10(hi / lo)
    if decades < 2 - 1e-12:
        raise DomainError("t_range must span at least two decades")
    if sample_density < 1:
        raise DomainError("sample set is empty")
    cfg = cfg or GreenEvalConfig(alpha)
    beta = alpha / 2.0

    pts = np.arange(1, sample_density + 1) / (sample_density + 1)
    xs, xis = np.meshgrid(pts, pts, indexing="ij")
    n_s = max(int(round(decades * per_decade)) + 1, 3)
    gaps = np.geomspace(lo, hi, n_s)
    scaled = np.array(
        [np.max(np.abs(green(xs, s, xis, 0.0, cfg))) * s ** (1.0 - beta) for s in gaps]
    )

    # per-decade maxima, smallest gaps first
    edges = np.floor(np.log10(gaps / lo) + 1e-12).astype(int)
    maxima = tuple(float(np.max(scaled[edges == d])) for d in np.unique(edges))
    growth = [b / a for a, b in zip(maxima[1:], maxima[:-1])]
    if len(growth) >= 2 and all(r > 2.0 for r in growth):
        raise AccuracyError(
            "scaled Green's function keeps growing toward small t - tau; no envelope",
            estimate=max(growth),
        )
    raw = float(np.max(scaled))
    return GreenEnvelope(C=safety * raw, alpha=alpha, raw_max=raw, safety=safety,
                         decade_maxima=maxima)


# {{{ tabulated kernel for grid assembly


class WrightTable:
    """Piecewise Chebyshev table of log e^{1,delta}_{1,beta}(-z) on [0, zmax].

    Grid assembly needs the P-kernel at millions of points; the table is
    built once from ``wright_e`` and gives close to full relative accuracy.
    The function is positive for delta >= 0 (so the log is defined) and
    is returned as 0 beyond ``zmax``, where it is below 1e-30 of its value
    at the origin.
    """

    def __init__(self, delta: float, beta: float, width: float = 0.25, degree: int = 16):
        if delta < 0 or not 0 < beta < 1:
            raise DomainError("WrightTable needs delta >= 0 and 0 < beta < 1")
        self.delta, self.beta, self.width = delta, beta, width
        k = beta ** (beta / (1 - beta)) * (1 - beta)
        # envelope exp(-k z^(1/(1-beta))) below 1e-30 (with a margin)
        self.zmax = (75.0 / k) ** (1 - beta)
        n_panels = int(math.ceil(self.zmax / width))
        nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        left = np.arange(n_panels) * width
        z = left[:, None] + (nodes[None, :] + 1.0) * (width / 2.0)
        idx = WrightIndices(1.0, delta, 1.0, beta)
        logw = np.log(wright_e(idx, -z.ravel())).reshape(z.shape)
        self.coef = np.polynomial.chebyshev.chebfit(nodes, logw.T, degree).T
        self.n_panels = n_panels

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape)
        inside = z < self.n_panels * self.width
        zi = z[inside]
        panel = np.minimum((zi / self.width).astype(int), self.n_panels - 1)
        u = 2.0 * (zi - panel * self.width) / self.width - 1.0
        c = self.coef[panel]
        # Clenshaw recurrence, vectorised over points
        b1 = np.zeros_like(u)
        b2 = np.zeros_like(u)
        for j in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * u * b1 - b2 + c[:, j], b1
        out[inside] = np.exp(u * b1 - b2 + c[:, 0])
        return out


@lru_cache(maxsize=16)
def wright_table(delta: float, beta: float) -> WrightTable:
    return WrightTable(delta, beta)


def lattice_kernel(alpha: float, s: float, h: float, n: int, tail_tol: float = 1e-14,
                   scaled: bool = False):
    """Periodised free-space kernel on the lattice y = k h, h = 1/n.

    Returns R with R[k + n] = sum_m P(2m + k h, s) for k = -n .. 2n, so that
    G(x_i, s, xi_j, 0) = R[i - j + n] - R[i + j + n] on the grid x_i = i h.
    With ``scaled`` the factor s^(beta - 1) is left out, which keeps the
    result finite as s -> 0.
    """
    beta = alpha / 2.0
    table = wright_table(beta, beta)
    # lattice offsets beyond the table support contribute nothing
    reach = table.zmax * s**beta / h
    jmax = max(int(math.ceil(min(reach, 1e9))) + 1, 3 * n)
    j = np.arange(jmax + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(j == 0, 0.0, j * h * s ** (-beta))
    q = 0.5 * table(z)
    if not scaled:
        q = q * s ** (beta - 1.0)
    q = q[: _trim(q, tail_tol)]
    return _periodise(q, n)


def _trim(q: np.ndarray, tail_tol: float) -> int:
    nz = np.nonzero(q > tail_tol * 1e-3 * q[0])[0]
    return int(nz[-1]) + 1 if nz.size else 1


def _periodise(q: np.ndarray, n: int) -> np.ndarray:
    """R[k + n] = sum_m q[|k + 2 m n|] over the available entries of q."""
    k = np.arange(-n, 2 * n + 1)
    out = np.zeros(k.shape)
    span = (q.size - 1) // (2 * n) + 2
    for m in range(-span, span + 1):
        idx = np.abs(k + 2 * m * n)
        ok = idx < q.size
        out[ok] += q[idx[ok]]
    return out


def lattice_to_matrix(R: np.ndarray, n: int) -> np.ndarray:
    """Matrix M[i, j] = R[i - j + n] - R[i + j + n] for i, j = 0..n."""
    i = np.arange(n + 1)
    return R[i[:, None] - i[None, :] + n] - R[i[:, None] + i[None, :] + n]


# }}}
