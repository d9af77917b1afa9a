"""Closed-form path: deterministic equivalents, shot-noise transforms, moments,
lognormal fits, and the outage / mean-rate / lower-bound integrals.

The interference and leakage terms are shot noises over the BS and user point
processes; their Laplace transforms exist in two interchangeable forms, a
closed form built on incomplete Beta functions and a direct radial integral of
the log-transform. The radial form accepts complex arguments and doubles as
the characteristic-function evaluator for the Parseval-based lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaln, gammaln, ndtr

from .errors import DomainError, NumericsError
from .params import SystemParams

EULER_GAMMA = float(np.euler_gamma)
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Deterministic equivalents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeterministicEquivalents:
    """Large-system limits of the in-cell channel statistics.

    ``alpha`` is the limit of the useful signal power |h^H w|^2, ``chi`` the
    limit of both the crosstalk and the in-cell leakage sums, and ``g_val``
    the auxiliary fixed-point value they derive from.
    """

    g_val: float
    alpha: float
    chi: float


def deterministic_equivalents(load_ratio: float, regularizer: float) -> DeterministicEquivalents:
    b, xi = float(load_ratio), float(regularizer)
    if not b > 0.0 or not xi > 0.0:
        raise DomainError("load_ratio and regularizer must be strictly positive")
    g = 0.5 * (
        math.sqrt((1.0 - b) ** 2 / xi**2 + 2.0 * (1.0 + b) / xi + 1.0)
        + (1.0 - b) / xi
        - 1.0
    )
    chi = 1.0 / (1.0 + g) ** 2
    alpha = g * (1.0 + (xi / b) * (1.0 + g) ** 2) / (1.0 + g) ** 2
    return DeterministicEquivalents(g_val=g, alpha=alpha, chi=chi)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def incomplete_beta(x: float, y: float, z: float) -> float:
    """Lower incomplete Beta integral of t^(y-1) (1-t)^(z-1) over [0, x].

    Unregularized. Requires 0 <= x <= 1 and positive y, z.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    if not y > 0.0 or not z > 0.0:
        raise DomainError("shape parameters must be strictly positive")
    return float(betainc(y, z, x) * math.exp(betaln(y, z)))


def _beta_tail_log(a: float, b: float, upper_complement: float) -> float:
    """log of the Beta integral over [1 - upper_complement, 1], unregularized."""
    reg = betainc(b, a, upper_complement)
    if reg <= 0.0:
        return -math.inf
    return math.log(reg) + betaln(a, b)


# ---------------------------------------------------------------------------
# Laplace transforms, closed forms
# ---------------------------------------------------------------------------

def laplace_interference(s: float, tagged_distance: float, params: SystemParams) -> float:
    """Laplace transform of the inter-cell interference term at real s >= 0.

    Closed form: exp(-(s/K)^(2/eta) lambda_b C(s, y)) where C is a binomial sum
    of incomplete-Beta differences, accumulated in log space so cell sizes in
    the hundreds do not overflow.
    """
    if s < 0.0:
        raise DomainError("s must be nonnegative")
    if not tagged_distance > 0.0:
        raise DomainError("tagged_distance must be strictly positive")
    if s == 0.0:
        return 1.0
    k = params.users_per_cell
    eta = params.path_loss_exp
    q = (s / k) * tagged_distance ** (-eta)
    u = q / (1.0 + q)  # complement of the inner Beta limit, exact for small s
    ns = np.arange(1, k + 1, dtype=float)
    a = k - ns + 2.0 / eta
    b = ns - 2.0 / eta
    log_binom = gammaln(k + 1.0) - gammaln(ns + 1.0) - gammaln(k - ns + 1.0)
    reg = betainc(b, a, u)
    with np.errstate(divide="ignore"):
        log_terms = log_binom + np.log(reg) + betaln(a, b)
    finite = log_terms[np.isfinite(log_terms)]
    if len(finite) == 0:
        return 1.0
    peak = finite.max()
    total = math.exp(peak) * float(np.sum(np.exp(finite - peak)))
    c_val = (2.0 * math.pi / eta) * total
    return math.exp(-((s / k) ** (2.0 / eta)) * params.bs_density * c_val)


def laplace_leakage(s: float, params: SystemParams) -> float:
    """Laplace transform of the out-of-cell leakage term at real s >= 0."""
    if s < 0.0:
        raise DomainError("s must be nonnegative")
    if s == 0.0:
        return 1.0
    k = params.users_per_cell
    eta = params.path_loss_exp
    q = (s / k) * params.cell_radius ** (-eta)
    u = q / (1.0 + q)
    log_tail = _beta_tail_log(2.0 / eta, 1.0 - 2.0 / eta, u)
    d_val = (2.0 * math.pi / eta) * math.exp(log_tail)
    return math.exp(-params.user_density * ((s / k) ** (2.0 / eta)) * d_val)


# ---------------------------------------------------------------------------
# Laplace transforms, radial-integral form (complex-capable, vectorized)
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_RADIAL_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _log1p_complex(z: np.ndarray) -> np.ndarray:
    """log(1 + z) for complex arrays, accurate for small |z|."""
    re, im = np.real(z), np.imag(z)
    return 0.5 * np.log1p(2.0 * re + re * re + im * im) + 1j * np.arctan2(im, 1.0 + re)


def _expm1_complex(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 for complex arrays, accurate for small |z|."""
    re, im = np.real(z), np.imag(z)
    half = np.sin(0.5 * im)
    return (np.expm1(re) * np.cos(im) - 2.0 * half * half) + 1j * np.exp(re) * np.sin(im)


# (Gauss-Legendre order per panel, smallest panel edge exponent). The fine
# grid serves the closed-form cross-checks; the fast grid serves the bulk
# characteristic-function evaluations of the lower bound.
FINE_RADIAL_GRID = (20, -16)
FAST_RADIAL_GRID = (12, -10)


def _radial_grid(eta: float, order: int = 20, min_exp: int = -16):
    """Quadrature grid on (0, 1] for the substituted radial integrand.

    The radial variable v in [lower, inf) maps to t = (lower / v) in (0, 1],
    then t = tau^p with p = 2/(eta-2) flattens the t^(eta-3) behavior at the
    origin for every eta > 2. Panels shrink geometrically in half-octave steps
    so any transition scale of the integrand is resolved.
    """
    key = (eta, order, min_exp)
    if key not in _RADIAL_CACHE:
        x, w = _gauss_legendre(order)
        edges = np.concatenate(([0.0], 2.0 ** (0.5 * np.arange(2 * min_exp, 1.0))))
        lows, highs = edges[:-1], edges[1:]
        half = 0.5 * (highs - lows)
        mid = 0.5 * (highs + lows)
        tau = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        p = 2.0 / (eta - 2.0)
        t = tau**p
        jac = p * tau ** (p - 1.0)
        _RADIAL_CACHE[key] = (t, weights * jac)
    return _RADIAL_CACHE[key]


def _shot_noise_exponent(
    s, lower: float, eta: float, k_scale: int, shape: float, grid=FINE_RADIAL_GRID
):
    """integral over [lower, inf) of (1 - (1 + (s/k) v^-eta)^-shape) v dv.

    Vectorized over s, which may be complex; shape is a positive integer so
    the complex power is branch-free. The integrand is formed through log1p
    and expm1 to stay accurate when s is tiny (moment checks differentiate
    this at zero, and the far-field nodes carry large quadrature weights that
    would amplify plain-power cancellation).
    """
    s_arr = np.atleast_1d(np.asarray(s))
    t, wt = _radial_grid(eta, *grid)
    z = (s_arr[:, None] / k_scale) * lower ** (-eta) * t[None, :] ** eta
    if np.iscomplexobj(z):
        one_minus = -_expm1_complex(-float(shape) * _log1p_complex(z))
    else:
        one_minus = -np.expm1(-float(shape) * np.log1p(z))
    out = lower**2 * (one_minus * t[None, :] ** (-3.0)) @ wt
    return out if np.ndim(s) else out[0]


def log_laplace_interference_numeric(s, tagged_distance: float, params: SystemParams):
    """log of the radial-integral interference transform; accepts complex s.

    Working on the log scale keeps derivative estimates at s = 0 free of the
    exp/log round-trip quantization. Vectorized over s.
    """
    expo = _shot_noise_exponent(
        s,
        lower=tagged_distance,
        eta=params.path_loss_exp,
        k_scale=params.users_per_cell,
        shape=params.users_per_cell,
    )
    return -2.0 * math.pi * params.bs_density * expo


def laplace_interference_numeric(s, tagged_distance: float, params: SystemParams):
    """Radial-integral form of the interference transform; accepts complex s.

    Agrees with laplace_interference on real s and evaluates characteristic
    function values at imaginary arguments without multivalued special
    functions. Vectorized over s.
    """
    return np.exp(log_laplace_interference_numeric(s, tagged_distance, params))


def log_laplace_leakage_numeric(s, params: SystemParams):
    """log of the radial-integral leakage transform; accepts complex s."""
    expo = _shot_noise_exponent(
        s,
        lower=params.cell_radius,
        eta=params.path_loss_exp,
        k_scale=params.users_per_cell,
        shape=1,
    )
    return -2.0 * math.pi * params.user_density * expo


def laplace_leakage_numeric(s, params: SystemParams):
    """Radial-integral form of the leakage transform; accepts complex s."""
    return np.exp(log_laplace_leakage_numeric(s, params))


# ---------------------------------------------------------------------------
# Moments and lognormal fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float


def interference_moments(tagged_distance: float, params: SystemParams) -> MomentSummary:
    """Mean and variance of the inter-cell interference term at a given
    serving distance (Campbell sums over the BS process outside that radius)."""
    eta = params.path_loss_exp
    if eta <= 2.0:
        raise DomainError("path loss exponent must exceed 2")
    if not tagged_distance > 0.0:
        raise DomainError("tagged_distance must be strictly positive")
    y = tagged_distance
    lam = params.bs_density
    k = params.users_per_cell
    mean = 2.0 * math.pi * lam * y ** (-(eta - 2.0)) / (eta - 2.0)
    var = math.pi * lam * (k + k**2) * y ** (-2.0 * (eta - 1.0)) / (k**2 * (eta - 1.0))
    return MomentSummary(mean=mean, variance=var)


def leakage_moments(params: SystemParams) -> MomentSummary:
    """Mean and variance of the out-of-cell leakage term."""
    eta = params.path_loss_exp
    if eta <= 2.0:
        raise DomainError("path loss exponent must exceed 2")
    r = params.cell_radius
    lam_u = params.user_density
    k = params.users_per_cell
    mean = 2.0 * math.pi * lam_u * r ** (-(eta - 2.0)) / (k * (eta - 2.0))
    var = 2.0 * math.pi * lam_u * r ** (-2.0 * (eta - 1.0)) / (k**2 * (eta - 1.0))
    return MomentSummary(mean=mean, variance=var)


@dataclass(frozen=True)
class LognormalFit:
    """Lognormal parameters matching a given mean and variance."""

    mu_n: float
    sigma2_n: float

    @property
    def sigma_n(self) -> float:
        return math.sqrt(self.sigma2_n)

    def sf(self, x: float) -> float:
        """P(X >= x); equals 1 for x <= 0 since the variable is positive."""
        if x <= 0.0:
            return 1.0
        if self.sigma2_n == 0.0:
            return 1.0 if math.log(x) <= self.mu_n else 0.0
        return float(ndtr(-(math.log(x) - self.mu_n) / self.sigma_n))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0.0
        if self.sigma2_n == 0.0:
            out[pos] = (np.log(x[pos]) >= self.mu_n).astype(float)
        else:
            out[pos] = ndtr((np.log(x[pos]) - self.mu_n) / self.sigma_n)
        return out


def lognormal_fit(moments: MomentSummary) -> LognormalFit:
    """Moment-matched lognormal parameters for a positive random variable."""
    if not moments.mean > 0.0:
        raise DomainError("lognormal fit requires a strictly positive mean")
    if moments.variance < 0.0:
        raise DomainError("variance must be nonnegative")
    ratio = moments.variance / moments.mean**2
    sigma2 = math.log1p(ratio)
    mu = math.log(moments.mean) - 0.5 * sigma2
    return LognormalFit(mu_n=mu, sigma2_n=sigma2)


# ---------------------------------------------------------------------------
# Outage threshold and the outage / mean-rate integrals
# ---------------------------------------------------------------------------

def tau(x: float, y: float, det_eq: DeterministicEquivalents, params: SystemParams) -> float:
    """Leakage level above which a scene with interference x and serving
    distance y is in secrecy outage. May be negative (outage certain)."""
    rho = params.snr
    path = y ** (-params.path_loss_exp)
    return det_eq.alpha * path / (rho * det_eq.chi * path + rho * x + 1.0) - det_eq.chi * path


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances and cutoffs for the analytic integrals."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-6
    outer_abs_tol: float = 1e-8
    outer_rel_tol: float = 1e-6
    weight_floor: float = 1e-12
    normal_halfwidth: float = 8.5
    leak_integral_order: int = 48
    phi_min_cutoff: float = 2.0
    phi_cutoff_cycles: float = 40.0
    phi_panel_fraction: float = 0.25
    phi_node_order: int = 16
    max_phi_panels: int = 6000
    quad_limit: int = 200


DEFAULT_SETTINGS = QuadratureSettings()


def _quad(func, a, b, settings, outer=False, points=None):
    eps_a = settings.outer_abs_tol if outer else settings.abs_tol
    eps_r = settings.outer_rel_tol if outer else settings.rel_tol
    result = integrate.quad(
        func, a, b, epsabs=eps_a, epsrel=eps_r, limit=settings.quad_limit, points=points,
        full_output=1,
    )
    if len(result) > 3:
        raise NumericsError(
            f"quadrature failed on [{a:g}, {b:g}]: {result[3]}", achieved=result[1]
        )
    return result[0]


def _max_serving_distance(params: SystemParams, settings: QuadratureSettings) -> float:
    return math.sqrt(
        math.log(1.0 / settings.weight_floor) / (math.pi * params.bs_density)
    )


def _serving_pdf(y, params):
    lam_pi = math.pi * params.bs_density
    return 2.0 * lam_pi * y * np.exp(-lam_pi * y * y)


def _norm_pdf(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


def outage_probability(
    params: SystemParams,
    pdf_source: str = "lognormal",
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> float:
    """Approximate secrecy outage probability for the typical user.

    Integrates P(leakage >= threshold) against the interference density at
    each serving distance and the nearest-BS distance law. The interference
    density is the moment-matched lognormal re-fitted at every distance;
    the threshold branch at tau <= 0 is exact since the leakage is positive.
    """
    if pdf_source != "lognormal":
        raise NotImplementedError("only the lognormal pdf source is implemented")
    det_eq = deterministic_equivalents(params.load_ratio, params.regularizer)
    leak_fit = lognormal_fit(leakage_moments(params))
    hw = settings.normal_halfwidth

    def inner(y: float) -> float:
        fit_i = lognormal_fit(interference_moments(y, params))
        mu, sig = fit_i.mu_n, fit_i.sigma_n

        def over_interference(t: float) -> float:
            x = math.exp(mu + sig * t)
            return _norm_pdf(t) * leak_fit.sf(tau(x, y, det_eq, params))

        return _quad(over_interference, -hw, hw, settings)

    y_max = _max_serving_distance(params, settings)

    def over_distance(y: float) -> float:
        return inner(y) * _serving_pdf(y, params)

    val = _quad(over_distance, 0.0, y_max, settings, outer=True,
                points=[params.cell_radius])
    return min(1.0, max(0.0, val))


def _truncated_log_leak_term(v_upper, y_path, fit_l, params, settings):
    """integral of log2(1 + rho chi-path + rho z) over the leakage density,
    z up to the quantile v_upper (standard-normal coordinates)."""
    lo = -settings.normal_halfwidth
    if v_upper <= lo:
        return 0.0
    x, w = _gauss_legendre(settings.leak_integral_order)
    half = 0.5 * (v_upper - lo)
    v = lo + half * (1.0 + x)
    z = np.exp(fit_l.mu_n + fit_l.sigma_n * v)
    vals = np.log2(1.0 + y_path + params.snr * z)
    pdf = np.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi)
    return float(half * np.sum(w * pdf * vals))


def mean_secrecy_rate(
    params: SystemParams,
    pdf_source: str = "lognormal",
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> float:
    """Approximate mean secrecy rate (bits per channel use) for the typical user.

    The interference integral stops at the level where the outage threshold
    reaches zero; beyond it scenes contribute nothing. The leakage integral is
    truncated at the threshold, per the positive-part structure of the rate.
    """
    if pdf_source != "lognormal":
        raise NotImplementedError("only the lognormal pdf source is implemented")
    det_eq = deterministic_equivalents(params.load_ratio, params.regularizer)
    rho = params.snr
    eta = params.path_loss_exp
    alpha, chi = det_eq.alpha, det_eq.chi
    leak_fit = lognormal_fit(leakage_moments(params))
    hw = settings.normal_halfwidth

    x_cap_flat = alpha / (rho * chi) - 1.0 / rho
    if x_cap_flat <= 0.0:
        return 0.0
    # Below y_min the in-cell leakage alone forces outage.
    y_min = (chi / x_cap_flat) ** (1.0 / eta)
    y_max = _max_serving_distance(params, settings)
    if y_min >= y_max:
        return 0.0

    def inner(y: float) -> float:
        path = y ** (-eta)
        x_cap = x_cap_flat - chi * path
        if x_cap <= 0.0:
            return 0.0
        fit_i = lognormal_fit(interference_moments(y, params))
        mu, sig = fit_i.mu_n, fit_i.sigma_n
        t_cap = (math.log(x_cap) - mu) / sig
        if t_cap <= -hw:
            return 0.0
        rho_chi_path = rho * chi * path

        def over_interference(t: float) -> float:
            x = math.exp(mu + sig * t)
            thr = tau(x, y, det_eq, params)
            if thr <= 0.0:
                return 0.0
            v_thr = (math.log(thr) - leak_fit.mu_n) / leak_fit.sigma_n
            gain = math.log2(1.0 + rho * alpha * path / (rho_chi_path + rho * x + 1.0))
            loss = _truncated_log_leak_term(min(v_thr, hw), rho_chi_path, leak_fit, params, settings)
            return _norm_pdf(t) * (gain * float(ndtr(v_thr)) - loss)

        return _quad(over_interference, -hw, min(t_cap, hw), settings)

    def over_distance(y: float) -> float:
        return inner(y) * _serving_pdf(y, params)

    pts = [p for p in (params.cell_radius,) if y_min < p < y_max]
    val = _quad(over_distance, y_min, y_max, settings, outer=True, points=pts or None)
    return max(0.0, val)


# ---------------------------------------------------------------------------
# Parseval lower bound on the mean secrecy rate
# ---------------------------------------------------------------------------

def _phi_panels(cutoff: float, width: float, order: int, max_panels: int):
    """Gauss-Legendre nodes/weights on [0, cutoff] with a panel edge at 1."""
    width = max(width, cutoff / max_panels, 1e-300)
    edges = [0.0]
    pos = 0.0
    while pos < cutoff:
        nxt = min(pos + width, cutoff)
        if pos < 1.0 < nxt:
            nxt = 1.0
        edges.append(nxt)
        pos = nxt
    edges = np.asarray(edges)
    x, w = _gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _oscillatory_tail(transform, sign, base_freq, center, cutoff, step):
    """Tail of integral_{cutoff}^inf sign * e^(2 pi i u phi) Psi(phi) / phi dphi.

    Integration by parts around the centered envelope g = Psi e^(-2 pi i c phi)/phi,
    three terms, derivatives by central differences.
    """
    a = 2.0 * math.pi * (base_freq + center)
    if a == 0.0:
        return 0.0
    h = step
    phis = np.array([cutoff - h, cutoff, cutoff + h])
    vals = transform(phis) * np.exp(-2j * math.pi * center * phis) / phis
    g0 = vals[1]
    g1 = (vals[2] - vals[0]) / (2.0 * h)
    g2 = (vals[2] - 2.0 * vals[1] + vals[0]) / (h * h)
    ia = 1j * a
    series = -g0 / ia + g1 / ia**2 - g2 / ia**3
    return float(np.real(sign * np.exp(ia * cutoff) * series))


def _cf_variance(transform, scale_guess: float) -> float:
    """Variance encoded in a characteristic function, from the curvature of
    log |transform| near zero (the phase carries the mean and cancels)."""
    h = min(1.0, 0.2 / max(scale_guess, 1e-12))
    for _ in range(80):
        mag = float(np.abs(transform(np.array([h])))[0])
        if mag >= 0.8:
            break
        h *= 0.25
    if mag <= 0.0:
        return 0.0
    return max(0.0, -2.0 * math.log(mag) / (2.0 * math.pi * h) ** 2)


# Shifts this many times larger than the shot-noise spread make a log term
# effectively deterministic; a second-order expansion replaces the transform
# integral there.
_DETERMINISTIC_SHIFT_RATIO = 60.0


def _expected_log_shifted(w, transform, mu, var, settings):
    """E[log(w + X)] for a nonnegative X given its characteristic function.

    Uses the frequency representation of the shifted log kernel; the delta
    part of the kernel contributes the Euler constant and the 2 pi scale
    exactly, and the half-axis regularizer is completed analytically when the
    transform dies before the unit frequency. Falls back to a second-order
    expansion around the mean when the shift dominates the spread.
    """
    sig = math.sqrt(var)
    spread = mu + sig
    if spread <= 0.0 or w >= _DETERMINISTIC_SHIFT_RATIO * spread:
        return math.log(w + mu) - 0.5 * var / (w + mu) ** 2

    u_osc = w + mu + sig
    width = settings.phi_panel_fraction / u_osc
    cutoff = max(settings.phi_min_cutoff, settings.phi_cutoff_cycles / (w + mu))
    # The integrand dies with the transform; probing its decay keeps the
    # panel count proportional to the live oscillations only.
    probe = 16.0 * width
    while probe < cutoff:
        if float(np.max(np.abs(transform(np.array([probe]))))) < 1e-12:
            cutoff = probe
            break
        probe *= 2.0
    nodes, weights = _phi_panels(
        cutoff, width, settings.phi_node_order, settings.max_phi_panels
    )
    vals = np.real(np.exp(2j * math.pi * w * nodes) * transform(nodes))
    main = float(np.dot(weights, (vals - (nodes <= 1.0)) / nodes))
    if cutoff < 1.0:
        # Remainder of the half-axis regularizer beyond the live region.
        main += math.log(cutoff)
    tail = _oscillatory_tail(
        transform, 1.0, w, mu, cutoff, min(width / 8.0, 0.1)
    )
    return -(main + tail) - EULER_GAMMA - math.log(2.0 * math.pi)


def _expected_log_real_axis(w: float, log_laplace_fn, settings) -> float:
    """E[log(w + X)] from the real log-Laplace transform of a nonnegative X.

    Exponential-difference identity: E log(w + X) - log w integrates
    e^(-w t) (1 - L_X(t)) / t over the half axis; the integrand is smooth,
    nonnegative, and needs no oscillatory handling.
    """
    t_hi = math.log(1.0 / settings.weight_floor) / w * 1.6
    edges = t_hi * 10.0 ** np.arange(-14.0, 0.5, 0.5)
    x, gw = _gauss_legendre(8)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    one_minus = -np.expm1(log_laplace_fn(t))
    integrand = np.exp(-w * t) * one_minus / t
    return math.log(w) + float(np.dot(weights, integrand))


def _lower_bound_distance_term(
    y, params, det_eq, mu_l, var_l, phi_i, phi_l, mu_i_of_y, var_i_of_y, settings
):
    """Jensen-gap integrand at one serving distance via characteristic
    functions on the frequency axis: the mean of the signal log-term minus
    the means of the crosstalk and leakage log-terms."""
    rho = params.snr
    path = y ** (-params.path_loss_exp)
    s0 = det_eq.chi * path + 1.0 / rho
    a_sig = det_eq.alpha * path
    mu_i = mu_i_of_y(y)
    if var_i_of_y is not None:
        var_i = var_i_of_y(y)
    else:
        var_i = _cf_variance(lambda p: phi_i(p, y), mu_i + mu_l + 1.0 / s0)

    def cf_i(phi):
        return phi_i(phi, y)

    signal = _expected_log_shifted(s0 + a_sig, cf_i, mu_i, var_i, settings)
    crosstalk = _expected_log_shifted(s0, cf_i, mu_i, var_i, settings)
    leak = _expected_log_shifted(s0, phi_l, mu_l, var_l, settings)
    return (signal - crosstalk - leak - math.log(rho)) / LN2


def _lower_bound_distance_term_real(y, params, det_eq, log_lap_i, log_lap_l, settings):
    """Same Jensen-gap integrand evaluated on the real Laplace axis."""
    rho = params.snr
    path = y ** (-params.path_loss_exp)
    s0 = det_eq.chi * path + 1.0 / rho
    a_sig = det_eq.alpha * path

    def lap_i(t):
        return log_lap_i(t, y)

    signal = _expected_log_real_axis(s0 + a_sig, lap_i, settings)
    crosstalk = _expected_log_real_axis(s0, lap_i, settings)
    leak = _expected_log_real_axis(s0, log_lap_l, settings)
    return (signal - crosstalk - leak - math.log(rho)) / LN2


def mean_rate_lower_bound(
    params: SystemParams,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
    interference_transform=None,
    leakage_transform=None,
    interference_mean=None,
    leakage_mean=None,
    method: str = "auto",
) -> float:
    """Lower bound on the mean secrecy rate needing only the transforms.

    Swapping the order of expectation and positive part gives a bound built
    from three expected-log terms of the interference and leakage. Two
    evaluation methods compute them:

    - "frequency": the characteristic functions at imaginary Laplace
      arguments, integrated against the frequency-domain log kernel; the
      kernel's delta part contributes the Euler constant and the frequency
      scale exactly, and its half-axis singularity cancels inside a combined
      regularized integrand.
    - "real_axis": the mathematically identical exponential-difference
      integral of the real Laplace transforms (no oscillation, much faster).

    "auto" uses real_axis for the built-in transforms and frequency whenever
    custom characteristic functions are injected (signature (phi_array, y)
    for the interference, (phi_array,) for the leakage, with matching means
    for tail centering). The result is clamped at zero.
    """
    det_eq = deterministic_equivalents(params.load_ratio, params.regularizer)
    injected = interference_transform is not None or leakage_transform is not None
    if method == "auto":
        method = "frequency" if injected else "real_axis"
    if method not in ("frequency", "real_axis"):
        raise DomainError(f"unknown method {method!r}")
    if method == "real_axis" and injected:
        raise DomainError("injected characteristic functions require method='frequency'")

    if not injected:
        # The closed forms and the radial integrals must agree before the
        # radial path is trusted away from the real axis.
        y_chk = params.cell_radius
        for closed, numeric in (
            (laplace_interference(1.0, y_chk, params),
             float(np.real(laplace_interference_numeric(1.0, y_chk, params)))),
            (laplace_leakage(1.0, params),
             float(np.real(laplace_leakage_numeric(1.0, params)))),
        ):
            if abs(closed - numeric) > 1e-8 * max(abs(closed), 1e-300):
                raise NumericsError(
                    "transform cross-check failed: closed form and radial "
                    f"integral differ ({closed!r} vs {numeric!r})"
                )

    k = params.users_per_cell
    eta = params.path_loss_exp

    if method == "real_axis":
        def log_lap_i(t, y):
            expo = _shot_noise_exponent(t, y, eta, k, k, FAST_RADIAL_GRID)
            return -2.0 * math.pi * params.bs_density * expo

        def log_lap_l(t):
            expo = _shot_noise_exponent(t, params.cell_radius, eta, k, 1, FAST_RADIAL_GRID)
            return -2.0 * math.pi * params.user_density * expo

        def term(y: float) -> float:
            return _lower_bound_distance_term_real(
                y, params, det_eq, log_lap_i, log_lap_l, settings
            )
    else:
        var_i_of_y = None
        if interference_transform is None:
            def interference_transform(phi, y):
                expo = _shot_noise_exponent(
                    -2j * math.pi * phi, y, eta, k, k, FAST_RADIAL_GRID
                )
                return np.exp(-2.0 * math.pi * params.bs_density * expo)

            def var_i_of_y(y):
                return interference_moments(y, params).variance

        if leakage_transform is None:
            def leakage_transform(phi):
                expo = _shot_noise_exponent(
                    -2j * math.pi * phi, params.cell_radius, eta, k, 1, FAST_RADIAL_GRID
                )
                return np.exp(-2.0 * math.pi * params.user_density * expo)

            var_l = leakage_moments(params).variance
        else:
            mu_guess = leakage_moments(params).mean if leakage_mean is None else float(leakage_mean)
            var_l = _cf_variance(leakage_transform, mu_guess + 1e-12)

        if interference_mean is None:
            def interference_mean(y):
                return interference_moments(y, params).mean
        elif not callable(interference_mean):
            x0 = float(interference_mean)
            interference_mean = lambda y: x0  # noqa: E731
        mu_l = leakage_moments(params).mean if leakage_mean is None else float(leakage_mean)

        def term(y: float) -> float:
            return _lower_bound_distance_term(
                y, params, det_eq, mu_l, var_l,
                interference_transform, leakage_transform, interference_mean,
                var_i_of_y, settings,
            )

    # Fixed panels over the exponentially weighted serving-distance variable:
    # geometric near zero (the integrand grows logarithmically there), then
    # uniform out to the weight floor.
    q_max = math.log(1.0 / settings.weight_floor)
    edges = np.concatenate(
        ([0.0], np.logspace(-5, 0, 6), np.arange(2.5, q_max, 2.0), [q_max])
    )
    x, w = _gauss_legendre(10)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    lam_pi = math.pi * params.bs_density
    val = 0.0
    for m, hw_ in zip(mid, half):
        q_nodes = m + hw_ * x
        vals = [term(math.sqrt(q / lam_pi)) * math.exp(-q) for q in q_nodes]
        val += hw_ * float(np.dot(w, vals))
    return max(0.0, val)
