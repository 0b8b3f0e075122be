"""The random measure driving the construction, and its analytic profile.

A realization is mu = theta0^2 * dx + sum_i theta_i * delta_{X_i} with
X_i ~ Exp(theta_i) independent.  This module samples realizations, answers
prefix-mass queries mu[0, l] in O(log K), and evaluates the analytic
functions attached to a family:

* ``expected_mass(family, l)``   -- E[mu[0, l]] = theta0^2 l + sum theta_i (1 - exp(-theta_i l))
* ``psi(family, l)``             -- theta0^2 l^2 / 2 + sum (exp(-l theta_i) - 1 + l theta_i)
* ``inverse_expected_mass``      -- the scale X_m with E[mu[0, X_m]] = m
* ``compactness_criterion``      -- the dyadic series sum log X_{2^n} / 2^n
                                    with quadrature cross-checks

For the harmonic and power-law families the sums are infinite; they are
evaluated as an explicit head plus an Euler-Maclaurin tail whose integral
part reduces to incomplete-gamma / exponential-integral terms.  Absolute
accuracy is ~1e-12, far inside the 1e-9 contract, and the evaluation stays
valid for l far beyond the overflow threshold via log-scale asymptotics
(the expected mass of the atom part depends on l only through slowly
growing functions).

Note the identity d/dl psi(l) = E[mu[0, l]]: psi is the integrated
expected mass.  It is used as a cross-check in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1, gamma as gamma_fn, gammainc

from .params import ThetaFamily, ThetaRealization

__all__ = [
    "MuRealization",
    "CriterionVerdict",
    "BracketError",
    "OmegaViolationError",
    "sample_mu",
    "mu_mass",
    "expected_mass",
    "expected_mass_log",
    "psi",
    "inverse_expected_mass",
    "inverse_expected_mass_log",
    "compactness_criterion",
]

EULER_GAMMA = float(np.euler_gamma)

# Number of series terms summed explicitly before the Euler-Maclaurin tail
# takes over.  The tail error scales like HEAD_TERMS**-(alpha + 5).
HEAD_TERMS = 10_000

# Beyond this length the profile switches to the log-scale asymptotic branch.
FLOAT_SAFE_LENGTH = 1e280

# Root search budget for the inverse profile.
BRACKET_EXPANSIONS = 200
INVERSE_MASS_RTOL = 1e-8

# Verdict thresholds: ratio window over the last dyadic terms.
RATIO_WINDOW = 5
COMPACT_RATIO_CEILING = 0.9
NONCOMPACT_RATIO_FLOOR = 0.98


class BracketError(RuntimeError):
    """The monotone root search could not bracket its target."""


class OmegaViolationError(ValueError):
    """The parameter point fails the membership condition and simulation
    was not explicitly forced."""


# ---------------------------------------------------------------------------
# Sampling and exact prefix-mass queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MuRealization:
    """One sample of the random measure, indexed for fast mass queries.

    ``positions`` are the atom locations sorted increasingly, ``weights``
    the matching atom masses, and ``cum_weights[j]`` the total weight of
    the first j atoms (so ``cum_weights[0] = 0``).
    """

    drift: float                # theta0^2, mass per unit length
    positions: np.ndarray       # sorted atom positions
    weights: np.ndarray         # atom weights, aligned with positions
    cum_weights: np.ndarray = field(repr=False)
    theta: ThetaRealization = field(repr=False)

    @property
    def n_atoms(self) -> int:
        return int(self.positions.size)

    def mass(self, l):
        """mu[0, l] (closed interval: atoms exactly at l count). Vectorized."""
        l = np.asarray(l, dtype=float)
        if np.any(l < 0):
            raise ValueError("mass queries require l >= 0")
        idx = np.searchsorted(self.positions, l, side="right")
        out = self.drift * l + self.cum_weights[idx]
        return float(out) if out.ndim == 0 else out

    def atom_mass_below(self, l: float) -> tuple[int, float]:
        """(number, total weight) of atoms at positions <= l."""
        j = int(np.searchsorted(self.positions, l, side="right"))
        return j, float(self.cum_weights[j])


def sample_mu(theta: ThetaRealization, rng: np.random.Generator,
              *, allow_non_omega: bool = False) -> MuRealization:
    """Draw one measure realization from a truncated parameter point.

    Atom positions are independent exponentials with survival
    exp(-theta_i * t).  Deterministic given the generator state.
    """
    if theta.theta0 == 0.0 and theta.residual_linear_mass not in ("divergent",) \
            and not allow_non_omega:
        raise OmegaViolationError(
            "theta0 = 0 with non-divergent (or unknown) linear mass; "
            "pass allow_non_omega=True to simulate anyway"
        )
    w = theta.weights
    if w.size:
        positions = rng.exponential(scale=1.0 / w)
        order = np.argsort(positions, kind="stable")
        positions = positions[order]
        weights = w[order]
    else:
        positions = np.zeros(0)
        weights = np.zeros(0)
    cum = np.concatenate(([0.0], np.cumsum(weights)))
    return MuRealization(theta.theta0 ** 2, positions, weights, cum, theta)


def mu_mass(mu: MuRealization, l) -> float:
    """mu[0, l]; thin functional wrapper over :meth:`MuRealization.mass`."""
    return mu.mass(l)


# ---------------------------------------------------------------------------
# Series engine for the symbolic atom families (theta_i = c * i**-alpha)
# ---------------------------------------------------------------------------
#
# The atom part of the expected mass is c * sum_i f(i) with
#   f(x) = x**-a * (1 - exp(-beta * x**-a)),      beta = c * l,
# and the psi atom part is sum_i g(i) with
#   g(x) = h(beta * x**-a),   h(u) = exp(-u) - 1 + u.
#
# Both sums are evaluated as sum_{i < n0} + Euler-Maclaurin from n0:
#   sum_{i >= n0} f(i) = int_n0^inf f + f(n0)/2 - f'(n0)/12 + f'''(n0)/720 + O(n0**-(a+5))
# The integrals reduce, after u = beta * x**-a, to
#   int_n0^inf f dx = beta**((1-a)/a) / a * J(1 - 1/a, u0)
#   int_n0^inf g dx = beta**(1/a) / a     * G(-1/a,   u0)
# with u0 = beta * n0**-a and
#   J(s, z) = int_0^z u**(s-1) (1 - e^-u) du        (-1 < s <= 0)
#   G(s, z) = int_0^z u**(s-1) (e^-u - 1 + u) du    (-2 < s <= -1)


def _stable_h(x):
    """exp(-x) - 1 + x without cancellation; series branch below 1e-4."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    out = np.empty_like(x)
    xs = x[small]
    out[small] = 0.5 * xs * xs * (1.0 - xs / 3.0 + xs * xs / 12.0 - xs ** 3 / 60.0)
    xl = x[~small]
    out[~small] = np.expm1(-xl) + xl
    return out if out.ndim else float(out)


def _j_integral(s: float, z: float) -> float:
    """J(s, z) = int_0^z u**(s-1) (1 - e^-u) du for -1 < s <= 0."""
    if z <= 0.0:
        return 0.0
    if z <= 1.0:
        # alternating series sum_{k>=1} (-1)^(k+1) z^(s+k) / (k! (s+k))
        total, term_pow, fact = 0.0, 1.0, 1.0
        for k in range(1, 40):
            term_pow *= z
            fact *= k
            inc = term_pow * z ** s / (fact * (s + k))
            total += inc if k % 2 else -inc
            if abs(inc) < 1e-18 * max(abs(total), 1e-30):
                break
        return total
    if s == 0.0:
        e1 = exp1(z) if z < 700 else 0.0
        return EULER_GAMMA + math.log(z) + e1
    # integration by parts: boundary term + regularized lower incomplete gamma
    boundary = (z ** s / s) * -math.expm1(-z)
    return boundary - (1.0 / s) * gamma_fn(s + 1.0) * float(gammainc(s + 1.0, z))


def _g_integral(s: float, z: float) -> float:
    """G(s, z) = int_0^z u**(s-1) (e^-u - 1 + u) du for -2 < s <= -1."""
    if z <= 0.0:
        return 0.0
    if z <= 1.0:
        # sum_{k>=2} (-1)^k z^(s+k) / (k! (s+k))
        total, term_pow, fact, sign = 0.0, z, 1.0, 1.0
        for k in range(2, 42):
            term_pow *= z
            fact *= k
            inc = term_pow * z ** s / (fact * (s + k))
            total += inc if k % 2 == 0 else -inc
            if abs(inc) < 1e-18 * max(abs(total), 1e-30):
                break
        return total
    boundary = (z ** s / s) * float(_stable_h(z))
    return boundary - (1.0 / s) * _j_integral(s + 1.0, z)


def _em_tail_mass(alpha: float, beta: float, a: int) -> float:
    """Euler-Maclaurin value of sum_{i >= a} i**-alpha (1 - exp(-beta i**-alpha))."""
    u0 = beta * a ** -alpha
    s = 1.0 - 1.0 / alpha
    integral = beta ** ((1.0 - alpha) / alpha) / alpha * _j_integral(s, u0)

    u = u0
    E = math.exp(-u) if u < 700 else 0.0
    one_m_e = -math.expm1(-u) if u < 700 else 1.0
    p1 = one_m_e + u * E
    f0 = a ** -alpha * one_m_e
    f1 = -alpha * a ** (-alpha - 1.0) * p1
    f3 = -alpha * a ** (-alpha - 3.0) * (
        (alpha + 1.0) * (alpha + 2.0) * p1
        + alpha * (2.0 * alpha + 3.0) * u * E * (2.0 - u)
        + alpha * alpha * u * E * (2.0 - 4.0 * u + u * u)
    )
    return integral + f0 / 2.0 - f1 / 12.0 + f3 / 720.0


def _em_tail_psi(alpha: float, beta: float, a: int) -> float:
    """Euler-Maclaurin value of sum_{i >= a} h(beta i**-alpha)."""
    u0 = beta * a ** -alpha
    integral = beta ** (1.0 / alpha) / alpha * _g_integral(-1.0 / alpha, u0)

    u = u0
    E = math.exp(-u) if u < 700 else 0.0
    one_m_e = -math.expm1(-u) if u < 700 else 1.0
    p1 = one_m_e + u * E
    g0 = float(_stable_h(u))
    g1 = -alpha * u * one_m_e / a
    g3 = -(alpha * u / a ** 3) * (
        (alpha + 2.0) * (alpha * p1 + one_m_e)
        + alpha * u * E * (2.0 * alpha - alpha * u + 1.0)
    )
    return integral + g0 / 2.0 - g1 / 12.0 + g3 / 720.0


def _atom_mass_series(alpha: float, c: float, l: float) -> float:
    """sum_i theta_i (1 - exp(-theta_i l)) for theta_i = c i**-alpha."""
    if l == 0.0:
        return 0.0
    beta = c * l
    idx = np.arange(1.0, HEAD_TERMS)
    ti = idx ** -alpha
    head = float(np.sum(ti * -np.expm1(-beta * ti)))
    return c * (head + _em_tail_mass(alpha, beta, HEAD_TERMS))


def _atom_psi_series(alpha: float, c: float, l: float) -> float:
    """sum_i h(theta_i l) for theta_i = c i**-alpha."""
    if l == 0.0:
        return 0.0
    beta = c * l
    idx = np.arange(1.0, HEAD_TERMS)
    head = float(np.sum(_stable_h(beta * idx ** -alpha)))
    return head + _em_tail_psi(alpha, beta, HEAD_TERMS)


def _zeta_continued(s: float, n: int = 10_000) -> float:
    """Riemann zeta for s in (0, 1), Euler-Maclaurin continuation."""
    idx = np.arange(1, n + 1, dtype=float)
    total = float(np.sum(idx ** -s))
    total += n ** (1.0 - s) / (s - 1.0)
    total -= 0.5 * n ** -s
    total += s / 12.0 * n ** (-s - 1.0)
    total -= s * (s + 1.0) * (s + 2.0) / 720.0 * n ** (-s - 3.0)
    total += s * (s + 1) * (s + 2) * (s + 3) * (s + 4) / 30240.0 * n ** (-s - 5.0)
    return total


# ---------------------------------------------------------------------------
# The analytic profile
# ---------------------------------------------------------------------------

def expected_mass(family: ThetaFamily, l: float) -> float:
    """E[mu[0, l]], absolute error well inside 1e-9."""
    if l < 0:
        raise ValueError("l must be >= 0")
    l = float(l)
    if family.variant == "brownian":
        return l
    if family.variant == "explicit":
        w = np.asarray(family.weights, dtype=float)
        atom = float(np.sum(w * -np.expm1(-w * l)))
        return family.theta0 ** 2 * l + atom
    return _atom_mass_series(family.atom_exponent, family.normalization, l)


def psi(family: ThetaFamily, l: float) -> float:
    """The integrated mass profile theta0^2 l^2/2 + sum h(theta_i l)."""
    if l < 0:
        raise ValueError("l must be >= 0")
    l = float(l)
    drift = 0.5 * family.drift ** 2 * l * l
    if family.variant == "brownian":
        return drift
    if family.variant == "explicit":
        w = np.asarray(family.weights, dtype=float)
        return drift + float(np.sum(_stable_h(w * l)))
    return drift + _atom_psi_series(family.atom_exponent, family.normalization, l)


def _powerlaw_asymptote(family: ThetaFamily):
    """(amplitude, exponent, constant) with E ~ amplitude*l**exponent + constant."""
    alpha = family.atom_exponent
    c = family.normalization
    amp = c ** (1.0 / alpha) / alpha * -gamma_fn((alpha - 1.0) / alpha)
    return amp, (1.0 - alpha) / alpha, c * _zeta_continued(alpha)


def expected_mass_log(family: ThetaFamily, log_l: float) -> float:
    """E[mu[0, exp(log_l)]], valid for log_l far beyond float range of l.

    Exact evaluation while exp(log_l) is representable; beyond that the
    atom families switch to their large-l asymptotics (error O(l**-1/2)
    at the switch point, utterly negligible there).
    """
    if log_l <= math.log(FLOAT_SAFE_LENGTH):
        return expected_mass(family, math.exp(log_l))
    if family.variant == "brownian":
        raise OverflowError("expected mass overflows for the drift family")
    if family.variant == "explicit":
        if family.theta0 > 0:
            raise OverflowError("expected mass overflows for drift + atoms")
        w = np.asarray(family.weights, dtype=float)
        return float(np.sum(w))  # fully saturated atoms
    c = family.normalization
    if family.variant == "harmonic":
        return c * (log_l + math.log(c) + 2.0 * EULER_GAMMA)
    amp, expo, const = _powerlaw_asymptote(family)
    growth = expo * log_l
    if growth > 700:
        raise OverflowError("expected mass overflows in float range")
    return amp * math.exp(growth) + const


def inverse_expected_mass(family: ThetaFamily, m: float) -> float:
    """The scale X_m with E[mu[0, X_m]] = m, by bracketed bisection.

    Raises :class:`BracketError` when no float-range bracket exists
    (saturating explicit families, or astronomically large scales).
    """
    if m < 0:
        raise ValueError("mass must be >= 0")
    if m == 0.0:
        return 0.0
    if family.variant == "brownian":
        return float(m)

    # E(l) <= l always (unit square mass), so the root is >= m.
    lo = m / (family.drift ** 2 + 1.0)
    hi = max(m, lo)
    val = expected_mass(family, hi)
    expansions = 0
    while val < m:
        expansions += 1
        if expansions > BRACKET_EXPANSIONS or hi > FLOAT_SAFE_LENGTH:
            raise BracketError(
                f"could not bracket E[mu[0,l]] = {m} within float range "
                f"(reached l = {hi:.3g}, E = {val:.3g})"
            )
        lo = hi
        hi *= 2.0
        val = expected_mass(family, hi)

    f = lambda l: expected_mass(family, l) - m
    root = _brent(f, lo, hi)
    achieved = expected_mass(family, root)
    if abs(achieved - m) > INVERSE_MASS_RTOL * max(1.0, m):
        raise BracketError(
            f"root search stalled: |E - m| = {abs(achieved - m):.3g} at m = {m}"
        )
    return root


def _brent(f, lo, hi):
    from scipy.optimize import brentq
    if f(lo) == 0.0:
        return lo
    if f(hi) == 0.0:
        return hi
    return float(brentq(f, lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=200))


def inverse_expected_mass_log(family: ThetaFamily, m: float) -> float:
    """log X_m, falling back to the symbolic growth of the profile when
    X_m lies beyond float range."""
    try:
        return math.log(inverse_expected_mass(family, m))
    except BracketError:
        pass
    if family.variant == "harmonic":
        c = family.normalization
        return m / c - math.log(c) - 2.0 * EULER_GAMMA
    if family.variant == "powerlaw":
        amp, expo, const = _powerlaw_asymptote(family)
        if m <= const:
            raise BracketError(f"asymptotic inversion needs m > {const:.3g}")
        return math.log((m - const) / amp) / expo
    raise BracketError(
        f"no symbolic growth available for family {family.label()} at m = {m}"
    )


# ---------------------------------------------------------------------------
# Compactness criterion
# ---------------------------------------------------------------------------

@dataclass
class CriterionVerdict:
    """Outcome of the dyadic compactness series evaluation."""

    verdict: str                 # "compact" | "noncompact" | "inconclusive"
    partial_sum: float           # sum_{n<=N} log X_{2^n} / 2^n
    terms: np.ndarray            # the dyadic terms
    ratios: np.ndarray           # successive term ratios over the window
    n_terms: int
    note: str = ""
    quad_mass: float | None = None          # int dl / (l E[mu[0,l]]) cross-check
    quad_psi: float | None = None           # int dl / psi(l) cross-check
    quad_bounds: tuple | None = None        # series-derived bounds on quad_mass
    sandwich_ok: bool | None = None         # psi <= l E <= 2 psi on the grid


def compactness_criterion(family: ThetaFamily, N: int) -> CriterionVerdict:
    """Evaluate the dyadic compactness series and cross-check it.

    Terms are t_n = log X_{2^n} / 2^n.  The verdict is decided from the
    ratio trend over the final window: geometric decay (all ratios <= 0.9)
    reads compact, non-decaying terms (all ratios >= 0.98) reads
    noncompact, anything else is inconclusive.
    """
    if N < 8:
        raise ValueError("criterion needs N >= 8 dyadic terms")

    try:
        log_x = np.array([inverse_expected_mass_log(family, 2.0 ** n)
                          for n in range(1, N + 1)])
    except BracketError as err:
        return CriterionVerdict(
            "inconclusive", math.nan, np.zeros(0), np.zeros(0), N,
            note=f"scale inversion failed: {err}",
        )

    terms = log_x / 2.0 ** np.arange(1, N + 1)
    partial = float(np.sum(terms))
    window = min(RATIO_WINDOW, N - 1)
    ratios = terms[-window:] / terms[-window - 1:-1]

    if np.max(ratios) <= COMPACT_RATIO_CEILING:
        verdict = "compact"
    elif np.min(ratios) >= NONCOMPACT_RATIO_FLOOR:
        verdict = "noncompact"
    else:
        verdict = "inconclusive"

    quad_mass, quad_psi, bounds, sandwich = _criterion_cross_checks(family, N, log_x)
    return CriterionVerdict(verdict, partial, terms, ratios, N,
                            quad_mass=quad_mass, quad_psi=quad_psi,
                            quad_bounds=bounds, sandwich_ok=sandwich)


def _criterion_cross_checks(family: ThetaFamily, N: int, log_x: np.ndarray):
    """Quadrature forms of the criterion over [X_1, X_{2^N}], in log scale,
    plus the sandwich psi <= l E <= 2 psi on the dyadic grid."""
    log_x1 = inverse_expected_mass_log(family, 1.0)

    def inv_mass_integrand(log_l):
        return 1.0 / expected_mass_log(family, log_l)

    quad_mass, _ = quad(inv_mass_integrand, log_x1, log_x[-1], limit=400)

    # int dl / psi over the float-representable part of the range, compared
    # against the mass quadrature over the same range via the sandwich.
    hi_log = min(float(log_x[-1]), math.log(FLOAT_SAFE_LENGTH) - 1.0)

    def inv_psi_integrand(log_l):
        l = math.exp(log_l)
        return l / psi(family, l)

    quad_psi, _ = quad(inv_psi_integrand, log_x1, hi_log, limit=400)

    # Series bounds from the dyadic decomposition of the quadrature.
    terms = log_x / 2.0 ** np.arange(1, N + 1)
    upper = float(np.sum(terms)) - log_x1
    lower = float(np.sum(terms)) / 2.0 - log_x1 / 2.0
    bounds = (lower, upper)

    grid_log = [min(lx, math.log(FLOAT_SAFE_LENGTH) - 1.0) for lx in log_x]
    ok = True
    for lg in grid_log:
        l = math.exp(lg)
        p = psi(family, l)
        le = l * expected_mass(family, l)
        if not (p <= le * (1 + 1e-12) and le <= 2.0 * p * (1 + 1e-12)):
            ok = False
    return quad_mass, quad_psi, bounds, ok
