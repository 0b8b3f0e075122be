"""Parameter families for the tree construction.

A parameter point is a sequence (theta_0, theta_1, theta_2, ...) with
sum of squares equal to 1, non-increasing atom weights, and either a
positive drift component theta_0 or a divergent linear mass sum.  Four
families are supported:

* ``brownian``  -- theta_0 = 1, no atoms.
* ``harmonic``  -- theta_0 = 0, theta_i = c / i with c = sqrt(6) / pi.
* ``powerlaw``  -- theta_0 = 0, theta_i = c * i**-alpha, alpha in (1/2, 1),
                   c = zeta(2*alpha) ** -0.5.
* ``explicit``  -- a user-supplied finite weight list.

Downstream code works on :class:`ThetaRealization`, a truncation to K atoms
with tail diagnostics so the truncation bias stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

__all__ = [
    "ThetaFamily",
    "ThetaRealization",
    "ValidationReport",
    "make_theta",
    "validate",
]

# Tolerances from the data contracts.
EXPLICIT_NORMALIZATION_TOL = 1e-12
SQUARE_MASS_TOL = 1e-9

_VARIANTS = ("brownian", "harmonic", "powerlaw", "explicit")


@dataclass(frozen=True)
class ThetaFamily:
    """Symbolic description of a parameter family.

    Use the constructors :meth:`brownian`, :meth:`harmonic`,
    :meth:`powerlaw` and :meth:`explicit` rather than instantiating
    directly.
    """

    variant: str
    alpha: float | None = None
    theta0: float | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown family variant {self.variant!r}")
        if self.variant == "powerlaw":
            if self.alpha is None or not (0.5 < self.alpha < 1.0):
                raise ValueError(
                    f"powerlaw exponent must lie in (1/2, 1), got {self.alpha}"
                )
        if self.variant == "explicit":
            w = np.asarray(self.weights, dtype=float)
            t0 = float(self.theta0)
            if t0 < 0:
                raise ValueError("explicit theta0 must be >= 0")
            if w.size and (np.any(w <= 0) or np.any(np.diff(w) > 0)):
                raise ValueError("explicit weights must be positive and non-increasing")
            total = t0 * t0 + float(np.sum(w * w))
            if abs(total - 1.0) > EXPLICIT_NORMALIZATION_TOL:
                raise ValueError(
                    f"explicit weights not normalized: sum of squares = {total!r}"
                )

    @classmethod
    def brownian(cls) -> "ThetaFamily":
        return cls("brownian")

    @classmethod
    def harmonic(cls) -> "ThetaFamily":
        return cls("harmonic")

    @classmethod
    def powerlaw(cls, alpha: float) -> "ThetaFamily":
        return cls("powerlaw", alpha=float(alpha))

    @classmethod
    def explicit(cls, theta0: float, weights) -> "ThetaFamily":
        return cls("explicit", theta0=float(theta0), weights=tuple(float(w) for w in weights))

    @property
    def drift(self) -> float:
        """The theta_0 component."""
        if self.variant == "brownian":
            return 1.0
        if self.variant == "explicit":
            return float(self.theta0)
        return 0.0

    @property
    def normalization(self) -> float:
        """Scale constant c such that theta_i = c * i**-alpha (atom families)."""
        if self.variant == "harmonic":
            return math.sqrt(6.0) / math.pi
        if self.variant == "powerlaw":
            return float(_hurwitz_zeta(2.0 * self.alpha)) ** -0.5
        raise ValueError(f"{self.variant} family has no power-law normalization")

    @property
    def atom_exponent(self) -> float:
        """Decay exponent of the atom weights (1 for harmonic)."""
        if self.variant == "harmonic":
            return 1.0
        if self.variant == "powerlaw":
            return float(self.alpha)
        raise ValueError(f"{self.variant} family has no atom exponent")

    def atom_weight(self, i):
        """Weight theta_i for atom index i >= 1 (vectorized)."""
        i = np.asarray(i, dtype=float)
        if self.variant == "brownian":
            return np.zeros_like(i)
        if self.variant == "explicit":
            w = np.asarray(self.weights, dtype=float)
            out = np.zeros_like(i)
            idx = i.astype(int)
            mask = (idx >= 1) & (idx <= w.size)
            out[mask] = w[idx[mask] - 1]
            return out
        return self.normalization * i ** -self.atom_exponent

    def label(self) -> str:
        if self.variant == "powerlaw":
            return f"powerlaw(alpha={self.alpha:g})"
        if self.variant == "explicit":
            return f"explicit(theta0={self.theta0:g}, K={len(self.weights)})"
        return self.variant


@dataclass(frozen=True)
class ThetaRealization:
    """A truncated parameter point: drift, K atom weights, tail diagnostics."""

    theta0: float
    weights: np.ndarray  # sorted non-increasing, strictly positive
    residual_square_mass: float
    residual_linear_mass: str  # "finite" | "divergent" | "unknown"
    family: ThetaFamily = field(repr=False)

    @property
    def K(self) -> int:
        return int(self.weights.size)

    @property
    def square_mass(self) -> float:
        """theta0^2 + sum of truncated atom squares (excludes the residual)."""
        return self.theta0 ** 2 + float(np.sum(self.weights ** 2))


@dataclass
class ValidationReport:
    """Outcome of the parameter-space membership checks."""

    checks: dict
    divergent_sum: str  # "divergent" | "finite" | "unknown"

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


def _tail_square_mass(family: ThetaFamily, K: int) -> float:
    """Sum of theta_i^2 over i > K, exact via the Hurwitz zeta function."""
    if family.variant in ("brownian", "explicit"):
        return 0.0
    c = family.normalization
    return c * c * float(_hurwitz_zeta(2.0 * family.atom_exponent, K + 1))


def make_theta(family: ThetaFamily, K: int) -> ThetaRealization:
    """Truncate ``family`` to its first ``K`` atom weights.

    Deterministic: identical inputs yield bit-identical outputs.  For the
    explicit family, K larger than the stored list is clamped; K smaller
    truncates and the dropped squares land in the residual diagnostics.
    """
    if K < 0:
        raise ValueError(f"truncation level K must be >= 0, got {K}")

    if family.variant == "brownian":
        return ThetaRealization(1.0, np.zeros(0), 0.0, "finite", family)

    if family.variant == "explicit":
        w = np.asarray(family.weights, dtype=float)
        k = min(K, w.size)
        kept = w[:k].copy()
        residual = float(np.sum(w[k:] ** 2))
        linear = "unknown" if family.theta0 == 0.0 else "finite"
        return ThetaRealization(float(family.theta0), kept, residual, linear, family)

    idx = np.arange(1, K + 1, dtype=float)
    weights = family.normalization * idx ** -family.atom_exponent
    return ThetaRealization(0.0, weights, _tail_square_mass(family, K), "divergent", family)


def validate(theta: ThetaRealization, family: ThetaFamily) -> ValidationReport:
    """Check the parameter-space invariants; failures land in the report.

    The divergence half of the membership condition (theta_0 != 0 or
    divergent linear mass) is decided symbolically per family.  For an
    explicit family with theta_0 = 0 it is undecidable from a finite
    weight list and is reported as "unknown", which fails the check.
    """
    w = theta.weights
    sorted_ok = bool(w.size < 2 or np.all(np.diff(w) <= 0))
    positive_ok = bool(np.all(w > 0)) if w.size else True
    square_ok = abs(theta.square_mass + theta.residual_square_mass - 1.0) <= SQUARE_MASS_TOL

    if family.variant == "brownian":
        divergent = "finite"
        omega_ok = True  # theta_0 = 1
    elif family.variant in ("harmonic", "powerlaw"):
        divergent = "divergent"
        omega_ok = True
    else:
        if family.theta0 != 0.0:
            divergent = "finite"
            omega_ok = True
        else:
            divergent = "unknown"
            omega_ok = False

    checks = {
        "weights_non_increasing": sorted_ok,
        "weights_positive": positive_ok,
        "square_mass_unit": bool(square_ok),
        "drift_or_divergent": omega_ok,
    }
    return ValidationReport(checks=checks, divergent_sum=divergent)
