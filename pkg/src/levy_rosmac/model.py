"""Deterministic Rosenzweig-MacArthur prey-predator dynamics.

Vector field with a Holling type III response, closed-form equilibria,
linearization and the transcritical bifurcation curve in the (r, mu) plane.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

HYPERBOLIC_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Ecological constants. ``c``, ``E``, ``C`` and ``k`` default to the
    values used throughout the study (0.02, 0.4, 1, 10)."""

    r: float
    mu: float
    c: float = 0.02
    E: float = 0.4
    C: float = 1.0
    k: float = 10.0

    def __post_init__(self):
        for name in ("r", "mu", "c", "E", "C", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and strictly positive, got {value!r}")

    def as_dict(self) -> dict:
        return {"r": self.r, "mu": self.mu, "c": self.c, "E": self.E, "C": self.C, "k": self.k}


class State(NamedTuple):
    x: float
    y: float


class Kind(str, enum.Enum):
    EXTINCTION = "Extinction"
    PREY_ONLY = "PreyOnly"
    COEXISTENCE = "Coexistence"


class Stability(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_SPIRAL = "StableSpiral"
    SADDLE = "Saddle"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    NON_HYPERBOLIC = "NonHyperbolic"

    @property
    def is_stable(self) -> bool:
        return self in (Stability.STABLE_NODE, Stability.STABLE_SPIRAL)


@dataclass
class EquilibriumReport:
    kind: Kind
    point: State
    jacobian: np.ndarray = field(repr=False)
    eigenvalues: tuple[complex, complex]
    stability: Stability

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "point": {"x": self.point.x, "y": self.point.y},
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [{"re": ev.real, "im": ev.imag} for ev in self.eigenvalues],
            "stability": self.stability.value,
        }


def holling_f(x, params: ModelParams):
    """Holling type III consumption rate ``C x^2 / (x^2 + k^2)``."""
    x2 = x * x
    return params.C * x2 / (x2 + params.k**2)


def holling_f_prime(x, params: ModelParams):
    k2 = params.k**2
    return 2.0 * params.C * k2 * x / (x * x + k2) ** 2


def drift(s, params: ModelParams) -> State:
    """Right-hand side of the deterministic model at ``s = (x, y)``."""
    x, y = s
    fx = holling_f(x, params)
    return State(params.r * x - params.c * x * x - y * fx, (params.E * fx - params.mu) * y)


def net_predator_growth(x, params: ModelParams):
    """Per-capita predator growth ``E f(x) - mu``."""
    return params.E * holling_f(x, params) - params.mu


def bifurcation_mu(r: float, params: ModelParams) -> float:
    """Mortality on the transcritical curve for growth rate ``r``.

    Only the constants ``c, E, C, k`` of ``params`` are used.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r!r}")
    return params.E * params.C * r * r / ((params.c * params.k) ** 2 + r * r)


def coexistence_exists(params: ModelParams) -> bool:
    # strict on both sides: the curve itself belongs to the prey-only regime
    return bifurcation_mu(params.r, params) > params.mu and params.mu < params.E * params.C


def jacobian_at(s, params: ModelParams) -> np.ndarray:
    x, y = s
    fx = holling_f(x, params)
    fpx = holling_f_prime(x, params)
    return np.array(
        [
            [params.r - 2.0 * params.c * x - y * fpx, -fx],
            [params.E * y * fpx, params.E * fx - params.mu],
        ]
    )


def eigenvalues_2x2(m) -> tuple[complex, complex]:
    """Roots of ``lambda^2 - tr(m) lambda + det(m)``.

    Real roots come back sorted by value; a complex pair comes back as
    ``(phi + i psi, phi - i psi)`` with ``psi > 0``.
    """
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    half = 0.5 * tr
    # discriminant written to avoid cancellation for near-diagonal matrices
    disc = (0.5 * (m[0, 0] - m[1, 1])) ** 2 + m[0, 1] * m[1, 0]
    if disc >= 0.0:
        s = math.sqrt(disc)
        big = half + math.copysign(s, half) if half != 0.0 else s
        small = det / big if big != 0.0 else half - s
        lo, hi = sorted((big, small))
        return complex(lo), complex(hi)
    psi = math.sqrt(-disc)
    return complex(half, psi), complex(half, -psi)


def classify(eigenvalues) -> Stability:
    l1, l2 = (complex(ev) for ev in eigenvalues)
    if abs(l1.real) < HYPERBOLIC_TOL or abs(l2.real) < HYPERBOLIC_TOL:
        return Stability.NON_HYPERBOLIC
    if l1.imag != 0.0 or l2.imag != 0.0:
        return Stability.STABLE_SPIRAL if l1.real < 0 else Stability.UNSTABLE_SPIRAL
    if l1.real < 0 and l2.real < 0:
        return Stability.STABLE_NODE
    if l1.real > 0 and l2.real > 0:
        return Stability.UNSTABLE_NODE
    return Stability.SADDLE


def coexistence_point(params: ModelParams) -> State | None:
    """Closed-form interior equilibrium, or None when it does not exist."""
    if not coexistence_exists(params):
        return None
    x = params.k * math.sqrt(params.mu / (params.E * params.C - params.mu))
    y = (params.r - params.c * x) * (x * x + params.k**2) / (params.C * x)
    return State(x, y)


def _report(kind: Kind, point: State, params: ModelParams) -> EquilibriumReport:
    jac = jacobian_at(point, params)
    ev = eigenvalues_2x2(jac)
    return EquilibriumReport(kind, point, jac, ev, classify(ev))


def equilibria(params: ModelParams) -> list[EquilibriumReport]:
    """All equilibria in the closed first quadrant: origin, prey-only state,
    and the coexistence state when condition for its existence holds."""
    reports = [
        _report(Kind.EXTINCTION, State(0.0, 0.0), params),
        _report(Kind.PREY_ONLY, State(params.r / params.c, 0.0), params),
    ]
    z3 = coexistence_point(params)
    if z3 is not None:
        reports.append(_report(Kind.COEXISTENCE, z3, params))
    return reports


def attractor(params: ModelParams) -> State:
    """The equilibrium that attracts first-quadrant orbits."""
    z3 = coexistence_point(params)
    return z3 if z3 is not None else State(params.r / params.c, 0.0)


def coexistence_trace_det(params: ModelParams) -> tuple[float, float]:
    """Trace and determinant of the Jacobian at the interior equilibrium,
    written in terms of (r, mu) alone rather than through ``jacobian_at``.

    Only valid for the default constants (c, E, C, k) = (0.02, 0.4, 1, 10).
    """
    r, mu = params.r, params.mu
    root = math.sqrt(mu * (0.4 - mu))
    trace = r - 0.4 * math.sqrt(mu / (0.4 - mu)) - 5.0 * r * (0.4 - mu) + root
    det = mu * (5.0 * r * (0.4 - mu) - root)
    return trace, det


def coexistence_eigenvalues_closed_form(params: ModelParams) -> tuple[complex, complex]:
    trace, det = coexistence_trace_det(params)
    disc = cmath.sqrt(0.25 * trace * trace - det)
    return 0.5 * trace + disc, 0.5 * trace - disc
