"""Analytic profiles and weights: solitons, kinks, eta/phi/psi, potentials.

The weights are not periodic, so their derivatives are supplied in closed
form rather than spectrally; the algebraic identities they satisfy are
exercised by the test suite to near machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, KinkTag

__all__ = [
    "DEFAULT_R",
    "DEFAULT_DELTA",
    "DEFAULT_A",
    "ProfileSpec",
    "render_profile",
    "exact_solution",
    "soliton_samples",
    "eta_weight",
    "eta_weight_d1",
    "eta_weight_d2",
    "eta_weight_d3",
    "phi_weight",
    "phi_weight_dx",
    "psi_weight",
    "quadform_potential",
]

DEFAULT_R = 10.0
DEFAULT_DELTA = math.exp(-20.0)
DEFAULT_A = 20.0

_KINDS = ("soliton", "kink", "eta", "phi", "psi", "quadform_potential")


def sech(x: np.ndarray) -> np.ndarray:
    """Overflow-safe hyperbolic secant (cosh overflows beyond |x| ~ 710)."""
    a = np.exp(-np.abs(x))
    return 2.0 * a / (1.0 + a * a)


@dataclass(frozen=True)
class ProfileSpec:
    """Closed-form profile selector: kind plus its parameter map."""

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {_KINDS}")

    def param(self, name: str, default=None):
        value = self.parameters.get(name, default)
        if value is None:
            raise ValueError(f"profile kind {self.kind!r} requires parameter {name!r}")
        return float(value)


def soliton_samples(x: np.ndarray, c: float, x0: float = 0.0) -> np.ndarray:
    """Traveling-wave profile -(c/2) sech^2(sqrt(c) (x - x0)/2)."""
    if not c > 0:
        raise ValueError("soliton speed c must be positive")
    return -(c / 2.0) * sech(0.5 * math.sqrt(c) * (x - x0)) ** 2


def eta_weight(x: np.ndarray, R: float = DEFAULT_R, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Bounded monotone weight tanh((x - R)/2) + 1 + delta."""
    return np.tanh(0.5 * (x - R)) + 1.0 + delta


def eta_weight_d1(x: np.ndarray, R: float = DEFAULT_R) -> np.ndarray:
    return 0.5 * sech(0.5 * (x - R)) ** 2


def eta_weight_d2(x: np.ndarray, R: float = DEFAULT_R) -> np.ndarray:
    z = 0.5 * (x - R)
    return -0.5 * np.tanh(z) * sech(z) ** 2


def eta_weight_d3(x: np.ndarray, R: float = DEFAULT_R) -> np.ndarray:
    z = 0.5 * (x - R)
    s2 = sech(z) ** 2
    return -0.25 * s2 * (s2 - 2.0 * np.tanh(z) ** 2)


def phi_weight(
    t: float,
    x: np.ndarray,
    x0: float = 0.0,
    A: float = DEFAULT_A,
    gamma: float = 1.0,
) -> np.ndarray:
    """Moving half-line weight 1 + tanh((x - x0 + gamma*t)/A)."""
    if not A > 0:
        raise ValueError("phi width A must be positive")
    return 1.0 + np.tanh((x - x0 + gamma * t) / A)


def phi_weight_dx(
    t: float,
    x: np.ndarray,
    x0: float = 0.0,
    A: float = DEFAULT_A,
    gamma: float = 1.0,
) -> np.ndarray:
    return (1.0 / A) / np.cosh((x - x0 + gamma * t) / A) ** 2


def psi_weight(
    x: np.ndarray, R: float = DEFAULT_R, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    """Orthogonality weight eta(x) * sech^2(x)."""
    return eta_weight(x, R, delta) * sech(x) ** 2


def psi_weight_dx(
    x: np.ndarray, R: float = DEFAULT_R, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    s2 = sech(x) ** 2
    return eta_weight_d1(x, R) * s2 - 2.0 * eta_weight(x, R, delta) * s2 * np.tanh(x)


def quadform_potential(x: np.ndarray) -> np.ndarray:
    """Potential -2 sech^2(x) - 4 sech^2(x) tanh(x) of the coercivity forms."""
    s2 = sech(x) ** 2
    return -2.0 * s2 - 4.0 * s2 * np.tanh(x)


def render_profile(spec: ProfileSpec, grid: Grid) -> Field:
    """Sample a closed-form profile on the grid.

    Kinks come back kink-tagged so that downstream spectral operations
    treat the tanh part analytically.
    """
    x = grid.nodes
    kind = spec.kind
    if kind == "soliton":
        c = spec.param("c")
        x0 = spec.param("x0", 0.0)
        return Field(grid, soliton_samples(x, c, x0))
    if kind == "kink":
        lam = spec.param("lam", spec.parameters.get("lambda"))
        if not lam > 0:
            raise ValueError("kink scale lambda must be positive")
        x0 = spec.param("x0", 0.0)
        t = spec.param("t", 0.0)
        tag = KinkTag(lam=lam, x0=x0, t=t)
        return Field(grid, tag.samples_on(grid), kink=tag)
    if kind == "eta":
        R = spec.param("R", DEFAULT_R)
        delta = spec.param("delta", DEFAULT_DELTA)
        if not delta > 0:
            raise ValueError("eta offset delta must be positive")
        y = spec.param("y", 0.0)
        return Field(grid, eta_weight(x - y, R, delta))
    if kind == "phi":
        return Field(
            grid,
            phi_weight(
                spec.param("t", 0.0),
                x,
                x0=spec.param("x0", 0.0),
                A=spec.param("A", DEFAULT_A),
                gamma=spec.param("gamma", 1.0),
            ),
        )
    if kind == "psi":
        R = spec.param("R", DEFAULT_R)
        delta = spec.param("delta", DEFAULT_DELTA)
        y = spec.param("y", 0.0)
        return Field(grid, psi_weight(x - y, R, delta))
    if kind == "quadform_potential":
        return Field(grid, quadform_potential(x))
    raise ValueError(f"unknown profile kind {kind!r}")


def exact_solution(kind: str, params: dict, t: float, grid: Grid) -> Field:
    """Traveling reference solution at time t (evolution oracle).

    soliton: R_c(x - c*t - x0); kink: lam*tanh(lam*(x - x0) + 2*lam^3*t).
    """
    if kind == "soliton":
        c = float(params["c"])
        x0 = float(params.get("x0", 0.0))
        return Field(grid, soliton_samples(grid.nodes, c, x0 + c * t))
    if kind == "kink":
        lam = float(params.get("lam", params.get("lambda", 1.0)))
        spec = ProfileSpec("kink", {"lam": lam, "x0": float(params.get("x0", 0.0)), "t": t})
        return render_profile(spec, grid)
    raise ValueError(f"exact_solution supports soliton|kink, got {kind!r}")
