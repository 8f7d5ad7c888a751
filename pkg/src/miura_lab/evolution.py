"""Fourth-order exponential time stepping for KdV, mKdV and the kink frame.

The linear (dispersive) part is integrated exactly in Fourier space; the
nonlinear part uses the classic fourth-order exponential time-differencing
Runge-Kutta scheme with contour-averaged coefficients.  Nonlinear products
are evaluated on a 2x zero-padded grid, which dealiases cubic terms.

Kink runs evolve the perturbation w in the co-moving frame xi = x + 2t
where the kink tanh(xi) is static; the linear operator then absorbs the
transport and the constant part of the 6*Q^2 coefficient, leaving the
localized nonlinearity -d/dxi (6 sech^2 w - 6 tanh w^2 - 2 w^3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np

from .grid import Field, Grid, padded_product, spectral_derivative

__all__ = [
    "MODEL_KINDS",
    "StepConfig",
    "Trajectory",
    "EvolutionError",
    "BlowUpError",
    "BoundaryContaminationError",
    "evolve",
    "time_derivative",
    "conserved_quantities",
    "DIAGNOSTIC_COLUMNS",
    "diagnostics_to_csv",
]

MODEL_KINDS = ("kdv", "mkdv", "kink_frame")

#: Diagnostics CSV schema, in order; missing entries emit empty cells.
DIAGNOSTIC_COLUMNS = (
    "t",
    "P0",
    "P1",
    "P2",
    "P3",
    "l2",
    "hm1",
    "y",
    "ydot_plus2",
    "eta_mass",
    "virial_accum",
    "kato_accum",
)

#: Frozen coefficients of the rank-5 conserved density (dominant term u_xx^2).
#: Recovered independently by the drift-fit oracle in the test suite.
RANK5_COEFFS = (10.0, 5.0)

BOUNDARY_TOLERANCE = 1e-8


class EvolutionError(RuntimeError):
    """Base class for aborted runs; carries the partial trajectory."""

    def __init__(self, message: str, t: float, trajectory: "Trajectory"):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class BlowUpError(EvolutionError):
    pass


class BoundaryContaminationError(EvolutionError):
    pass


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    diagnostic_stride: int = 100
    snapshot_stride: int = 0  # 0 disables snapshots

    def __post_init__(self) -> None:
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if self.diagnostic_stride < 1:
            raise ValueError("diagnostic stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_end / self.dt))


@dataclass
class Trajectory:
    model: str
    grid: Grid
    times: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (step_index, t, Field)
    final: Optional[Field] = None

    def series(self, key: str) -> np.ndarray:
        return np.array([row.get(key, np.nan) for row in self.diagnostics])


class _ETDRK4:
    """Cox-Matthews ETDRK4 with Kassam-Trefethen contour coefficients."""

    def __init__(
        self,
        model: str,
        grid: Grid,
        dt: float,
        n_contour: int = 32,
        with_coefficients: bool = True,
    ):
        if model not in MODEL_KINDS:
            raise ValueError(f"unknown model {model!r}")
        self.model = model
        self.grid = grid
        self.dt = dt
        n = grid.point_count
        self.n = n
        self.m = 2 * n
        k = grid.wavenumbers
        if model == "kink_frame":
            self.lin = 1j * (k**3 + 4.0 * k)
        else:
            self.lin = 1j * k**3
        if with_coefficients:
            z = dt * self.lin
            self.exp_full = np.exp(z)
            self.exp_half = np.exp(0.5 * z)
            # phi-function coefficients by averaging over a unit circle
            # around each z; exact for the removable singularity at z = 0.
            roots = np.exp(2j * np.pi * (np.arange(n_contour) + 0.5) / n_contour)
            zr = z[:, None] + roots[None, :]
            ez = np.exp(zr)
            self.coeff_q = dt * ((np.exp(zr / 2.0) - 1.0) / zr).mean(1)
            self.coeff_f1 = dt * ((-4.0 - zr + ez * (4.0 - 3.0 * zr + zr**2)) / zr**3).mean(1)
            self.coeff_f2 = dt * ((2.0 + zr + ez * (zr - 2.0)) / zr**3).mean(1)
            self.coeff_f3 = dt * ((-4.0 - 3.0 * zr - zr**2 + ez * (4.0 - zr)) / zr**3).mean(1)
        # Derivative factor of the nonlinear flux, Nyquist zeroed.
        self.ik = 1j * k
        self.ik[-1] = 0.0
        if model == "kink_frame":
            from .profiles import sech

            xi = self._fine_nodes()
            self.sech2 = sech(xi) ** 2
            self.tanh = np.tanh(xi)

    def _fine_nodes(self) -> np.ndarray:
        L = self.grid.half_length
        return -L + (2.0 * L / self.m) * np.arange(self.m)

    def to_fine(self, uh: np.ndarray) -> np.ndarray:
        padded = np.zeros(self.m // 2 + 1, dtype=complex)
        padded[: self.n // 2 + 1] = uh
        return np.fft.irfft(padded, self.m) * (self.m / self.n)

    def from_fine(self, fine: np.ndarray) -> np.ndarray:
        return np.fft.rfft(fine)[: self.n // 2 + 1] * (self.n / self.m)

    def nonlinear_hat(self, uh: np.ndarray) -> np.ndarray:
        u = self.to_fine(uh)
        if self.model == "kdv":
            flux = 3.0 * u * u
        elif self.model == "mkdv":
            flux = 2.0 * u * u * u
        else:
            flux = -(6.0 * self.sech2 * u - 6.0 * self.tanh * u * u - 2.0 * u * u * u)
        return self.ik * self.from_fine(flux)

    def rhs_hat(self, uh: np.ndarray) -> np.ndarray:
        return self.lin * uh + self.nonlinear_hat(uh)

    def step(self, uh: np.ndarray) -> np.ndarray:
        n0 = self.nonlinear_hat(uh)
        a = self.exp_half * uh + self.coeff_q * n0
        n1 = self.nonlinear_hat(a)
        b = self.exp_half * uh + self.coeff_q * n1
        n2 = self.nonlinear_hat(b)
        c = self.exp_half * a + self.coeff_q * (2.0 * n2 - n0)
        n3 = self.nonlinear_hat(c)
        return (
            self.exp_full * uh
            + self.coeff_f1 * n0
            + 2.0 * self.coeff_f2 * (n1 + n2)
            + self.coeff_f3 * n3
        )


@lru_cache(maxsize=8)
def _rhs_evaluator(model: str, grid: Grid) -> _ETDRK4:
    return _ETDRK4(model, grid, dt=1.0, with_coefficients=False)


def time_derivative(model: str, u: Field) -> Field:
    """Evaluate the semi-discrete right-hand side once (for cross-checks)."""
    stepper = _rhs_evaluator(model, u.grid)
    uh = np.fft.rfft(u.samples)
    uh[-1] = 0.0
    return Field(u.grid, np.fft.irfft(stepper.rhs_hat(uh), u.grid.point_count))


def conserved_quantities(u: Field, model: str = "kdv") -> dict:
    """Polynomial conserved quantities of the flow.

    For KdV-side fields: P0 = int u, P1 = int u^2, P2 = int u_x^2 + 2 u^3
    (the Hamiltonian) and the rank-5 quantity P3 = int u_xx^2 + 10 u u_x^2
    + 5 u^4.  For mKdV only P0, P1 are tracked.
    """
    if u.kink is not None:
        raise ValueError("conserved quantities are tracked for plain fields")
    grid = u.grid
    h = grid.spacing
    s = u.samples
    out = {"P0": float(h * s.sum()), "P1": float(h * np.dot(s, s))}
    if model == "mkdv":
        return out
    ux = spectral_derivative(u, 1).samples
    cubic = padded_product(grid, 2.0, s, s, s)
    out["P2"] = float(h * (np.dot(ux, ux) + 2.0 * cubic.sum()))
    uxx = spectral_derivative(u, 2).samples
    c1, c2 = RANK5_COEFFS
    u_ux2 = padded_product(grid, 2.0, s, ux, ux)
    quartic = padded_product(grid, 2.0, s, s, s, s)
    out["P3"] = float(h * (np.dot(uxx, uxx) + c1 * u_ux2.sum() + c2 * quartic.sum()))
    return out


def evolve(
    model: str,
    initial: Field,
    cfg: StepConfig,
    hooks: Iterable[Callable[[float, Field], dict]] = (),
    track_conserved: bool = True,
    boundary_tolerance: float = BOUNDARY_TOLERANCE,
) -> Trajectory:
    """March the semi-discrete flow and collect diagnostics.

    Hooks are pure readers called at the diagnostic cadence with (t, field);
    whatever mapping they return is merged into the diagnostics row.  Any
    non-finite sample aborts with BlowUpError; for kink-frame runs a
    perturbation leaking to the box edge raises BoundaryContaminationError.
    Both carry the partial trajectory.

    On the periodic box, fast dispersive radiation of amplitude around
    1e-7 * ||w0|| circulates and dresses the edge almost immediately, so
    experiment drivers pass a boundary tolerance sized to the structure
    they are protecting rather than the strict default.
    """
    if model not in MODEL_KINDS:
        raise ValueError(f"unknown model {model!r}")
    if initial.kink is not None:
        raise ValueError("evolve expects the localized field; kinks are implied by the model")
    hooks = tuple(hooks)
    grid = initial.grid
    stepper = _ETDRK4(model, grid, cfg.dt)
    traj = Trajectory(model=model, grid=grid)
    uh = np.fft.rfft(initial.samples).astype(complex)
    uh[-1] = 0.0

    def current_field(t: float) -> Field:
        samples = np.fft.irfft(uh, grid.point_count)
        if not np.all(np.isfinite(samples)):
            raise BlowUpError(f"non-finite samples at t={t:.6g}", t, traj)
        return Field(grid, samples)

    def record(t: float, u: Field) -> None:
        row = {"t": t}
        if track_conserved and model in ("kdv", "mkdv"):
            row.update(conserved_quantities(u, model))
        row["l2"] = float(np.sqrt(grid.spacing * np.dot(u.samples, u.samples)))
        for hook in hooks:
            row.update(hook(t, u))
        traj.times.append(t)
        traj.diagnostics.append(row)
        if model == "kink_frame":
            edge = max(abs(u.samples[0]), abs(u.samples[-1]))
            if edge > boundary_tolerance:
                raise BoundaryContaminationError(
                    f"perturbation reached the box edge (|w|={edge:.3e}) at t={t:.6g}", t, traj
                )

    n_steps = cfg.n_steps
    for step in range(n_steps + 1):
        t = step * cfg.dt
        diagnose = step % cfg.diagnostic_stride == 0 or step == n_steps
        snapshot = cfg.snapshot_stride and step % cfg.snapshot_stride == 0
        if diagnose or snapshot:
            u = current_field(t)
            if snapshot:
                traj.snapshots.append((step, t, u))
            if diagnose:
                record(t, u)
        if step < n_steps:
            uh = stepper.step(uh)
    traj.final = Field(grid, np.fft.irfft(uh, grid.point_count))
    return traj


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and np.isnan(value):
        return ""
    return repr(float(value))


def diagnostics_to_csv(diagnostics: Iterable[dict]) -> str:
    """Render diagnostic rows to the fixed-column CSV schema."""
    lines = [",".join(DIAGNOSTIC_COLUMNS)]
    for row in diagnostics:
        lines.append(",".join(_format_cell(row.get(col)) for col in DIAGNOSTIC_COLUMNS))
    return "\n".join(lines) + "\n"
