"""Ground states of -d^2/dx^2 + q, Riccati shooting and inverse Miura maps.

The two inversion branches recover, from a potential-like field, the
perturbation r_tilde of a tanh kink whose Miura image reproduces the field:

* F_lambda(r) = (r^2 + 2 r lam tanh(lam x) + r_x, int r sech^2(lam x) dx)
  is inverted by integrating the Riccati equation r' = q + lam^2 - r^2
  from the left box edge (deviation form, so the exact tanh translate is
  representable), with ground-state energy below -lam^2 showing up as a
  finite-x blow-up of r.

* F*(r, lam) = r^2 + 2 r lam tanh(lam x) - r_x - 2 lam^2 sech^2(lam x)
  is inverted through the ground state: lam = sqrt(-E0) and r_tilde is the
  negative logarithmic derivative of the eigenfunction minus the kink,
  computed by a two-sided Riccati shoot (each direction integrates its
  contracting side) blended at the ground-state peak.

A Newton corrector based on an explicit integral right inverse T_r of the
linearization refines F_lambda inversions and can retarget the rho
component within the kernel direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Field, Grid, inner_product, sobolev_norm, spectral_derivative

__all__ = [
    "GroundState",
    "RiccatiSolution",
    "InversionResult",
    "NoBoundStateError",
    "SpectrumBelowThreshold",
    "EigensolverError",
    "InversionError",
    "NewtonDivergenceError",
    "ground_state",
    "riccati_shoot",
    "forward",
    "invert",
    "kernel_K",
    "apply_T",
    "newton_refine",
    "cutoff_bump",
    "integral_from_zero",
]


class NoBoundStateError(RuntimeError):
    """The potential has no bound state, so the F* branch is undefined."""


class SpectrumBelowThreshold(RuntimeError):
    """Riccati blow-up: the Schroedinger spectrum dips below -lambda^2."""

    def __init__(self, message: str, blowup_location: float):
        super().__init__(message)
        self.blowup_location = blowup_location


class EigensolverError(RuntimeError):
    pass


class InversionError(RuntimeError):
    pass


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class GroundState:
    """Lowest eigenpair; psi is quadrature-normalized and strictly positive."""

    energy: float
    psi: Field


@dataclass(frozen=True)
class RiccatiSolution:
    r: Field
    lam: float
    center: float
    l2_deviation: float
    residual: float
    blowup_location: Optional[float] = None


@dataclass(frozen=True)
class InversionResult:
    r_tilde: Field
    lam: float
    rho: Optional[float]
    branch: str
    residual: float


# -- eigensolver -------------------------------------------------------------

def _apply_schroedinger(grid: Grid, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    k2 = grid.wavenumbers**2
    return np.fft.irfft(k2 * np.fft.rfft(v), grid.point_count) + q * v


def _fd_lowest_eigenvalue(grid: Grid, q: np.ndarray) -> float:
    """Second-order finite-difference estimate of the lowest eigenvalue."""
    from scipy.linalg import eigh_tridiagonal

    h = grid.spacing
    diag = 2.0 / h**2 + q
    off = np.full(grid.point_count - 1, -1.0 / h**2)
    vals = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0), eigvals_only=True)
    return float(vals[0])


def ground_state(q: Field, tol: float = 1e-10, max_iter: int = 500) -> Optional[GroundState]:
    """Lowest eigenpair of -d^2/dx^2 + q, or None when no bound state exists.

    A finite-difference estimate seeds a shifted inverse iteration on the
    spectral operator (shift half a unit below the estimate); each inner
    solve is preconditioned conjugate gradients in Fourier space.  Returns
    None when the lowest eigenvalue is >= -tol; since the Rayleigh quotient
    of a symmetric operator bounds the bottom of the spectrum within the
    eigen-residual, potentials without a resolvable bound state are
    classified without waiting for eigenvector convergence.  States bound
    more weakly than the box's mode spacing ~(pi/L)^2 are below desk
    resolution and count as unbound.  Raises EigensolverError if the
    iteration cap is hit while a negative eigenvalue is still plausible.
    """
    grid = q.grid
    if q.kink is not None:
        raise ValueError("potential must be a plain field")
    qs = q.samples
    n = grid.point_count
    e_est = _fd_lowest_eigenvalue(grid, qs)
    if e_est >= 0.5:  # clearly no negative spectrum; FD error is O(h^2)
        return None
    unbound_floor = max(tol, 2.0 * (math.pi / grid.half_length) ** 2)
    sigma = e_est - 0.5
    k2 = grid.wavenumbers**2
    shifted = LinearOperator(
        (n, n), matvec=lambda v: _apply_schroedinger(grid, qs, v) - sigma * v, dtype=float
    )
    precond_diag = k2 - sigma
    precond = LinearOperator(
        (n, n),
        matvec=lambda v: np.fft.irfft(np.fft.rfft(v) / precond_diag, n),
        dtype=float,
    )
    x = np.exp(-0.5 * grid.nodes**2) + 1e-3
    x /= np.linalg.norm(x)
    energy = sigma
    for _ in range(max_iter):
        y, info = cg(shifted, x, x0=x, rtol=1e-13, atol=0.0, M=precond, maxiter=2000)
        if info != 0:
            raise EigensolverError(f"inner CG solve failed (info={info})")
        x = y / np.linalg.norm(y)
        ax = _apply_schroedinger(grid, qs, x)
        energy = float(np.dot(x, ax))
        resid = np.linalg.norm(ax - energy * x)
        if resid <= tol * (1.0 + abs(energy)):
            break
        if energy - resid >= -unbound_floor:
            return None
    else:
        raise EigensolverError(
            f"inverse iteration did not converge within {max_iter} iterations"
        )
    if energy >= -tol:
        return None
    psi = x * np.sign(x[np.argmax(np.abs(x))])
    # Tail samples below the solver noise floor are clamped to keep the
    # profile strictly positive.
    psi = np.maximum(psi, 1e-250)
    psi /= math.sqrt(grid.spacing) * np.linalg.norm(psi)
    return GroundState(energy=energy, psi=Field(grid, psi))


# -- Riccati shooting --------------------------------------------------------

def _refined_potential(q: Field, factor: int = 16) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic-spline interpolant of q on an FFT-refined grid.

    Refined values below the transform's relative noise floor are zeroed:
    the tail noise would otherwise be amplified exponentially by the
    Riccati dynamics, while the true tails it replaces are far smaller.
    """
    grid = q.grid
    n = grid.point_count
    m = factor * n
    qh = np.fft.rfft(q.samples)
    padded = np.zeros(m // 2 + 1, dtype=complex)
    padded[: n // 2 + 1] = qh
    fine = np.fft.irfft(padded, m) * (m / n)
    peak = np.max(np.abs(fine))
    if peak > 0:
        fine[np.abs(fine) < 1e-13 * peak] = 0.0
    x_fine = -grid.half_length + (2.0 * grid.half_length / m) * np.arange(m + 1)
    vals = np.append(fine, fine[0])  # periodic closure keeps the spline interior
    return CubicSpline(x_fine, vals)


def riccati_shoot(q: Field, lam: float, rtol: float = 1e-11) -> RiccatiSolution:
    """Integrate r' = q + lam^2 - r^2 from the left edge, r(x_L) = lam tanh(lam x_L).

    The deviation s = r - lam tanh(lam x) is integrated instead, so the
    initial translate is exact in floating point.  A dive of r below
    -10 lam is the numerical zero-crossing of the underlying Schroedinger
    solution.

    Potentials with attractive tails decaying no faster than e^{-2 lam |x|}
    can force the exact-manifold shot below the separatrix even though the
    spectrum lies above -lam^2; blow-ups are therefore retried once from a
    small positive deviation, which selects another member of the
    translate family of solutions.  A second blow-up means every solution
    vanishes, so the spectrum genuinely reaches -lam^2 and
    SpectrumBelowThreshold is raised.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    grid = q.grid
    edge = max(abs(q.samples[0]), abs(q.samples[-1]))
    if edge > 1e-6:
        raise ValueError(f"potential does not decay at the box edges (|q|={edge:.2e})")
    q_of = _refined_potential(q)
    x = grid.nodes

    def rhs(xx, s):
        return q_of(xx) - 2.0 * lam * np.tanh(lam * xx) * s - s * s

    def blow(xx, s):
        return (s[0] + lam * np.tanh(lam * xx)) + 10.0 * lam

    blow.terminal = True
    blow.direction = -1.0

    def shoot(s0: float):
        return solve_ivp(
            rhs,
            (x[0], x[-1]),
            [s0],
            t_eval=x,
            rtol=rtol,
            atol=1e-14,
            events=blow,
            method="RK45",
            dense_output=False,
            max_step=1.0,
        )

    sol = shoot(0.0)
    if sol.status == 1:  # blow-up: retry riding the positive homogeneous mode
        loc = float(sol.t_events[0][0])
        nudge = 2.0 * lam * math.exp(-2.0 * lam * (grid.half_length - 12.0))
        sol = shoot(nudge)
        if sol.status == 1:
            raise SpectrumBelowThreshold(
                f"Riccati solution blew up at x={loc:.4f}: spectrum reaches -lambda^2", loc
            )
    if not sol.success:
        raise RuntimeError(f"Riccati integration failed: {sol.message}")
    s = sol.y[0]
    r = s + lam * np.tanh(lam * x)
    center = _zero_crossing(x, r)
    deviation = r - lam * np.tanh(lam * (x - center))
    l2_dev = float(math.sqrt(grid.spacing * np.dot(deviation, deviation)))
    s_field = Field(grid, s)
    ds = spectral_derivative(s_field, 1).samples
    resid = float(
        np.max(np.abs(ds - (q.samples - 2.0 * lam * np.tanh(lam * x) * s - s * s)))
    )
    return RiccatiSolution(
        r=Field(grid, r), lam=lam, center=center, l2_deviation=l2_dev, residual=resid
    )


def _zero_crossing(x: np.ndarray, r: np.ndarray) -> float:
    sign = np.sign(r)
    idx = np.where((sign[:-1] < 0) & (sign[1:] >= 0))[0]
    if len(idx) == 0:
        return 0.0
    i = idx[np.argmin(np.abs(x[idx]))]
    x0, x1, r0, r1 = x[i], x[i + 1], r[i], r[i + 1]
    return float(x0 - r0 * (x1 - x0) / (r1 - r0))


def _log_derivative_two_sided(
    q: Field, lam: float, x_center: float, rtol: float = 1e-11
) -> np.ndarray:
    """-psi'/psi for the ground state at energy -lam^2 via two one-sided shoots.

    Each direction integrates the Riccati equation r' = r^2 - lam^2 - q on
    its contracting side (forward from the left, backward from the right)
    in deviation form around lam tanh(lam (x - x_center)); the two branches
    are blended smoothly across the well where both are accurate.
    """
    grid = q.grid
    x = grid.nodes
    q_of = _refined_potential(q)
    ref = lambda xx: lam * np.tanh(lam * (xx - x_center))
    sech2 = lambda xx: 1.0 / np.cosh(lam * (xx - x_center)) ** 2

    def rhs(xx, p):
        return 2.0 * ref(xx) * p + p * p - q_of(xx) - 2.0 * lam**2 * sech2(xx)

    margin = 2.0 / lam
    fwd_mask = x <= x_center + margin
    bwd_mask = x >= x_center - margin
    x_fwd = x[fwd_mask]
    x_bwd = x[bwd_mask]
    sol_f = solve_ivp(rhs, (x[0], x_fwd[-1]), [0.0], t_eval=x_fwd, rtol=rtol, atol=1e-14,
                      max_step=1.0)
    sol_b = solve_ivp(rhs, (x[-1], x_bwd[0]), [0.0], t_eval=x_bwd[::-1], rtol=rtol,
                      atol=1e-14, max_step=1.0)
    if not (sol_f.success and sol_b.success):
        raise RuntimeError("one-sided Riccati integration failed")
    p_fwd = np.zeros_like(x)
    p_fwd[fwd_mask] = sol_f.y[0]
    p_bwd = np.zeros_like(x)
    p_bwd[bwd_mask] = sol_b.y[0][::-1]
    # Each branch is used exclusively on its contracting side; in the
    # overlap around the well both are accurate and blended smoothly.
    blend = np.zeros_like(x)
    blend[bwd_mask & ~fwd_mask] = 1.0
    overlap = fwd_mask & bwd_mask
    blend[overlap] = 0.5 * (1.0 + np.tanh(lam * (x[overlap] - x_center)))
    p = (1.0 - blend) * p_fwd + blend * p_bwd
    return ref(x) + p


# -- forward maps and inversion ---------------------------------------------

def forward(branch: str, r_tilde: Field, lam: float) -> tuple[Field, Optional[float]]:
    """Evaluate F_lambda or F* at (r_tilde, lam); rho only for F_lambda."""
    if branch not in ("F_lambda", "F_star"):
        raise ValueError(f"branch must be 'F_lambda' or 'F_star', got {branch!r}")
    grid = r_tilde.grid
    x = grid.nodes
    kink = lam * np.tanh(lam * x)
    rx = spectral_derivative(r_tilde, 1).samples
    from .grid import padded_product

    rsq = padded_product(grid, 1.5, r_tilde.samples, r_tilde.samples)
    if branch == "F_lambda":
        out = Field(grid, rsq + 2.0 * kink * r_tilde.samples + rx)
        rho = float(grid.spacing * np.dot(r_tilde.samples, 1.0 / np.cosh(lam * x) ** 2))
        return out, rho
    sech2 = 1.0 / np.cosh(lam * x) ** 2
    return Field(grid, rsq + 2.0 * kink * r_tilde.samples - rx - 2.0 * lam**2 * sech2), None


def _asymptote_gap(r: np.ndarray, x: np.ndarray, lam: float, L: float) -> tuple[float, float]:
    i_left = int(np.argmin(np.abs(x - (-L + 10.0))))
    i_right = int(np.argmin(np.abs(x - (L - 10.0))))
    return abs(r[i_left] + lam), abs(r[i_right] - lam)


def invert(
    target: Field,
    branch: str,
    lam: Optional[float] = None,
    tol: float = 1e-6,
) -> InversionResult:
    """Invert a Miura branch on a potential-like field.

    F_lambda requires lam and a spectrum above -lam^2 (otherwise
    SpectrumBelowThreshold propagates); F_star requires a bound state
    (otherwise NoBoundStateError) and determines lam = sqrt(-E0) itself.
    The reported residual compares forward(r_tilde) with the target in
    H^{-1}; F_lambda results above tolerance go through Newton refinement
    before failing.
    """
    grid = target.grid
    x = grid.nodes
    if branch == "F_star":
        gs = ground_state(target)
        if gs is None:
            raise NoBoundStateError("target potential has no bound state")
        lam_star = math.sqrt(-gs.energy)
        x_center = float(x[int(np.argmax(gs.psi.samples))])
        r_star = _log_derivative_two_sided(target, lam_star, x_center)
        r_tilde = Field(grid, r_star - lam_star * np.tanh(lam_star * x))
        image, _ = forward("F_star", r_tilde, lam_star)
        residual = sobolev_norm(image - target, -1.0)
        if residual > tol:
            raise InversionError(
                f"F_star inversion residual {residual:.3e} exceeds tolerance {tol:.3e}"
            )
        return InversionResult(r_tilde, lam_star, None, "F_star", residual)

    if branch != "F_lambda":
        raise ValueError(f"branch must be 'F_lambda' or 'F_star', got {branch!r}")
    if lam is None:
        raise ValueError("F_lambda inversion requires lambda")
    shot = riccati_shoot(target, lam)
    r = shot.r.samples
    gap_left, gap_right = _asymptote_gap(r, x, lam, grid.half_length)
    r_tilde_samples = r - lam * np.tanh(lam * x)
    if gap_left > 1e-4 and abs(r[0] - lam) < 1e-4:
        # Shot landed on a one-sided-growth solution: rebuild through the
        # reduction-of-order companion C*phi + phi * int_0^x phi^-2.
        r_tilde_samples = _reduction_of_order(grid, r, lam) - lam * np.tanh(lam * x)
    r_tilde = Field(grid, r_tilde_samples)
    rho = float(grid.spacing * np.dot(r_tilde_samples, 1.0 / np.cosh(lam * x) ** 2))
    image, _ = forward("F_lambda", r_tilde, lam)
    residual = sobolev_norm(image - target, -1.0)
    if residual > tol:
        refined = newton_refine(target, lam, rho, r_tilde, tol)
        return InversionResult(refined.r_tilde, lam, refined.rho, "F_lambda", refined.residual)
    return InversionResult(r_tilde, lam, rho, "F_lambda", residual)


def _reduction_of_order(grid: Grid, r: np.ndarray, lam: float) -> np.ndarray:
    """Companion solution log-derivative r + phi^-2 / (C + int_0^x phi^-2)."""
    x = grid.nodes
    h = grid.spacing
    log_phi = np.concatenate(([0.0], np.cumsum(0.5 * h * (r[1:] + r[:-1]))))
    log_phi -= log_phi.max()
    inv2 = np.exp(-2.0 * log_phi)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * h * (inv2[1:] + inv2[:-1]))))
    i0 = int(np.argmin(np.abs(x)))
    cum -= cum[i0]
    c = 10.0 / np.exp(log_phi.min()) ** 2
    return r + inv2 / (c + cum)


# -- explicit right inverse --------------------------------------------------

def cutoff_bump(y: np.ndarray) -> np.ndarray:
    """Smooth bump: 1 on [-1, 1], supported in [-2, 2]."""
    t = np.clip(np.abs(np.asarray(y, dtype=float)) - 1.0, 0.0, None)
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def integral_from_zero(r: Field) -> Callable[[np.ndarray], np.ndarray]:
    """Antiderivative x -> int_0^x r, spectral on the mean-free part."""
    grid = r.grid
    n = grid.point_count
    mean = float(r.samples.mean())
    rh = np.fft.rfft(r.samples - mean)
    k = grid.wavenumbers
    anti = np.zeros_like(rh)
    anti[1:] = rh[1:] / (1j * k[1:])
    per = np.fft.irfft(anti, n)
    spline = CubicSpline(
        np.append(grid.nodes, grid.half_length), np.append(per, per[0]), bc_type="periodic"
    )
    p0 = float(spline(0.0))

    def integral(xx: np.ndarray) -> np.ndarray:
        return spline(xx) - p0 + mean * np.asarray(xx, dtype=float)

    return integral


def kernel_K(x: float, y: float, r: Optional[Field] = None) -> float:
    """Piecewise kernel of the right inverse T (lambda = 1 normalization).

    With r supplied the kernel is weighted by exp(-2 int_0^x r + 2 int_0^y r).
    """
    if y < x <= 0.0 or y < 0.0 < x:
        base = cutoff_bump(np.array([y]))[0] * math.cosh(y) ** 2 / math.cosh(x) ** 2
    elif x <= y <= 0.0:
        base = -(1.0 - cutoff_bump(np.array([y]))[0]) * math.cosh(y) ** 2 / math.cosh(x) ** 2
    elif 0.0 <= y < x:
        base = math.cosh(y) ** 2 / math.cosh(x) ** 2
    else:
        return 0.0
    if r is None or base == 0.0:
        return float(base)
    integral = integral_from_zero(r)
    return float(base * math.exp(-2.0 * integral(np.array([x]))[0] + 2.0 * integral(np.array([y]))[0]))


def apply_T(r: Optional[Field], g: Field, lam: float = 1.0, refine: int = 16) -> Field:
    """Apply the integral right inverse T_r of v -> v_x + 2(lam tanh + r) v.

    Evaluated in antiderivative form on an FFT-refined grid: cumulative
    integrals of cosh^2(lam y) e^{2 rho(y)} g(y) against the bump split,
    then scaled by sech^2(lam x) e^{-2 rho(x)}.  The left-of-zero part is
    accumulated outward from zero so no large-edge mass is subtracted.
    """
    grid = g.grid
    n = grid.point_count
    m = refine * n
    L = grid.half_length
    if lam * L > 300.0:
        raise ValueError("lambda * L too large for cosh^2 weights in double precision")
    gh = np.fft.rfft(g.samples)
    padded = np.zeros(m // 2 + 1, dtype=complex)
    padded[: n // 2 + 1] = gh
    g_f = np.fft.irfft(padded, m) * (m / n)
    x_f = -L + (2.0 * L / m) * np.arange(m)
    if r is not None:
        # Antiderivative of r evaluated spectrally on the fine nodes.
        mean = float(r.samples.mean())
        rh = np.fft.rfft(r.samples - mean)
        k = r.grid.wavenumbers
        anti = np.zeros(m // 2 + 1, dtype=complex)
        anti[1 : n // 2 + 1] = rh[1:] / (1j * k[1:])
        per_f = np.fft.irfft(anti, m) * (m / n)
        rho_f = per_f - per_f[m // 2] + mean * x_f
    else:
        rho_f = np.zeros_like(x_f)
    cosh2 = np.cosh(lam * x_f) ** 2
    eta = cutoff_bump(x_f)
    j_eta = cosh2 * np.exp(2.0 * rho_f) * eta * g_f
    j_rest = cosh2 * np.exp(2.0 * rho_f) * (1.0 - eta) * g_f
    h_f = 2.0 * L / m
    a_cum = cumulative_simpson(j_eta, dx=h_f, initial=0.0)
    i0 = m // 2  # node exactly at x = 0
    b_cum = np.empty_like(j_rest)
    b_cum[i0:] = cumulative_simpson(j_rest[i0:], dx=h_f, initial=0.0)
    left = cumulative_simpson(j_rest[i0::-1], dx=h_f, initial=0.0)
    b_cum[: i0 + 1] = -left[::-1]
    t_f = (a_cum + b_cum) * np.exp(-2.0 * rho_f) / np.cosh(lam * x_f) ** 2
    return Field(grid, t_f[::refine].copy())


def newton_refine(
    target: Field,
    lam: float,
    rho_target: float,
    r_init: Field,
    tol: float = 1e-8,
    max_iter: int = 30,
) -> InversionResult:
    """Newton iteration on F_lambda(r) = (target, rho_target).

    The linearization v -> v_x + 2(lam tanh + r) v is inverted with the
    explicit integral operator T_r; the one-dimensional kernel direction
    sech^2(lam x) e^{-2 int r} absorbs the rho component.  Divergence
    (residual increase twice in a row) raises NewtonDivergenceError with
    the iterate history.
    """
    grid = target.grid
    x = grid.nodes
    sech2 = Field(grid, 1.0 / np.cosh(lam * x) ** 2)
    r = r_init
    history = []
    increases = 0
    prev = None
    for iteration in range(max_iter + 1):
        image, rho = forward("F_lambda", r, lam)
        err_field = image - target
        err_rho = rho - rho_target
        residual = sobolev_norm(err_field, -1.0) + abs(err_rho)
        history.append(residual)
        if residual < tol:
            return InversionResult(r, lam, rho, "F_lambda", residual)
        if prev is not None and residual >= prev:
            increases += 1
            if increases >= 2:
                raise NewtonDivergenceError(
                    f"Newton residual increased twice (history={history})", history
                )
        else:
            increases = 0
        prev = residual
        if iteration == max_iter:
            break
        delta = apply_T(r, err_field, lam=lam)
        phi_r = Field(grid, sech2.samples * np.exp(-2.0 * integral_from_zero(r)(x)))
        denom = inner_product(phi_r, sech2)
        c = (err_rho - inner_product(delta, sech2)) / denom
        r = Field(grid, r.samples - (delta.samples + c * phi_r.samples))
    raise InversionError(
        f"Newton refinement stalled at residual {history[-1]:.3e} (tol {tol:.3e})"
    )
