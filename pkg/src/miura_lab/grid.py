"""Uniform periodic grid, spectral calculus and Sobolev norms.

The real line is approximated by a large periodic box [-L, L).  All
differentiation is Fourier collocation; quadrature is the rectangle rule,
which is spectrally accurate for periodic (or decaying) integrands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "KinkTag",
    "WindowSpec",
    "make_grid",
    "spectral_derivative",
    "sobolev_norm",
    "inner_product",
    "multiply_dealiased",
    "window_cutoff",
    "field_to_json",
    "field_from_json",
    "field_to_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with nodes x_j = -L + j*h, h = 2L/N."""

    half_length: float
    point_count: int

    def __post_init__(self) -> None:
        if self.point_count % 2 != 0 or self.point_count < 8:
            raise ValueError(f"point count must be even and >= 8, got {self.point_count}")
        if not self.half_length > 0:
            raise ValueError(f"half length must be positive, got {self.half_length}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.point_count

    @property
    def nodes(self) -> np.ndarray:
        n = self.point_count
        return -self.half_length + self.spacing * np.arange(n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers k_m = pi*m/L of the real FFT, m = 0..N/2."""
        return (np.pi / self.half_length) * np.arange(self.point_count // 2 + 1)


@dataclass(frozen=True)
class KinkTag:
    """Marks a field whose samples contain lam*tanh(lam*(x - x0) + 2*lam^3*t).

    tanh is not periodic on the box; tagged fields are differentiated and
    shifted by handling the tanh part analytically and the remainder
    spectrally.
    """

    lam: float
    x0: float = 0.0
    t: float = 0.0

    def samples_on(self, grid: Grid) -> np.ndarray:
        theta = self.lam * (grid.nodes - self.x0) + 2.0 * self.lam**3 * self.t
        return self.lam * np.tanh(theta)

    def derivative_on(self, grid: Grid) -> np.ndarray:
        theta = self.lam * (grid.nodes - self.x0) + 2.0 * self.lam**3 * self.t
        damp = np.exp(-np.abs(theta))
        return self.lam**2 * (2.0 * damp / (1.0 + damp * damp)) ** 2

    def shifted(self, shift: float) -> "KinkTag":
        return replace(self, x0=self.x0 + shift)


@dataclass(frozen=True)
class Field:
    """Real samples of a function on a Grid, optionally kink-tagged."""

    grid: Grid
    samples: np.ndarray
    kink: Optional[KinkTag] = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.point_count,):
            raise ValueError(
                f"expected {self.grid.point_count} samples, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "samples", samples)

    # -- light arithmetic; products go through multiply_dealiased --

    def __add__(self, other: "Field") -> "Field":
        _require_same_grid(self, other)
        if self.kink is not None and other.kink is not None:
            raise ValueError("cannot add two kink-tagged fields")
        tag = self.kink if self.kink is not None else other.kink
        return Field(self.grid, self.samples + other.samples, kink=tag)

    def __sub__(self, other: "Field") -> "Field":
        _require_same_grid(self, other)
        if other.kink is not None:
            if self.kink != other.kink:
                raise ValueError("cannot subtract a kink-tagged field with a different tag")
            return Field(self.grid, self.samples - other.samples, kink=None)
        return Field(self.grid, self.samples - other.samples, kink=self.kink)

    def __mul__(self, scalar: float) -> "Field":
        if self.kink is not None:
            raise ValueError("cannot scale a kink-tagged field")
        return Field(self.grid, self.samples * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self * (-1.0)

    def remainder(self) -> np.ndarray:
        """Samples minus the analytic kink part (periodic-compatible)."""
        if self.kink is None:
            return self.samples
        return self.samples - self.kink.samples_on(self.grid)


@dataclass(frozen=True)
class WindowSpec:
    """Smooth half-line cutoff: 0 left of a - width, 1 right of a + width."""

    cutoff_position: float
    cutoff_width: float = 2.0

    def __post_init__(self) -> None:
        if not self.cutoff_width > 0:
            raise ValueError("cutoff width must be positive")


def make_grid(half_length: float, point_count: int) -> Grid:
    """Build a periodic grid covering [-L, L) with N equispaced nodes."""
    return Grid(float(half_length), int(point_count))


def _require_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def _require_untagged(f: Field, op: str) -> None:
    if f.kink is not None:
        raise ValueError(f"{op} is not defined for kink-tagged fields; split off the tanh part")


def spectral_derivative(f: Field, order: int) -> Field:
    """Differentiate by multiplying the Fourier transform with (ik)^order.

    Kink-tagged fields are handled by differentiating the tanh part
    analytically and the periodic remainder spectrally; the result of the
    first derivative is localized, so higher orders recurse on plain fields.
    The Nyquist mode is zeroed for odd orders.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if f.kink is not None:
        d1 = Field(f.grid, f.kink.derivative_on(f.grid)) + spectral_derivative(
            Field(f.grid, f.remainder()), 1
        )
        return d1 if order == 1 else spectral_derivative(d1, order - 1)
    k = f.grid.wavenumbers
    fh = np.fft.rfft(f.samples)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    return Field(f.grid, np.fft.irfft(mult * fh, f.grid.point_count))


def window_cutoff(grid: Grid, window: WindowSpec) -> np.ndarray:
    """Samples of the smooth cutoff (1 + tanh((x - a)/width))/2."""
    return 0.5 * (1.0 + np.tanh((grid.nodes - window.cutoff_position) / window.cutoff_width))


def sobolev_norm(f: Field, s: float, window: Optional[WindowSpec] = None) -> float:
    """H^s norm via the Fourier multiplier (1 + k^2)^(s/2).

    With a window the norm of (cutoff * f) over the full grid is returned,
    which realizes a half-line norm for decaying fields; this is only
    defined for nonnegative integer s.  The k = 0 mode carries multiplier 1,
    so negative-order norms include the mean.
    """
    _require_untagged(f, "sobolev_norm")
    if window is not None:
        if s < 0 or s != int(s):
            raise ValueError("windowed norms require nonnegative integer order")
        f = Field(f.grid, window_cutoff(f.grid, window) * f.samples)
    grid = f.grid
    fh = np.fft.rfft(f.samples)
    weights = (1.0 + grid.wavenumbers**2) ** s
    mags = np.abs(fh) ** 2
    # Real-FFT half spectrum: double interior modes, count 0 and Nyquist once.
    total = weights[0] * mags[0] + weights[-1] * mags[-1] + 2.0 * np.dot(weights[1:-1], mags[1:-1])
    return float(np.sqrt(total * grid.spacing / grid.point_count))


def inner_product(f: Field, g: Field) -> float:
    """Rectangle-rule pairing h * sum(f_j g_j).

    Spectrally accurate when the pointwise product is periodic-compatible
    (periodic, or decaying at the box edges).
    """
    _require_same_grid(f, g)
    return float(f.grid.spacing * np.dot(f.samples, g.samples))


def padded_product(grid: Grid, factor: int, *sample_arrays: np.ndarray) -> np.ndarray:
    """Alias-free pointwise product evaluated through zero-padded transforms.

    Each input is interpolated onto a factor*N grid, the pointwise product
    is formed there, and the result is truncated back to the N-point
    spectrum.  factor >= 1.5 dealiases quadratic products, factor >= 2
    cubic ones.
    """
    n = grid.point_count
    m = int(factor * n)
    fine = np.ones(m)
    for arr in sample_arrays:
        fh = np.fft.rfft(arr)
        padded = np.zeros(m // 2 + 1, dtype=complex)
        padded[: n // 2 + 1] = fh
        fine = fine * (np.fft.irfft(padded, m) * (m / n))
    ph = np.fft.rfft(fine)[: n // 2 + 1] * (n / m)
    return np.fft.irfft(ph, n)


def multiply_dealiased(f: Field, g: Field) -> Field:
    """Pointwise product with 2/3-rule zero padding (alias-free quadratics)."""
    _require_same_grid(f, g)
    _require_untagged(f, "multiply_dealiased")
    _require_untagged(g, "multiply_dealiased")
    return Field(f.grid, padded_product(f.grid, 1.5, f.samples, g.samples))


# -- serialization ----------------------------------------------------------

def field_to_json(f: Field) -> str:
    payload = {
        "L": f.grid.half_length,
        "N": f.grid.point_count,
        "samples": f.samples.tolist(),
    }
    return json.dumps(payload)


def field_from_json(text: str) -> Field:
    payload = json.loads(text)
    grid = make_grid(payload["L"], payload["N"])
    return Field(grid, np.asarray(payload["samples"], dtype=float))


def field_to_csv(f: Field) -> str:
    lines = ["x,value"]
    for x, v in zip(f.grid.nodes, f.samples):
        lines.append(f"{float(x)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"
