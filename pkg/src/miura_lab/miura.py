"""Miura maps, KdV/mKdV symmetries and the kink-frame change of variables.

Fields that contain a tanh kink carry a tag (see grid.KinkTag); the maps
here differentiate and shift the tanh part analytically so that only
periodic-compatible remainders pass through the FFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, KinkTag, make_grid, padded_product, spectral_derivative

__all__ = [
    "miura",
    "galilean_shift",
    "spatial_shift",
    "rescale",
    "mkdv_rescale",
    "Rescaled",
    "miura_identity_residual",
    "kink_frame_to_kdv",
]


def spatial_shift(u: Field, shift: float) -> Field:
    """Samples of u(x - shift); spectral phase shift, analytic on kink tags."""
    if shift == 0.0:
        return u
    if u.kink is not None:
        tag = u.kink.shifted(shift)
        rem = spatial_shift(Field(u.grid, u.remainder()), shift)
        return Field(u.grid, tag.samples_on(u.grid) + rem.samples, kink=tag)
    k = u.grid.wavenumbers
    uh = np.fft.rfft(u.samples) * np.exp(-1j * k * shift)
    return Field(u.grid, np.fft.irfft(uh, u.grid.point_count))


def miura(u: Field, variant: str = "plus") -> Field:
    """Evaluate u_x + u^2 ("plus") or -u_x + u^2 ("star").

    For a kink-tagged field the tanh part is expanded algebraically:
    miura(lam*tanh(lam*.)) = lam^2, so the output is an ordinary field with
    mean near lam^2 whenever the remainder is localized.
    """
    if variant not in ("plus", "star"):
        raise ValueError(f"variant must be 'plus' or 'star', got {variant!r}")
    sign = 1.0 if variant == "plus" else -1.0
    grid = u.grid
    if u.kink is None:
        ux = spectral_derivative(u, 1).samples
        usq = padded_product(grid, 1.5, u.samples, u.samples)
        return Field(grid, sign * ux + usq)
    tag = u.kink
    w = u.remainder()
    q = tag.samples_on(grid)
    qx = tag.derivative_on(grid)
    wx = spectral_derivative(Field(grid, w), 1).samples
    # (q + w)^2 = lam^2 - lam^2 sech^2 + 2 q w + w^2, with q^2 expanded
    # analytically so no non-periodic sample touches the FFT.
    from .profiles import sech

    theta = tag.lam * (grid.nodes - tag.x0) + 2.0 * tag.lam**3 * tag.t
    qsq = tag.lam**2 * (1.0 - sech(theta) ** 2)
    wsq = padded_product(grid, 1.5, w, w)
    return Field(grid, sign * (qx + wx) + qsq + 2.0 * q * w + wsq)


def galilean_shift(u: Field, h: float, t: float) -> Field:
    """Galilean image u(t, x - h*t) - h/6."""
    shifted = spatial_shift(u, h * t)
    return Field(shifted.grid, shifted.samples - h / 6.0, kink=shifted.kink)


@dataclass(frozen=True)
class Rescaled:
    """Rescaled field plus the time dilation of the matching flow."""

    field: Field
    time_dilation: float


def rescale(u: Field, lam: float, target_grid: Grid | None = None) -> Rescaled:
    """KdV scaling u -> lam^-2 u(x/lam); time runs as t -> lam^3 t.

    Without a target grid the output lives on the exactly rescaled grid
    (half length lam*L, same node count), so no interpolation happens.
    With a target grid the samples are trig-interpolated; target nodes
    whose preimage x/lam leaves the source box are rejected.
    """
    if not lam > 0:
        raise ValueError("scaling parameter must be positive")
    if u.kink is not None:
        raise ValueError("KdV rescale does not preserve kink form; rescale the mKdV side")
    src = u.grid
    if target_grid is None or target_grid == _scaled_grid(src, lam):
        grid = _scaled_grid(src, lam)
        return Rescaled(Field(grid, u.samples / lam**2), lam**3)
    pts = target_grid.nodes / lam
    if pts.min() < -src.half_length or pts.max() >= src.half_length:
        raise ValueError("target grid requires samples outside the source domain")
    return Rescaled(Field(target_grid, _trig_interp(u, pts) / lam**2), lam**3)


def mkdv_rescale(u: Field, lam: float) -> Rescaled:
    """mKdV scaling u -> lam^-1 u(x/lam); maps the kink scale lam' to lam'/lam."""
    if not lam > 0:
        raise ValueError("scaling parameter must be positive")
    grid = _scaled_grid(u.grid, lam)
    tag = None
    if u.kink is not None:
        tag = KinkTag(u.kink.lam / lam, lam * u.kink.x0, lam**3 * u.kink.t)
    return Rescaled(Field(grid, u.samples / lam, kink=tag), lam**3)


def _scaled_grid(grid: Grid, lam: float) -> Grid:
    return make_grid(lam * grid.half_length, grid.point_count)


def _trig_interp(u: Field, points: np.ndarray) -> np.ndarray:
    """Band-limited interpolation of a periodic field at arbitrary points."""
    n = u.grid.point_count
    uh = np.fft.rfft(u.samples) / n
    k = u.grid.wavenumbers
    phase = np.exp(1j * np.outer(points + u.grid.half_length, k))
    weights = np.full(k.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return np.real(phase @ (weights * uh))


def _mkdv_expression(u: Field, u_t: Field, pointwise: bool) -> Field:
    grid = u.grid
    uxxx = spectral_derivative(u, 3).samples
    ux = spectral_derivative(u, 1).samples if u.kink is None else (
        u.kink.derivative_on(grid) + spectral_derivative(Field(grid, u.remainder()), 1).samples
    )
    if pointwise:
        cubic = u.samples**2 * ux
    else:
        cubic = padded_product(grid, 2.0, u.samples, u.samples, ux)
    return Field(grid, u_t.samples + uxxx - 6.0 * cubic)


def miura_identity_residual(u: Field, u_t: Field) -> float:
    """Max-norm defect of KdV(miura(u)) = (mKdV(u))_x + 2 u mKdV(u).

    u_t is supplied, making this a pure spatial-algebra check: the time
    derivative of miura(u) is expanded through the chain rule as
    d/dt (u_x + u^2) = (u_t)_x + 2 u u_t.
    """
    grid = u.grid
    pointwise = u.kink is not None

    def prod(*arrays):
        if pointwise:
            out = arrays[0].copy()
            for a in arrays[1:]:
                out = out * a
            return out
        return padded_product(grid, 2.0, *arrays)

    v = miura(u, "plus")
    ut_x = spectral_derivative(u_t, 1).samples
    v_t = ut_x + 2.0 * prod(u.samples, u_t.samples)
    v_x = spectral_derivative(v, 1).samples
    v_xxx = spectral_derivative(v, 3).samples
    lhs = v_t + v_xxx - 6.0 * prod(v.samples, v_x)

    mk = _mkdv_expression(u, u_t, pointwise)
    rhs = spectral_derivative(mk, 1).samples + 2.0 * prod(u.samples, mk.samples)
    return float(np.max(np.abs(lhs - rhs)))


def kink_frame_to_kdv(w: Field, y: float, t: float) -> Field:
    """KdV-side field w(.-6t)^2 + 2 w(.-6t) tanh(. - y - 6t) + w_x(.-6t).

    w is the mKdV deviation from the kink centered at y at time t; the
    output is the corresponding KdV perturbation near zero.
    """
    if w.kink is not None:
        raise ValueError("w must be the localized deviation, not a kink-tagged field")
    grid = w.grid
    wsq = padded_product(grid, 1.5, w.samples, w.samples)
    wx = spectral_derivative(w, 1).samples
    shift = 6.0 * t
    s_w = spatial_shift(w, shift).samples
    s_wsq = spatial_shift(Field(grid, wsq), shift).samples
    s_wx = spatial_shift(Field(grid, wx), shift).samples
    kink = np.tanh(grid.nodes - y - shift)
    return Field(grid, s_wsq + 2.0 * s_w * kink + s_wx)
