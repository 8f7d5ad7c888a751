import math

import numpy as np
import pytest

from miura_lab.grid import (
    Field,
    WindowSpec,
    field_from_json,
    field_to_csv,
    field_to_json,
    inner_product,
    make_grid,
    multiply_dealiased,
    sobolev_norm,
    spectral_derivative,
)

from conftest import band_limited_field


class TestMakeGrid:
    def test_pi_grid_nodes(self):
        grid = make_grid(math.pi, 8)
        assert grid.spacing == pytest.approx(math.pi / 4)
        assert grid.nodes[0] == pytest.approx(-math.pi)
        assert grid.nodes[-1] == pytest.approx(3 * math.pi / 4)

    def test_default_spacing(self):
        assert make_grid(50.0, 2048).spacing == pytest.approx(2 * 50 / 2048)

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError):
            make_grid(1.0, 7)

    def test_nonpositive_length_rejected(self):
        with pytest.raises(ValueError):
            make_grid(-1.0, 64)

    def test_wavenumbers(self):
        grid = make_grid(25.0, 64)
        assert grid.wavenumbers[1] == pytest.approx(math.pi / 25.0)
        assert len(grid.wavenumbers) == 33


class TestSpectralDerivative:
    def test_single_mode(self):
        grid = make_grid(math.pi, 64)
        f = Field(grid, np.sin(grid.nodes))
        df = spectral_derivative(f, 1)
        assert np.max(np.abs(df.samples - np.cos(grid.nodes))) < 1e-13

    def test_constant(self):
        grid = make_grid(10.0, 64)
        f = Field(grid, np.full(64, 3.7))
        for order in (1, 2, 3):
            assert np.max(np.abs(spectral_derivative(f, order).samples)) < 1e-12

    def test_sech_third_derivative(self, grid50):
        # analytic oracle: d^3/dx^3 sech = sech*tanh*(5 sech^2 - tanh^2)
        x = grid50.nodes
        s, t = 1 / np.cosh(x), np.tanh(x)
        f = Field(grid50, s)
        exact = s * t * (5 * s**2 - t**2)
        assert np.max(np.abs(spectral_derivative(f, 3).samples - exact)) < 1e-10

    def test_linearity(self, grid50):
        f = band_limited_field(grid50, 1)
        g = band_limited_field(grid50, 2)
        lhs = spectral_derivative(Field(grid50, 2.0 * f.samples - 0.5 * g.samples), 1)
        rhs = 2.0 * spectral_derivative(f, 1).samples - 0.5 * spectral_derivative(g, 1).samples
        assert np.max(np.abs(lhs.samples - rhs)) < 1e-12

    def test_composition_matches_second_order(self, grid50):
        f = band_limited_field(grid50, 3)
        twice = spectral_derivative(spectral_derivative(f, 1), 1)
        once = spectral_derivative(f, 2)
        assert np.max(np.abs(twice.samples - once.samples)) < 1e-10


class TestSobolevNorm:
    def test_single_mode_negative_order(self):
        grid = make_grid(math.pi, 128)
        k = 3.0
        f = Field(grid, np.cos(k * grid.nodes))
        norm0 = sobolev_norm(f, 0.0)
        scaled = Field(grid, f.samples / norm0)
        assert sobolev_norm(scaled, -1.0) == pytest.approx((1 + k**2) ** -0.5, abs=1e-12)

    def test_sech_l2(self, grid50):
        f = Field(grid50, 1 / np.cosh(grid50.nodes))
        assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(2.0), abs=1e-10)

    def test_window_at_left_edge_is_identity(self, grid50):
        f = Field(grid50, 1 / np.cosh(grid50.nodes))
        windowed = sobolev_norm(f, 0.0, WindowSpec(-50.0, 2.0))
        assert windowed == pytest.approx(sobolev_norm(f, 0.0), abs=1e-12)

    def test_matches_inner_product(self, grid50):
        f = band_limited_field(grid50, 4)
        assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(inner_product(f, f)), abs=1e-12)

    def test_monotone_in_order(self, grid50):
        f = band_limited_field(grid50, 5)
        norms = [sobolev_norm(f, s) for s in (-2.0, -1.0, 0.0, 1.0, 2.0)]
        assert all(a <= b + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_windowed_negative_order_rejected(self, grid50):
        f = band_limited_field(grid50, 6)
        with pytest.raises(ValueError):
            sobolev_norm(f, -1.0, WindowSpec(0.0))


class TestInnerProduct:
    def test_odd_integrand_vanishes(self, grid50):
        x = grid50.nodes
        f = Field(grid50, 1 / np.cosh(x) ** 2)
        g = Field(grid50, np.tanh(x))
        assert abs(inner_product(f, g)) < 1e-12

    def test_sech_mass(self, grid50):
        f = Field(grid50, 1 / np.cosh(grid50.nodes))
        assert inner_product(f, f) == pytest.approx(2.0, abs=1e-10)

    def test_parseval(self, grid50):
        f = band_limited_field(grid50, 7)
        g = band_limited_field(grid50, 8)
        fh = np.fft.rfft(f.samples)
        gh = np.fft.rfft(g.samples)
        # discrete Parseval with half-spectrum doubling
        weights = np.full(len(fh), 2.0)
        weights[0] = weights[-1] = 1.0
        spectral = grid50.spacing / grid50.point_count * np.sum(
            weights * np.real(fh * np.conj(gh))
        )
        assert inner_product(f, g) == pytest.approx(spectral, abs=1e-12)

    def test_grid_mismatch_rejected(self, grid50, grid_small):
        with pytest.raises(ValueError):
            inner_product(band_limited_field(grid50, 1), band_limited_field(grid_small, 1))


class TestMultiplyDealiased:
    def test_multiply_by_one(self, grid50):
        f = band_limited_field(grid50, 9)
        one = Field(grid50, np.ones(grid50.point_count))
        assert np.max(np.abs(multiply_dealiased(f, one).samples - f.samples)) < 1e-13

    def test_sech_squared(self, grid50):
        s = Field(grid50, 1 / np.cosh(grid50.nodes))
        product = multiply_dealiased(s, s)
        assert np.max(np.abs(product.samples - 1 / np.cosh(grid50.nodes) ** 2)) < 1e-12

    def test_matches_convolution_oracle(self):
        # direct spectral convolution of band-limited inputs
        grid = make_grid(10.0, 96)
        n = grid.point_count
        rng = np.random.default_rng(11)
        kmax = n // 3
        spec_f = np.zeros(n, dtype=complex)
        spec_g = np.zeros(n, dtype=complex)
        for spec in (spec_f, spec_g):
            for m in range(1, kmax // 2):
                a = rng.standard_normal() + 1j * rng.standard_normal()
                spec[m] = a
                spec[-m] = np.conj(a)
        f = Field(grid, np.real(np.fft.ifft(spec_f)))
        g = Field(grid, np.real(np.fft.ifft(spec_g)))
        conv = np.zeros(n, dtype=complex)
        for m in range(-n // 2, n // 2):
            total = 0.0
            for p in range(-n // 2, n // 2):
                q = m - p
                if -n // 2 <= q < n // 2:
                    total += spec_f[p] * spec_g[q]
            conv[m] = total / n
        exact = np.real(np.fft.ifft(conv))
        assert np.max(np.abs(multiply_dealiased(f, g).samples - exact)) < 1e-12

    def test_rejects_kink_tagged(self, grid50):
        from miura_lab.profiles import ProfileSpec, render_profile

        kink = render_profile(ProfileSpec("kink", {"lam": 1.0}), grid50)
        with pytest.raises(ValueError):
            multiply_dealiased(kink, kink)


class TestSerialization:
    def test_json_round_trip(self, grid_small):
        f = band_limited_field(grid_small, 12)
        g = field_from_json(field_to_json(f))
        assert g.grid == f.grid
        assert np.array_equal(g.samples, f.samples)

    def test_csv_layout(self, grid_small):
        f = band_limited_field(grid_small, 13)
        lines = field_to_csv(f).strip().split("\n")
        assert lines[0] == "x,value"
        assert len(lines) == grid_small.point_count + 1
        x0, v0 = lines[1].split(",")
        assert float(x0) == pytest.approx(-50.0)
        assert float(v0) == pytest.approx(f.samples[0])

    def test_nonfinite_samples_rejected(self, grid_small):
        bad = np.zeros(grid_small.point_count)
        bad[3] = np.inf
        with pytest.raises(ValueError):
            Field(grid_small, bad)
