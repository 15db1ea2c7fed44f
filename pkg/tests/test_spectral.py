import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracdt.spectral import (
    GridError,
    Multiplier,
    SampledField,
    SymbolError,
    apply_multiplier,
    delta,
    forward,
    heat_semigroup,
    make_grid,
    sample,
    transform_roundtrip,
    xi_power,
)

from oracles import direct_dft_roundtrip

alphas = st.sampled_from([0.25, 0.5, 0.75, 1.0])
times = st.floats(0.01, 5.0)
seeds = st.integers(0, 2**32 - 1)


def smooth_field(grid, seed, count=4):
    rng = np.random.default_rng(seed)
    vals = np.zeros(grid.shape)
    coords = grid.coords()
    for _ in range(count):
        c = rng.uniform(-grid.L / 8, grid.L / 8, grid.n)
        w = rng.uniform(0.5, 2.0)
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        vals = vals + rng.normal() * np.exp(-r2 / (2 * w * w))
    return SampledField(grid, vals)


def test_make_grid_1d():
    g = make_grid(1, 64.0, 1024)
    assert g.h == 0.0625
    assert g.shape == (1024,)
    assert g.axis[0] == -32.0
    k = np.fft.fftfreq(1024, d=1 / 1024)
    assert np.allclose(g.frequency_axis, 2 * np.pi * k / 64.0, rtol=0, atol=1e-12)
    assert g.frequency_axis.min() == pytest.approx(-2 * np.pi * 512 / 64)


def test_make_grid_2d():
    g = make_grid(2, 32.0, 256)
    assert g.shape == (256, 256)
    assert g.h == 0.125


@pytest.mark.parametrize("args", [(3, 64.0, 64), (0, 1.0, 16)])
def test_make_grid_rejects_dimension(args):
    with pytest.raises(GridError, match="unsupported dimension"):
        make_grid(*args)


@pytest.mark.parametrize("m", [100, 8, 0, 24.5])
def test_make_grid_rejects_resolution(m):
    with pytest.raises(GridError, match="unsupported resolution"):
        make_grid(1, 10.0, m)


def test_make_grid_rejects_extent():
    with pytest.raises(GridError):
        make_grid(1, -1.0, 64)


def test_sampled_field_rejects_nonfinite():
    g = make_grid(1, 8.0, 16)
    with pytest.raises(ValueError):
        SampledField(g, np.full(16, np.nan))
    with pytest.raises(ValueError):
        SampledField(g, np.zeros(8))


def test_roundtrip_constant():
    g = make_grid(1, 10.0, 64)
    out = transform_roundtrip(SampledField(g, np.ones(64)))
    assert np.max(np.abs(out.values - 1)) <= 1e-12


def test_roundtrip_mode():
    g = make_grid(1, 10.0, 64)
    f = sample(g, lambda x: np.cos(2 * np.pi * x / g.L))
    out = transform_roundtrip(f)
    assert np.max(np.abs(out.values - f.values)) <= 1e-12


@given(seeds)
def test_roundtrip_matches_direct_dft(seed):
    g = make_grid(1, 16.0, 64)
    f = smooth_field(g, seed)
    out = transform_roundtrip(f)
    ref = direct_dft_roundtrip(f.values)
    scale = f.max_norm()
    assert np.max(np.abs(out.values - f.values)) <= 1e-12 * scale
    assert np.max(np.abs(ref - f.values)) <= 1e-12 * scale


@given(seeds)
def test_forward_conjugate_symmetry(seed):
    g = make_grid(2, 8.0, 16)
    f = SampledField(g, np.random.default_rng(seed).normal(size=g.shape))
    F = forward(f).coeffs
    flipped = np.roll(np.flip(F), 1, axis=(0, 1))
    assert np.allclose(F, flipped.conj(), atol=1e-10)


def test_identity_and_zero_multipliers():
    g = make_grid(2, 8.0, 32)
    f = smooth_field(g, 1)
    same = apply_multiplier(f, Multiplier(lambda xi: np.ones(1), "one"))
    assert np.max(np.abs(same.values - f.values)) <= 1e-12 * f.max_norm()
    zero = apply_multiplier(f, Multiplier(lambda xi: np.zeros(1), "zero"))
    assert np.max(np.abs(zero.values)) == 0


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_symbol_on_mode(n):
    g = make_grid(n, 16.0, 64)
    k = (3, 5)[:n]
    xi0 = [2 * np.pi * kk / g.L for kk in k]
    f = sample(g, lambda *x: np.cos(sum(a * b for a, b in zip(xi0, x))))
    t = 0.07
    out = apply_multiplier(f, Multiplier(lambda xi: np.exp(-t * xi_power(xi, 2)), "gauss"))
    expected = math.exp(-t * sum(a * a for a in xi0)) * f.values
    assert np.max(np.abs(out.values - expected)) <= 1e-12


def test_odd_symbol_is_rejected():
    g = make_grid(1, 16.0, 64)
    f = smooth_field(g, 3)
    with pytest.raises(SymbolError):
        # i*sign(xi) + 1 is not conjugate symmetric
        apply_multiplier(f, Multiplier(lambda xi: 1 + 1j * np.sign(xi[0]) * (xi[0] > 0), "bad"))


def test_unbounded_symbol_is_rejected():
    g = make_grid(1, 16.0, 64)
    with pytest.raises(SymbolError), np.errstate(divide="ignore"):
        apply_multiplier(smooth_field(g, 0), Multiplier(lambda xi: 1 / xi_power(xi, 1), "inv"))


def test_nyquist_node_is_made_real():
    g = make_grid(1, 16.0, 16)
    # i*xi is odd; only its Nyquist value lacks a conjugate partner
    out = Multiplier(lambda xi: 1j * xi[0], "grad").on(g)
    assert out[g.m // 2].imag == 0
    f = sample(g, lambda x: np.sin(2 * np.pi * x / g.L))
    d = apply_multiplier(f, Multiplier(lambda xi: 1j * xi[0], "grad"))
    assert np.allclose(d.values, 2 * np.pi / g.L * np.cos(2 * np.pi * g.axis / g.L), atol=1e-12)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_heat_rejects_time(t):
    g = make_grid(1, 8.0, 16)
    with pytest.raises(ValueError):
        heat_semigroup(SampledField(g, np.ones(16)), t, 0.5)


@pytest.mark.parametrize("alpha", [0.0, 1.5, -0.2])
def test_heat_rejects_alpha(alpha):
    g = make_grid(1, 8.0, 16)
    with pytest.raises(ValueError):
        heat_semigroup(SampledField(g, np.ones(16)), 1.0, alpha)


@given(st.floats(-5, 5), times, alphas)
def test_heat_fixes_constants(c, t, alpha):
    g = make_grid(1, 8.0, 32)
    out = heat_semigroup(SampledField(g, np.full(32, c)), t, alpha)
    assert np.max(np.abs(out.values - c)) <= 1e-12 * max(1, abs(c))


@pytest.mark.parametrize("s,t", [(0.5, 0.25), (1.0, 1.0), (0.3, 2.0)])
def test_gauss_weierstrass_convolution(s, t):
    g = make_grid(1, 64.0, 2048)
    density = lambda var: sample(g, lambda x: np.exp(-x * x / (2 * var)) / np.sqrt(2 * np.pi * var))  # noqa: E731
    out = heat_semigroup(density(s), t, 1.0)
    ref = density(s + 2 * t)
    assert np.max(np.abs(out.values - ref.values)) <= 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
def test_strong_continuity_at_zero(alpha):
    g = make_grid(1, 32.0, 512)
    f = smooth_field(g, 7)
    out = heat_semigroup(f, 1e-8, alpha)
    assert np.max(np.abs(out.values - f.values)) <= 1e-6


@given(seeds, times, alphas, st.sampled_from([1, 2]))
def test_mass_conservation(seed, t, alpha, n):
    g = make_grid(n, 16.0, 32 if n == 2 else 128)
    f = smooth_field(g, seed)
    out = heat_semigroup(f, t, alpha)
    scale = max(abs(f.mean()), np.mean(np.abs(f.values)))
    assert abs(out.mean() - f.mean()) <= 1e-12 * scale + 1e-300


@given(seeds, times, times, alphas)
def test_semigroup_law(seed, s, t, alpha):
    g = make_grid(1, 16.0, 128)
    f = smooth_field(g, seed)
    two = heat_semigroup(heat_semigroup(f, s, alpha), t, alpha)
    one = heat_semigroup(f, s + t, alpha)
    assert np.max(np.abs(two.values - one.values)) <= 1e-10 * max(f.max_norm(), 1)


@given(seeds, times, alphas)
def test_positivity_and_max_norm(seed, t, alpha):
    g = make_grid(1, 32.0, 256)
    f = SampledField(g, np.abs(smooth_field(g, seed).values))
    out = heat_semigroup(f, t, alpha)
    assert out.values.min() >= -1e-9 * f.max_norm()
    assert out.max_norm() <= f.max_norm() * (1 + 1e-9)


@given(seeds, times, alphas)
def test_l2_contraction(seed, t, alpha):
    g = make_grid(2, 8.0, 32)
    f = SampledField(g, np.random.default_rng(seed).normal(size=g.shape))
    out = heat_semigroup(f, t, alpha)
    assert np.linalg.norm(out.values) <= np.linalg.norm(f.values) * (1 + 1e-12)


def test_delta_has_unit_mass():
    for n in (1, 2):
        g = make_grid(n, 4.0, 16)
        assert np.sum(delta(g).values) * g.cell_volume == pytest.approx(1.0, abs=1e-14)
