import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracdt.kernels import KernelSpec, kernel_closed_form
from fracdt.lacunary import WeightSequence, constant_weights, geometric, perturbed_geometric, random_weights
from fracdt.spectral import SampledField, heat_semigroup, make_grid, sample
from fracdt.transforms import (
    MaximalHorizon,
    TransformSpec,
    Window,
    WindowError,
    check_cz_bounds,
    check_horizon,
    differential_transform,
    maximal_transform,
    stabilized_maximal,
    transform_kernel,
    transform_kernel_gradient,
    transform_multiplier_bound,
    window_family,
)

from oracles import brute_force_maximal, scalar_multiplier

GRID = make_grid(1, 64.0, 1024)
seeds = st.integers(0, 2**32 - 1)
alphas = st.sampled_from([0.25, 0.5, 0.75, 1.0])


def bump_field(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    coords = grid.coords()
    vals = np.zeros(grid.shape)
    for _ in range(5):
        c = rng.uniform(-grid.L / 16, grid.L / 16, grid.n)
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        vals = vals + rng.normal() * np.exp(-r2 / rng.uniform(0.3, 3.0))
    return SampledField(grid, vals)


def random_spec(seed, alpha=0.5, lo=-6, hi=6, lam=2.0, perturbed=False):
    rng = np.random.default_rng(seed)
    seq = perturbed_geometric(lam, lo, hi) if perturbed else geometric(lam, lo, hi)
    return TransformSpec(alpha, seq, random_weights(seq, rng))


@st.composite
def windows(draw, lo=-6, hi=5, strict=True):
    N1 = draw(st.integers(lo, hi - (1 if strict else 0)))
    N2 = draw(st.integers(N1 + (1 if strict else 0), hi))
    return Window(N1, N2)


# ------------------------------------------------------------- windows


def test_window_validation():
    spec = random_spec(0)
    with pytest.raises(WindowError):
        differential_transform(bump_field(0), spec, (0, 0))
    with pytest.raises(WindowError):
        differential_transform(bump_field(0), spec, (2, 1), mode="inclusive")
    with pytest.raises(WindowError):
        differential_transform(bump_field(0), spec, (0, 6))
    with pytest.raises(ValueError):
        differential_transform(bump_field(0), spec, (0, 1), mode="loose")
    assert differential_transform(bump_field(0), spec, (0, 0), mode="inclusive").max_norm() > 0


def test_horizon_validation():
    spec = random_spec(0)
    assert check_horizon(spec, 5) == 5
    assert check_horizon(spec, MaximalHorizon(3)) == 3
    with pytest.raises(WindowError):
        check_horizon(spec, 6)
    with pytest.raises(ValueError):
        MaximalHorizon(0)


def test_spec_alignment():
    seq = geometric(2.0, 0, 4)
    with pytest.raises(ValueError):
        TransformSpec(0.5, seq, WeightSequence([1.0] * 5, -1))
    with pytest.raises(ValueError):
        TransformSpec(1.5, seq, constant_weights(seq))


# ------------------------------------------------------------ transform


@given(seeds, alphas, windows())
def test_telescoping(seed, alpha, N):
    seq = geometric(2.0, -6, 6)
    spec = TransformSpec(alpha, seq, constant_weights(seq))
    f = bump_field(seed)
    out = differential_transform(f, spec, N)
    ref = heat_semigroup(f, seq[N.N2 + 1], alpha).values - heat_semigroup(f, seq[N.N1], alpha).values
    assert np.max(np.abs(out.values - ref)) <= 1e-12 * f.max_norm()


def test_single_active_term():
    seq = geometric(2.0, -2, 3)
    v = WeightSequence([0.0, 0.0, 0.8, 0.0, 0.0, 0.0], -2)
    spec = TransformSpec(0.5, seq, v)
    f = bump_field(3)
    out = differential_transform(f, spec, (0, 1))
    ref = 0.8 * (heat_semigroup(f, seq[1], 0.5).values - heat_semigroup(f, seq[0], 0.5).values)
    assert np.max(np.abs(out.values - ref)) <= 1e-12 * f.max_norm()


@given(seeds, alphas, windows(), st.integers(1, 40))
def test_mode_response_matches_scalar_multiplier(seed, alpha, N, k):
    spec = random_spec(seed, alpha)
    xi0 = 2 * np.pi * k / GRID.L
    f = sample(GRID, lambda x: np.cos(xi0 * x))
    out = differential_transform(f, spec, N)
    m = scalar_multiplier(alpha, spec.seq, spec.weights, N.N1, N.N2, xi0)
    assert np.max(np.abs(out.values - m * f.values)) <= 1e-12


@given(seeds, alphas, windows())
def test_zero_mean(seed, alpha, N):
    f = bump_field(seed)
    out = differential_transform(f, random_spec(seed, alpha), N)
    l1 = np.sum(np.abs(f.values)) * GRID.h
    assert abs(out.mean() * GRID.L) <= 1e-12 * l1


@given(seeds, alphas, windows(hi=4))
def test_window_decomposition(seed, alpha, N):
    # T_(N1,N2) = T_(N1,M) - T_(N2+1,M), with inclusive windows at the boundary
    M = 5
    spec = random_spec(seed, alpha)
    f = bump_field(seed)
    lhs = differential_transform(f, spec, N).values
    a = differential_transform(f, spec, (N.N1, M), mode="inclusive").values
    b = differential_transform(f, spec, (N.N2 + 1, M), mode="inclusive").values
    assert np.max(np.abs(lhs - (a - b))) <= 1e-12 * f.max_norm()


@given(seeds, alphas, windows(), st.booleans())
def test_uniform_l2_bound(seed, alpha, N, perturbed):
    spec = random_spec(seed, alpha, perturbed=perturbed, lam=2.5)
    f = SampledField(GRID, np.random.default_rng(seed).normal(size=GRID.shape))
    out = differential_transform(f, spec, N)
    bound = transform_multiplier_bound(spec, N, GRID)
    assert bound <= spec.weights.norm_linf * (1 + 1e-12)
    assert np.linalg.norm(out.values) <= bound * np.linalg.norm(f.values) * (1 + 1e-12)


@given(alphas, windows())
def test_multiplier_bound_unit_weights(alpha, N):
    seq = geometric(2.0, -6, 6)
    spec = TransformSpec(alpha, seq, constant_weights(seq))
    xi = np.abs(GRID.frequency_axis)
    ref = max(abs(scalar_multiplier(alpha, seq, spec.weights, N.N1, N.N2, x)) for x in xi)
    val = transform_multiplier_bound(spec, N, GRID)
    assert val == pytest.approx(ref, rel=1e-12)
    assert val < 1


def test_multiplier_bound_zero_weights():
    seq = geometric(2.0, -6, 6)
    spec = TransformSpec(0.5, seq, constant_weights(seq, 0.0))
    assert transform_multiplier_bound(spec, Window(-3, 3), GRID) == 0.0


def test_multiplier_bound_alternating_weights():
    seq = geometric(2.0, -6, 6)
    v = WeightSequence([(-1.0) ** j for j in seq.indices], seq.j_min)
    spec = TransformSpec(0.5, seq, v)
    val = transform_multiplier_bound(spec, Window(-6, 5), GRID)
    xi = np.abs(GRID.frequency_axis)
    ref = max(abs(scalar_multiplier(0.5, seq, v, -6, 5, x)) for x in xi)
    assert val == pytest.approx(ref, rel=1e-12)
    assert 0 < val <= 1
    # value recorded on the first run of this test
    assert val == pytest.approx(0.12287890078899019, rel=1e-9)


# ------------------------------------------------------------- kernels


@given(alphas, windows())
def test_kernel_telescopes(alpha, N):
    seq = geometric(2.0, -6, 6)
    spec = TransformSpec(alpha, seq, constant_weights(seq))
    g = make_grid(1, 256.0, 4096)
    K = transform_kernel(spec, N, g, tol=1.0)
    from fracdt.kernels import kernel_numeric

    hi = kernel_numeric(KernelSpec(alpha, 1, seq[N.N2 + 1]), g, tol=1.0).values
    lo = kernel_numeric(KernelSpec(alpha, 1, seq[N.N1]), g, tol=1.0).values
    assert np.max(np.abs(K.values - (hi - lo))) <= 1e-12 * np.max(np.abs(lo))


@given(seeds, alphas, windows(lo=1))
def test_kernel_has_zero_mean(seed, alpha, N):
    g = make_grid(1, 128.0, 8192)
    K = transform_kernel(random_spec(seed, alpha), N, g)
    assert abs(K.values.sum() * g.h) <= 1e-10


def test_poisson_kernel_differences_match_closed_form():
    seq = geometric(2.0, -2, 4)
    v = WeightSequence([0.3, -1.0, 0.5, 2.0, -0.7, 1.0, 0.0], -2)
    spec = TransformSpec(0.5, seq, v)
    g = make_grid(1, 256.0, 2**14)
    K = transform_kernel(spec, Window(-2, 3), g).values
    ref = sum(
        v[j] * (
            kernel_closed_form(KernelSpec(0.5, 1, seq[j + 1]), g.axis, period=g.L)
            - kernel_closed_form(KernelSpec(0.5, 1, seq[j]), g.axis, period=g.L)
        )
        for j in range(-2, 4)
    )
    assert np.max(np.abs(K - ref)) <= 1e-6 * np.max(np.abs(ref))


def test_transform_is_convolution_with_kernel():
    spec = random_spec(4, 0.75)
    g = make_grid(1, 64.0, 1024)
    f = bump_field(9, g)
    N = Window(-3, 2)
    K = transform_kernel(spec, N, g).values
    # circular convolution by direct summation; the kernel is centered at the origin node
    Kc = np.roll(K, -g.m // 2)
    idx = (np.arange(g.m)[:, None] - np.arange(g.m)[None, :]) % g.m
    conv = (Kc[idx] @ f.values) * g.h
    out = differential_transform(f, spec, N).values
    assert np.max(np.abs(conv - out)) <= 1e-8 * np.max(np.abs(out))


def test_kernel_gradient_matches_finite_difference():
    spec = random_spec(2, 0.5)
    g = make_grid(1, 64.0, 4096)
    N = Window(0, 3)
    K = transform_kernel(spec, N, g).values
    (G,) = transform_kernel_gradient(spec, N, g)
    fd = (8 * (np.roll(K, -1) - np.roll(K, 1)) - (np.roll(K, -2) - np.roll(K, 2))) / (12 * g.h)
    assert np.max(np.abs(G.values - fd)) <= 1e-6 * np.max(np.abs(G.values))


def test_cz_bounds_zero_weights():
    seq = geometric(2.0, -4, 4)
    spec = TransformSpec(0.5, seq, constant_weights(seq, 0.0))
    size, grad = check_cz_bounds(spec, [Window(0, 1), Window(0, 3)], make_grid(1, 64.0, 1024))
    assert size.sup_ratio == 0 and grad.sup_ratio == 0
    assert size.stable and grad.stable


@pytest.mark.parametrize("n", [1, 2])
def test_cz_bounds_stable_as_windows_widen(n):
    seq = geometric(2.0, 0, 10)
    spec = TransformSpec(0.5, seq, constant_weights(seq))
    g = make_grid(n, 256.0 if n == 1 else 64.0, 4096 if n == 1 else 512)
    fam = window_family(spec, mode="strict", center=3, max_length=6)
    size, grad = check_cz_bounds(spec, fam, g)
    for rep in (size, grad):
        assert math.isfinite(rep.sup_ratio) and rep.sup_ratio > 0
        assert rep.stable and rep.spread <= 50
        assert [p for p, _ in rep.sweep] == [w.length for w in fam]


def test_window_family():
    spec = random_spec(0)
    fam = window_family(spec, "strict")
    assert fam[0] == Window(0, 1)
    assert all(b.length == a.length + 1 for a, b in zip(fam, fam[1:]))
    assert window_family(spec, "inclusive")[0] == Window(0, 0)
    assert max(w.length for w in window_family(spec, max_length=4)) == 4


# ------------------------------------------------------------- maximal


@given(st.floats(-3, 3), st.integers(1, 5))
def test_maximal_of_constant_is_zero(c, M):
    f = SampledField(GRID, np.full(GRID.shape, c))
    assert maximal_transform(f, random_spec(0), M).max_norm() <= 1e-12 * max(1, abs(c))


@pytest.mark.parametrize("mode", ["strict", "inclusive"])
@given(seeds, st.integers(1, 4), alphas)
def test_maximal_matches_brute_force(mode, seed, M, alpha):
    spec = random_spec(seed, alpha)
    f = bump_field(seed)
    fast = maximal_transform(f, spec, M, mode=mode).values
    slow = brute_force_maximal(f, spec, M, strict=mode == "strict")
    assert np.max(np.abs(fast - slow)) <= 1e-12 * max(f.max_norm(), 1e-300)


@given(seeds, st.integers(1, 4))
def test_maximal_monotone_in_horizon(seed, M):
    spec = random_spec(seed)
    f = bump_field(seed)
    a = maximal_transform(f, spec, M).values
    b = maximal_transform(f, spec, M + 1).values
    assert np.all(a <= b + 1e-15)


def test_maximal_2d_matches_brute_force():
    g = make_grid(2, 16.0, 32)
    spec = random_spec(11, 0.75)
    f = bump_field(11, g)
    fast = maximal_transform(f, spec, 3).values
    assert np.max(np.abs(fast - brute_force_maximal(f, spec, 3))) <= 1e-12 * f.max_norm()


def test_stabilized_maximal_converges():
    seq = geometric(2.0, -40, 40)
    spec = TransformSpec(0.5, seq, random_weights(seq, np.random.default_rng(5)))
    res = stabilized_maximal(bump_field(5), spec, M0=4, rtol=1e-6)
    assert res.converged
    Ms = [m for m, _ in res.history]
    assert Ms[0] == 4 and all(b == 2 * a or b == 39 for a, b in zip(Ms, Ms[1:]))
    assert np.all(np.diff([v for _, v in res.history]) >= -1e-15)


def test_stabilized_maximal_reports_exhaustion():
    spec = random_spec(5, lo=-5, hi=6)
    res = stabilized_maximal(bump_field(5), spec, M0=2, rtol=0.0)
    assert not res.converged and res.M == 5
