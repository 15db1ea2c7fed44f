import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fracdt.lacunary import (
    LacunaryError,
    WeightSequence,
    constant_weights,
    geometric,
    increasing_sequence,
    perturbed_geometric,
    power_weights,
    random_weights,
    refine,
    transform_equivalence_check,
    validate_lacunary,
)
from fracdt.spectral import SampledField, heat_semigroup, make_grid
from fracdt.transforms import TransformSpec

GRID = make_grid(1, 64.0, 1024)


def bump_field(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    x = grid.axis
    vals = sum(rng.normal() * np.exp(-((x - rng.uniform(-4, 4)) ** 2) / rng.uniform(0.5, 3)) for _ in range(4))
    return SampledField(grid, vals)


@st.composite
def lacunary_inputs(draw):
    lam = draw(st.sampled_from([1.5, 2.0, 3.0]))
    size = draw(st.integers(2, 8))
    j_min = draw(st.integers(-4, 0))
    # ratios between lam and lam^5 so that refinement has something to do
    logs = draw(st.lists(st.floats(0.0, 4.0), min_size=size - 1, max_size=size - 1))
    terms = [draw(st.floats(0.05, 2.0))]
    for e in logs:
        terms.append(terms[-1] * lam ** (1 + e))
    values = draw(st.lists(st.floats(-3, 3), min_size=size, max_size=size))
    seq = validate_lacunary(terms, lam, j_min)
    return seq, WeightSequence(values, j_min)


# ------------------------------------------------------------- validation


def test_validate_geometric():
    seq = validate_lacunary([2.0**j for j in range(10)], 2.0)
    assert len(seq) == 10 and seq.lam == 2.0


def test_validate_reports_violating_index():
    with pytest.raises(LacunaryError) as err:
        validate_lacunary([1.0, 1.5], 2.0)
    assert err.value.index == 0
    assert "1.5" in str(err.value)


def test_validate_accepts_uneven_ratios():
    seq = validate_lacunary([1.0, 3.0, 9.5], 3.0)
    assert np.allclose(seq.ratios(), [3.0, 9.5 / 3])


def test_validate_index_is_offset_by_j_min():
    with pytest.raises(LacunaryError) as err:
        validate_lacunary([1.0, 2.0, 3.0], 2.0, j_min=-5)
    assert err.value.index == -4


@pytest.mark.parametrize(
    "terms,lam",
    [([1.0, 0.5], 2.0), ([], 2.0), ([0.0, 1.0], 2.0), ([1.0, 4.0], 1.0), ([1.0, math.inf], 2.0)],
)
def test_validate_rejects(terms, lam):
    with pytest.raises(LacunaryError):
        validate_lacunary(terms, lam)


def test_ratio_slack_absorbs_rounding():
    seq = geometric(1.5, -20, 20)
    assert seq[0] == 1.0 and seq[-20] == pytest.approx(1.5**-20)


def test_sequence_indexing():
    seq = geometric(2.0, -3, 3)
    assert seq.j_min == -3 and seq.j_max == 3
    assert list(seq.indices) == list(range(-3, 4))
    with pytest.raises(IndexError):
        seq[4]


def test_perturbed_geometric_is_lacunary():
    seq = perturbed_geometric(2.0, -10, 10)
    assert seq.lam > 1
    assert np.all(seq.ratios() >= seq.lam * (1 - 1e-12))
    assert seq[3] == pytest.approx(8 * (1 + 0.3 * math.sin(3)))


def test_perturbed_geometric_rejects_small_lambda():
    with pytest.raises(LacunaryError):
        perturbed_geometric(1.2, -10, 10, amplitude=0.5)


def test_increasing_sequence_needs_no_lacunarity():
    seq = increasing_sequence([1.0, 1.1, 5.0])
    assert seq.lam == pytest.approx(1.1)
    with pytest.raises(LacunaryError):
        increasing_sequence([1.0, 1.0])


def test_weight_norms():
    v = WeightSequence([3.0, -4.0], 0)
    assert v.norm_linf == 4.0
    assert v.norm_lp(2) == pytest.approx(5.0)
    assert v.norm_lp(math.inf) == 4.0
    with pytest.raises(ValueError):
        WeightSequence([math.nan])


def test_power_weights():
    v = power_weights(-2, 2, 1.0, signs=[1, -1, 1, -1, 1])
    assert v.values == (1 / 3, -1 / 2, 1.0, -1 / 2, 1 / 3)


# ------------------------------------------------------------- refinement


def test_refine_one_gap():
    seq = validate_lacunary([1.0, 10.0], 2.0)
    res = refine(seq, WeightSequence([0.7, -0.2], 0))
    assert res.eta.terms == (1.0, 2.0, 4.0, 10.0)
    assert np.allclose(res.eta.ratios(), [2, 2, 2.5])
    assert res.omega.values == (0.7, 0.7, 0.7, -0.2)
    assert list(res.blocks[0]) == [0, 1, 2]


def test_refine_accepts_ratio_equal_to_lambda_squared():
    # 64/16 = 4 = lam^2 is within reach, so 64 is accepted after 16
    seq = validate_lacunary([1.0, 2.0, 4.0, 64.0], 2.0)
    res = refine(seq, constant_weights(seq))
    assert res.eta.terms == (1.0, 2.0, 4.0, 8.0, 16.0, 64.0)
    assert np.allclose(res.eta.ratios(), [2, 2, 2, 2, 4])


def test_refine_identity_when_normalized():
    seq = validate_lacunary([1.0, 3.0, 9.0, 20.0], 2.0)
    v = WeightSequence([1.0, 2.0, 3.0, 4.0])
    res = refine(seq, v)
    assert res.eta.terms == seq.terms
    assert res.omega.values == v.values
    assert all(list(res.blocks[j]) == [j] for j in seq.indices)
    assert res.window_map(0, 2) == (0, 2)
    assert res.window_map(1, 1) == (1, 1)


def test_refine_keeps_index_zero():
    seq = validate_lacunary([0.01, 1.0, 100.0], 2.0, j_min=-1)
    res = refine(seq, constant_weights(seq))
    assert res.eta[0] == 1.0
    assert res.position[0] == 0
    # below the anchor the gap is filled downward from 1.0
    assert res.eta[-1] == 0.5


def test_refine_rejects_misaligned_weights():
    seq = geometric(2.0, 0, 3)
    with pytest.raises(ValueError):
        refine(seq, WeightSequence([1.0, 1.0], 0))


@given(lacunary_inputs())
def test_refinement_invariants(data):
    seq, v = data
    res = refine(seq, v)
    lam = seq.lam
    ratios = res.eta.ratios()
    assert np.all(ratios >= lam * (1 - 1e-12))
    assert np.all(ratios <= lam * lam * (1 + 1e-12))
    for j in seq.indices:
        k = res.position[j]
        assert res.eta[k] == seq[j]
        assert all(res.omega[kk] == v[j] for kk in res.blocks[j])
    assert res.omega.norm_linf == v.norm_linf
    blocks = [k for j in seq.indices for k in res.blocks[j]]
    assert blocks == list(res.eta.indices)


@given(lacunary_inputs(), st.integers(0, 2**32 - 1), st.data())
def test_window_map_endpoints(data, seed, draw):
    seq, v = data
    res = refine(seq, v)
    N1 = draw.draw(st.integers(seq.j_min, seq.j_max - 1))
    N2 = draw.draw(st.integers(N1, seq.j_max - 1))
    K1, K2 = res.window_map(N1, N2)
    # the refined window spans the same two semigroup times
    assert res.eta[K1] == seq[N1]
    assert res.eta[K2 + 1] == seq[N2 + 1]


# ---------------------------------------------------------- equivalence


def test_equivalence_with_unit_weights():
    seq = geometric(3.0, -3, 3)
    v = constant_weights(seq)
    spec = TransformSpec(0.5, seq, v)
    res = refine(seq, v)
    assert transform_equivalence_check(bump_field(0), spec, (-2, 1), res) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_equivalence_one_gap_random_weights(seed):
    rng = np.random.default_rng(seed)
    seq = validate_lacunary([1.0, 10.0, 30.0], 2.0)
    v = random_weights(seq, rng)
    spec = TransformSpec(0.75, seq, v)
    res = refine(seq, v)
    assert res.eta.terms[:4] == (1.0, 2.0, 4.0, 10.0)
    assert transform_equivalence_check(bump_field(seed), spec, (0, 1), res) <= 1e-10


@given(lacunary_inputs(), st.integers(0, 2**32 - 1), st.data())
def test_equivalence_single_index_block(data, seed, draw):
    seq, v = data
    j = draw.draw(st.integers(seq.j_min, seq.j_max - 1))
    spec = TransformSpec(0.5, seq, v)
    res = refine(seq, v)
    f = bump_field(seed)
    r = transform_equivalence_check(f, spec, (j, j), res, mode="inclusive")
    assert r <= 1e-10
    # block telescoping against two direct semigroup calls
    direct = v[j] * (heat_semigroup(f, seq[j + 1], 0.5).values - heat_semigroup(f, seq[j], 0.5).values)
    K1, K2 = res.window_map(j, j)
    pieces = sum(
        res.omega[k] * (heat_semigroup(f, res.eta[k + 1], 0.5).values - heat_semigroup(f, res.eta[k], 0.5).values)
        for k in range(K1, K2 + 1)
    )
    assert np.max(np.abs(direct - pieces)) <= 1e-10 * f.max_norm()


def test_equivalence_rejects_out_of_range_window():
    seq = geometric(2.0, 0, 3)
    v = constant_weights(seq)
    with pytest.raises(ValueError):
        transform_equivalence_check(bump_field(1), TransformSpec(0.5, seq, v), (0, 3), refine(seq, v))


def test_equivalence_of_zero_field():
    seq = geometric(2.0, 0, 3)
    v = constant_weights(seq)
    zero = SampledField(GRID, np.zeros(GRID.shape))
    assert transform_equivalence_check(zero, TransformSpec(0.5, seq, v), (0, 1), refine(seq, v)) == 0.0
