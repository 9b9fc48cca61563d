"""Star-product algebra: evaluation, composition, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustsat.errors import DegenerateInterval, IllPosed, StructureMismatch
from robustsat.lft import (
    DeltaSample,
    Interval,
    Lft,
    NormBounded,
    ScalarRepeated,
    SymmetricSet,
    UncertaintyStructure,
    constant_lft,
    diag_concat,
    lft_affine,
    lft_from_json,
    lft_to_json,
    normalize_interval,
    star_compose,
    star_eval,
)

TWO_PI = 2.0 * math.pi


def omega_lft(n_apps=4, reps=2):
    center, radius = normalize_interval(0.2 * TWO_PI, 0.6 * TWO_PI)
    r = n_apps * reps
    blocks = [ScalarRepeated(f"omega{k + 1}", reps) for k in range(n_apps)]
    eye = np.eye(r)
    return Lft(np.zeros((r, r)), eye, radius * eye, center * eye,
               UncertaintyStructure(blocks))


def zeta_lft(n_apps=4, reps=2):
    center, radius = normalize_interval(5e-4, 5e-3)
    r = n_apps * reps
    blocks = [ScalarRepeated(f"zeta{k + 1}", reps) for k in range(n_apps)]
    eye = np.eye(r)
    return Lft(np.zeros((r, r)), eye, radius * eye, center * eye,
               UncertaintyStructure(blocks))


def random_sample(structure, rng):
    vals = {}
    for name in structure.names:
        vals[name] = rng.uniform(-1.0, 1.0)
    return DeltaSample(structure, vals)


class TestStarEval:
    def test_zero_delta_gives_nominal(self):
        f = omega_lft()
        zero = DeltaSample.zero(f.structure)
        assert np.allclose(star_eval(f, zero), f.m_a)

    def test_omega_at_plus_one_hits_interval_top(self):
        f = omega_lft()
        s = DeltaSample(f.structure, {n: 1.0 for n in f.structure.names})
        assert np.allclose(star_eval(f, s), 0.6 * TWO_PI * np.eye(8), atol=1e-12)

    def test_formula_against_direct_inverse(self):
        rng = np.random.default_rng(0)
        st_ = UncertaintyStructure([ScalarRepeated("a", 2), ScalarRepeated("b", 3)])
        f = Lft(0.1 * rng.normal(size=(5, 5)), rng.normal(size=(5, 4)),
                rng.normal(size=(3, 5)), rng.normal(size=(3, 4)), st_)
        s = random_sample(st_, rng)
        d = s.expand()
        expected = f.m_a + f.m_b @ d @ np.linalg.inv(np.eye(5) - f.m_d @ d) @ f.m_c
        assert np.allclose(star_eval(f, s), expected, atol=1e-12)

    def test_ill_posed_detection(self):
        st_ = UncertaintyStructure([ScalarRepeated("a", 1)])
        f = Lft([[1.0]], [[1.0]], [[1.0]], [[0.0]], st_)
        with pytest.raises(IllPosed):
            star_eval(f, DeltaSample(st_, {"a": 1.0}))

    def test_structure_mismatch(self):
        f = omega_lft()
        other = zeta_lft()
        with pytest.raises(StructureMismatch):
            star_eval(f, DeltaSample.zero(other.structure))


class TestCompose:
    def test_identity_composition_is_neutral(self):
        f = omega_lft()
        ident = constant_lft(np.eye(8))
        left = star_compose(ident, f)
        assert left.structurally_equal(
            Lft(f.m_d, f.m_c, f.m_b, f.m_a, f.structure))

    def test_product_lft_matches_direct_product(self):
        rng = np.random.default_rng(7)
        om = omega_lft()
        tz = zeta_lft()
        two_zeta = lft_affine(2.0 * np.eye(8), tz, np.eye(8))
        row = lft_affine(np.hstack([np.eye(8), np.eye(8)]),
                         diag_concat([two_zeta, om]), np.eye(16))
        prod = star_compose(om, row)
        # frequency uncertainty appears twice, damping once: 8 + 8 + 8 channels
        assert prod.delta_dim == 24
        for name in (f"omega{k}" for k in (1, 2, 3, 4)):
            assert prod.structure.occurrence_count(name) == 2
        for name in (f"zeta{k}" for k in (1, 2, 3, 4)):
            assert prod.structure.occurrence_count(name) == 1
        for _ in range(20):
            vals = {n: rng.uniform(-1, 1) for n in prod.structure.names}
            s = DeltaSample(prod.structure, vals)
            omega_val = star_eval(om, DeltaSample(om.structure, vals))
            zeta_val = star_eval(tz, DeltaSample(tz.structure, vals))
            direct = omega_val @ np.hstack([2.0 * zeta_val, omega_val])
            assert np.max(np.abs(star_eval(prod, s) - direct)) < 1e-10

    def test_diag_concat_single_is_identity(self):
        f = omega_lft()
        assert diag_concat([f]) is f

    def test_diag_concat_matches_separate_evaluations(self):
        rng = np.random.default_rng(3)
        om, tz = omega_lft(), zeta_lft()
        cat = diag_concat([om, tz])
        vals = {n: rng.uniform(-1, 1) for n in cat.structure.names}
        s = DeltaSample(cat.structure, vals)
        top = star_eval(om, DeltaSample(om.structure, vals))
        bottom = star_eval(tz, DeltaSample(tz.structure, vals))
        got = star_eval(cat, s)
        assert np.allclose(got[:8, :8], top, atol=1e-12)
        assert np.allclose(got[8:, 8:], bottom, atol=1e-12)
        assert np.allclose(got[:8, 8:], 0.0)

    def test_diag_concat_associative(self):
        a, b = omega_lft(1), zeta_lft(1)
        c = constant_lft(np.eye(2))
        left = diag_concat([diag_concat([a, b]), c])
        right = diag_concat([a, diag_concat([b, c])])
        assert left.structurally_equal(right)

    def test_two_scalar_block_diagonal_nominal(self):
        a = constant_lft([[2.0]])
        b = constant_lft([[3.0]])
        cat = diag_concat([a, b])
        assert np.allclose(cat.m_a, np.diag([2.0, 3.0]))


class TestNormalizeInterval:
    def test_paper_frequency_interval(self):
        c, r = normalize_interval(0.2 * TWO_PI, 0.6 * TWO_PI)
        assert math.isclose(c, 0.4 * TWO_PI)
        assert math.isclose(r, 0.2 * TWO_PI)

    def test_paper_damping_interval(self):
        c, r = normalize_interval(5e-4, 5e-3)
        assert math.isclose(c, 2.75e-3)
        assert math.isclose(r, 2.25e-3)

    def test_unit_interval(self):
        assert normalize_interval(-1.0, 1.0) == (0.0, 1.0)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateInterval):
            normalize_interval(1.0, 1.0)

    @given(st.floats(-1e6, 1e6), st.floats(1e-6, 1e6))
    @settings(max_examples=50, deadline=None)
    def test_maps_unit_box_onto_interval(self, lo, width):
        hi = lo + width
        c, r = normalize_interval(lo, hi)
        assert math.isclose(c - r, lo, rel_tol=1e-12, abs_tol=1e-9)
        assert math.isclose(c + r, hi, rel_tol=1e-12, abs_tol=1e-9)


class TestStructure:
    def test_interval_validation(self):
        with pytest.raises(DegenerateInterval):
            ScalarRepeated("x", 1, Interval(2.0, 1.0))

    def test_symmetric_set_needs_z_above_identity(self):
        with pytest.raises(StructureMismatch):
            SymmetricSet("d", 2, 2, -np.eye(2), np.zeros((2, 2)), 0.5 * np.eye(2))

    def test_total_dim_counts_blocks(self):
        blocks = [ScalarRepeated("a", 2), ScalarRepeated("b", 1),
                  SymmetricSet("m", 2, 2, -np.eye(2), np.zeros((2, 2)), np.eye(2))]
        assert UncertaintyStructure(blocks).dim == 7

    def test_sample_bound_check(self):
        st_ = UncertaintyStructure([ScalarRepeated("a", 1)])
        with pytest.raises(StructureMismatch):
            DeltaSample(st_, {"a": 1.5})

    def test_expand_repeats_shared_names(self):
        st_ = UncertaintyStructure([ScalarRepeated("a", 2), ScalarRepeated("b", 1),
                                    ScalarRepeated("a", 1)])
        d = DeltaSample(st_, {"a": 0.5, "b": -0.25}).expand()
        assert np.allclose(np.diag(d), [0.5, 0.5, -0.25, 0.5])
        assert st_.occupancy("a").tolist() == [0, 1, 3]


class TestSerialization:
    def test_roundtrip_bitexact(self):
        f = omega_lft()
        g = lft_from_json(lft_to_json(f))
        for attr in ("m_a", "m_b", "m_c", "m_d"):
            assert np.array_equal(getattr(g, attr), getattr(f, attr))
        assert g.structure == f.structure

    def test_roundtrip_symmetric_block(self):
        block = SymmetricSet("dj", 2, 2, -np.eye(2), 0.1 * np.eye(2), 2.0 * np.eye(2))
        f = Lft(np.zeros((4, 4)), np.eye(4), np.eye(4), np.eye(4),
                UncertaintyStructure([block]))
        g = lft_from_json(lft_to_json(f))
        blk = g.structure.blocks[0]
        assert np.array_equal(blk.x, block.x)
        assert np.array_equal(blk.y, block.y)
        assert np.array_equal(blk.z, block.z)
        assert g.structure == f.structure


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_eval_matches_independent_formula(seed):
    """Property: star_eval equals a from-scratch direct formula on random LFTs."""
    rng = np.random.default_rng(seed)
    reps = int(rng.integers(1, 4))
    st_ = UncertaintyStructure([ScalarRepeated("u", reps), ScalarRepeated("v", 1)])
    q = reps + 1
    f = Lft(0.3 * rng.normal(size=(q, q)), rng.normal(size=(q, 2)),
            rng.normal(size=(2, q)), rng.normal(size=(2, 2)), st_)
    vals = {"u": rng.uniform(-1, 1), "v": rng.uniform(-1, 1)}
    s = DeltaSample(st_, vals)
    delta = np.diag([vals["u"]] * reps + [vals["v"]])
    direct = f.m_a + f.m_b @ delta @ np.linalg.solve(np.eye(q) - f.m_d @ delta, f.m_c)
    assert np.max(np.abs(star_eval(f, s) - direct)) < 1e-10
