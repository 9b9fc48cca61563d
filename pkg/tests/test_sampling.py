"""Sampling determinism, vertex enumeration, sample-size bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustsat.benchmark import fit_inertia_sqrt_set
from robustsat.errors import TooManyVertices, UnsupportedBlock
from robustsat.lft import Interval, ScalarRepeated, SymmetricSet, UncertaintyStructure
from robustsat.sampling import (
    RandomizedSettings,
    sample_at,
    sample_size,
    sample_stream,
    vertices,
)

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def flex_structure():
    return UncertaintyStructure([
        ScalarRepeated("omega", 2, Interval(-1.0, 1.0)),
        ScalarRepeated("zeta", 1, Interval(-1.0, 1.0)),
        ScalarRepeated("J11", 2),
    ])


class TestDeterminism:
    def test_same_seed_same_stream(self, flex_structure):
        a = sample_stream(flex_structure, 1234, 20)
        b = sample_stream(flex_structure, 1234, 20)
        for sa, sb in zip(a, b):
            assert sa.values == sb.values

    def test_indexing_is_splittable(self, flex_structure):
        serial = sample_stream(flex_structure, 9, 10)
        shuffled = [sample_at(flex_structure, 9, k) for k in (7, 3, 0, 9)]
        for k, s in zip((7, 3, 0, 9), shuffled):
            assert s.values == serial[k].values

    def test_different_seeds_differ(self, flex_structure):
        assert sample_at(flex_structure, 1, 0).values != sample_at(flex_structure, 2, 0).values


def test_law_of_large_numbers_on_frequency():
    structure = UncertaintyStructure([ScalarRepeated("omega", 1, Interval(-1.0, 1.0))])
    center, radius = 0.4 * TWO_PI, 0.2 * TWO_PI
    total = 0.0
    n = 10 ** 5
    for k in range(n):
        total += center + radius * sample_at(structure, 5, k)["omega"]
    mean = total / n
    assert abs(mean - center) < 0.01 * center


def test_symmetric_set_samples_are_members():
    fit = fit_inertia_sqrt_set((1, 2))
    block = SymmetricSet("dj", 2, 2, fit.x, fit.y, fit.z)
    structure = UncertaintyStructure([block])
    worst = -np.inf
    for k in range(200):
        worst = max(worst, block.membership_residual(sample_at(structure, 3, k)["dj"]))
    assert worst <= 1e-9


class TestVertices:
    def test_single_scalar_two_endpoints(self):
        structure = UncertaintyStructure([ScalarRepeated("a", 1)])
        vs = vertices(structure)
        assert [v["a"] for v in vs] == [-1.0, 1.0]

    def test_six_inertia_names_give_64(self):
        blocks = [ScalarRepeated(n, 1) for n in
                  ("J11", "J22", "J33", "J12", "J13", "J23")]
        assert len(vertices(UncertaintyStructure(blocks))) == 64

    def test_simplest_model_j11_endpoints(self):
        # three names -> 8 vertices; J11 spans [0.7, 1.3]*31.38
        blocks = [ScalarRepeated("J11", 2), ScalarRepeated("omega", 2),
                  ScalarRepeated("zeta", 1)]
        vs = vertices(UncertaintyStructure(blocks))
        assert len(vs) == 8
        j11 = sorted({31.38 * (1.0 + 0.3 * v["J11"]) for v in vs})
        assert math.isclose(j11[0], 21.966, abs_tol=5e-4)
        assert math.isclose(j11[-1], 40.794, abs_tol=5e-4)

    def test_vertices_hit_exact_endpoints(self):
        structure = UncertaintyStructure([ScalarRepeated("a", 1, Interval(-0.25, 0.5))])
        vals = sorted(v["a"] for v in vertices(structure))
        assert vals == [-0.25, 0.5]

    def test_guard_and_unsupported(self):
        too_many = UncertaintyStructure([ScalarRepeated(f"x{i}", 1) for i in range(21)])
        with pytest.raises(TooManyVertices):
            vertices(too_many)
        sym = UncertaintyStructure([
            SymmetricSet("m", 2, 2, -np.eye(2), np.zeros((2, 2)), np.eye(2))])
        with pytest.raises(UnsupportedBlock):
            vertices(sym)


class TestSampleSize:
    def test_paper_configuration_counts(self):
        rs = RandomizedSettings(0.1, 1e-6)
        assert sample_size("chernoff", rs) == 726
        assert sample_size("loglog", rs) == 132
        assert sample_size("scenario", RandomizedSettings(0.1, 1e-9), 10) == 615

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            RandomizedSettings(0.0, 0.5)
        with pytest.raises(ValueError):
            RandomizedSettings(0.5, 1.5)

    @given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(1e-9, 0.1),
           st.floats(1e-9, 0.1))
    @settings(max_examples=80, deadline=None)
    def test_monotonicity(self, eps1, eps2, d1, d2):
        eps_lo, eps_hi = sorted((eps1, eps2))
        del_lo, del_hi = sorted((d1, d2))
        for kind in ("chernoff", "loglog", "scenario"):
            n_tight = sample_size(kind, RandomizedSettings(eps_lo, del_lo), d=5)
            assert n_tight >= sample_size(kind, RandomizedSettings(eps_hi, del_lo), d=5)
            assert n_tight >= sample_size(kind, RandomizedSettings(eps_lo, del_hi), d=5)
