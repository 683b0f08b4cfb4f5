"""Max-of-affine calculus: frozen examples and structural properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cswitch import (
    FunctionMatrix,
    Grid,
    add,
    affine_matrix,
    compose_linear,
    evaluate,
    max_bind,
    row_rearrange,
    segment_grid,
    subgradient_envelope,
)

TOL = 1e-10


def two_point_grid():
    return Grid(np.array([[1.0, 0.0], [1.0, 1.0]]))


class TestContainers:
    def test_grid_requires_two_distinct_points(self):
        with pytest.raises(ValueError):
            Grid(np.array([[1.0, 0.0]]))
        with pytest.raises(ValueError):
            Grid(np.array([[1.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            Grid(np.array([1.0, 0.0]))

    def test_grid_is_immutable(self):
        G = two_point_grid()
        with pytest.raises(ValueError):
            G.points[0, 0] = 7.0

    def test_matrix_shape_checks(self):
        with pytest.raises(ValueError):
            FunctionMatrix(np.empty((0, 2)))
        with pytest.raises(ValueError):
            FunctionMatrix(np.array([1.0, 2.0]))

    def test_segment_grid_layout(self):
        G = segment_grid(5, -2.0, 2.0)
        assert G.m == 5 and G.d == 2
        assert np.all(G.points[:, 0] == 1.0)
        np.testing.assert_allclose(G.points[:, 1], [-2, -1, 0, 1, 2])
        with pytest.raises(ValueError):
            segment_grid(1, 0.0, 1.0)

    def test_affine_matrix_replicates_row(self):
        F = affine_matrix([2.0, -3.0], 4)
        assert F.rows.shape == (4, 2)
        assert np.all(F.rows == np.array([2.0, -3.0]))


class TestEvaluate:
    def test_max_of_rows(self):
        F = FunctionMatrix(np.array([[0.0, 1.0], [2.0, -1.0]]))
        assert evaluate(F, [1.0, 3.0]) == 3.0
        assert evaluate(F, [1.0, -3.0]) == 5.0
        assert F([1.0, 0.5]) == 1.5

    def test_dimension_mismatch(self):
        F = FunctionMatrix(np.array([[0.0, 1.0]]))
        with pytest.raises(ValueError):
            evaluate(F, [1.0, 2.0, 3.0])


class TestRowRearrange:
    def test_reference_example(self):
        # two lines crossing between the anchors: the steeper one wins at 1
        F = FunctionMatrix(np.array([[0.0, 1.0], [2.0, -1.0]]))
        R = row_rearrange(F, two_point_grid())
        np.testing.assert_array_equal(R.rows, [[2.0, -1.0], [0.0, 1.0]])

    def test_ties_take_lowest_row_index(self):
        # both rows agree everywhere; the first must be chosen at each anchor
        F = FunctionMatrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
        R = row_rearrange(F, two_point_grid())
        np.testing.assert_array_equal(R.rows, [[1.0, 0.0], [1.0, 0.0]])
        F2 = FunctionMatrix(np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]))
        R2 = row_rearrange(F2, Grid(np.array([[1.0, 1.0], [1.0, 2.0]])))
        # at y=1 rows 0 and 1 tie at value 1: row 0 wins
        np.testing.assert_array_equal(R2.rows[0], [0.0, 1.0])

    def test_fixed_point_on_grid_values(self):
        rng = np.random.default_rng(3)
        F = FunctionMatrix(rng.normal(size=(7, 2)))
        G = segment_grid(9, -3.0, 3.0)
        R = row_rearrange(F, G)
        for g in G.points:
            assert abs(evaluate(R, g) - evaluate(F, g)) <= TOL

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        F = FunctionMatrix(rng.normal(size=(6, 2)))
        G = segment_grid(5, -1.0, 1.0)
        R1 = row_rearrange(F, G)
        R2 = row_rearrange(R1, G)
        np.testing.assert_array_equal(R1.rows, R2.rows)

    def test_never_exceeds_original(self):
        rng = np.random.default_rng(5)
        F = FunctionMatrix(rng.normal(size=(8, 2)))
        G = segment_grid(6, -2.0, 2.0)
        R = row_rearrange(F, G)
        for y in rng.uniform(-5, 5, size=64):
            z = np.array([1.0, y])
            assert evaluate(R, z) <= evaluate(F, z) + TOL


class TestSubgradientEnvelope:
    def test_square_reference_example(self):
        # tangents of y^2 at y in {-1, 0, 1}
        G = Grid(np.array([[1.0, -1.0], [1.0, 0.0], [1.0, 1.0]]))
        F = subgradient_envelope(
            lambda z: z[1] ** 2, lambda z: np.array([0.0, 2.0 * z[1]]), G
        )
        np.testing.assert_allclose(
            F.rows, [[-1.0, -2.0], [0.0, 0.0], [-1.0, 2.0]], atol=TOL
        )

    def test_exact_on_grid_below_everywhere(self):
        G = segment_grid(11, -2.0, 2.0)
        f = lambda z: np.exp(z[1])
        grad = lambda z: np.array([0.0, np.exp(z[1])])
        F = subgradient_envelope(f, grad, G)
        for g in G.points:
            assert abs(evaluate(F, g) - f(g)) <= 1e-12
        for y in np.linspace(-3, 3, 50):
            z = np.array([1.0, y])
            assert evaluate(F, z) <= f(z) + 1e-12

    def test_requires_unit_first_component(self):
        G = Grid(np.array([[2.0, 0.0], [1.0, 1.0]]))
        with pytest.raises(ValueError):
            subgradient_envelope(lambda z: 0.0, lambda z: np.zeros(2), G)


class TestCalculus:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.G = segment_grid(13, -4.0, 4.0)
        self.F1 = row_rearrange(FunctionMatrix(rng.normal(size=(5, 2))), self.G)
        self.F2 = row_rearrange(FunctionMatrix(rng.normal(size=(8, 2))), self.G)

    def test_add_matches_sum_on_grid(self):
        S = add(self.F1, self.F2)
        for g in self.G.points:
            target = evaluate(self.F1, g) + evaluate(self.F2, g)
            assert abs(evaluate(S, g) - target) <= TOL

    def test_add_shape_check(self):
        with pytest.raises(ValueError):
            add(self.F1, FunctionMatrix(np.zeros((2, 2))))

    def test_max_bind_matches_max_on_grid(self):
        M = max_bind(self.F1, self.F2, self.G)
        assert M.k == self.G.m
        for g in self.G.points:
            target = max(evaluate(self.F1, g), evaluate(self.F2, g))
            assert abs(evaluate(M, g) - target) <= TOL

    def test_compose_linear_matches_on_grid(self):
        W = np.array([[1.0, 0.0], [0.7, 0.9]])
        C = compose_linear(self.F1, W, self.G)
        for g in self.G.points:
            assert abs(evaluate(C, g) - evaluate(self.F1, W @ g)) <= TOL

    def test_compose_linear_shape_check(self):
        with pytest.raises(ValueError):
            compose_linear(self.F1, np.eye(3), self.G)


# property tests: random matrices against the definitional evaluation

matrices = st.integers(2, 9).flatmap(
    lambda k: st.lists(
        st.lists(
            st.floats(-50, 50, allow_nan=False, allow_infinity=False),
            min_size=2,
            max_size=2,
        ),
        min_size=k,
        max_size=k,
    )
)


@settings(max_examples=60, deadline=None)
@given(matrices, st.floats(-8, 8, allow_nan=False))
def test_property_rearranged_matches_at_anchors(rows, y0):
    F = FunctionMatrix(np.array(rows))
    G = Grid(np.array([[1.0, y0], [1.0, y0 + 1.0], [1.0, y0 + 2.5]]))
    R = row_rearrange(F, G)
    assert R.k == G.m
    for g in G.points:
        assert evaluate(R, g) == pytest.approx(evaluate(F, g), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(matrices, matrices)
def test_property_max_bind_dominates_both_on_grid(rows1, rows2):
    G = segment_grid(7, -3.0, 3.0)
    F1 = FunctionMatrix(np.array(rows1))
    F2 = FunctionMatrix(np.array(rows2))
    M = max_bind(F1, F2, G)
    for g in G.points:
        target = max(evaluate(F1, g), evaluate(F2, g))
        assert evaluate(M, g) == pytest.approx(target, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(matrices, st.floats(0.0, 1.0, allow_nan=False), st.floats(-2, 2, allow_nan=False))
def test_property_composition_commutes_with_evaluation(rows, phi, w):
    G = segment_grid(9, -5.0, 5.0)
    F = FunctionMatrix(np.array(rows))
    W = np.array([[1.0, 0.0], [w, phi]])
    C = compose_linear(F, W, G)
    for g in G.points:
        assert evaluate(C, g) == pytest.approx(evaluate(F, W @ g), abs=1e-9)
