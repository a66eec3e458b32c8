#!/usr/bin/env python3
"""
Test Suite for the (max,+) Algebra Module

Tests scalar and matrix arithmetic:
- Semiring axioms with ε as a distinct value
- Matrix sums, products, powers and the norm calculus
- Patterns, nilpotency of acyclic matrices and longest paths
- The implicit equation x = U ⊗ x ⊕ v against its closed form

Property tests draw integer-valued entries so every sum is exact.

Usage:
    pytest tests/test_maxplus.py -v
"""

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from maxplus import (
    EPSILON, UNIT, CyclicGraphError, DimensionError, MaxPlusMatrix, MaxPlusScalar,
    find_cycle, longest_path, mat_add, mat_mul, mat_power, mat_product, mat_scale,
    mat_sum, norm, scalar_add, scalar_mul, scalar_power, solve_implicit,
    solve_implicit_closed_form, topological_order,
)


PROPERTY = settings(max_examples=1000, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])


# ==============================================================================
# Strategies
# ==============================================================================

scalars = st.one_of(st.none(), st.integers(-50, 50).map(float))


def matrices(rows, cols, entries=scalars):
    return st.lists(st.lists(entries, min_size=cols, max_size=cols),
                    min_size=rows, max_size=rows).map(MaxPlusMatrix.from_rows)


def square_tuples(count, max_n=4):
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(*[matrices(n, n) for _ in range(count)]))


@st.composite
def dag_masks(draw, max_n=5):
    """Boolean adjacency of a random DAG (upper triangle under a random relabeling)."""
    n = draw(st.integers(1, max_n))
    perm = draw(st.permutations(range(n)))
    mask = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            if draw(st.booleans()):
                mask[perm[a], perm[b]] = True
    return mask


@st.composite
def on_mask(draw, mask, low=-20, high=20):
    n = mask.shape[0]
    values = draw(st.lists(st.integers(low, high), min_size=n * n, max_size=n * n))
    return MaxPlusMatrix(np.array(values, dtype=float).reshape(n, n), mask)


@st.composite
def dag_families(draw, count_offset=0, low=-20, high=20):
    """A DAG mask, its longest path p and p + 1 + offset matrices supported on it."""
    mask = draw(dag_masks())
    p = longest_path(MaxPlusMatrix(np.zeros(mask.shape), mask))
    count = p + 1 + count_offset
    family = [draw(on_mask(mask, low, high)) for _ in range(count)]
    return mask, p, family


# ==============================================================================
# Scalars
# ==============================================================================

class TestScalars:
    """Test scalar operations and ε handling."""

    def test_epsilon_is_neutral_for_add(self):
        assert scalar_add(EPSILON, 3.0) == MaxPlusScalar(3.0)
        assert scalar_add(-7.0, None) == MaxPlusScalar(-7.0)
        assert scalar_add(None, None).is_epsilon

    def test_epsilon_absorbs_multiplication(self):
        assert scalar_mul(EPSILON, 5.0).is_epsilon
        assert scalar_mul(2.0, 3.0) == MaxPlusScalar(5.0)
        assert scalar_mul(UNIT, 4.0) == MaxPlusScalar(4.0)

    def test_epsilon_orders_below_reals(self):
        assert EPSILON < MaxPlusScalar(-1e300)
        assert not MaxPlusScalar(0.0) < EPSILON
        assert EPSILON <= EPSILON

    def test_non_finite_values_rejected(self):
        with pytest.raises(ValueError):
            MaxPlusScalar(float('inf'))
        with pytest.raises(ValueError):
            MaxPlusScalar(float('nan'))

    def test_scalar_power(self):
        assert scalar_power(2.5, 4) == MaxPlusScalar(10.0)
        assert scalar_power(EPSILON, 0) == UNIT
        assert scalar_power(EPSILON, 3).is_epsilon
        with pytest.raises(ValueError):
            scalar_power(1.0, -1)

    def test_text_rendering(self):
        assert str(EPSILON) == "."
        assert str(MaxPlusScalar(1.5)) == "1.500000"

    @PROPERTY
    @given(scalars, scalars, scalars)
    def test_semiring_axioms(self, x, y, z):
        assert scalar_add(x, y) == scalar_add(y, x)
        assert scalar_add(scalar_add(x, y), z) == scalar_add(x, scalar_add(y, z))
        assert scalar_add(x, x) == MaxPlusScalar(x)
        assert scalar_mul(x, y) == scalar_mul(y, x)
        assert scalar_mul(scalar_mul(x, y), z) == scalar_mul(x, scalar_mul(y, z))
        assert scalar_mul(x, scalar_add(y, z)) == scalar_add(scalar_mul(x, y), scalar_mul(x, z))
        assert scalar_mul(UNIT, x) == MaxPlusScalar(x)
        assert scalar_mul(EPSILON, x).is_epsilon


# ==============================================================================
# Matrices
# ==============================================================================

class TestMatrixBasics:
    """Test constructors, accessors and error reporting."""

    def test_from_rows_keeps_epsilon(self):
        x = MaxPlusMatrix.from_rows([[1, None], [None, 2]])
        assert x.shape == (2, 2)
        assert x.entry(0, 1).is_epsilon
        assert x.entry(1, 1) == MaxPlusScalar(2.0)
        assert x.to_list() == [[1.0, None], [None, 2.0]]

    def test_identity_and_null(self):
        i = MaxPlusMatrix.identity(3)
        e = MaxPlusMatrix.epsilon(3)
        x = MaxPlusMatrix.from_rows([[1, 2, None], [0, None, 4], [None, None, -3]])
        assert mat_mul(i, x) == x
        assert mat_mul(x, i) == x
        assert mat_add(e, x) == x
        assert mat_mul(e, x).is_epsilon()

    def test_product_example(self):
        x = MaxPlusMatrix.from_rows([[1, 2], [None, 0]])
        y = MaxPlusMatrix.from_rows([[0, None], [3, 1]])
        assert mat_mul(x, y) == MaxPlusMatrix.from_rows([[5, 3], [3, 1]])

    def test_dimension_error_reports_shapes(self):
        x = MaxPlusMatrix.epsilon(2, 3)
        y = MaxPlusMatrix.epsilon(2, 2)
        with pytest.raises(DimensionError, match="2x3 by 2x2"):
            mat_mul(x, y)
        with pytest.raises(DimensionError):
            mat_add(x, y)
        with pytest.raises(DimensionError):
            mat_power(x, 2)

    def test_norm(self):
        assert norm(MaxPlusMatrix.epsilon(2)).is_epsilon
        assert norm(MaxPlusMatrix.from_rows([[None, -4], [-2, None]])) == MaxPlusScalar(-2.0)

    def test_pattern_and_transpose(self):
        x = MaxPlusMatrix.from_rows([[None, 7], [None, None]])
        assert x.pattern() == MaxPlusMatrix.from_rows([[None, 0], [None, None]])
        assert x.T == MaxPlusMatrix.from_rows([[None, None], [7, None]])
        assert x.arcs() == [(0, 1)]

    def test_text_rendering(self):
        x = MaxPlusMatrix.from_rows([[1, None], [None, 2.5]])
        assert x.to_text() == "1.000000        .\n       . 2.500000"
        assert x.to_text(precision=0) == "1 .\n. 2"

    def test_matrices_are_read_only(self):
        x = MaxPlusMatrix.identity(2)
        with pytest.raises(ValueError):
            x.values[0, 0] = 5.0

    def test_power_zero_is_identity(self):
        x = MaxPlusMatrix.from_rows([[1, 2], [3, 4]])
        assert mat_power(x, 0) == MaxPlusMatrix.identity(2)
        assert mat_power(x, 1) == x


class TestMatrixProperties:
    """Randomized semiring and norm properties on small matrices."""

    @PROPERTY
    @given(square_tuples(3))
    def test_addition_axioms(self, xyz):
        x, y, z = xyz
        assert mat_add(x, y) == mat_add(y, x)
        assert mat_add(mat_add(x, y), z) == mat_add(x, mat_add(y, z))
        assert mat_add(x, x) == x

    @PROPERTY
    @given(square_tuples(3))
    def test_multiplication_axioms(self, xyz):
        x, y, z = xyz
        assert mat_mul(mat_mul(x, y), z) == mat_mul(x, mat_mul(y, z))
        assert mat_mul(x, mat_add(y, z)) == mat_add(mat_mul(x, y), mat_mul(x, z))
        assert mat_mul(mat_add(x, y), z) == mat_add(mat_mul(x, z), mat_mul(y, z))

    @PROPERTY
    @given(square_tuples(2, max_n=3), st.integers(0, 3))
    def test_power_of_sum_is_sum_of_words(self, xy, q):
        x, y = xy
        words = [mat_product([MaxPlusMatrix.identity(x.rows)] + list(word))
                 for word in itertools.product([x, y], repeat=q)]
        assert mat_power(mat_add(x, y), q) == mat_sum(words)

    @PROPERTY
    @given(square_tuples(2, max_n=3), st.integers(0, 4), st.integers(0, 4))
    def test_power_orderings(self, xy, p, extra):
        x, y = xy
        q = p + extra
        n = x.rows
        assert mat_mul(mat_power(x, p), mat_power(y, q - p)).leq(mat_power(mat_add(x, y), q))

        i_x = mat_add(MaxPlusMatrix.identity(n), x)
        assert mat_power(x, p).leq(mat_power(i_x, p))
        assert mat_power(i_x, p).leq(mat_power(i_x, q))
        assert mat_power(x, p + extra) == mat_mul(mat_power(x, p), mat_power(x, extra))

    @PROPERTY
    @given(square_tuples(2), scalars)
    def test_norm_calculus(self, xy, c):
        x, y = xy
        assert norm(mat_add(x, y)) == scalar_add(norm(x), norm(y))
        assert norm(mat_mul(x, y)) <= scalar_mul(norm(x), norm(y))
        assert norm(mat_scale(c, x)) == scalar_mul(c, norm(x))

    @PROPERTY
    @given(square_tuples(4))
    def test_monotonicity(self, matrices4):
        x, y, w, v = matrices4
        u = mat_add(x, w)
        big_y = mat_add(y, v)
        assert x.leq(u)
        assert mat_add(x, y).leq(mat_add(u, big_y))
        assert mat_mul(x, y).leq(mat_mul(u, big_y))

    @PROPERTY
    @given(square_tuples(1))
    def test_matrix_bounded_by_norm_times_pattern(self, xs):
        (x,) = xs
        assert x.leq(mat_scale(norm(x), x.pattern()))


# ==============================================================================
# Acyclic Graphs
# ==============================================================================

class TestAcyclicGraphs:
    """Test longest paths, nilpotency and cycle detection."""

    def test_tandem_longest_path(self):
        for n in range(1, 8):
            rows = [[0 if j == i + 1 else None for j in range(n)] for i in range(n)]
            assert longest_path(MaxPlusMatrix.from_rows(rows)) == n - 1

    def test_cycle_detection(self):
        g = MaxPlusMatrix.from_rows([[None, 0, None], [None, None, 0], [0, None, None]])
        assert longest_path(g) is None
        assert sorted(find_cycle(g)) == [0, 1, 2]
        with pytest.raises(CyclicGraphError) as info:
            topological_order(g)
        assert "cycle" in str(info.value)

    def test_topological_order_is_lexicographic(self):
        g = MaxPlusMatrix.from_rows([[None, None, 0], [None, None, 0], [None, None, None]])
        assert topological_order(g) == [0, 1, 2]

    @PROPERTY
    @given(dag_masks())
    def test_nilpotent_beyond_longest_path(self, mask):
        g = MaxPlusMatrix(np.zeros(mask.shape), mask)
        p = longest_path(g)
        assert mat_power(g, p + 1).is_epsilon()
        if mask.any():
            assert not mat_power(g, p).is_epsilon()

    @PROPERTY
    @given(dag_families())
    def test_products_longer_than_longest_path_vanish(self, family):
        _, _, matrices_on_dag = family
        assert mat_product(matrices_on_dag).is_epsilon()

    @PROPERTY
    @given(dag_families(count_offset=1, low=0, high=20), st.data())
    def test_norm_of_identity_plus_products(self, family, data):
        _, p, matrices_on_dag = family
        n = matrices_on_dag[0].rows
        factors = []
        for x in matrices_on_dag:
            m = data.draw(st.integers(0, 3))
            factors.append(mat_power(mat_add(MaxPlusMatrix.identity(n), x), m))
        bound = scalar_power(scalar_add_all(norm(x) for x in matrices_on_dag), p)
        assert norm(mat_product(factors)) <= bound


def scalar_add_all(values):
    total = EPSILON
    for value in values:
        total = scalar_add(total, value)
    return total


# ==============================================================================
# Implicit Equation
# ==============================================================================

class TestImplicitEquation:
    """Test forward substitution for x = U ⊗ x ⊕ v."""

    def test_null_matrix_returns_rhs(self):
        v = MaxPlusMatrix.column([1, None, 4])
        assert solve_implicit(MaxPlusMatrix.epsilon(3), v) == v

    def test_single_arc(self):
        u = MaxPlusMatrix.from_rows([[None, None], [2, None]])
        v = MaxPlusMatrix.column([1, None])
        assert solve_implicit(u, v) == MaxPlusMatrix.column([1, 3])

    def test_cyclic_rejected(self):
        u = MaxPlusMatrix.from_rows([[None, 1], [1, None]])
        with pytest.raises(CyclicGraphError, match="no unique bounded solution"):
            solve_implicit(u, MaxPlusMatrix.column([0, 0]))

    def test_rhs_rows_must_match(self):
        with pytest.raises(DimensionError):
            solve_implicit(MaxPlusMatrix.epsilon(3), MaxPlusMatrix.column([0, 0]))

    @PROPERTY
    @given(dag_masks(), st.data())
    def test_matches_closed_form_and_solves_equation(self, mask, data):
        n = mask.shape[0]
        u = data.draw(on_mask(mask))
        cols = data.draw(st.integers(1, 3))
        v = data.draw(matrices(n, cols))
        x = solve_implicit(u, v)
        assert x == solve_implicit_closed_form(u, v)
        assert mat_add(mat_mul(u, x), v) == x
