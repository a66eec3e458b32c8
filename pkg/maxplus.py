"""
(max,+) Algebra - Scalars, Dense Matrices and Acyclic Graphs

The idempotent semiring R ∪ {ε} with x ⊕ y = max(x, y) and x ⊗ y = x + y:
- Scalars with ε as a distinct state (value None), never a float sentinel
- Dense matrices stored as numeric entries plus a finiteness mask
- Norm, powers, ε-0 patterns and the graph view of a matrix
- Longest paths of acyclic graphs and the implicit equation x = U ⊗ x ⊕ v
"""

import logging
import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

import config


logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Operands do not have conforming shapes."""


class CyclicGraphError(ValueError):
    """A graph expected to be acyclic contains a circuit."""

    def __init__(self, cycle: Sequence[int], context: str = "graph is not acyclic"):
        # Nodes are stored 0-based and reported 1-based
        self.cycle = list(cycle)
        path = " -> ".join(str(node + 1) for node in self.cycle + self.cycle[:1])
        super().__init__(f"{context}: cycle {path}")


# ==============================================================================
# Scalars
# ==============================================================================

@total_ordering
@dataclass(frozen=True)
class MaxPlusScalar:
    """Element of R ∪ {ε}; value None is ε."""
    value: Optional[float] = None

    def __post_init__(self):
        if self.value is None:
            return
        value = float(self.value)
        if not math.isfinite(value):
            raise ValueError(f"finite max-plus scalars must be real numbers, got {self.value!r}")
        object.__setattr__(self, "value", value)

    @classmethod
    def epsilon(cls) -> "MaxPlusScalar":
        return cls(None)

    @classmethod
    def unit(cls) -> "MaxPlusScalar":
        return cls(0.0)

    @property
    def is_epsilon(self) -> bool:
        return self.value is None

    def __lt__(self, other: "MaxPlusScalar") -> bool:
        other = as_scalar(other)
        if other.is_epsilon:
            return False
        if self.is_epsilon:
            return True
        return self.value < other.value

    def __str__(self) -> str:
        if self.is_epsilon:
            return config.OUTPUT_CONFIG["epsilon_symbol"]
        return f"{self.value:.{config.OUTPUT_CONFIG['precision']}f}"


EPSILON = MaxPlusScalar.epsilon()
UNIT = MaxPlusScalar.unit()

ScalarLike = Union[MaxPlusScalar, float, int, None]


def as_scalar(x: ScalarLike) -> MaxPlusScalar:
    """Coerce a float, int, None (ε) or scalar into a MaxPlusScalar."""
    if isinstance(x, MaxPlusScalar):
        return x
    return MaxPlusScalar(x)


def scalar_add(x: ScalarLike, y: ScalarLike) -> MaxPlusScalar:
    """x ⊕ y = max(x, y), with ε as the neutral element."""
    x, y = as_scalar(x), as_scalar(y)
    if x.is_epsilon:
        return y
    if y.is_epsilon:
        return x
    return x if x.value >= y.value else y


def scalar_mul(x: ScalarLike, y: ScalarLike) -> MaxPlusScalar:
    """x ⊗ y = x + y, with ε absorbing."""
    x, y = as_scalar(x), as_scalar(y)
    if x.is_epsilon or y.is_epsilon:
        return EPSILON
    return MaxPlusScalar(x.value + y.value)


def scalar_power(x: ScalarLike, q: int) -> MaxPlusScalar:
    """x^q = q·x for finite x; x^0 = 0 for every x."""
    if q < 0:
        raise ValueError(f"power must be nonnegative, got {q}")
    x = as_scalar(x)
    if q == 0:
        return UNIT
    if x.is_epsilon:
        return EPSILON
    return MaxPlusScalar(q * x.value)


# ==============================================================================
# Matrices
# ==============================================================================

class MaxPlusMatrix:
    """
    Dense rectangular matrix over R ∪ {ε}.

    Entries where the finiteness mask is False are ε; their numeric slot is
    held at 0.0 and never read. Instances are immutable.
    """

    __slots__ = ("_values", "_finite")

    def __init__(self, values: np.ndarray, finite: np.ndarray):
        values = np.array(values, dtype=float)
        finite = np.array(finite, dtype=bool)

        if values.ndim != 2 or values.shape != finite.shape:
            raise DimensionError(f"values {values.shape} and mask {finite.shape} "
                                 f"must be equal 2-D shapes")

        values = np.where(finite, values, 0.0)
        if not np.all(np.isfinite(values)):
            raise ValueError("finite entries must be real numbers")

        values.setflags(write=False)
        finite.setflags(write=False)
        self._values = values
        self._finite = finite

    # --- constructors ---------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[ScalarLike]]) -> "MaxPlusMatrix":
        """Build from nested rows of floats, None (ε) or scalars."""
        rows = [[as_scalar(x) for x in row] for row in rows]
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise DimensionError("rows must be non-empty and of equal length")

        finite = [[not x.is_epsilon for x in row] for row in rows]
        values = [[0.0 if x.is_epsilon else x.value for x in row] for row in rows]
        return cls(np.array(values), np.array(finite))

    @classmethod
    def epsilon(cls, rows: int, cols: Optional[int] = None) -> "MaxPlusMatrix":
        """Null matrix ℰ."""
        cols = rows if cols is None else cols
        return cls(np.zeros((rows, cols)), np.zeros((rows, cols), dtype=bool))

    @classmethod
    def identity(cls, n: int) -> "MaxPlusMatrix":
        """0 on the diagonal, ε elsewhere."""
        return cls(np.zeros((n, n)), np.eye(n, dtype=bool))

    @classmethod
    def diag(cls, entries: Sequence[ScalarLike]) -> "MaxPlusMatrix":
        entries = [as_scalar(x) for x in entries]
        n = len(entries)
        values = np.zeros((n, n))
        finite = np.zeros((n, n), dtype=bool)
        for i, x in enumerate(entries):
            if not x.is_epsilon:
                values[i, i] = x.value
                finite[i, i] = True
        return cls(values, finite)

    @classmethod
    def column(cls, entries: Sequence[ScalarLike]) -> "MaxPlusMatrix":
        return cls.from_rows([[x] for x in entries])

    # --- accessors ------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, int]:
        return self._values.shape

    @property
    def rows(self) -> int:
        return self._values.shape[0]

    @property
    def cols(self) -> int:
        return self._values.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def finite(self) -> np.ndarray:
        return self._finite

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def entry(self, i: int, j: int) -> MaxPlusScalar:
        if not self._finite[i, j]:
            return EPSILON
        return MaxPlusScalar(self._values[i, j])

    def is_epsilon(self) -> bool:
        return not self._finite.any()

    def transpose(self) -> "MaxPlusMatrix":
        return MaxPlusMatrix(self._values.T, self._finite.T)

    @property
    def T(self) -> "MaxPlusMatrix":
        return self.transpose()

    def pattern(self) -> "MaxPlusMatrix":
        """ε-0 adjacency matrix of the graph associated with this matrix."""
        return MaxPlusMatrix(np.zeros(self.shape), self._finite)

    def arcs(self) -> List[Tuple[int, int]]:
        """Arcs (i, j) with a non-ε entry, 0-based."""
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self._finite))]

    def leq(self, other: "MaxPlusMatrix") -> bool:
        """Entrywise order with ε below every real number."""
        _require_same_shape(self, other, "compare")
        if np.any(self._finite & ~other._finite):
            return False
        both = self._finite & other._finite
        return bool(np.all(self._values[both] <= other._values[both]))

    def to_list(self) -> List[List[Optional[float]]]:
        return [[float(self._values[i, j]) if self._finite[i, j] else None
                 for j in range(self.cols)] for i in range(self.rows)]

    def to_text(self, precision: Optional[int] = None) -> str:
        """Debug rendering: ε as '.', finite entries with fixed decimals."""
        precision = config.OUTPUT_CONFIG["precision"] if precision is None else precision
        symbol = config.OUTPUT_CONFIG["epsilon_symbol"]
        cells = [[f"{self._values[i, j]:.{precision}f}" if self._finite[i, j] else symbol
                  for j in range(self.cols)] for i in range(self.rows)]
        width = max(len(cell) for row in cells for cell in row)
        return "\n".join(" ".join(cell.rjust(width) for cell in row) for row in cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaxPlusMatrix) or self.shape != other.shape:
            return False
        if not np.array_equal(self._finite, other._finite):
            return False
        return bool(np.array_equal(self._values[self._finite], other._values[other._finite]))

    __hash__ = None

    def __repr__(self) -> str:
        return f"MaxPlusMatrix{self.shape}(\n{self.to_text()}\n)"


def _require_same_shape(x: MaxPlusMatrix, y: MaxPlusMatrix, verb: str) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"cannot {verb} matrices of shapes "
                             f"{x.rows}x{x.cols} and {y.rows}x{y.cols}")


def _require_square(x: MaxPlusMatrix, what: str) -> None:
    if not x.is_square:
        raise DimensionError(f"{what} requires a square matrix, got {x.rows}x{x.cols}")


def mat_add(x: MaxPlusMatrix, y: MaxPlusMatrix) -> MaxPlusMatrix:
    """Entrywise maximum X ⊕ Y."""
    _require_same_shape(x, y, "add")
    fx, fy = x.finite, y.finite
    values = np.where(fx & fy, np.maximum(x.values, y.values), np.where(fx, x.values, y.values))
    return MaxPlusMatrix(values, fx | fy)


def mat_mul(x: MaxPlusMatrix, y: MaxPlusMatrix) -> MaxPlusMatrix:
    """Max-plus product: v_ij = ⊕_k x_ik ⊗ y_kj."""
    if x.cols != y.rows:
        raise DimensionError(f"cannot multiply {x.rows}x{x.cols} by {y.rows}x{y.cols}: "
                             f"inner dimensions {x.cols} != {y.rows}")

    sums = x.values[:, :, None] + y.values[None, :, :]
    mask = x.finite[:, :, None] & y.finite[None, :, :]
    finite = mask.any(axis=1)
    values = np.max(sums, axis=1, where=mask, initial=-np.inf)
    return MaxPlusMatrix(np.where(finite, values, 0.0), finite)


def mat_power(x: MaxPlusMatrix, q: int) -> MaxPlusMatrix:
    """X^q by repeated products, X^0 = I."""
    _require_square(x, "matrix power")
    if q < 0:
        raise ValueError(f"power must be nonnegative, got {q}")

    result = MaxPlusMatrix.identity(x.rows)
    for _ in range(q):
        result = mat_mul(x, result)
    return result


def mat_scale(c: ScalarLike, x: MaxPlusMatrix) -> MaxPlusMatrix:
    """c ⊗ X."""
    c = as_scalar(c)
    if c.is_epsilon:
        return MaxPlusMatrix.epsilon(x.rows, x.cols)
    return MaxPlusMatrix(x.values + c.value, x.finite)


def norm(x: MaxPlusMatrix) -> MaxPlusScalar:
    """‖X‖ = maximum entry, ε for the null matrix."""
    if not x.finite.any():
        return EPSILON
    return MaxPlusScalar(float(x.values[x.finite].max()))


def mat_sum(matrices: Iterable[MaxPlusMatrix]) -> MaxPlusMatrix:
    """⊕ over a non-empty sequence of equally shaped matrices."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("cannot sum an empty sequence of matrices")
    total = matrices[0]
    for m in matrices[1:]:
        total = mat_add(total, m)
    return total


def mat_product(matrices: Iterable[MaxPlusMatrix]) -> MaxPlusMatrix:
    """Left-to-right ⊗ over a non-empty sequence of conforming matrices."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("cannot multiply an empty sequence of matrices")
    total = matrices[0]
    for m in matrices[1:]:
        total = mat_mul(total, m)
    return total


# ==============================================================================
# Graph View
# ==============================================================================

def to_digraph(g: MaxPlusMatrix) -> nx.DiGraph:
    """Directed graph with an arc i -> j for every non-ε entry g_ij."""
    _require_square(g, "graph view")
    graph = nx.DiGraph()
    graph.add_nodes_from(range(g.rows))
    graph.add_edges_from(g.arcs())
    return graph


def find_cycle(g: MaxPlusMatrix) -> Optional[List[int]]:
    """
    Find a circuit in the graph of a square matrix.

    Returns:
        Node list of one cycle (0-based), or None if the graph is acyclic
    """
    try:
        edges = nx.find_cycle(to_digraph(g))
    except nx.NetworkXNoCycle:
        return None
    return [int(u) for u, _ in edges]


def topological_order(g: MaxPlusMatrix) -> List[int]:
    """
    Topological order of the graph of g (arc tails before heads).

    Raises:
        CyclicGraphError: If the graph has a circuit
    """
    graph = to_digraph(g)
    try:
        return [int(node) for node in nx.lexicographical_topological_sort(graph)]
    except nx.NetworkXUnfeasible:
        raise CyclicGraphError(find_cycle(g))


def longest_path(g: MaxPlusMatrix) -> Optional[int]:
    """
    Length (in arcs) of the longest path in the graph of g.

    Only the ε / non-ε pattern is used.

    Returns:
        Longest path length p, or None if the graph is not acyclic
    """
    graph = to_digraph(g)
    if not nx.is_directed_acyclic_graph(graph):
        logger.debug(f"longest_path: graph with {g.rows} nodes is cyclic")
        return None
    return int(nx.dag_longest_path_length(graph))


# ==============================================================================
# Implicit Equation x = U ⊗ x ⊕ v
# ==============================================================================

def solve_implicit(u: MaxPlusMatrix, v: MaxPlusMatrix) -> MaxPlusMatrix:
    """
    Unique bounded solution of x = U ⊗ x ⊕ v by forward substitution.

    Each column of v is an independent right-hand side. Entries are resolved
    in reverse topological order of the graph of U, so x_j is final before any
    x_i with u_ij ≠ ε reads it.

    Args:
        u: Square n x n matrix with an acyclic graph
        v: n x c right-hand side

    Returns:
        x = (I ⊕ U)^p ⊗ v

    Raises:
        DimensionError: If shapes do not conform
        CyclicGraphError: If the graph of U has a circuit
    """
    _require_square(u, "implicit equation")
    if v.rows != u.rows:
        raise DimensionError(f"right-hand side has {v.rows} rows, expected {u.rows}")

    try:
        order = topological_order(u)
    except CyclicGraphError as e:
        raise CyclicGraphError(e.cycle, "no unique bounded solution")

    values = np.array(v.values)
    finite = np.array(v.finite)

    for i in reversed(order):
        for j in np.flatnonzero(u.finite[i]):
            candidate = u.values[i, j] + values[j]
            update = finite[j] & (~finite[i] | (candidate > values[i]))
            values[i] = np.where(update, candidate, values[i])
            finite[i] |= finite[j]

    return MaxPlusMatrix(values, finite)


def solve_implicit_closed_form(u: MaxPlusMatrix, v: MaxPlusMatrix) -> MaxPlusMatrix:
    """x = (I ⊕ U)^p ⊗ v by literal matrix powering; cross-check for solve_implicit."""
    _require_square(u, "implicit equation")
    p = longest_path(u)
    if p is None:
        raise CyclicGraphError(find_cycle(u), "no unique bounded solution")
    return mat_mul(mat_power(mat_add(MaxPlusMatrix.identity(u.rows), u), p), v)
