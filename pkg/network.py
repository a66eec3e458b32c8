"""
Fork-Join Network Model

Declarative topology of an acyclic fork-join network and its (max,+) encoding:
- NetworkSpec: nodes, arcs, initial buffer contents r_i, service models
- validate(): DAG check, saturated-source placement, parameter checks
- build_partial_graphs(): adjacency matrices G_m of arcs into nodes with r_j = m
- zero_buffer_transform(): every finite r_j reduced to zero

Nodes are 0-based internally and 1-based in messages and config files.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from maxplus import CyclicGraphError, MaxPlusMatrix, longest_path, mat_sum
from stochastic import CorrelatedExponential, Distribution, Exponential


logger = logging.getLogger(__name__)

SATURATED = math.inf

Buffer = Union[int, float]


class NetworkConfigError(ValueError):
    """Invalid network description, with an optional location such as 'buffers[2]'."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class NetworkSpec:
    """
    Topology, initial buffer contents and service models of a network.

    Attributes:
        n: Number of nodes
        arcs: Ordered pairs (i, j), 0-based
        buffers: r_i per node; SATURATED (math.inf) for sources
        services: Per-node service model (empty when `correlation` is set)
        correlation: Network-level correlated exponential model, if any
        name: Optional label used in reports
    """
    n: int
    arcs: Tuple[Tuple[int, int], ...]
    buffers: Tuple[Buffer, ...]
    services: Tuple[Distribution, ...] = ()
    correlation: Optional[CorrelatedExponential] = None
    name: str = ""

    @cached_property
    def _predecessor_sets(self) -> Tuple[Tuple[int, ...], ...]:
        preds: List[List[int]] = [[] for _ in range(self.n)]
        for i, j in self.arcs:
            preds[j].append(i)
        return tuple(tuple(sorted(p)) for p in preds)

    @cached_property
    def _successor_sets(self) -> Tuple[Tuple[int, ...], ...]:
        succs: List[List[int]] = [[] for _ in range(self.n)]
        for i, j in self.arcs:
            succs[i].append(j)
        return tuple(tuple(sorted(s)) for s in succs)

    def predecessors(self, i: int) -> Tuple[int, ...]:
        """P(i) = {j | (j, i) in A}."""
        return self._predecessor_sets[i]

    def successors(self, i: int) -> Tuple[int, ...]:
        """S(i) = {j | (i, j) in A}."""
        return self._successor_sets[i]

    def sources(self) -> List[int]:
        return [i for i in range(self.n) if not self.predecessors(i)]

    def sinks(self) -> List[int]:
        return [i for i in range(self.n) if not self.successors(i)]

    def is_saturated(self, i: int) -> bool:
        return math.isinf(self.buffers[i])

    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.arcs)
        return graph


# ==============================================================================
# Validation
# ==============================================================================

def validate(spec: NetworkSpec) -> NetworkSpec:
    """
    Check a network spec against the model assumptions.

    Checks node count, arc ranges, acyclicity, that saturated buffers sit
    exactly on nodes without predecessors, that other buffers are integers
    >= 0, and that service parameters are admissible.

    Args:
        spec: Network spec to check

    Returns:
        The same spec, with P(i)/S(i) index sets computed

    Raises:
        NetworkConfigError: On any structural or parameter violation
        CyclicGraphError: If the arc graph has a circuit
    """
    if isinstance(spec.n, bool) or not isinstance(spec.n, int) or spec.n < 1:
        raise NetworkConfigError(f"node count must be a positive integer, got {spec.n!r}", "n")
    n = spec.n

    seen = set()
    for index, (i, j) in enumerate(spec.arcs):
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkConfigError(f"arc ({i + 1}, {j + 1}) references a node outside 1..{n}",
                                     f"arcs[{index}]")
        if (i, j) in seen:
            raise NetworkConfigError(f"duplicate arc ({i + 1}, {j + 1})", f"arcs[{index}]")
        seen.add((i, j))

    try:
        cycle = nx.find_cycle(spec.digraph())
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle is not None:
        raise CyclicGraphError([int(u) for u, _ in cycle], "network graph is not acyclic")

    if len(spec.buffers) != n:
        raise NetworkConfigError(f"expected {n} buffer entries, got {len(spec.buffers)}", "buffers")

    for i, r in enumerate(spec.buffers):
        has_predecessors = bool(spec.predecessors(i))
        location = f"buffers[{i}]"
        if isinstance(r, bool) or not isinstance(r, (int, float)):
            raise NetworkConfigError(f"node {i + 1}: buffer must be an integer or infinite", location)
        if isinstance(r, float) and math.isinf(r) and r > 0:
            if has_predecessors:
                raise NetworkConfigError(f"node {i + 1} has predecessors and cannot be saturated",
                                         location)
            continue
        if not has_predecessors:
            raise NetworkConfigError(f"node {i + 1} has no predecessors and must be saturated (inf)",
                                     location)
        if not float(r).is_integer():
            raise NetworkConfigError(f"node {i + 1}: buffer must be an integer, got {r!r}", location)
        if r < 0:
            raise NetworkConfigError(f"node {i + 1}: buffer must be >= 0, got {r}", location)

    if spec.correlation is not None:
        if spec.services:
            raise NetworkConfigError("per-node services cannot be combined with a correlation block",
                                     "services")
        try:
            spec.correlation.validate(n)
        except ValueError as e:
            raise NetworkConfigError(str(e), "correlation.a")
    else:
        if len(spec.services) != n:
            raise NetworkConfigError(f"expected {n} service entries, got {len(spec.services)}",
                                     "services")
        for i, dist in enumerate(spec.services):
            try:
                dist.validate()
            except ValueError as e:
                raise NetworkConfigError(f"node {i + 1}: {e}", f"services[{i}]")

    logger.debug(f"Validated network '{spec.name}': {n} nodes, {len(spec.arcs)} arcs")
    return spec


# ==============================================================================
# Partial Graphs
# ==============================================================================

@dataclass(frozen=True)
class PartialGraphs:
    """
    Adjacency matrices G_0..G_M of the partial graphs.

    g^m_ij = 0 iff (i, j) is an arc and r_j = m. G_m for m > M is ℰ.
    """
    n: int
    M: int
    graphs: Tuple[MaxPlusMatrix, ...]

    @property
    def depth(self) -> int:
        """History depth max(M, 1) of the state recursion."""
        return max(self.M, 1)

    def graph(self, m: int) -> MaxPlusMatrix:
        if 0 <= m < len(self.graphs):
            return self.graphs[m]
        return MaxPlusMatrix.epsilon(self.n)

    @cached_property
    def G_all(self) -> MaxPlusMatrix:
        return mat_sum(self.graphs)

    @cached_property
    def p(self) -> int:
        """Longest path of the graph of G_0."""
        return longest_path(self.graphs[0])

    @cached_property
    def q(self) -> int:
        """Longest path of the graph of G_0 ⊕ ... ⊕ G_M."""
        return longest_path(self.G_all)

    @cached_property
    def order(self) -> Tuple[int, ...]:
        """Topological order of the whole arc graph (also valid for G_0)."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.G_all.arcs())
        return tuple(int(i) for i in nx.lexicographical_topological_sort(graph))

    @cached_property
    def same_cycle_inputs(self) -> Tuple[Tuple[int, ...], ...]:
        """Per node i, the j with g^0_ji = 0."""
        g0 = self.graphs[0].finite
        return tuple(tuple(int(j) for j in np.flatnonzero(g0[:, i])) for i in range(self.n))

    @cached_property
    def lagged_inputs(self) -> Tuple[Tuple[Tuple[int, Tuple[int, ...]], ...], ...]:
        """Per node i, pairs (m, {j | g^m_ji = 0}) for m >= 1."""
        inputs = []
        for i in range(self.n):
            node_inputs = []
            for m in range(1, len(self.graphs)):
                preds = tuple(int(j) for j in np.flatnonzero(self.graphs[m].finite[:, i]))
                if preds:
                    node_inputs.append((m, preds))
            inputs.append(tuple(node_inputs))
        return tuple(inputs)


def build_partial_graphs(spec: NetworkSpec) -> PartialGraphs:
    """
    Split the arcs by the initial buffer content of their head node.

    Args:
        spec: Network spec (validated here)

    Returns:
        PartialGraphs with M = max finite r_i and matrices G_0..G_M
    """
    spec = validate(spec)
    n = spec.n

    finite_buffers = [int(r) for r in spec.buffers if not math.isinf(r)]
    M = max(finite_buffers, default=0)

    masks = [np.zeros((n, n), dtype=bool) for _ in range(M + 1)]
    for i, j in spec.arcs:
        masks[int(spec.buffers[j])][i, j] = True

    graphs = tuple(MaxPlusMatrix(np.zeros((n, n)), mask) for mask in masks)
    logger.debug(f"Partial graphs for '{spec.name}': M={M}, "
                 f"arcs per G_m={[int(mask.sum()) for mask in masks]}")
    return PartialGraphs(n=n, M=M, graphs=graphs)


def zero_buffer_transform(pg: PartialGraphs) -> PartialGraphs:
    """
    Reduce every finite initial buffer content to zero.

    Returns:
        PartialGraphs with G̃_0 = G_0 ⊕ ... ⊕ G_M and M̃ = 0
    """
    return PartialGraphs(n=pg.n, M=0, graphs=(pg.G_all,))


# ==============================================================================
# Example Topologies
# ==============================================================================

def tandem(n: int, services: Sequence[Distribution], name: str = "") -> NetworkSpec:
    """Open tandem 1 -> 2 -> ... -> n with a saturated first node and r_i = 0 downstream."""
    if len(services) != n:
        raise NetworkConfigError(f"expected {n} service entries, got {len(services)}", "services")
    spec = NetworkSpec(
        n=n,
        arcs=tuple((i, i + 1) for i in range(n - 1)),
        buffers=(SATURATED,) + (0,) * (n - 1),
        services=tuple(services),
        name=name or f"tandem{n}",
    )
    return validate(spec)


FIG1_ARCS = ((0, 2), (0, 3), (1, 3), (2, 4), (3, 4))
FIG1_BUFFERS = (SATURATED, SATURATED, 0, 1, 0)


def fig1_network(services: Sequence[Distribution] = (),
                 correlation: Optional[CorrelatedExponential] = None,
                 buffers: Sequence[Buffer] = FIG1_BUFFERS,
                 name: str = "fig1") -> NetworkSpec:
    """
    Five-node fork-join network: sources 1 and 2, arcs 1->3, 1->4, 2->4, 3->5, 4->5.

    Defaults to exponential(1) services when neither services nor a
    correlation block is given.
    """
    if not services and correlation is None:
        services = tuple(Exponential(1.0) for _ in range(5))
    spec = NetworkSpec(n=5, arcs=FIG1_ARCS, buffers=tuple(buffers),
                       services=tuple(services), correlation=correlation, name=name)
    return validate(spec)
