"""
Network Dynamics - State Transitions and Cycle Simulation

Evolution of the departure-epoch vector x(k) of an acyclic fork-join network:
- build_transitions(): A_m(k) from the k-th service matrix 𝒯_k
- step(): x(k) = ⊕_m A_m(k) ⊗ x(k - m)
- lindley_oracle_step(): the same state from the per-node queue recursion
- run(): K cycles with per-cycle norms, sandwich bounds and running γ̂
"""

import logging
from collections import deque
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from tqdm import tqdm

import config
from maxplus import MaxPlusMatrix, mat_add, mat_mul, solve_implicit
from network import NetworkSpec, PartialGraphs, build_partial_graphs, validate
from stochastic import ServiceSampler


logger = logging.getLogger(__name__)

State = List[float]


def service_matrix(tau: Sequence[float]) -> MaxPlusMatrix:
    """Diagonal 𝒯_k with τ_ik on the diagonal and ε elsewhere."""
    if any(not (t >= 0.0) for t in tau):
        raise ValueError(f"service times must be nonnegative reals, got {list(tau)}")
    return MaxPlusMatrix.diag(tau)


# ==============================================================================
# State History
# ==============================================================================

class StateHistory:
    """
    The last `depth` state vectors x(k-1), ..., x(k-depth).

    x(0) is the zero vector and x(k) for k < 0 is the all-ε vector, stored as
    None. States for k >= 0 are always fully finite.
    """

    def __init__(self, n: int, depth: int):
        self.n = n
        self.depth = depth
        self.k = 0
        self._ring = deque([[0.0] * n] + [None] * (depth - 1), maxlen=depth)

    def lagged(self, m: int) -> Optional[State]:
        """x(k - m) relative to the cycle being computed, 1 <= m <= depth."""
        return self._ring[m - 1]

    @property
    def latest(self) -> State:
        return self._ring[0]

    def push(self, x: State) -> None:
        self._ring.appendleft(x)
        self.k += 1

    def stacked(self) -> MaxPlusMatrix:
        """Column (x(k-1); ...; x(k-depth)) with ε for unset states."""
        entries: List[Optional[float]] = []
        for state in self._ring:
            entries.extend(state if state is not None else [None] * self.n)
        return MaxPlusMatrix.column(entries)


# ==============================================================================
# Transitions
# ==============================================================================

@dataclass(frozen=True)
class TransitionSet:
    """
    State transition of one cycle.

    A_1(k) = (I ⊕ 𝒯_k ⊗ G_0ᵀ)^p ⊗ 𝒯_k ⊗ (I ⊕ G_1ᵀ)
    A_m(k) = (I ⊕ 𝒯_k ⊗ G_0ᵀ)^p ⊗ 𝒯_k ⊗ G_mᵀ,  m = 2..depth
    """
    tau: Tuple[float, ...]
    graphs: PartialGraphs
    p: int

    def matrices(self) -> List[MaxPlusMatrix]:
        """
        Materialize A_1(k), ..., A_depth(k).

        The (I ⊕ 𝒯_k ⊗ G_0ᵀ)^p factor is applied by forward substitution on
        each right-hand-side column.
        """
        n = self.graphs.n
        t = MaxPlusMatrix.diag(self.tau)
        u = mat_mul(t, self.graphs.graph(0).T)

        rhs = [mat_mul(t, mat_add(MaxPlusMatrix.identity(n), self.graphs.graph(1).T))]
        for m in range(2, self.graphs.depth + 1):
            rhs.append(mat_mul(t, self.graphs.graph(m).T))

        return [solve_implicit(u, b) for b in rhs]


def build_transitions(tau: Sequence[float], pg: PartialGraphs) -> TransitionSet:
    """
    Transition set for the service vector of one cycle.

    Args:
        tau: Service times τ_1k..τ_nk (nonnegative)
        pg: Partial graphs of the network

    Returns:
        TransitionSet with p = longest path of G_0
    """
    if len(tau) != pg.n:
        raise ValueError(f"expected {pg.n} service times, got {len(tau)}")
    if not all(t >= 0.0 for t in tau):
        raise ValueError(f"service times must be nonnegative, got {list(tau)}")
    return TransitionSet(tau=tuple(tau), graphs=pg, p=pg.p)


def step(ts: TransitionSet, history: StateHistory) -> State:
    """
    Advance one cycle: x(k) = ⊕_m A_m(k) ⊗ x(k - m).

    The transition is applied as an operator. With
    z = (I ⊕ G_1ᵀ) ⊗ x(k-1) ⊕ ⊕_{m>=2} G_mᵀ ⊗ x(k-m), the state is
    x(k) = (I ⊕ 𝒯_k ⊗ G_0ᵀ)^p ⊗ 𝒯_k ⊗ z, and the power is resolved by forward
    substitution along the topological order.

    Args:
        ts: Transition set of cycle k
        history: States up to x(k-1); x(k) is appended

    Returns:
        The new state x(k)
    """
    pg = ts.graphs
    tau = ts.tau
    previous = history.lagged(1)
    same_cycle = pg.same_cycle_inputs
    lagged = pg.lagged_inputs

    x = [0.0] * pg.n
    for i in pg.order:
        z = previous[i]
        for m, preds in lagged[i]:
            state = history.lagged(m)
            if state is None:
                continue
            for j in preds:
                if state[j] > z:
                    z = state[j]

        # (𝒯_k ⊗ z)_i, then the same-cycle terms τ_ik ⊗ x_j(k)
        y = tau[i] + z
        for j in same_cycle[i]:
            candidate = tau[i] + x[j]
            if candidate > y:
                y = candidate
        x[i] = y

    history.push(x)
    return x


def lindley_oracle_step(spec: NetworkSpec, tau: Sequence[float], states: Sequence[State]) -> State:
    """
    x(k) from the per-node recursion x_i(k) = τ_ik ⊗ (u_i(k) ⊕ x_i(k-1)).

    u_i(k) = ⊕_{j in P(i)} x_j(k - r_i), ε for sources and for k - r_i < 0.

    Args:
        spec: Network spec
        tau: Service times of cycle k
        states: Full history x(0), ..., x(k-1)

    Returns:
        The state x(k)
    """
    k = len(states)
    order = list(nx.lexicographical_topological_sort(spec.digraph()))
    x: List[Optional[float]] = [None] * spec.n

    for i in order:
        arrival = None
        preds = spec.predecessors(i)
        if preds:
            r = int(spec.buffers[i])
            if r == 0:
                source = x
            elif k - r >= 0:
                source = states[k - r]
            else:
                source = None
            if source is not None:
                for j in preds:
                    if arrival is None or source[j] > arrival:
                        arrival = source[j]

        previous = states[k - 1][i]
        start = previous if arrival is None or previous >= arrival else arrival
        x[i] = tau[i] + start

    return x


def companion_matrix(ts: TransitionSet) -> MaxPlusMatrix:
    """
    First-order form of the depth-M recursion on stacked states.

    Returns:
        (n·depth) square matrix [A_1 ... A_depth; I ℰ ...; ...; ... I ℰ]
    """
    n = ts.graphs.n
    depth = ts.graphs.depth
    size = n * depth

    values = np.zeros((size, size))
    finite = np.zeros((size, size), dtype=bool)
    for m, a in enumerate(ts.matrices()):
        values[:n, m * n:(m + 1) * n] = a.values
        finite[:n, m * n:(m + 1) * n] = a.finite
    for block in range(1, depth):
        rows = slice(block * n, (block + 1) * n)
        cols = slice((block - 1) * n, block * n)
        finite[rows, cols] = np.eye(n, dtype=bool)

    return MaxPlusMatrix(values, finite)


# ==============================================================================
# Trajectories
# ==============================================================================

@dataclass
class CycleTrajectory:
    """
    Per-cycle record of a simulation run (index k-1 holds cycle k).

    Attributes:
        norms: ‖x(k)‖, completion time of cycle k
        lower: ‖𝒯_1 + ... + 𝒯_k‖ (ordinary sums of the diagonals)
        upper: Σ_i ‖𝒯_i‖ + q·max_i ‖𝒯_i‖
        cycle_max: ‖𝒯_k‖ per cycle
        q: Longest path of G_0 ⊕ ... ⊕ G_M used for `upper`
        states: x(1), ..., x(K) when recorded
        replica: Replica index of the sampler stream
    """
    norms: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cycle_max: np.ndarray
    q: int
    states: Optional[List[State]] = None
    replica: int = 0

    @property
    def cycles(self) -> int:
        return len(self.norms)

    @property
    def gamma_hat(self) -> np.ndarray:
        """Running estimate ‖x(k)‖ / k."""
        return self.norms / np.arange(1, self.cycles + 1)

    @property
    def final_gamma(self) -> float:
        return float(self.norms[-1] / self.cycles)

    def rows(self) -> Iterator[Tuple[int, float, float, float, float]]:
        gamma = self.gamma_hat
        for k in range(self.cycles):
            yield (k + 1, float(self.norms[k]), float(self.lower[k]),
                   float(self.upper[k]), float(gamma[k]))


def upper_envelope(cycle_max: np.ndarray, q: int) -> np.ndarray:
    """Σ_{i<=k} ‖𝒯_i‖ + q·max_{i<=k} ‖𝒯_i‖ for every k."""
    return np.cumsum(cycle_max) + q * np.maximum.accumulate(cycle_max)


def run(spec: NetworkSpec,
        sampler: ServiceSampler,
        cycles: int,
        graphs: Optional[PartialGraphs] = None,
        record_states: bool = False,
        progress: bool = False) -> CycleTrajectory:
    """
    Simulate `cycles` service cycles.

    Args:
        spec: Network spec
        sampler: Service-time source, consumed from cycle 1
        cycles: Number of cycles K >= 1
        graphs: Partial graphs to use instead of the spec's own
            (e.g. the zero-buffer transform driven by the same τ stream)
        record_states: Keep every x(k)
        progress: Show a progress bar

    Returns:
        CycleTrajectory of the run
    """
    if cycles < 1:
        raise ValueError(f"cycle count must be >= 1, got {cycles}")

    pg = graphs if graphs is not None else build_partial_graphs(spec)
    n = pg.n
    history = StateHistory(n, pg.depth)

    norms = np.empty(cycles)
    lower = np.empty(cycles)
    cycle_max = np.empty(cycles)
    sums = [0.0] * n
    states: Optional[List[State]] = [] if record_states else None

    for k in tqdm(range(1, cycles + 1), desc=f"Simulating {spec.name or 'network'}",
                  unit="cycle", disable=not progress, mininterval=0.5):
        tau = sampler.sample_cycle(k)
        x = step(build_transitions(tau, pg), history)

        for i in range(n):
            sums[i] += tau[i]
        norms[k - 1] = max(x)
        lower[k - 1] = max(sums)
        cycle_max[k - 1] = max(tau)
        if states is not None:
            states.append(x)

    trajectory = CycleTrajectory(
        norms=norms,
        lower=lower,
        upper=upper_envelope(cycle_max, pg.q),
        cycle_max=cycle_max,
        q=pg.q,
        states=states,
        replica=sampler.replica,
    )
    logger.debug(f"Run of '{spec.name}' finished: K={cycles}, gamma_hat={trajectory.final_gamma:.6f}")
    return trajectory


# ==============================================================================
# Replicas
# ==============================================================================

def _run_replica_worker(task: Dict[str, Any]) -> CycleTrajectory:
    """
    Worker function for multiprocessing replica runs.

    Args:
        task: Dictionary with:
            - spec: NetworkSpec
            - seed: Master seed
            - replica: Replica index
            - cycles: Cycle count

    Returns:
        CycleTrajectory of the replica
    """
    sampler = ServiceSampler(task['spec'], task['seed'], replica=task['replica'])
    return run(task['spec'], sampler, task['cycles'])


def run_replicas(spec: NetworkSpec,
                 seed: int,
                 cycles: int,
                 replicas: int,
                 workers: Optional[int] = None) -> List[CycleTrajectory]:
    """
    Independent runs on replica streams 0..replicas-1.

    Args:
        spec: Network spec
        seed: Master seed shared by all replicas
        cycles: Cycles per replica
        replicas: Number of replicas (>= 1)
        workers: Process count (default from config; 1 runs inline)

    Returns:
        Trajectories ordered by replica index
    """
    if replicas < 1:
        raise ValueError(f"replica count must be >= 1, got {replicas}")

    spec = validate(spec)
    tasks = [{'spec': spec, 'seed': seed, 'replica': r, 'cycles': cycles}
             for r in range(replicas)]
    workers = min(workers or config.SYSTEM["max_workers"], replicas)

    logger.info(f"Running {replicas} replica(s) of {cycles} cycles on {workers} worker(s)")

    if workers <= 1:
        return [_run_replica_worker(task) for task in tasks]

    with Pool(processes=workers) as pool:
        return list(tqdm(pool.imap(_run_replica_worker, tasks), total=len(tasks),
                         desc="Replicas", unit="run"))


def replica_summary(trajectories: Sequence[CycleTrajectory]) -> Dict[str, float]:
    """Mean and sample standard deviation of the final γ̂ over replicas."""
    gammas = np.array([t.final_gamma for t in trajectories])
    return {
        'replicas': len(gammas),
        'gamma_mean': float(gammas.mean()),
        'gamma_std': float(gammas.std(ddof=1)) if len(gammas) > 1 else 0.0,
    }
