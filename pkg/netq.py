#!/usr/bin/env python3
"""
netq - Fork-Join Queueing Network Toolkit

Command-line entry point for (max,+) models of acyclic fork-join networks:
- validate: check a network config and show its partial graphs
- simulate: run the state recursion and write the trajectory
- bounds: lower and upper bounds on the mean cycle time
- reproduce: regenerate the reference tables with a printed-value diff
- batch: run a YAML study over several networks

Network configs are JSON files with nodes numbered 1..n.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml

import config
from analysis import bounds, estimate, finite_horizon_upper, sandwich
from dynamics import CycleTrajectory, build_transitions, replica_summary, run, run_replicas
from maxplus import CyclicGraphError, DimensionError
from network import SATURATED, NetworkConfigError, NetworkSpec, build_partial_graphs, validate
from stochastic import ServiceSampler, correlation_from_record, distribution_from_record


logger = logging.getLogger(__name__)


class UsageError(ValueError):
    """Invalid command-line value (seed, service vector, output format)."""


CONFIG_ERRORS = (NetworkConfigError, CyclicGraphError, DimensionError, UsageError,
                 FileNotFoundError, json.JSONDecodeError, yaml.YAMLError)

NETWORK_KEYS = ("name", "n", "arcs", "buffers", "services", "correlation")


# ==============================================================================
# Network Config Files
# ==============================================================================

def _parse_buffer(value: Any, index: int):
    location = f"buffers[{index}]"
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return SATURATED
        raise NetworkConfigError(f"expected an integer or \"inf\", got {value!r}", location)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkConfigError(f"expected an integer or \"inf\", got {value!r}", location)
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return SATURATED
        if not value.is_integer():
            raise NetworkConfigError(f"buffer must be an integer, got {value}", location)
        return int(value)
    return value


def parse_network_config(data: Dict[str, Any]) -> NetworkSpec:
    """
    Build a validated NetworkSpec from a decoded config document.

    Args:
        data: Mapping with keys n, arcs (1-based pairs), buffers, and either
            services (one record per node) or correlation; name is optional

    Returns:
        Validated NetworkSpec with 0-based arcs

    Raises:
        NetworkConfigError: On unknown keys, malformed entries or invalid parameters
        CyclicGraphError: If the arcs contain a circuit
    """
    if not isinstance(data, dict):
        raise NetworkConfigError("network config must be a JSON object")

    unknown = sorted(set(data) - set(NETWORK_KEYS))
    if unknown:
        raise NetworkConfigError(f"unknown keys {unknown}; allowed: {list(NETWORK_KEYS)}")
    for key in ("n", "arcs", "buffers"):
        if key not in data:
            raise NetworkConfigError("missing required key", key)

    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise NetworkConfigError(f"node count must be a positive integer, got {n!r}", "n")

    if not isinstance(data["arcs"], list):
        raise NetworkConfigError("arcs must be a list of [from, to] pairs", "arcs")
    arcs = []
    for index, arc in enumerate(data["arcs"]):
        if (not isinstance(arc, (list, tuple)) or len(arc) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) for v in arc)):
            raise NetworkConfigError(f"arc must be a pair of node numbers, got {arc!r}",
                                     f"arcs[{index}]")
        arcs.append((arc[0] - 1, arc[1] - 1))

    if not isinstance(data["buffers"], list):
        raise NetworkConfigError("buffers must be a list", "buffers")
    buffers = tuple(_parse_buffer(value, i) for i, value in enumerate(data["buffers"]))

    services = ()
    correlation = None
    if "correlation" in data:
        if "services" in data:
            raise NetworkConfigError("give either 'services' or 'correlation', not both", "services")
        try:
            correlation = correlation_from_record(data["correlation"])
        except ValueError as e:
            raise NetworkConfigError(str(e), "correlation")
    else:
        if not isinstance(data.get("services"), list):
            raise NetworkConfigError("missing list of per-node services", "services")
        parsed = []
        for i, record in enumerate(data["services"]):
            try:
                parsed.append(distribution_from_record(record))
            except ValueError as e:
                raise NetworkConfigError(str(e), f"services[{i}]")
        services = tuple(parsed)

    spec = NetworkSpec(n=n, arcs=tuple(arcs), buffers=buffers, services=services,
                       correlation=correlation, name=str(data.get("name", "")))
    return validate(spec)


def load_network_config(path: str) -> NetworkSpec:
    """
    Load a JSON network config file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        json.JSONDecodeError: If the file is not valid JSON
    """
    config_file = Path(path)
    if not config_file.exists():
        raise FileNotFoundError(f"Network config not found: {path}")

    with open(config_file, 'r') as f:
        data = json.load(f)

    if isinstance(data, dict) and not data.get("name"):
        data["name"] = config_file.stem

    return parse_network_config(data)


def canonical_config(spec: NetworkSpec) -> Dict[str, Any]:
    """Config document that parses back to an identical spec."""
    document: Dict[str, Any] = {
        "name": spec.name,
        "n": spec.n,
        "arcs": [[i + 1, j + 1] for i, j in spec.arcs],
        "buffers": ["inf" if spec.is_saturated(i) else int(r) for i, r in enumerate(spec.buffers)],
    }
    if spec.correlation is not None:
        document["correlation"] = spec.correlation.to_record()
    else:
        document["services"] = [dist.to_record() for dist in spec.services]
    return document


# ==============================================================================
# Output
# ==============================================================================

def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        if seed < 0:
            raise UsageError(f"seed must be nonnegative, got {seed}")
        return seed
    try:
        return config.default_seed()
    except ValueError as e:
        raise UsageError(str(e))


def _parse_tau(text: str, n: int) -> List[float]:
    try:
        tau = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"--tau must be a comma-separated list of numbers, got {text!r}")
    if len(tau) != n:
        raise DimensionError(f"--tau has {len(tau)} entries, network has {n} nodes")
    return tau


def _write_failed(path: str, error: OSError) -> int:
    logger.error(f"Could not write {path}: {error}")
    print(f"\n✗ Could not write {path}: {error.strerror or error}")
    return 1


def write_trajectories(trajectories: Sequence[CycleTrajectory], out, fmt: str = "csv") -> None:
    """
    Write per-cycle rows k, ‖x(k)‖, lower_k, upper_k, γ̂_k.

    A replica column is added when more than one trajectory is written.

    Args:
        trajectories: Runs to write
        out: Open text stream
        fmt: 'csv' or 'table' (aligned columns)
    """
    precision = config.OUTPUT_CONFIG["precision"]
    columns = list(config.OUTPUT_CONFIG["trajectory_columns"])
    with_replica = len(trajectories) > 1
    if with_replica:
        columns = ["replica"] + columns

    def cells(trajectory: CycleTrajectory, row) -> List[str]:
        values = [str(row[0])] + [f"{v:.{precision}f}" for v in row[1:]]
        return ([str(trajectory.replica)] if with_replica else []) + values

    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for trajectory in trajectories:
            for row in trajectory.rows():
                writer.writerow(cells(trajectory, row))
    elif fmt == "table":
        width = max(14, max(len(c) for c in columns) + 2)
        out.write("".join(f"{c:>{width}}" for c in columns) + "\n")
        for trajectory in trajectories:
            for row in trajectory.rows():
                out.write("".join(f"{c:>{width}}" for c in cells(trajectory, row)) + "\n")
    else:
        raise UsageError(f"unknown trajectory format {fmt!r}")


# ==============================================================================
# Commands
# ==============================================================================

def cmd_validate(args) -> int:
    spec = load_network_config(args.config)
    pg = build_partial_graphs(spec)

    print(f"✓ Network '{spec.name}' is valid")
    print(f"  Nodes: {spec.n}   Arcs: {len(spec.arcs)}")
    print(f"  Sources: {[i + 1 for i in spec.sources()]}   Sinks: {[i + 1 for i in spec.sinks()]}")
    print(f"  M = {pg.M}   p = {pg.p}   q = {pg.q}")
    for m, graph in enumerate(pg.graphs):
        print(f"\nG_{m}:")
        print(graph.to_text(precision=0))

    if args.tau:
        tau = _parse_tau(args.tau, spec.n)
        ts = build_transitions(tau, pg)
        for m, matrix in enumerate(ts.matrices(), start=1):
            print(f"\nA_{m}(k) at tau = {tau}:")
            print(matrix.to_text())
    return 0


def cmd_simulate(args) -> int:
    spec = load_network_config(args.config)
    seed = _resolve_seed(args.seed)

    if args.replicas > 1:
        trajectories = run_replicas(spec, seed, args.cycles, args.replicas, workers=args.workers)
    else:
        sampler = ServiceSampler(spec, seed)
        trajectories = [run(spec, sampler, args.cycles, progress=not args.quiet)]

    violations = sum(sandwich(t).violations for t in trajectories)
    result = estimate(trajectories[0])

    print(f"Network: {spec.name}   K = {args.cycles}   seed = {seed}")
    if len(trajectories) > 1:
        summary = replica_summary(trajectories)
        print(f"  gamma_hat (replica mean): {summary['gamma_mean']:.6f} "
              f"(sd {summary['gamma_std']:.6f}, {summary['replicas']} replicas)")
    print(f"  gamma_hat: {result.gamma_hat:.6f}")
    print(f"  throughput: {result.throughput:.6f}")
    print(f"  {'✓' if violations == 0 else '✗'} Sandwich bounds: {violations} violation(s)")

    if args.out:
        try:
            with open(args.out, 'w', newline='') as f:
                write_trajectories(trajectories, f, args.format)
        except OSError as e:
            return _write_failed(args.out, e)
        print(f"  Trajectory: {args.out}")

    return 0 if violations == 0 else 1


def cmd_bounds(args) -> int:
    spec = load_network_config(args.config)
    report = bounds(spec, method=args.method)

    if args.simulate:
        seed = _resolve_seed(args.seed)
        trajectory = run(spec, ServiceSampler(spec, seed), args.cycles, progress=not args.quiet)
        result = estimate(trajectory)
        report.gamma_estimate = result.gamma_hat
        report.throughput = result.throughput
        report.cycles = trajectory.cycles
        report.degenerate = result.degenerate
        report.finite_upper = finite_horizon_upper(spec, trajectory.cycles, upper=report.upper,
                                                   seed=seed)

    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2, allow_nan=False))
        return 0

    print(f"Network: {spec.name}")
    print(f"  lower  ||E[T_1]||: {report.lower:.6f}")
    upper_line = f"  upper  E||T_1||:   {report.upper:.6f}  ({report.upper_method}"
    if report.ci_halfwidth is not None:
        upper_line += f", ±{report.ci_halfwidth:.6f}"
    print(upper_line + ")")
    if report.gamma_estimate is not None:
        print(f"  gamma_hat (K={report.cycles}): {report.gamma_estimate:.6f}")
        print(f"  upper at K:        {report.finite_upper:.6f}")
        if report.degenerate:
            print("  ✗ gamma_hat is 0: throughput is unbounded")
    return 0


def cmd_reproduce(args) -> int:
    from tables import render_csv, render_markdown, reproduce_table

    tables = [1, 2, 3] if args.table == "all" else [int(args.table)]
    seed = _resolve_seed(args.seed)
    cycles = 0 if args.analytic_only else args.cycles

    outputs = []
    results = []
    for table in tables:
        result = reproduce_table(table, cycles=cycles, seed=seed, workers=args.workers,
                                 progress=not args.quiet)
        results.append(result)
        outputs.append(render_csv(result) if args.format == "csv" else render_markdown(result))

    text = "\n".join(outputs)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            return _write_failed(args.out, e)
        print(f"✓ Wrote {args.out}")
    else:
        print(text)

    for result in results:
        mark = "✓" if result.reference_passed else "✗"
        print(f"{mark} Table {result.table}: {'agrees' if result.reference_passed else 'differs'} "
              f"with printed values", file=sys.stderr)

    if args.strict and not all(result.reference_passed for result in results):
        return 1
    return 0


def cmd_batch(args) -> int:
    from process_study import StudyConfigError, process_study

    try:
        summary = process_study(args.config, workers=args.workers, cycles=args.cycles)
    except StudyConfigError as e:
        raise UsageError(str(e))
    return 0 if summary['failed'] == 0 else 1


# ==============================================================================
# Entry Point
# ==============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='Enable debug logging')
    common.add_argument('--quiet', action='store_true', help='Only log warnings; no progress bars')

    parser = argparse.ArgumentParser(
        prog='netq',
        description='Fork-join queueing networks in the (max,+) algebra',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Check a network and print its partial graphs
  %(prog)s validate configs/fig1.json

  # Show the transition matrices for one service vector
  %(prog)s validate configs/fig1.json --tau 1,2,3,4,5

  # Simulate 100000 cycles and save the trajectory
  %(prog)s simulate configs/fig1.json --cycles 100000 --seed 7 --out fig1.csv

  # Bounds on the mean cycle time, with a simulated estimate
  %(prog)s bounds configs/tandem5.json --simulate

  # Regenerate a reference table
  %(prog)s reproduce --table 1 --format markdown

  # Run a multi-network study
  %(prog)s batch --config configs/study_example.yaml
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('validate', parents=[common], help='Validate a network config')
    p.add_argument('config', help='Path to network JSON config')
    p.add_argument('--tau', default=None, help='Service vector t1,...,tn; prints A_m(k)')
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('simulate', parents=[common], help='Simulate service cycles')
    p.add_argument('config', help='Path to network JSON config')
    p.add_argument('--cycles', type=int, default=config.SIMULATION["default_cycles"],
                   help=f'Number of cycles K (default: {config.SIMULATION["default_cycles"]})')
    p.add_argument('--seed', type=int, default=None, help='Master seed (default: NETQ_SEED or config)')
    p.add_argument('--replicas', type=int, default=config.SIMULATION["default_replicas"],
                   help='Independent replicas (default: 1)')
    p.add_argument('--workers', type=int, default=None, help='Worker processes for replicas')
    p.add_argument('--out', default=None, help='Trajectory output path')
    p.add_argument('--format', choices=['csv', 'table'], default='csv',
                   help='Trajectory format (default: csv)')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('bounds', parents=[common], help='Bounds on the mean cycle time')
    p.add_argument('config', help='Path to network JSON config')
    p.add_argument('--method', choices=['auto', 'quadrature', 'monte-carlo'], default='auto',
                   help='Upper bound method (default: auto)')
    p.add_argument('--simulate', action='store_true', help='Append a simulated estimate')
    p.add_argument('--cycles', type=int, default=config.SIMULATION["default_cycles"],
                   help='Cycles for --simulate')
    p.add_argument('--seed', type=int, default=None, help='Seed for --simulate')
    p.add_argument('--format', choices=['table', 'json'], default='table', help='Output format')
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser('reproduce', parents=[common], help='Regenerate a reference table')
    p.add_argument('--table', choices=['1', '2', '3', 'all'], required=True, help='Table number')
    p.add_argument('--cycles', type=int, default=config.SIMULATION["default_cycles"],
                   help='Cycles per simulated row')
    p.add_argument('--seed', type=int, default=None, help='Master seed')
    p.add_argument('--analytic-only', action='store_true', help='Skip the simulated column')
    p.add_argument('--format', choices=['markdown', 'csv'], default='markdown', help='Output format')
    p.add_argument('--out', default=None, help='Output path (default: stdout)')
    p.add_argument('--workers', type=int, default=None, help='Worker processes for rows')
    p.add_argument('--strict', action='store_true',
                   help='Exit 1 when a reference row is outside tolerance')
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser('batch', parents=[common], help='Run a YAML study over several networks')
    p.add_argument('--config', required=True, help='Path to study YAML')
    p.add_argument('--workers', type=int, default=None, help='Worker processes')
    p.add_argument('--cycles', type=int, default=None, help='Override cycles for every network')
    p.set_defaults(func=cmd_batch)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for command-line usage."""
    args = build_parser().parse_args(argv)

    config.setup_logging()
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        for name in ('cycles', 'replicas'):
            value = getattr(args, name, None)
            if value is not None and value < 1:
                raise UsageError(f"--{name} must be positive, got {value}")
        return args.func(args)

    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        return 130  # Standard exit code for SIGINT
    except CONFIG_ERRORS as e:
        logger.error(f"Configuration error: {e}")
        print(f"\n✗ Configuration error: {e}")
        return 2
    except Exception as e:
        logger.error(f"Error running {args.command}: {e}", exc_info=True)
        print(f"\n✗ Error: {e}")
        return 1


if __name__ == '__main__':
    exit(main())
