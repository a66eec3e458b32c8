#!/usr/bin/env python3
"""
netq - Multi-Network Study Processor

Runs bounds and simulations for several networks listed in a YAML study file.
Creates a summary per network plus a study index and a comparative report.

Usage:
    python process_study.py --config configs/study_example.yaml
    python process_study.py --config configs/study_example.yaml --cycles 10000
    python process_study.py --config configs/study_example.yaml --workers 4
"""

import argparse
import json
import logging
from datetime import datetime
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from tqdm import tqdm

import config
from analysis import bounds, estimate, sandwich
from dynamics import replica_summary, run, run_replicas
from netq import canonical_config, load_network_config
from stochastic import ServiceSampler


logger = logging.getLogger(__name__)

STUDY_KEYS = ("study_name", "output_base", "cycles", "seed", "replicas", "networks")
NETWORK_ENTRY_KEYS = ("config", "cycles", "seed", "replicas", "method")


class StudyConfigError(ValueError):
    """Invalid study YAML file."""


def load_study(config_path: str) -> Dict[str, Any]:
    """
    Load a YAML study file.

    Args:
        config_path: Path to YAML study file

    Returns:
        Study dictionary with network config paths resolved

    Raises:
        FileNotFoundError: If the study file doesn't exist
        yaml.YAMLError: If the study file is not valid YAML
        StudyConfigError: If required fields are missing or unknown keys appear
    """
    study_file = Path(config_path)

    if not study_file.exists():
        raise FileNotFoundError(f"Study file not found: {config_path}")

    with open(study_file, 'r') as f:
        study = yaml.safe_load(f)

    if not isinstance(study, dict):
        raise StudyConfigError("study file must contain a mapping")

    unknown = sorted(set(study) - set(STUDY_KEYS))
    if unknown:
        raise StudyConfigError(f"unknown keys in study file: {unknown}")

    for field in ('study_name', 'output_base', 'networks'):
        if field not in study:
            raise StudyConfigError(f"Missing required field in study: {field}")

    if not study['networks']:
        raise StudyConfigError("Study must include at least one network")

    for i, entry in enumerate(study['networks']):
        if not isinstance(entry, dict) or 'config' not in entry:
            raise StudyConfigError(f"Network entry {i} missing required field: config")
        unknown = sorted(set(entry) - set(NETWORK_ENTRY_KEYS))
        if unknown:
            raise StudyConfigError(f"Network entry {i} has unknown keys: {unknown}")

        # Relative paths are relative to the study file
        path = Path(entry['config'])
        if not path.is_absolute() and not path.exists():
            path = study_file.parent / path
        entry['config'] = str(path)

    return study


def _process_network_worker(task: Dict[str, Any]) -> Dict[str, Any]:
    """
    Worker function for multiprocessing network evaluation.

    Args:
        task: Dictionary with:
            - config: Network JSON path
            - cycles: Cycles per run
            - seed: Master seed
            - replicas: Replica count
            - method: Upper bound method
            - output_dir: Directory for this network's summary

    Returns:
        Result dictionary with status 'complete' or 'error'
    """
    try:
        spec = load_network_config(task['config'])
        report = bounds(spec, method=task['method'])

        if task['replicas'] > 1:
            trajectories = run_replicas(spec, task['seed'], task['cycles'], task['replicas'], workers=1)
        else:
            trajectories = [run(spec, ServiceSampler(spec, task['seed']), task['cycles'])]

        result = estimate(trajectories[0])
        report.gamma_estimate = result.gamma_hat
        report.throughput = result.throughput
        report.cycles = result.cycles
        violations = sum(sandwich(t).violations for t in trajectories)

        summary = {
            'name': spec.name,
            'status': 'complete',
            'config': task['config'],
            'seed': task['seed'],
            'nodes': spec.n,
            'bounds': report.to_dict(),
            'sandwich_violations': violations,
            'convergence': result.series,
            'network': canonical_config(spec),
        }
        if len(trajectories) > 1:
            summary['replicas'] = replica_summary(trajectories)

        output_dir = Path(task['output_dir']) / spec.name
        output_dir.mkdir(parents=True, exist_ok=True)
        with open(output_dir / 'summary.json', 'w') as f:
            json.dump(summary, f, indent=2)

        return summary

    except Exception as e:
        return {
            'name': Path(task['config']).stem,
            'status': 'error',
            'config': task['config'],
            'error': str(e),
        }


def process_study(config_path: str,
                  workers: Optional[int] = None,
                  cycles: Optional[int] = None) -> Dict[str, Any]:
    """
    Process all networks of a study according to its YAML file.

    Args:
        config_path: Path to YAML study file
        workers: Worker processes (default from config; 1 runs inline)
        cycles: Override the cycle count of every network

    Returns:
        Summary dictionary with processing results
    """
    print("=" * 80)
    print("netq Multi-Network Study Processor")
    print("=" * 80)
    print()

    study = load_study(config_path)

    study_name = study['study_name']
    output_base = Path(study['output_base'])
    if not output_base.is_absolute():
        output_base = Path(config_path).parent / output_base
    output_base.mkdir(parents=True, exist_ok=True)

    default_cycles = cycles or study.get('cycles', config.SIMULATION["default_cycles"])
    default_seed = study.get('seed', config.default_seed())
    default_replicas = study.get('replicas', config.SIMULATION["default_replicas"])

    tasks = []
    for entry in study['networks']:
        tasks.append({
            'config': entry['config'],
            'cycles': cycles or entry.get('cycles', default_cycles),
            'seed': entry.get('seed', default_seed),
            'replicas': entry.get('replicas', default_replicas),
            'method': entry.get('method', 'auto'),
            'output_dir': str(output_base),
        })

    print(f"Study: {study_name}")
    print(f"Output Directory: {output_base}")
    print(f"Networks to Process: {len(tasks)}")
    print()

    workers = min(workers or config.SYSTEM["max_workers"], len(tasks))
    if workers <= 1:
        results = [_process_network_worker(task) for task in tqdm(tasks, desc="Networks", unit="net")]
    else:
        with Pool(processes=workers) as pool:
            results = list(tqdm(pool.imap(_process_network_worker, tasks), total=len(tasks),
                                desc="Networks", unit="net"))

    successful = sum(1 for r in results if r['status'] == 'complete')
    failed = len(results) - successful
    for r in results:
        if r['status'] == 'error':
            logger.error(f"✗ {r['name']}: {r['error']}")

    study_index = generate_study_index(study_name, results, output_base)
    study_report = generate_study_report(study_name, results, output_base)

    print("=" * 80)
    print("Study Complete")
    print("=" * 80)
    print()
    print(f"Study: {study_name}")
    print(f"Total Networks: {len(results)}")
    print(f"Successfully Processed: {successful}")
    print(f"Failed: {failed}")
    print()
    print(f"Study Index: {study_index}")
    print(f"Study Report: {study_report}")
    print()

    return {
        'study_name': study_name,
        'total_networks': len(results),
        'successful': successful,
        'failed': failed,
        'results': results,
        'study_index': str(study_index),
        'study_report': str(study_report),
    }


def generate_study_index(study_name: str, results: List[Dict[str, Any]], output_base: Path) -> Path:
    """
    Generate the JSON index of all networks in a study.

    Returns:
        Path to the index file
    """
    study_index = {
        'study_name': study_name,
        'generated': datetime.now().isoformat(),
        'total_networks': len(results),
        'networks': [],
    }

    for r in results:
        entry = {'name': r['name'], 'status': r['status'], 'config': r['config']}
        if r['status'] == 'complete':
            entry.update(
                lower=r['bounds']['lower'],
                upper=r['bounds']['upper'],
                upper_method=r['bounds']['upper_method'],
                gamma_hat=r['bounds']['gamma_estimate'],
                sandwich_violations=r['sandwich_violations'],
                summary_file=f"{r['name']}/summary.json",
            )
        else:
            entry['error'] = r['error']
        study_index['networks'].append(entry)

    index_path = output_base / config.OUTPUT_CONFIG["study_index_file"]
    with open(index_path, 'w') as f:
        json.dump(study_index, f, indent=2)

    print(f"✓ Study index saved: {index_path}")
    return index_path


def generate_study_report(study_name: str, results: List[Dict[str, Any]], output_base: Path) -> Path:
    """
    Generate a comparative text report across all networks.

    Returns:
        Path to the report file
    """
    precision = config.OUTPUT_CONFIG["precision"]
    report_lines = []

    report_lines.append("=" * 80)
    report_lines.append(f"netq Study Report: {study_name}")
    report_lines.append("=" * 80)
    report_lines.append("")
    report_lines.append(f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    report_lines.append(f"Total Networks: {len(results)}")
    report_lines.append("")

    report_lines.append("-" * 80)
    report_lines.append("MEAN CYCLE TIME BOUNDS")
    report_lines.append("-" * 80)
    report_lines.append("")
    report_lines.append(f"{'Network':<20} {'Lower':>12} {'gamma_hat':>12} {'Upper':>12} {'Method':>12}")
    report_lines.append("-" * 80)

    for r in results:
        if r['status'] == 'complete':
            b = r['bounds']
            report_lines.append(
                f"{r['name']:<20} {b['lower']:>12.{precision}f} {b['gamma_estimate']:>12.{precision}f} "
                f"{b['upper']:>12.{precision}f} {b['upper_method']:>12}"
            )
        else:
            report_lines.append(f"{r['name']:<20} ERROR: {r['error']}")

    report_lines.append("")
    report_lines.append("-" * 80)
    report_lines.append("BOUND TIGHTNESS")
    report_lines.append("-" * 80)
    report_lines.append("")

    for r in results:
        if r['status'] != 'complete':
            continue
        b = r['bounds']
        gap = b['upper'] - b['lower']
        position = (b['gamma_estimate'] - b['lower']) / gap if gap > 0 else 0.0
        report_lines.append(f"{r['name']}: gap {gap:.{precision}f}, "
                            f"gamma_hat at {position:.1%} of the gap, "
                            f"{r['sandwich_violations']} sandwich violation(s)")

    report_lines.append("")
    report_lines.append("-" * 80)
    report_lines.append("PROCESSING SUMMARY")
    report_lines.append("-" * 80)
    report_lines.append("")

    successful = sum(1 for r in results if r['status'] == 'complete')
    report_lines.append(f"Total Networks: {len(results)}")
    report_lines.append(f"Successfully Processed: {successful}")
    report_lines.append(f"Failed: {len(results) - successful}")
    report_lines.append("")

    report_lines.append("=" * 80)
    report_lines.append("END OF STUDY REPORT")
    report_lines.append("=" * 80)

    report_path = output_base / config.OUTPUT_CONFIG["study_report_file"]
    with open(report_path, 'w') as f:
        f.write("\n".join(report_lines))

    print(f"✓ Study report saved: {report_path}")
    return report_path


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description='Run bounds and simulations for several networks from a YAML study',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Example study file (study.yaml):

study_name: "Fork-join comparison"
output_base: "study_output"
cycles: 20000
seed: 7
networks:
  - config: "fig1.json"
  - config: "tandem5.json"
    cycles: 50000
    method: "quadrature"
        """
    )

    parser.add_argument('--config', required=True, help='Path to YAML study file')
    parser.add_argument('--cycles', type=int, default=None, help='Override cycles for every network')
    parser.add_argument('--workers', type=int, default=None, help='Worker processes')
    parser.add_argument('--verbose', action='store_true', help='Enable verbose logging')

    args = parser.parse_args()

    config.setup_logging()
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        summary = process_study(args.config, workers=args.workers, cycles=args.cycles)
    except KeyboardInterrupt:
        print("\n\nStudy interrupted by user")
        return 130
    except (FileNotFoundError, yaml.YAMLError, StudyConfigError) as e:
        print(f"\n✗ Configuration error: {e}")
        return 2

    return 0 if summary['failed'] == 0 else 1


if __name__ == '__main__':
    exit(main())
