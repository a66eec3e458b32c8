"""
Configuration for netq

Simulation, numerical and output settings for the fork-join network toolkit.
"""

import logging
import os
from typing import Dict, Any


logger = logging.getLogger(__name__)


# ==============================================================================
# System Configuration
# ==============================================================================

SYSTEM = {
    "cpu_cores": os.cpu_count() or 1,
    "max_workers": min(8, os.cpu_count() or 1),  # For parallel replicas / table rows
}


# ==============================================================================
# Simulation Configuration
# ==============================================================================

SIMULATION = {
    # Cycles per run (the published tables use 100000)
    "default_cycles": 100000,

    # Master seed when neither --seed nor NETQ_SEED is given
    "default_seed": 20240501,
    "seed_env_var": "NETQ_SEED",

    "default_replicas": 1,

    # Service times are drawn per node in blocks of this many cycles
    "block_size": 4096,

    # Relative slack when checking the per-cycle sandwich bounds
    "sandwich_rtol": 1e-9,
}


# ==============================================================================
# Quadrature Configuration (expected maximum of service times)
# ==============================================================================

QUADRATURE = {
    "epsabs": 1e-9,
    "epsrel": 1e-10,
    # Integration range ends where the survival function drops below this
    "tail_cutoff": 1e-12,
    "limit": 500,

    # Inclusion-exclusion is exact but has 2^n terms
    "max_inclusion_exclusion_nodes": 16,
}


# ==============================================================================
# Monte Carlo Configuration
# ==============================================================================

MONTE_CARLO = {
    "default_samples": 10_000_000,
    "chunk_size": 500_000,
    "z_value": 1.96,  # 95% confidence half-width
}


# ==============================================================================
# Table Reproduction Configuration
# ==============================================================================

REPRODUCTION = {
    "analytic_tolerance": 5e-7,
    "erlang_tolerance": 1e-4,
    "simulation_tolerance": 0.02,
}


# ==============================================================================
# Output Configuration
# ==============================================================================

OUTPUT_CONFIG = {
    "precision": 6,
    "trajectory_columns": ["k", "norm_x", "lower_k", "upper_k", "gamma_hat"],
    "study_index_file": "study_index.json",
    "study_report_file": "study_report.txt",
    "epsilon_symbol": ".",
}


# ==============================================================================
# Logging Configuration
# ==============================================================================

LOGGING = {
    "level": "INFO",
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "file": None,  # Set to path for file logging
}


# ==============================================================================
# Helper Functions
# ==============================================================================

def get_config(section: str) -> Dict[str, Any]:
    """
    Get configuration for a specific section.

    Args:
        section: Configuration section name

    Returns:
        Configuration dictionary (empty for unknown sections)
    """
    configs = {
        "system": SYSTEM,
        "simulation": SIMULATION,
        "quadrature": QUADRATURE,
        "monte_carlo": MONTE_CARLO,
        "reproduction": REPRODUCTION,
        "output": OUTPUT_CONFIG,
        "logging": LOGGING,
    }

    return configs.get(section, {})


def default_seed() -> int:
    """
    Resolve the default master seed.

    Returns:
        Seed from the NETQ_SEED environment variable, or the configured default

    Raises:
        ValueError: If NETQ_SEED is set but is not a nonnegative integer
    """
    raw = os.environ.get(SIMULATION["seed_env_var"])
    if raw is None or raw.strip() == "":
        return SIMULATION["default_seed"]

    try:
        seed = int(raw.strip())
    except ValueError:
        raise ValueError(f"{SIMULATION['seed_env_var']} must be an integer, got {raw!r}")

    if seed < 0:
        raise ValueError(f"{SIMULATION['seed_env_var']} must be nonnegative, got {seed}")

    return seed


def setup_logging(level: str = None) -> None:
    """
    Configure root logging from the LOGGING section.

    Args:
        level: Optional override of the configured level name
    """
    handlers = [logging.StreamHandler()]
    if LOGGING["file"]:
        handlers.append(logging.FileHandler(LOGGING["file"]))

    logging.basicConfig(
        level=getattr(logging, (level or LOGGING["level"]).upper()),
        format=LOGGING["format"],
        handlers=handlers,
    )


# ==============================================================================
# Configuration Validation
# ==============================================================================

def validate_config() -> bool:
    """
    Validate configuration values.

    Returns:
        True if configuration is valid
    """
    if SYSTEM["max_workers"] > SYSTEM["cpu_cores"]:
        logger.warning(f"max_workers ({SYSTEM['max_workers']}) exceeds "
                       f"available cores ({SYSTEM['cpu_cores']})")

    if SIMULATION["block_size"] < 1:
        logger.warning(f"block_size ({SIMULATION['block_size']}) must be positive")
        return False

    if QUADRATURE["epsabs"] > REPRODUCTION["analytic_tolerance"]:
        logger.warning(f"Quadrature tolerance ({QUADRATURE['epsabs']}) is looser than "
                       f"the table tolerance ({REPRODUCTION['analytic_tolerance']})")

    return True


# Run validation on import
if __name__ != '__main__':
    validate_config()
