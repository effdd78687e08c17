"""Glauber-Kawasaki interface laboratory.

Thin wrapper over the compiled core: lattice dynamics with Kawasaki exchanges
and Glauber flips, the reaction-diffusion scaling limits, traveling-wave
machinery, and the certificate chain for the sharp-interface limit.
"""

from ._core import (
    block_densities,
    cubic_speed,
    default_config,
    design_rates,
    exact_distribution,
    profile_field,
    reaction_of_rates,
    run_certificates,
    run_hydrodynamic,
    run_pde_ladder,
    solve_pe,
    solve_pnk,
    validate_config,
    wave_profile,
    worker_count,
)

__version__ = "0.1.0"

__all__ = [
    "block_densities",
    "cubic_speed",
    "default_config",
    "design_rates",
    "exact_distribution",
    "profile_field",
    "reaction_of_rates",
    "run_certificates",
    "run_hydrodynamic",
    "run_pde_ladder",
    "solve_pe",
    "solve_pnk",
    "validate_config",
    "wave_profile",
    "worker_count",
]
