"""Exact dynamics of a spin-1/2 system coupled to a spin-1/2 bath."""

__version__ = "0.1.0"

from .experiments import (ExperimentConfig, Seeds, load_config, mc_expectation,
                          run_evolution, save_config, scaling_sweep,
                          time_average, track_components)
from .model import (Bond, ModelSpec, RngStreams, Stream, add_all_to_all_env,
                    add_env_swbs, add_se_swbs, build_ring, load_model,
                    replace_random_env_bonds, save_model, spectral_bound)
from .observables import (ReducedDensityMatrix, SystemEigenbasis, delta_and_b,
                          hermitian_eigendecomposition, offdiag_components,
                          predicted_delta, predicted_sigma,
                          predicted_sigma_isolated, purity_report, reduce,
                          sigma, to_energy_basis)
from .propagation import (ChebyshevPlan, apply_hamiltonian, chebyshev_step,
                          dense_evolve_oracle, make_plan)
from .states import (StateVector, basis_product_state, load_state,
                     random_hypersphere_state, save_state, tensor, udud_y)

__all__ = [
    "__version__",
    "Bond", "ModelSpec", "RngStreams", "Stream",
    "build_ring", "add_env_swbs", "add_se_swbs", "add_all_to_all_env",
    "replace_random_env_bonds", "spectral_bound", "save_model", "load_model",
    "StateVector", "random_hypersphere_state", "basis_product_state",
    "tensor", "udud_y", "save_state", "load_state",
    "ChebyshevPlan", "apply_hamiltonian", "make_plan", "chebyshev_step",
    "dense_evolve_oracle",
    "ReducedDensityMatrix", "SystemEigenbasis", "hermitian_eigendecomposition",
    "reduce", "to_energy_basis", "sigma", "delta_and_b", "purity_report",
    "predicted_sigma", "predicted_sigma_isolated", "predicted_delta",
    "offdiag_components",
    "ExperimentConfig", "Seeds", "run_evolution", "track_components",
    "time_average", "scaling_sweep", "mc_expectation", "save_config",
    "load_config",
]
