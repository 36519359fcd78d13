"""Deterministic simulator for decentralized stochastic optimization over
noisy communication links: attenuated gradient tracking, baselines, and
executable verification of the convergence analysis."""

from . import _kernels
from .algorithms import (AlgParams, AlgState, baseline_step, contraction_horizon,
                         convergence_bound, gamma_schedule, icgt_step, init_state,
                         max_step_size, step)
from .channels import (ChannelModel, awgn, empirical_moments, exact, prob_quant,
                       transmit, transmit_block, variance_bound, vector_variance_bound)
from .config import ExperimentConfig, load_config, parse_config
from .datasets import Dataset, ingest_mnist_idx, synth_dataset
from .graphs import (MixingMatrix, Topology, build_topology, metropolis_weights,
                     spectrum)
from .objectives import (GradientOracle, LogisticObjective, QuadraticObjective,
                         estimate_constants, heterogeneity_chi2, local_value_grad,
                         partition_dataset, random_quadratic, sample_gradient,
                         sample_gradient_block, solve_reference)
from .runner import (RunRecord, build_problem, emit_plot_data, grid_search_alpha,
                     run_experiment, sweep)
from .verification import (averaging_noise_mc, error_propagator, power_difference_max_norm,
                           propagator_power, recursion_residual, verify_contraction,
                           windowed_recursion_check)

__version__ = "0.1.0"

kernel_backend = _kernels.backend_name
