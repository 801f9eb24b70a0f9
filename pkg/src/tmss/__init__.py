"""Simulation of two-mode squeezing between atomic ensembles coupled through a lossy cavity."""
from .analytic import bogoliubov, evolve_analytic, tmsv_amplitudes, tpi_map, vacuum_moments
from .errors import (ConvergenceFailure, InvalidArgument, NumericalFailure, OutOfRange,
                     StepSizeTooLarge, TMSSError, UnsupportedRegime)
from .evolution import EvolutionConfig, TimeSeries, grid_config
from .fock import (BlockDensity, CompositeSpace, atomic_difference_blocks, basis_state,
                   block_trace_distance, make_space, trace_distance)
from .gaussian import GaussianState, evolve_gaussian, thermal_cavity_state, vacuum_state
from .master import converge, evolve_me
from .mcwf import TrajectoryConfig, evolve_ensemble, evolve_trajectory, trajectory_stream
from .model import (ModelParams, PhysicalParams, build_hamiltonian, derive_couplings, make_model,
                    model_from_ratio, stark_balance)
from .observables import ObservableRecord, record

__version__ = "0.1.0"
