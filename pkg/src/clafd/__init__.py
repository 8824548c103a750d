"""Closed-loop active fault diagnosis for linear Gaussian candidate models.

Each time step the library updates per-model Kalman predictions and Bayesian
model probabilities from the latest measurement, then designs the next input
by minimizing a Bhattacharyya-coefficient upper bound on the predicted
misdiagnosis probability, attaching a concavity certificate where the bound
minimization is provably a concave program.
"""

from . import _kernels
from .beliefs import (BeliefState, decide, error_probability, gaussian_loglik,
                      update_beliefs)
from .bhattacharyya import (PairQuadratic, all_pairs, bhatt_coefficient,
                            bhatt_distance, pair_quadratic, prefix_pair_sets,
                            taylor_form, taylor_value, weighted_bound,
                            weighted_bound_grad)
from .concavity import (ConcavitySpectrum, RootBracket, check_energy_ball,
                        check_polytope, concave_at, min_norm_boundary, spectrum)
from .design import (BoxRatePolytope, DesignResult, EnergyBallProduct,
                     design_bc, design_bd, design_ol, design_qta, design_sbc,
                     enumerate_vertices, fw_concave_min)
from .estimation import FilterState, OutputPrediction, kf_step, predict_outputs
from .harness import (ExperimentConfig, TrialRecord, concavity_sweep,
                      run_monte_carlo, run_trial, simulate_step)
from .models import (ControllerGains, LiftedModel, NoiseModel, StateSpaceModel,
                     build_lifted, close_loop, dc_feedforward_gain, place_poles)
from .scenarios import build_scenario, load_scenario_json

__version__ = "0.1.0"

kernel_backend = _kernels.backend
