"""
LAA Identification Toolkit
==========================

Simulation and identification of IoT load-altering attacks on power grids:
- Grid case loading and equilibrium computation
- Attacked swing dynamics with breach detection
- PMU measurement synthesis with Gaussian / Logistic noise
- Sparse-regression, physics-informed neural network and UKF identifiers
- Monte Carlo benchmark harness and command-line interface
"""

# Grid and dynamics
from .grid_model import GridModel, load_case, save_case, equilibrium, list_cases
from .dynamics import (
    AttackConfig,
    SwingDynamics,
    SimulationSettings,
    Trajectory,
    BreachReport,
    integrate,
    detect_breach,
    validate_budget,
)
from .pmu import MeasurementSet, NoiseFamily, sample, add_noise, measure

# Identifiers
from .sparse_regression import LassoSettings, SparseSolution, assemble, lasso, identify_all
from .pinn import PinnSettings, PinnProblem, LocalPinnProblem, TrainingStatus, train, identify_pinn
from .ukf import UkfSettings, UnscentedKalmanFilter, run_ukf

# Evaluation
from .metrics import EstimateResult, eta1, eta2
from .scenarios import Scenario, get_scenario, list_scenarios
from .bench import BenchSettings, ScenarioReport, run_scenario

from .exceptions import LaaIdentError

# Public API
__all__ = [
    # Grid and dynamics
    'GridModel',
    'load_case',
    'save_case',
    'equilibrium',
    'list_cases',
    'AttackConfig',
    'SwingDynamics',
    'SimulationSettings',
    'Trajectory',
    'BreachReport',
    'integrate',
    'detect_breach',
    'validate_budget',
    'MeasurementSet',
    'NoiseFamily',
    'sample',
    'add_noise',
    'measure',

    # Identifiers
    'LassoSettings',
    'SparseSolution',
    'assemble',
    'lasso',
    'identify_all',
    'PinnSettings',
    'PinnProblem',
    'LocalPinnProblem',
    'TrainingStatus',
    'train',
    'identify_pinn',
    'UkfSettings',
    'UnscentedKalmanFilter',
    'run_ukf',

    # Evaluation
    'EstimateResult',
    'eta1',
    'eta2',
    'Scenario',
    'get_scenario',
    'list_scenarios',
    'BenchSettings',
    'ScenarioReport',
    'run_scenario',

    'LaaIdentError',
]
