"""Single-node network classifiers trained under the uniform (max-abs) loss.

The uniform arm bisects the optimal loss value, deciding each level with a
linear feasibility solve; a least-squares arm trained by gradient descent
serves as the comparison.
"""

from .baseline import DivergenceError, GdConfig, mse_gradient, train_mse
from .bisection import BisectionConfig, BisectionReport, TraceStep, \
    initial_bounds, train_uniform
from .data import DataError, DegenerateRemovalError, OutlierSpec, SubsetSpec, \
    build_subset, generate_synthetic, read_ucr, remove_outliers, write_ucr
from .experiment import ConfusionMatrix, ExperimentConfig, ExperimentReport, \
    classify, evaluate, load_config, run_experiment
from .feasibility import ConstraintMatrix, FeasibilityResult, IntervalConstraint, \
    LinearSolverError, build_constraints, solve_feasibility
from .model import Activation, Dataset, LeakyReLU, Sample, WeightVector, \
    activate, activate_inverse, forward, is_quasiconvex_on_segment, mse_loss, \
    uniform_loss, uniform_loss_maxrep

__version__ = "0.1.0"
