"""Polynomial navigation functions for 3-D spherical workspaces.

Library + CLI for building navigation potentials over spherical and
capped-cylindrical obstacles, merging intersecting obstacles with
p-Rvachev unions, analyzing critical points, transforming spherical-robot
problems to point-robot ones, and simulating damped gradient descent.
"""

from ._backend import backend_name
from .geometry import Obstacle, beta, beta_grad, beta_hess
from .merge import MergedObstacle, rvachev_union, rvachev_grad, merged_beta, \
    merged_grad, merged_hess
from .field import NavSpec, FieldEval, gamma_d, gamma_grad, beta_product, \
    beta_product_grad, hessian_at_critical
from .scene import Workspace, Scene, SimConfig, BallJoint, ValidationReport, \
    parse_scene, serialize_scene, load_scene, validate
from .simulate import Trajectory, simulate, simulate_batch
from .analysis import CriticalPointReport, EpsilonBounds, \
    find_critical_points, no_local_minima_sweep, q_i, q_i_max_bound, \
    epsilon_bounds, n_of_eps
from .transform import TransformResult, transform, joint_expansion_factor, \
    evolute_containment_angle, failure_probabilities

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "Obstacle", "beta", "beta_grad", "beta_hess",
    "MergedObstacle", "rvachev_union", "rvachev_grad", "merged_beta",
    "merged_grad", "merged_hess",
    "NavSpec", "FieldEval", "gamma_d", "gamma_grad", "beta_product",
    "beta_product_grad", "hessian_at_critical",
    "Workspace", "Scene", "SimConfig", "BallJoint", "ValidationReport",
    "parse_scene", "serialize_scene", "load_scene", "validate",
    "Trajectory", "simulate", "simulate_batch",
    "CriticalPointReport", "EpsilonBounds", "find_critical_points",
    "no_local_minima_sweep", "q_i", "q_i_max_bound", "epsilon_bounds",
    "n_of_eps",
    "TransformResult", "transform", "joint_expansion_factor",
    "evolute_containment_angle", "failure_probabilities",
    "__version__",
]
