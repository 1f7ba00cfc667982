"""Wasserstein-ball adversarial attacks via exact dual projection and a dual LMO."""

from .attack import AttackConfig, AttackResult, fw_attack, lift_gradient, pgd_attack, run_attack
from .capproj import capacity_project
from .coupling import BallSpec, Coupling, DualBracket
from .dualproj import project_ball
from .dykstra import dykstra_project, project_halfspace
from .grid import GridShape, LocalCost, build_cost, build_euclidean_cost
from .lmo import LmoConfig, entropic_lmo, exact_dual_solve
from .models import LinearSoftmaxModel, train_toy_model
from .oracle import lmo_exact, wasserstein_exact
from .simplex import project_rows, project_simplex

__all__ = [
    "AttackConfig",
    "AttackResult",
    "BallSpec",
    "Coupling",
    "DualBracket",
    "GridShape",
    "LinearSoftmaxModel",
    "LmoConfig",
    "LocalCost",
    "build_cost",
    "build_euclidean_cost",
    "capacity_project",
    "dykstra_project",
    "entropic_lmo",
    "exact_dual_solve",
    "fw_attack",
    "lift_gradient",
    "lmo_exact",
    "pgd_attack",
    "project_ball",
    "project_halfspace",
    "project_rows",
    "project_simplex",
    "run_attack",
    "train_toy_model",
    "wasserstein_exact",
]
