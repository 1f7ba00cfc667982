"""Wasserstein-constrained attacks in coupling space.

Both attacks optimise over the plan ``Pi`` that carries the clean image
``x`` (its row sums) to the adversarial image ``z = Pi^T 1`` (its column
sums), keeping ``<Pi, C> <= delta``.  PGD takes a gradient step on ``Pi``
and projects back exactly; Frank-Wolfe moves towards the entropic LMO
solution with step ``2 / (t + 1)``.

With ``accelerate=True`` PGD uses Nesterov extrapolation (restarted whenever
the loss drops) and Frank-Wolfe feeds the LMO a running average of the
gradients, weighted by the same ``2 / (t + 1)`` schedule.  Both are off by
default; they matter for long, high-precision runs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .capproj import capacity_project
from .coupling import BallSpec, Coupling
from .dualproj import DEFAULT_TOL, project_ball
from .errors import InvalidParameterError, NumericalError
from .grid import LocalCost
from .lmo import DEFAULT_GAMMA, LmoConfig, entropic_lmo
from .models import LossOracle

log = logging.getLogger(__name__)

METHODS = ("pgd-dual-proj", "fw-dual-lmo")


@dataclass(frozen=True)
class AttackConfig:
    method: str = "pgd-dual-proj"
    epsilon: float = 0.1
    iterations: int = 30
    step_size: float = 0.1
    gamma: float = DEFAULT_GAMMA
    k: int = 5
    post_process: bool = False
    seed: int = 0
    tol: float = DEFAULT_TOL
    normalize: bool = True
    accelerate: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"unknown attack method {self.method!r}")
        if not self.epsilon >= 0:
            raise InvalidParameterError("epsilon must be nonnegative")
        if self.iterations < 0:
            raise InvalidParameterError("iterations must be nonnegative")
        if self.method == "pgd-dual-proj" and not self.step_size > 0:
            raise InvalidParameterError("PGD needs a positive step size")
        if self.method == "fw-dual-lmo" and not self.gamma > 0:
            raise InvalidParameterError("Frank-Wolfe needs a positive gamma")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AttackResult:
    label: int
    clean_label: int
    adversarial_label: int
    initial_loss: float
    final_loss: float
    transport_cost: float
    delta: float
    max_pixel: float
    mass_above_one: float
    dual_iterations: list = field(default_factory=list)
    wasserstein: float | None = None
    x: np.ndarray | None = field(default=None, repr=False)
    z: np.ndarray | None = field(default=None, repr=False)
    coupling: Coupling | None = field(default=None, repr=False)
    trace: list = field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.adversarial_label != self.label


def lift_gradient(grad_z, cost: LocalCost) -> np.ndarray:
    """Gradient with respect to ``Pi`` of a function of ``Pi^T 1``: entry ``(i, j)`` is ``grad_z[j]``."""
    grad_z = np.asarray(grad_z, dtype=float).ravel()
    if grad_z.shape != (cost.n,):
        raise ValueError(f"gradient has {grad_z.size} entries, grid has {cost.n}")
    return cost.gather(grad_z)


def normalize_gradient(block: np.ndarray) -> np.ndarray:
    """Divide by the largest absolute entry; a zero block is returned unchanged."""
    scale = float(np.max(np.abs(block))) if block.size else 0.0
    if scale == 0.0:
        return block
    return block / scale


def mass_above_one(z: np.ndarray, x: np.ndarray) -> float:
    """Fraction of the total mass that sits above 1 in some pixel."""
    total = float(np.sum(x))
    return float(np.sum(np.maximum(z - 1.0, 0.0)) / total) if total > 0 else 0.0


def _evaluate(model: LossOracle, z, y):
    value, grad = model.loss_and_grad(z, y)
    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError(f"model returned a non-finite loss or gradient (loss={value!r})")
    return value, grad


def _direction(grad, cost: LocalCost, config: AttackConfig) -> np.ndarray:
    block = lift_gradient(grad, cost)
    return normalize_gradient(block) if config.normalize else block


def _run(model: LossOracle, x, y: int, cost: LocalCost, config: AttackConfig, step, callback=None) -> AttackResult:
    x = np.asarray(x, dtype=float).ravel()
    Pi = Coupling.identity(cost, x)
    initial_loss, grad = _evaluate(model, x, y)
    clean_label = model.classify(x)
    iters: list[int] = []
    trace = []
    if config.epsilon > 0 and config.iterations > 0:
        ball = BallSpec(x, config.epsilon, cost)
        loss = initial_loss
        for t in range(1, config.iterations + 1):
            Pi, n_dual = step(t, Pi, loss, grad, ball)
            iters.append(n_dual)
            z = Pi.target
            loss, grad = _evaluate(model, z, y)
            trace.append((t, loss, int(model.classify(z) == y)))
            if callback is not None:
                callback(t, Pi, ball)
        if config.post_process:
            Pi = capacity_project(Pi.block, ball)
    z = Pi.target
    final_loss, _ = _evaluate(model, z, y)
    delta = config.epsilon * float(x.sum())
    return AttackResult(
        label=int(y),
        clean_label=int(clean_label),
        adversarial_label=int(model.classify(z)),
        initial_loss=initial_loss,
        final_loss=final_loss,
        transport_cost=Pi.transport_cost,
        delta=delta,
        max_pixel=float(z.max()),
        mass_above_one=mass_above_one(z, x),
        dual_iterations=iters,
        x=x,
        z=z,
        coupling=Pi,
        trace=trace,
    )


def pgd_attack(model: LossOracle, x, y: int, cost: LocalCost, config: AttackConfig, callback=None) -> AttackResult:
    """Projected gradient ascent on the coupling, exact dual projection each step."""
    momentum = {"prev": None, "t": 1.0}

    def project(G, ball):
        out = project_ball(G, ball, tol=config.tol)
        return out, out.bracket.iterations

    def step(t, Pi, loss, grad, ball):
        if not config.accelerate:
            return project(Pi.block + config.step_size * _direction(grad, cost, config), ball)
        prev, s = momentum["prev"], momentum["t"]
        s_next = 0.5 * (1 + math.sqrt(1 + 4 * s * s))
        if prev is None:
            Y, y_grad = Pi.block, grad
        else:
            Y = Pi.block + ((s - 1) / s_next) * (Pi.block - prev)
            _, y_grad = _evaluate(model, cost.column_sums(Y), y)
        out, n_dual = project(Y + config.step_size * _direction(y_grad, cost, config), ball)
        new_loss, _ = _evaluate(model, out.target, y)
        if new_loss < loss and prev is not None:
            # momentum overshot: restart with a plain step from Pi
            out, extra = project(Pi.block + config.step_size * _direction(grad, cost, config), ball)
            n_dual += extra
            momentum["prev"], momentum["t"] = None, 1.0
        else:
            momentum["prev"], momentum["t"] = Pi.block, s_next
        return out, n_dual

    return _run(model, x, y, cost, config, step, callback)


def fw_attack(model: LossOracle, x, y: int, cost: LocalCost, config: AttackConfig, callback=None) -> AttackResult:
    """Frank-Wolfe ascent with the entropic LMO and step ``2 / (t + 1)``."""
    lmo_config = LmoConfig(gamma=config.gamma, tol=config.tol)
    average = {"block": None}

    def step(t, Pi, loss, grad, ball):
        eta = 2.0 / (t + 1)
        block = lift_gradient(grad, cost)
        if config.accelerate:
            avg = average["block"]
            block = block if avg is None else (1 - eta) * avg + eta * block
            average["block"] = block
        if config.normalize:
            block = normalize_gradient(block)
        vertex, _ = entropic_lmo(-block, ball, lmo_config)
        out = Coupling(cost, (1 - eta) * Pi.block + eta * vertex.block)
        return out, vertex.bracket.iterations

    return _run(model, x, y, cost, config, step, callback)


def run_attack(model: LossOracle, x, y: int, cost: LocalCost, config: AttackConfig, callback=None) -> AttackResult:
    if config.method == "pgd-dual-proj":
        return pgd_attack(model, x, y, cost, config, callback)
    return fw_attack(model, x, y, cost, config, callback)
