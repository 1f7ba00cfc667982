"""Batch attack driver and the feasibility check for stored results."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackConfig, run_attack
from .coupling import BallSpec, Coupling
from .errors import ShapeError, SizeError, WassballError
from .grid import DENSE_CAP, GridShape, build_euclidean_cost
from .io import load_results, result_document, sample_record
from .models import BlobSpec, make_blobs, train_toy_model
from .oracle import wasserstein_exact

log = logging.getLogger(__name__)

HYPERCUBE_TOL = 1e-3


@dataclass(frozen=True)
class DatasetSpec:
    """Synthetic evaluation data: the model is trained on ``train_samples``
    blobs drawn with ``seed`` and attacked on ``samples`` fresh ones."""

    blobs: BlobSpec = BlobSpec()
    samples: int = 100
    train_samples: int = 1000
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "kind": "blobs",
            "samples": self.samples,
            "train_samples": self.train_samples,
            "seed": self.seed,
            "separation": self.blobs.separation,
            "width": self.blobs.width,
            "jitter": self.blobs.jitter,
            "noise": self.blobs.noise,
            "background": self.blobs.background,
        }


def synthetic_task(spec: DatasetSpec):
    """Return ``(model, images, labels)`` for the seeded blob task."""
    model = train_toy_model(spec.blobs, seed=spec.seed, samples=spec.train_samples)
    images, labels = make_blobs(spec.blobs, spec.samples, spec.seed + 1)
    return model, images, labels


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def attack_batch(model, images, labels, shape: GridShape, config: AttackConfig, threads: int | None = None):
    """Attack every image; results come back in input order whatever the pool size."""
    images = np.asarray(images, dtype=float).reshape(len(labels), -1)
    if images.shape[1] != shape.n:
        raise ShapeError(f"images have {images.shape[1]} pixels, shape {shape.array_shape} needs {shape.n}")
    cost = build_euclidean_cost(shape, config.k)

    def one(i):
        log.debug("attacking sample %d", i)
        return i, run_attack(model, images[i], int(labels[i]), cost, config)

    threads = threads or default_threads()
    if threads <= 1 or len(labels) <= 1:
        indexed = [one(i) for i in range(len(labels))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            indexed = list(pool.map(one, range(len(labels))))
    indexed.sort(key=lambda item: item[0])
    return [r for _, r in indexed]


def attack_document(results, config: AttackConfig, shape: GridShape, dataset: dict | None = None,
                    store_couplings: bool = True) -> dict:
    records = [sample_record(i, r, store_couplings) for i, r in enumerate(results)]
    cfg = config.to_dict()
    if dataset is not None:
        cfg["dataset"] = dataset
    return result_document(cfg, shape.to_dict(), records)


@dataclass
class SampleCheck:
    index: int
    wasserstein: float | None
    delta: float
    max_pixel: float
    mass_above_one: float
    budget_ok: bool
    hypercube_ok: bool
    coupling_checked: bool
    problems: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class VerifyReport:
    samples: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def budget_violations(self) -> int:
        return sum(not s.budget_ok for s in self.samples)

    @property
    def hypercube_violations(self) -> int:
        return sum(not s.hypercube_ok for s in self.samples)

    @property
    def ok(self) -> bool:
        return self.budget_violations == 0 and self.hypercube_violations == 0

    def to_dict(self) -> dict:
        return {
            "samples": [s.to_dict() for s in self.samples],
            "warnings": list(self.warnings),
            "budget_violations": self.budget_violations,
            "hypercube_violations": self.hypercube_violations,
            "ok": self.ok,
        }


def verify_document(doc: dict, budget_tol: float = 1e-6, hypercube_tol: float = HYPERCUBE_TOL,
                    cap: int = DENSE_CAP) -> VerifyReport:
    """Recompute the exact distance, the pixel bounds and (when stored) the plan invariants.

    ``budget_tol`` is relative to the total mass of each clean image.
    """
    shape = GridShape(int(doc["shape"]["width"]), int(doc["shape"]["height"]), int(doc["shape"].get("channels", 1)))
    epsilon = float(doc["config"]["epsilon"])
    cost = build_euclidean_cost(shape, int(doc["config"]["k"]))
    report = VerifyReport()
    missing = 0
    for sample in doc["samples"]:
        x = np.asarray(sample["x"], dtype=float)
        z = np.asarray(sample["z"], dtype=float)
        delta = epsilon * float(x.sum())
        slack = budget_tol * float(x.sum())
        problems = []
        try:
            w = wasserstein_exact(x, z, cost, cap=cap)
        except SizeError as exc:
            w = None
            report.warnings.append(f"sample {sample['index']}: {exc}")
        except WassballError as exc:
            w = float("inf")
            problems.append(f"target not reachable: {exc}")
        budget_ok = w is None or w <= delta + slack
        if not budget_ok:
            problems.append(f"W = {w:.9g} exceeds budget {delta:.9g}")
        checked = "coupling" in sample
        if checked:
            Pi = Coupling(cost, np.asarray(sample["coupling"], dtype=float))
            found = Pi.check(x, delta, budget_tol=slack)
            if np.abs(Pi.target - z).sum() > 1e-9 * max(float(x.sum()), 1e-300):
                found.append("stored image does not match the plan's column sums")
            if found:
                budget_ok = False
                problems.extend(found)
        else:
            missing += 1
        max_pixel = float(z.max()) if z.size else 0.0
        hypercube_ok = max_pixel <= 1.0 + hypercube_tol and float(z.min(initial=0.0)) >= -hypercube_tol
        if not hypercube_ok:
            problems.append(f"pixel value {max_pixel:.6g} outside [0, 1]")
        total = float(x.sum())
        above = float(np.sum(np.maximum(z - 1.0, 0.0)) / total) if total > 0 else 0.0
        report.samples.append(SampleCheck(int(sample["index"]), w, delta, max_pixel, above,
                                          budget_ok, hypercube_ok, checked, problems))
    if missing:
        report.warnings.append(f"{missing} sample(s) carry no coupling; only the image-space checks ran")
    return report


def verify_file(path, **kwargs) -> VerifyReport:
    return verify_document(load_results(path), **kwargs)


def project_images(a, b, shape: GridShape, config: AttackConfig):
    """Project image ``b`` onto the ball of radius ``config.epsilon`` around ``a``.

    Returns ``(z, W(a, b), W(a, z))`` with the distances from the exact solver.
    """
    from .models import QuadraticLoss

    cost = build_euclidean_cost(shape, config.k)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    result = run_attack(QuadraticLoss(b), a, 0, cost, config)
    return result.z, wasserstein_exact(a, b, cost), wasserstein_exact(a, result.z, cost), result


def ball_for(x, epsilon: float, shape: GridShape, k: int) -> BallSpec:
    return BallSpec(np.asarray(x, dtype=float).ravel(), epsilon, build_euclidean_cost(shape, k))
