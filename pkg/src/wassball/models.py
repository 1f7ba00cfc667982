"""Small differentiable models to attack, and the synthetic data they are trained on."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import TrainingError
from .grid import GridShape


@runtime_checkable
class LossOracle(Protocol):
    def classify(self, z: np.ndarray) -> int: ...

    def loss_and_grad(self, z: np.ndarray, y: int) -> tuple[float, np.ndarray]: ...


@dataclass
class LinearSoftmaxModel:
    """Multinomial logistic regression on raw pixel masses."""

    weights: np.ndarray  # (classes, n)
    bias: np.ndarray  # (classes,)

    @classmethod
    def zeros(cls, n: int, classes: int = 2) -> "LinearSoftmaxModel":
        return cls(np.zeros((classes, n)), np.zeros(classes))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def logits(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.weights.T + self.bias

    def classify(self, z) -> int:
        return int(np.argmax(self.logits(np.ravel(z))))

    def predict(self, Z) -> np.ndarray:
        return np.argmax(self.logits(np.atleast_2d(Z)), axis=1)

    def loss_and_grad(self, z, y: int):
        z = np.ravel(z)
        logp = log_softmax(self.logits(z))
        p = np.exp(logp)
        p[y] -= 1.0
        return float(-logp[y]), self.weights.T @ p

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}


@dataclass
class QuadraticLoss:
    """``-1/2 |z - target|^2``: maximising it is the image-space projection of ``target``."""

    target: np.ndarray

    def classify(self, z) -> int:
        return 0

    def loss_and_grad(self, z, y: int = 0):
        d = np.ravel(z) - self.target
        return float(-0.5 * d @ d), -d


@dataclass(frozen=True)
class BlobSpec:
    """Two-class images: one Gaussian blob whose centre depends on the class.

    Class 0 is centred ``separation / 2`` pixels left of the image centre and
    class 1 the same distance right; centres jitter by ``jitter`` pixels and
    every pixel gets ``noise`` relative multiplicative noise.  Each image is
    normalised to unit mass.
    """

    shape: GridShape = GridShape(8, 8)
    separation: float = 0.6
    width: float = 1.5
    jitter: float = 0.1
    noise: float = 0.02
    background: float = 0.02


def make_blobs(spec: BlobSpec, count: int, seed: int):
    """Return ``(images (count, n), labels (count,))``."""
    rng = np.random.default_rng(seed)
    c, h, w = spec.shape.array_shape
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    labels = rng.integers(0, 2, size=count)
    images = np.empty((count, spec.shape.n))
    for i, y in enumerate(labels):
        cr = (h - 1) / 2 + rng.normal(0, spec.jitter)
        cc = (w - 1) / 2 + (y - 0.5) * spec.separation + rng.normal(0, spec.jitter)
        blob = np.exp(-((rows - cr) ** 2 + (cols - cc) ** 2) / (2 * spec.width**2)) + spec.background
        img = np.repeat(blob[None], c, axis=0) * (1 + spec.noise * rng.standard_normal((c, h, w)))
        img = np.maximum(img, 0.0)
        images[i] = (img / img.sum()).ravel()
    return images, labels


def train_toy_model(
    spec: BlobSpec = BlobSpec(),
    seed: int = 42,
    samples: int = 1000,
    max_iter: int = 20000,
    target_accuracy: float = 0.95,
    data=None,
) -> LinearSoftmaxModel:
    """Fit a :class:`LinearSoftmaxModel` by full-batch gradient descent.

    Features are tiny (unit-mass images), so the step is taken from the
    curvature bound ``0.5 * |X|_2^2 / N`` of the softmax loss.  Raises
    :class:`TrainingError` if the train accuracy target is not met.
    """
    X, y = data if data is not None else make_blobs(spec, samples, seed)
    N, n = X.shape
    k = int(y.max()) + 1 if y.size else 2
    k = max(k, 2)
    Xa = np.hstack([X, np.ones((N, 1))])
    lipschitz = 0.5 * np.linalg.norm(Xa, 2) ** 2 / N
    step = 1.0 / lipschitz
    theta = np.zeros((k, n + 1))
    onehot = np.eye(k)[y]
    prev = np.inf
    for it in range(max_iter):
        P = softmax(Xa @ theta.T, axis=1)
        grad = (P - onehot).T @ Xa / N
        theta -= step * grad
        if it % 50 == 0:
            loss = -np.mean(np.log(P[np.arange(N), y] + 1e-300))
            acc = np.mean(np.argmax(Xa @ theta.T, axis=1) == y)
            if acc >= target_accuracy and prev - loss < 1e-6 * max(loss, 1e-12):
                break
            prev = loss
    model = LinearSoftmaxModel(theta[:, :n].copy(), theta[:, n].copy())
    acc = float(np.mean(model.predict(X) == y))
    if acc < target_accuracy:
        raise TrainingError(f"train accuracy {acc:.3f} below target {target_accuracy}")
    return model
