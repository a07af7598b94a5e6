"""Small classifiers on the unit cube and projected-gradient attacks against them.

The attack ascends the margin loss max_{j≠c} s_j(x) - s_c(x) and projects each
iterate onto {‖δ‖_p ≤ ε} ∩ [0,1]ⁿ. It stops as soon as the prediction leaves
the true class. A susceptibility curve runs one warm-started attack chain per
point across an increasing ε grid, so a point fooled at some ε stays fooled
at every larger ε.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .bounds import NormOrder
from .errors import CapabilityError, DomainError

logger = logging.getLogger(__name__)

FEASIBILITY_RTOL = 1e-9
MAX_PROJECTION_ROUNDS = 10
MAX_HALVINGS = 40
VERTEX_LOW, VERTEX_HIGH = 0.25, 0.75
TRUNCATION = 2.0


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


# -- data -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.points.ndim != 2 or self.labels.shape != (self.points.shape[0],):
            raise DomainError("points must be (count, n) with one label per point")
        if self.n_classes < 1:
            raise DomainError(f"n_classes must be >= 1, got {self.n_classes}")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def split(self, test_fraction: float = 0.25, seed: int = 0) -> Tuple["Dataset", "Dataset"]:
        if not (0.0 <= test_fraction <= 1.0):
            raise DomainError(f"test_fraction must lie in [0, 1], got {test_fraction}")
        order = _generator(seed, 1).permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        test, train = order[:n_test], order[n_test:]
        return (
            Dataset(self.points[train], self.labels[train], self.n_classes),
            Dataset(self.points[test], self.labels[test], self.n_classes),
        )


def _class_centers(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    if n < 63 and m > 2 ** n:
        return rng.uniform(0.2, 0.8, size=(m, n))
    if n <= 20:
        codes = rng.choice(2 ** n, size=m, replace=False)
        bits = (codes[:, None] >> np.arange(n)[None, :]) & 1
    else:
        bits = rng.integers(0, 2, size=(m, n))
        while len({row.tobytes() for row in bits}) < m:
            bits = rng.integers(0, 2, size=(m, n))
    return np.where(bits == 1, VERTEX_HIGH, VERTEX_LOW).astype(float)


def synth_dataset(n: int, m: int, spread: float, count: int, seed: int) -> Dataset:
    """count points around m class centers, label i mod m.

    Centers are distinct vertices of {0.25, 0.75}ⁿ when there are enough of
    them. Each point adds spread times a standard normal truncated at ±2 per
    coordinate and is clipped to the cube.
    """
    if int(n) != n or n < 1 or int(m) != m or m < 1:
        raise DomainError(f"n and m must be positive integers, got n={n}, m={m}")
    if not (math.isfinite(spread) and spread > 0.0):
        raise DomainError(f"spread must be > 0, got {spread}")
    if int(count) != count or count < 0:
        raise DomainError(f"count must be a nonnegative integer, got {count}")
    rng = _generator(seed, 0)
    centers = _class_centers(int(n), int(m), rng)
    labels = np.arange(count) % m
    noise = stats.truncnorm.rvs(-TRUNCATION, TRUNCATION, size=(count, n), random_state=rng) if count else np.zeros((0, n))
    points = np.clip(centers[labels] + spread * noise, 0.0, 1.0)
    return Dataset(points, labels, int(m))


# -- models -----------------------------------------------------------------------


class Classifier(Protocol):
    n_classes: int

    def scores(self, x: np.ndarray) -> np.ndarray:
        ...

    def margin_gradient(self, x: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
        ...

    def loss_and_gradients(self, dataset: Dataset) -> Tuple[float, Dict[str, np.ndarray]]:
        ...

    def parameters(self) -> Dict[str, np.ndarray]:
        ...


def predict(model: Classifier, x: np.ndarray):
    """argmax of the scores, lowest class index on ties; an int for a single point."""
    s = model.scores(np.atleast_2d(x))
    labels = np.argmax(s, axis=1)
    return int(labels[0]) if np.ndim(x) == 1 else labels


def accuracy(model: Classifier, dataset: Dataset) -> float:
    if len(dataset) == 0:
        return 0.0
    return float(np.mean(predict(model, dataset.points) == dataset.labels))


def _cross_entropy(scores: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the scores."""
    log_probs = scores - special.logsumexp(scores, axis=1, keepdims=True)
    count = scores.shape[0]
    loss = -float(np.mean(log_probs[np.arange(count), labels]))
    dscores = np.exp(log_probs)
    dscores[np.arange(count), labels] -= 1.0
    return loss, dscores / count


def _runner_up(s: np.ndarray, label: int) -> int:
    rivals = s.copy()
    rivals[label] = -np.inf
    return int(np.argmax(rivals))


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Affine scores W x + b, one row of W per class."""

    weights: np.ndarray
    biases: np.ndarray
    loss_history: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DomainError("weights must be (m, n) and biases (m,)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise DomainError("model parameters must be finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.biases

    def margin_gradient(self, x: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
        if self.n_classes == 1:
            return -math.inf, np.zeros_like(x)
        s = self.scores(x)
        j = _runner_up(s, label)
        return float(s[j] - s[label]), self.weights[j] - self.weights[label]

    def loss_and_gradients(self, dataset: Dataset) -> Tuple[float, Dict[str, np.ndarray]]:
        loss, ds = _cross_entropy(self.scores(dataset.points), dataset.labels)
        return loss, {"weights": ds.T @ dataset.points, "biases": ds.sum(axis=0)}

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"weights": self.weights, "biases": self.biases}


@dataclass(frozen=True, eq=False)
class Mlp1Model:
    """One tanh hidden layer: s(x) = w2 · tanh(w1 x + b1) + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    loss_history: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        h = self.w1.shape[0]
        if self.b1.shape != (h,) or self.w2.shape[1] != h or self.b2.shape != (self.w2.shape[0],):
            raise DomainError("inconsistent layer shapes")
        if not all(np.all(np.isfinite(a)) for a in self.parameters().values()):
            raise DomainError("model parameters must be finite")

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]

    def _hidden(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.w1.T + self.b1)

    def scores(self, x: np.ndarray) -> np.ndarray:
        return self._hidden(x) @ self.w2.T + self.b2

    def margin_gradient(self, x: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
        if self.n_classes == 1:
            return -math.inf, np.zeros_like(x)
        a = self._hidden(x)
        s = a @ self.w2.T + self.b2
        j = _runner_up(s, label)
        upstream = (self.w2[j] - self.w2[label]) * (1.0 - a * a)
        return float(s[j] - s[label]), upstream @ self.w1

    def loss_and_gradients(self, dataset: Dataset) -> Tuple[float, Dict[str, np.ndarray]]:
        a = self._hidden(dataset.points)
        loss, ds = _cross_entropy(a @ self.w2.T + self.b2, dataset.labels)
        dz = (ds @ self.w2) * (1.0 - a * a)
        return loss, {
            "w1": dz.T @ dataset.points,
            "b1": dz.sum(axis=0),
            "w2": ds.T @ a,
            "b2": ds.sum(axis=0),
        }

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def _gradient_descent(model, dataset: Dataset, epochs: int, lr: float):
    """Full-batch descent; a step that raises the loss is retried with half the rate."""
    if len(dataset) == 0:
        raise DomainError("cannot train on an empty dataset")
    if epochs < 0 or not lr > 0.0:
        raise DomainError(f"need epochs >= 0 and lr > 0, got {epochs}, {lr}")
    loss, grads = model.loss_and_gradients(dataset)
    history = [loss]
    for epoch in range(epochs):
        for _ in range(MAX_HALVINGS):
            params = {k: v - lr * grads[k] for k, v in model.parameters().items()}
            candidate = replace(model, **params)
            new_loss, new_grads = candidate.loss_and_gradients(dataset)
            if new_loss <= loss:
                break
            lr /= 2.0
            logger.debug("epoch %d: loss rose to %.6g, halving lr to %.3g", epoch, new_loss, lr)
        else:
            logger.debug("epoch %d: no descent step found, stopping", epoch)
            break
        model, loss, grads = candidate, new_loss, new_grads
        history.append(loss)
    return replace(model, loss_history=tuple(history))


def train_linear(dataset: Dataset, epochs: int = 300, lr: float = 1.0, seed: int = 0) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent."""
    if len(dataset) == 0:
        raise DomainError("cannot train on an empty dataset")
    rng = _generator(seed, 2)
    model = LinearModel(0.01 * rng.standard_normal((dataset.n_classes, dataset.n)), np.zeros(dataset.n_classes))
    return _gradient_descent(model, dataset, epochs, lr)


def train_mlp1(dataset: Dataset, hidden: int = 16, epochs: int = 300, lr: float = 0.5, seed: int = 0) -> Mlp1Model:
    if len(dataset) == 0:
        raise DomainError("cannot train on an empty dataset")
    if hidden < 1:
        raise DomainError(f"hidden width must be >= 1, got {hidden}")
    rng = _generator(seed, 3)
    model = Mlp1Model(
        rng.standard_normal((hidden, dataset.n)) / math.sqrt(dataset.n),
        np.zeros(hidden),
        rng.standard_normal((dataset.n_classes, hidden)) / math.sqrt(hidden),
        np.zeros(dataset.n_classes),
    )
    return _gradient_descent(model, dataset, epochs, lr)


def linear_margin_distance(model: LinearModel, x: np.ndarray, label: int) -> float:
    """ℓ2 distance from x to the nearest decision boundary of its class, ignoring the cube."""
    if predict(model, x) != label:
        return 0.0
    s = model.scores(x)
    best = math.inf
    for j in range(model.n_classes):
        if j == label:
            continue
        gap = s[label] - s[j]
        dw = np.linalg.norm(model.weights[label] - model.weights[j])
        if dw == 0.0:
            if gap <= 0.0:
                return 0.0
            continue
        best = min(best, max(0.0, gap) / dw)
    return float(best)


# -- attack -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AttackResult:
    adversarial: Optional[np.ndarray]
    success: bool
    point: np.ndarray


def _check_attack_norm(norm: NormOrder) -> None:
    if norm.is_zero or norm.is_infinity or norm.p == 2.0:
        return
    raise CapabilityError(f"PGD supports l0, l2 and linf, not {norm}")


def project(x: np.ndarray, candidate: np.ndarray, norm: NormOrder, eps: float) -> np.ndarray:
    """Project candidate onto {‖δ‖_p ≤ ε} ∩ [0,1]ⁿ around x (p = 2 or ∞)."""
    if norm.is_infinity:
        return np.clip(x + np.clip(candidate - x, -eps, eps), 0.0, 1.0)
    point = candidate
    for _ in range(MAX_PROJECTION_ROUNDS):
        delta = point - x
        size = np.linalg.norm(delta)
        if size > eps:
            delta *= eps / size
        point = np.clip(x + delta, 0.0, 1.0)
        if np.linalg.norm(point - x) <= eps * (1.0 + FEASIBILITY_RTOL):
            break
    return point


def _sparse_step(x: np.ndarray, grad: np.ndarray, k: int) -> np.ndarray:
    """Move the k coordinates with the largest |grad| to the box face the gradient points at."""
    point = x.copy()
    if k <= 0:
        return point
    k = min(k, x.shape[0])
    idx = np.argsort(-np.abs(grad), kind="stable")[:k]
    point[idx] = np.where(grad[idx] > 0.0, 1.0, 0.0)
    return point


def pgd_attack(
    model: Classifier,
    x: np.ndarray,
    label: int,
    norm: NormOrder,
    eps: float,
    steps: int = 100,
    step_size: Optional[float] = None,
    seed: int = 0,
    start: Optional[np.ndarray] = None,
    random_start: bool = False,
) -> AttackResult:
    """Margin-loss PGD inside the ε-ball intersected with the cube.

    ``start`` warm-starts from an earlier iterate (projected first);
    ``random_start`` begins from a uniform point of the ℓ∞ ball or a random
    direction in the ℓ2 ball, drawn from ``seed``.
    """
    _check_attack_norm(norm)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise DomainError("attack input must be a point of [0,1]^n")
    if not (math.isfinite(eps) and eps >= 0.0):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    if norm.is_zero and not float(eps).is_integer():
        raise DomainError(f"l0 radius must be an integer, got {eps}")
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")

    if predict(model, x) != label:
        return AttackResult(x.copy(), True, x.copy())
    if eps == 0.0:
        return AttackResult(None, False, x.copy())

    alpha = step_size if step_size is not None else 2.5 * eps / steps
    if start is not None:
        point = x.copy() if norm.is_zero else project(x, np.asarray(start, dtype=float), norm, eps)
    else:
        point = x.copy()
    if random_start and not norm.is_zero:
        rng = _generator(seed, 4)
        if norm.is_infinity:
            point = project(x, x + rng.uniform(-eps, eps, size=x.shape), norm, eps)
        else:
            d = rng.standard_normal(x.shape)
            point = project(x, x + eps * rng.random() * d / np.linalg.norm(d), norm, eps)

    for step in range(steps):
        if predict(model, point) != label:
            logger.debug("pgd: fooled after %d steps", step)
            return AttackResult(point, True, point)
        _, grad = model.margin_gradient(point, label)
        if not np.any(grad):
            break
        if norm.is_zero:
            point = _sparse_step(x, grad, int(eps))
        elif norm.is_infinity:
            point = project(x, point + alpha * np.sign(grad), norm, eps)
        else:
            point = project(x, point + alpha * grad / np.linalg.norm(grad), norm, eps)
    success = predict(model, point) != label
    return AttackResult(point if success else None, success, point)


# -- curves -------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    eps: float
    fooled_fraction: float
    n_points: int


@dataclass(frozen=True)
class SusceptibilityCurve:
    points: Tuple[CurvePoint, ...]

    @property
    def eps(self) -> List[float]:
        return [p.eps for p in self.points]

    @property
    def fractions(self) -> List[float]:
        return [p.fooled_fraction for p in self.points]


def _attack_chain(model, x, label, norm, eps_grid, steps, step_size, seed, random_start) -> List[bool]:
    fooled: List[bool] = []
    point = None
    for eps in eps_grid:
        if fooled and fooled[-1]:
            # the earlier adversarial point is still inside the larger ball
            fooled.append(True)
            continue
        result = pgd_attack(model, x, label, norm, eps, steps, step_size, seed, point, random_start)
        point = result.point
        fooled.append(result.success)
    return fooled


def susceptibility_curve(
    model: Classifier,
    dataset: Dataset,
    norm: NormOrder,
    eps_grid: Sequence[float],
    steps: int = 100,
    step_size: Optional[float] = None,
    seed: int = 0,
    threads: int = 1,
    random_start: bool = False,
) -> SusceptibilityCurve:
    """Fraction of points misclassified or attacked successfully at each ε."""
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise DomainError("eps grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0.0:
        raise DomainError("eps grid must be nonnegative and strictly increasing")
    _check_attack_norm(norm)

    def run(i: int) -> List[bool]:
        point_seed = int(np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])
        return _attack_chain(
            model, dataset.points[i], int(dataset.labels[i]), norm, grid, steps, step_size, point_seed, random_start
        )

    indices = range(len(dataset))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            chains = list(ex.map(run, indices))
    else:
        chains = [run(i) for i in indices]

    total = len(dataset)
    counts = np.sum(np.array(chains, dtype=int), axis=0) if chains else np.zeros(len(grid), dtype=int)
    rows = tuple(
        CurvePoint(eps, (int(c) / total) if total else 0.0, total) for eps, c in zip(grid, counts)
    )
    return SusceptibilityCurve(rows)


def _crossing(curve: SusceptibilityCurve, level: float) -> float:
    eps, frac = curve.eps, curve.fractions
    for i, f in enumerate(frac):
        if f >= level:
            if i == 0 or frac[i] == frac[i - 1]:
                return eps[i]
            t = (level - frac[i - 1]) / (frac[i] - frac[i - 1])
            return eps[i - 1] + t * (eps[i] - eps[i - 1])
    return math.inf


def rise_width(curve: SusceptibilityCurve, low: float = 0.1, high: float = 0.9) -> float:
    """ε-width of the curve's climb from ``low`` to ``high``; +inf if it never reaches ``high``."""
    if not (0.0 <= low < high <= 1.0):
        raise DomainError(f"need 0 <= low < high <= 1, got {low}, {high}")
    top = _crossing(curve, high)
    if math.isinf(top):
        return math.inf
    return top - _crossing(curve, low)
