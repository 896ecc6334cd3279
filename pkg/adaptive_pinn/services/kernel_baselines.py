"""
Kernel baselines: Gaussian-process regression and epsilon-SVR, both with the
RBF kernel ``k(x, x') = exp(-gamma * ||x - x'||^2)``.

The GP is solved through a Cholesky factor with a jitter ladder; the SVR dual
is solved with SMO on ``beta = alpha - alpha*`` using the maximal violating
pair and an exact line search along the piecewise-quadratic dual.
"""

import math
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..models.dataset import Dataset, NormStats
from ..utils.validation import ArrayValidator, NumericalError, ShapeMismatchError, ValidationError
from .data_service import normalize
from .eval_stats import FittedModel, ModelSpec

JITTER_LADDER = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4]
SMO_TOLERANCE = 1e-4


class RbfKernel(BaseModel):
    """Radial basis function kernel."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., gt=0.0)

    def __call__(self, x, x2) -> float:
        return rbf(x, x2, self.gamma)

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Kernel matrix between the rows of ``a`` and ``b``."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if a.shape[1] != b.shape[1]:
            raise ShapeMismatchError(f"Kernel inputs have {a.shape[1]} and {b.shape[1]} columns")
        diff = a[:, None, :] - b[None, :, :]
        return np.exp(-self.gamma * np.sum(diff * diff, axis=2))


def rbf(x, x2, gamma: float) -> float:
    """
    ``exp(-gamma * ||x - x2||^2)``.

    Args:
        x: First point
        x2: Second point
        gamma: Kernel width parameter

    Returns:
        Kernel value in (0, 1]
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.shape != x2.shape:
        raise ShapeMismatchError(f"RBF inputs differ in dimension: {x.size} vs {x2.size}")
    ArrayValidator.positive(gamma, "gamma")
    diff = x - x2
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _as_arrays(data: Union[Dataset, Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(data, Dataset):
        return data.features, data.targets
    features, targets = data
    features = np.atleast_2d(np.asarray(features, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if features.shape[0] != targets.shape[0]:
        raise ShapeMismatchError(f"{features.shape[0]} feature rows for {targets.shape[0]} targets")
    return features, targets


# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------

class GpModel:
    """Fitted GP posterior (targets standardized internally)."""

    def __init__(self, kernel: RbfKernel, noise: float, features: np.ndarray, y_mean: float, y_std: float,
                 factor, weights: np.ndarray, jitter: float, log_marginal_likelihood: float):
        self.kernel = kernel
        self.noise = noise
        self.features = features
        self.y_mean = y_mean
        self.y_std = y_std
        self.factor = factor
        self.weights = weights
        self.jitter = jitter
        self.log_marginal_likelihood = log_marginal_likelihood

    def summary(self) -> dict:
        return {
            "gamma": self.kernel.gamma,
            "noise": self.noise,
            "jitter": self.jitter,
            "log_marginal_likelihood": self.log_marginal_likelihood,
            "n_train": int(self.features.shape[0]),
        }


def gp_fit(data, gamma: float, noise: float = 0.0) -> GpModel:
    """
    Condition a zero-mean GP on standardized targets.

    Args:
        data: Dataset or (features, targets)
        gamma: RBF width parameter
        noise: Observation noise variance (standardized units)

    Returns:
        Fitted model
    """
    features, targets = _as_arrays(data)
    if features.shape[0] < 1:
        raise ValidationError("GP needs at least one training point")
    if noise < 0:
        raise ValidationError(f"Noise variance must be >= 0, got {noise}")
    kernel = RbfKernel(gamma=gamma)

    y_mean = float(targets.mean())
    y_std = float(targets.std())
    if not y_std > 0:
        y_std = 1.0
    y = (targets - y_mean) / y_std

    gram = kernel.gram(features, features)
    n = gram.shape[0]
    factor, used = None, None
    for extra in [0.0, *JITTER_LADDER]:
        try:
            factor = cho_factor(gram + (noise + extra) * np.eye(n), lower=True)
            used = extra
            break
        except LinAlgError:
            continue
    if factor is None:
        raise NumericalError(f"GP Cholesky failed after jitter {JITTER_LADDER[-1]:g} (n={n}, gamma={gamma})")

    weights = cho_solve(factor, y)
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    lml = -0.5 * float(y @ weights) - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi)
    if used:
        logger.debug(f"GP fit needed jitter {used:g}")
    return GpModel(kernel, noise, features, y_mean, y_std, factor, weights, used, lml)


def gp_predict(model: GpModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior mean and latent variance in target units.

    Args:
        model: Fitted GP
        x: One point or an [M x D] matrix

    Returns:
        (mean[M], variance[M])
    """
    points = np.atleast_2d(np.asarray(x, dtype=float))
    cross = model.kernel.gram(points, model.features)
    mean = cross @ model.weights
    solved = cho_solve(model.factor, cross.T)
    var = 1.0 - np.sum(cross * solved.T, axis=1)
    var = np.maximum(var, 0.0)
    return model.y_mean + model.y_std * mean, var * model.y_std ** 2


# ---------------------------------------------------------------------------
# epsilon-SVR
# ---------------------------------------------------------------------------

class SvrModel:
    """Fitted epsilon-SVR: ``f(x) = sum_j beta_j k(x_j, x) + b`` over support vectors."""

    def __init__(self, kernel: RbfKernel, C: float, epsilon: float, dual_coef: np.ndarray,
                 support_vectors: np.ndarray, bias: float, all_coef: np.ndarray,
                 iterations: int, kkt_violation: float):
        self.kernel = kernel
        self.C = C
        self.epsilon = epsilon
        self.dual_coef = dual_coef
        self.support_vectors = support_vectors
        self.bias = bias
        self.all_coef = all_coef
        self.iterations = iterations
        self.kkt_violation = kkt_violation

    @property
    def n_support(self) -> int:
        return int(self.dual_coef.size)

    def summary(self) -> dict:
        return {
            "C": self.C,
            "gamma": self.kernel.gamma,
            "epsilon": self.epsilon,
            "n_support": self.n_support,
            "bias": self.bias,
            "iterations": self.iterations,
        }


def svr_dual_objective(beta: np.ndarray, gram: np.ndarray, targets: np.ndarray, epsilon: float) -> float:
    """``y.beta - epsilon * |beta|_1 - 0.5 * beta' K beta`` (to be maximized)."""
    beta = np.asarray(beta, dtype=float)
    return float(targets @ beta - epsilon * np.sum(np.abs(beta)) - 0.5 * beta @ gram @ beta)


def _violating_pair(beta: np.ndarray, errors: np.ndarray, C: float, epsilon: float):
    up = np.where(beta >= 0, errors - epsilon, errors + epsilon)
    down = np.where(beta <= 0, errors + epsilon, errors - epsilon)
    up_ok = beta < C
    down_ok = beta > -C
    up_masked = np.where(up_ok, up, -np.inf)
    down_masked = np.where(down_ok, down, np.inf)
    i = int(np.argmax(up_masked))
    j = int(np.argmin(down_masked))
    return i, j, up_masked, down_masked


def _line_search(bi: float, bj: float, fi: float, fj: float, eta: float, C: float, epsilon: float) -> float:
    """Exact maximizer over t in [0, H] of the dual along beta_i += t, beta_j -= t."""
    upper = min(C - bi, bj + C)

    def gain(t: float) -> float:
        return t * (fi - fj) - 0.5 * eta * t * t - epsilon * (abs(bi + t) + abs(bj - t) - abs(bi) - abs(bj))

    candidates = [0.0, upper, -bi, bj]
    if eta > 1e-12:
        for si in (-1.0, 1.0):
            for sj in (-1.0, 1.0):
                candidates.append((fi - fj - epsilon * si + epsilon * sj) / eta)
    best_t, best_gain = 0.0, 0.0
    for t in candidates:
        if 0.0 < t <= upper:
            value = gain(t)
            if value > best_gain:
                best_t, best_gain = t, value
    return best_t


def svr_fit(data, C: float, gamma: float, epsilon: float, tol: float = SMO_TOLERANCE,
            max_iter: Optional[int] = None) -> SvrModel:
    """
    Train an epsilon-SVR with SMO.

    Args:
        data: Dataset or (features, targets)
        C: Box constraint
        gamma: RBF width parameter
        epsilon: Tube half-width
        tol: KKT tolerance on the maximal violating pair
        max_iter: Iteration cap (100 * N by default)

    Returns:
        Fitted model
    """
    features, targets = _as_arrays(data)
    ArrayValidator.positive(C, "C")
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    kernel = RbfKernel(gamma=gamma)
    gram = kernel.gram(features, features)
    n = targets.size
    max_iter = max_iter or 100 * n

    beta = np.zeros(n)
    errors = targets.astype(float).copy()  # y - K beta
    violation = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        i, j, up, down = _violating_pair(beta, errors, C, epsilon)
        violation = float(up[i] - down[j])
        if violation <= tol:
            break
        eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        t = _line_search(beta[i], beta[j], errors[i], errors[j], eta, C, epsilon)
        if t <= 0.0:
            raise NumericalError(f"SMO line search stalled at iteration {iterations} (KKT violation {violation:.3g})")
        beta[i] = float(np.clip(beta[i] + t, -C, C))
        beta[j] = float(np.clip(beta[j] - t, -C, C))
        errors -= t * (gram[i] - gram[j])
    else:
        i, j, up, down = _violating_pair(beta, errors, C, epsilon)
        violation = float(up[i] - down[j])
        if violation > tol:
            raise NumericalError(f"SMO did not converge in {max_iter} iterations (KKT violation {violation:.3g})")

    free = (np.abs(beta) > 0) & (np.abs(beta) < C)
    if np.any(free):
        bias = float(np.mean(errors[free] - epsilon * np.sign(beta[free])))
    else:
        _, _, up, down = _violating_pair(beta, errors, C, epsilon)
        finite_up = up[np.isfinite(up)]
        finite_down = down[np.isfinite(down)]
        low = float(finite_up.max()) if finite_up.size else None
        high = float(finite_down.min()) if finite_down.size else None
        if low is None and high is None:
            bias = 0.0
        elif low is None:
            bias = high
        elif high is None:
            bias = low
        else:
            bias = 0.5 * (low + high)

    support = np.flatnonzero(beta != 0)
    logger.debug(f"SMO finished after {iterations} iterations: {support.size} support vectors, "
                 f"KKT violation {violation:.3g}")
    return SvrModel(kernel, C, epsilon, beta[support].copy(), features[support].copy(), bias,
                    beta.copy(), iterations, violation)


def svr_predict(model: SvrModel, x) -> np.ndarray:
    """
    Predictions for one point or an [M x D] matrix.

    Returns:
        Predictions [M]
    """
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if model.n_support == 0:
        return np.full(points.shape[0], model.bias)
    return model.kernel.gram(points, model.support_vectors) @ model.dual_coef + model.bias


def kernel_matrix(features: np.ndarray, gamma: float) -> np.ndarray:
    """Gram matrix of a feature matrix (for dual-objective checks)."""
    return RbfKernel(gamma=gamma).gram(features, features)


# ---------------------------------------------------------------------------
# Cross-validation adapters
# ---------------------------------------------------------------------------

class _KernelPredictor(FittedModel):
    def __init__(self, predict: Callable[[np.ndarray], np.ndarray], stats: NormStats):
        self._predict = predict
        self._stats = stats

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self._predict(self._stats.apply(features))


class GpSpec(ModelSpec):
    """GP regressor on features standardized with the training split."""

    def __init__(self, gamma: float, noise: float = 0.0, name: str = "GP"):
        self.gamma = gamma
        self.noise = noise
        self.name = name

    def fit(self, train: Dataset, seed: int) -> FittedModel:
        normalized, stats = normalize(train)
        model = gp_fit((normalized.features, train.raw_targets()), self.gamma, self.noise)
        return _KernelPredictor(lambda x: gp_predict(model, x)[0], stats)


class SvrSpec(ModelSpec):
    """epsilon-SVR on features standardized with the training split."""

    def __init__(self, C: float, gamma: float, epsilon: float, name: str = "SVR"):
        self.C = C
        self.gamma = gamma
        self.epsilon = epsilon
        self.name = name

    def fit(self, train: Dataset, seed: int) -> FittedModel:
        normalized, stats = normalize(train)
        model = svr_fit((normalized.features, train.raw_targets()), self.C, self.gamma, self.epsilon)
        return _KernelPredictor(lambda x: svr_predict(model, x), stats)


__all__: List[str] = [
    "RbfKernel",
    "GpModel",
    "SvrModel",
    "GpSpec",
    "SvrSpec",
    "rbf",
    "gp_fit",
    "gp_predict",
    "svr_fit",
    "svr_predict",
    "svr_dual_objective",
    "kernel_matrix",
]
