"""
Hyperparameter search: random search, Bayesian optimization with a GP
surrogate and expected improvement, and a genetic architecture search.

Objectives are minimized. An evaluation that raises a toolkit error or
returns a non-finite value is recorded as failed with objective +inf and
is never selected.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import norm

from ..models.dataset import Dataset
from ..models.network import Activation
from ..models.search import (
    MAX_LAYERS,
    MAX_WIDTH,
    MIN_LAYERS,
    MIN_WIDTH,
    GaResult,
    Genome,
    ParamDimension,
    ParamKind,
    ParamSpace,
    SearchResult,
    Trial,
)
from ..models.training import TrainConfig, TrainMode
from ..utils.file_utils import write_csv, write_json
from ..utils.seeding import derive_seed, stream
from ..utils.validation import AdaptivePinnError, NumericalError, ValidationError
from .eval_stats import kfold_cv
from .kernel_baselines import GpSpec, SvrSpec, gp_fit, gp_predict
from .mlp import Mlp
from .trainer import train

Objective = Callable[[Dict[str, Any]], float]

N_CANDIDATES = 1024
SURROGATE_NOISE = 1e-6

# Search ranges bracketing the kernel hyperparameters used for the Nusselt benchmark.
SVR_SPACE = ParamSpace(dimensions=[
    ParamDimension(name="C", kind=ParamKind.LOG_REAL, low=1e-2, high=1e3),
    ParamDimension(name="gamma", kind=ParamKind.LOG_REAL, low=1e-4, high=10.0),
    ParamDimension(name="epsilon", kind=ParamKind.LOG_REAL, low=1e-4, high=1.0),
])
GP_SPACE = ParamSpace(dimensions=[
    ParamDimension(name="gamma", kind=ParamKind.LOG_REAL, low=1e-3, high=10.0),
    ParamDimension(name="noise", kind=ParamKind.LOG_REAL, low=1e-8, high=1e-1),
])


def _evaluate(objective: Objective, point: Dict[str, Any], iteration: int, random_fallback: bool = False) -> Trial:
    started = time.perf_counter()
    failed = False
    try:
        value = float(objective(point))
    except AdaptivePinnError as e:
        logger.warning(f"Trial {iteration} failed at {point}: {e}")
        value = math.inf
        failed = True
    if not math.isfinite(value):
        value, failed = math.inf, True
    return Trial(iteration=iteration, point=point, objective=value, failed=failed,
                 random_fallback=random_fallback, wall_time=time.perf_counter() - started)


def _result(history: List[Trial], label: str) -> SearchResult:
    finite = [t for t in history if not t.failed]
    if not finite:
        raise NumericalError(f"{label}: all {len(history)} trials failed")
    best = min(finite, key=lambda t: t.objective)
    logger.info(f"{label}: best objective {best.objective:.6g} at iteration {best.iteration} ({best.point})")
    return SearchResult(best=best, history=history)


def random_search(space: ParamSpace, objective: Objective, budget: int, seed: int = 0, jobs: int = 1) -> SearchResult:
    """
    Uniform sampling in the unit cube mapped through the space.

    Args:
        space: Search space
        objective: Function of a point dict, lower is better
        budget: Number of evaluations
        seed: Sampling seed
        jobs: Parallel evaluations

    Returns:
        Best trial and full history
    """
    if budget < 1:
        raise ValidationError(f"Search budget must be >= 1, got {budget}")
    rng = stream(seed, "search", "random")
    points = [space.from_unit(space.sample_unit(rng)) for _ in range(budget)]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        history = list(executor.map(lambda item: _evaluate(objective, item[1], item[0]), enumerate(points)))
    return _result(history, "Random search")


def expected_improvement(mean, std, best: float, xi: float = 0.0) -> np.ndarray:
    """
    Expected improvement below ``best`` for a minimization problem.

    Args:
        mean: Posterior means
        std: Posterior standard deviations
        best: Best objective observed so far
        xi: Exploration offset

    Returns:
        Non-negative EI values
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    improvement = best - mean - xi
    ei = np.maximum(improvement, 0.0)
    positive = std > 0
    z = improvement[positive] / std[positive]
    ei[positive] = improvement[positive] * norm.cdf(z) + std[positive] * norm.pdf(z)
    return np.maximum(ei, 0.0)


def _propose(observed_x: np.ndarray, observed_y: np.ndarray, candidates: np.ndarray) -> Optional[int]:
    """Index of the EI-maximizing candidate, or None when the surrogate cannot be fitted."""
    finite = np.isfinite(observed_y)
    if np.count_nonzero(finite) < 2:
        return None
    gamma = 1.0 / observed_x.shape[1]
    try:
        model = gp_fit((observed_x[finite], observed_y[finite]), gamma, SURROGATE_NOISE)
        mean, var = gp_predict(model, candidates)
    except AdaptivePinnError as e:
        logger.debug(f"Surrogate fit failed: {e}")
        return None
    ei = expected_improvement(mean, np.sqrt(var), float(np.min(observed_y[finite])))
    if not np.all(np.isfinite(ei)):
        return None
    return int(np.argmax(ei))


def bayes_opt(
    space: ParamSpace,
    objective: Objective,
    budget: int,
    n_init: int = 5,
    seed: int = 0,
    n_candidates: int = N_CANDIDATES,
) -> SearchResult:
    """
    Sequential Bayesian optimization.

    ``n_init`` random points are evaluated first; every further iteration
    fits a GP (RBF, gamma = 1/D, on unit coordinates) to the successful
    trials and evaluates the candidate with the largest expected improvement
    among ``n_candidates`` seeded random points. When the surrogate cannot
    be fitted the first candidate is evaluated instead and the trial is
    flagged as a random fallback.

    Args:
        space: Search space
        objective: Function of a point dict, lower is better
        budget: Total number of evaluations
        n_init: Initial random evaluations
        seed: Sampling seed
        n_candidates: Acquisition candidates per iteration

    Returns:
        Best trial and full history
    """
    if n_init < 2:
        raise ValidationError(f"Bayesian optimization needs n_init >= 2, got {n_init}")
    if budget <= n_init:
        raise ValidationError(f"Budget {budget} must exceed n_init {n_init}")

    init_rng = stream(seed, "search", "bayes-init")
    units: List[np.ndarray] = []
    history: List[Trial] = []
    for it in range(n_init):
        u = space.sample_unit(init_rng)
        units.append(u)
        history.append(_evaluate(objective, space.from_unit(u), it))

    for it in range(n_init, budget):
        candidates = stream(seed, "search", "bayes-candidates", it).uniform(
            0.0, 1.0, size=(n_candidates, space.n_dims)
        )
        observed_y = np.array([t.objective for t in history])
        pick = _propose(np.vstack(units), observed_y, candidates)
        fallback = pick is None
        if fallback:
            logger.debug(f"Iteration {it}: random fallback")
            pick = 0
        units.append(candidates[pick])
        history.append(_evaluate(objective, space.from_unit(candidates[pick]), it, random_fallback=fallback))

    return _result(history, "Bayesian optimization")


# ---------------------------------------------------------------------------
# Genetic architecture search
# ---------------------------------------------------------------------------

def random_genome(rng: np.random.Generator) -> Genome:
    n_layers = int(rng.integers(MIN_LAYERS, MAX_LAYERS + 1))
    widths = [int(w) for w in rng.integers(MIN_WIDTH, MAX_WIDTH + 1, size=n_layers)]
    return Genome(widths=widths, lr_exponent=float(rng.uniform(-5.0, 0.0)))


def tournament(population: Sequence[Genome], fitness: Sequence[float], rng: np.random.Generator) -> Genome:
    """Size-2 tournament; ties go to the first contender."""
    i, j = (int(k) for k in rng.integers(0, len(population), size=2))
    return population[i] if fitness[i] <= fitness[j] else population[j]


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """One-point crossover on the width lists; the learning rate comes from either parent."""
    cut = int(rng.integers(0, min(a.n_layers, b.n_layers) + 1))
    widths = (a.widths[:cut] + b.widths[cut:])[:MAX_LAYERS]
    lr_exponent = a.lr_exponent if rng.uniform() < 0.5 else b.lr_exponent
    return Genome(widths=widths, lr_exponent=lr_exponent)


def mutate(genome: Genome, rng: np.random.Generator, rate: float = 0.2) -> Genome:
    """
    Per-gene mutation with probability ``rate``.

    Widths creep by up to a quarter of their value; the layer-count gene
    drops the last layer or repeats it; the learning-rate exponent takes a
    Gaussian step of 0.5.
    """
    if rate <= 0.0:
        return genome
    widths = list(genome.widths)
    for k, width in enumerate(widths):
        if rng.uniform() < rate:
            step = int(rng.integers(1, max(1, width // 4) + 1))
            width += step if rng.uniform() < 0.5 else -step
            widths[k] = int(min(MAX_WIDTH, max(MIN_WIDTH, width)))
    if rng.uniform() < rate:
        if len(widths) > MIN_LAYERS and (len(widths) == MAX_LAYERS or rng.uniform() < 0.5):
            widths.pop()
        else:
            widths.append(widths[-1])
    lr_exponent = genome.lr_exponent
    if rng.uniform() < rate:
        lr_exponent = float(min(0.0, max(-5.0, lr_exponent + rng.normal(0.0, 0.5))))
    return Genome(widths=widths, lr_exponent=lr_exponent)


def evolve_population(
    population: Sequence[Genome],
    fitness: Sequence[float],
    rng: np.random.Generator,
    mutation_rate: float = 0.2,
) -> List[Genome]:
    """Next generation: the best genome unchanged, the rest bred by tournament, crossover and mutation."""
    elite = population[int(np.argmin(fitness))]
    children = [elite]
    while len(children) < len(population):
        a = tournament(population, fitness, rng)
        b = tournament(population, fitness, rng)
        children.append(mutate(crossover(a, b, rng), rng, mutation_rate))
    return children


def _score(objective: Callable[[Genome], float], genome: Genome) -> float:
    try:
        value = float(objective(genome))
    except AdaptivePinnError as e:
        logger.warning(f"Genome {genome.widths} failed: {e}")
        return math.inf
    return value if math.isfinite(value) else math.inf


def ga_search(
    objective: Callable[[Genome], float],
    population: int = 12,
    generations: int = 10,
    seed: int = 0,
    mutation_rate: float = 0.2,
    jobs: int = 1,
    initial: Optional[Sequence[Genome]] = None,
) -> GaResult:
    """
    Genetic search over hidden-layer widths and learning rate.

    Every generation evaluates its whole population, so the objective is
    called ``population * generations`` times.

    Args:
        objective: Function of a genome, lower is better
        population: Individuals per generation (>= 4)
        generations: Number of generations
        seed: Seed of the evolutionary stream
        mutation_rate: Per-gene mutation probability
        jobs: Parallel evaluations within a generation
        initial: Starting population (random when None)

    Returns:
        Best genome, its fitness and the best fitness after each generation
    """
    if population < 4:
        raise ValidationError(f"GA population must be >= 4, got {population}")
    if generations < 1:
        raise ValidationError(f"GA needs at least one generation, got {generations}")
    rng = stream(seed, "search", "ga")
    if initial is not None:
        members = list(initial)
        if len(members) != population:
            raise ValidationError(f"Initial population has {len(members)} genomes, expected {population}")
    else:
        members = [random_genome(rng) for _ in range(population)]

    best_genome, best_fitness = members[0], math.inf
    history: List[float] = []
    evaluations = 0
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        for generation in range(generations):
            fitness = list(executor.map(lambda g: _score(objective, g), members))
            evaluations += len(members)
            k = int(np.argmin(fitness))
            if fitness[k] < best_fitness:
                best_genome, best_fitness = members[k], fitness[k]
            history.append(best_fitness)
            logger.debug(f"Generation {generation + 1}: best {best_fitness:.6g} ({best_genome.widths})")
            if generation < generations - 1:
                members = evolve_population(members, fitness, rng, mutation_rate)

    if not math.isfinite(best_fitness):
        raise NumericalError(f"GA: every one of {evaluations} evaluations failed")
    logger.info(f"GA search: best fitness {best_fitness:.6g} with widths {best_genome.widths}, "
                f"lr 10^{best_genome.lr_exponent:.2f}")
    return GaResult(best=best_genome, best_fitness=best_fitness, history=history, evaluations=evaluations)


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def svr_objective(ds: Dataset, folds: int = 5, seed: int = 0) -> Objective:
    """k-fold MAPE of an SVR as a function of ``{C, gamma, epsilon}``."""
    def objective(point: Dict[str, Any]) -> float:
        spec = SvrSpec(C=point["C"], gamma=point["gamma"], epsilon=point["epsilon"])
        return kfold_cv(spec, ds, folds, seed).mean
    return objective


def gp_objective(ds: Dataset, folds: int = 5, seed: int = 0) -> Objective:
    """k-fold MAPE of a GP as a function of ``{gamma, noise}``."""
    def objective(point: Dict[str, Any]) -> float:
        return kfold_cv(GpSpec(gamma=point["gamma"], noise=point["noise"]), ds, folds, seed).mean
    return objective


def mlp_arch_objective(
    ds: Dataset,
    cfg: TrainConfig,
    seed: int = 0,
    activation: Activation = Activation.TANH,
) -> Callable[[Genome], float]:
    """
    Best validation MAPE of a data-only network built from a genome.

    Args:
        ds: Normalized training data
        cfg: Training configuration (the genome overrides the learning rate)
        seed: Initialization seed, shared by every genome
        activation: Hidden activation

    Returns:
        Objective over genomes
    """
    base = cfg.model_copy(update={"mode": TrainMode.DATA_ONLY})

    def objective(genome: Genome) -> float:
        arch = genome.to_arch(ds.n_features, activation)
        run_cfg = base.model_copy(update={"learning_rate": genome.learning_rate})
        _, _, report = train(Mlp.init(arch, derive_seed(seed, "ga-init")), None, ds, None, run_cfg)
        return report.best_val_mape
    return objective


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def history_frame(result: Union[SearchResult, GaResult]) -> pd.DataFrame:
    """``iter,objective,<point...>`` for searches; ``generation,best_fitness`` for the GA."""
    if isinstance(result, GaResult):
        return pd.DataFrame({"generation": np.arange(1, len(result.history) + 1), "best_fitness": result.history})
    rows = [{"iter": t.iteration, "objective": t.objective, **t.point} for t in result.history]
    columns = ["iter", "objective", *result.history[0].point.keys()]
    return pd.DataFrame(rows, columns=columns)


def best_config(result: Union[SearchResult, GaResult], target: str, input_dim: Optional[int] = None) -> dict:
    """
    Best configuration as run-configuration sections, so ``--config`` accepts it.

    Args:
        result: Search outcome
        target: ``svr``, ``gp`` or ``mlp``
        input_dim: Network input dimension (``mlp`` only)

    Returns:
        Partial run configuration
    """
    if isinstance(result, GaResult):
        if input_dim is None:
            raise ValidationError("An architecture result needs the input dimension")
        return {
            "model": {"arch": result.best.to_arch(input_dim).to_string()},
            "train": {"learning_rate": result.best.learning_rate},
        }
    point = result.best.point
    if target == "svr":
        return {"eval": {"svr_c": point["C"], "svr_gamma": point["gamma"], "svr_epsilon": point["epsilon"]}}
    if target == "gp":
        return {"eval": {"gp_gamma": point["gamma"], "gp_noise": point["noise"]}}
    raise ValidationError(f"Unknown search target {target!r}")


def write_search(result: Union[SearchResult, GaResult], directory: Union[str, Path], target: str,
                 input_dim: Optional[int] = None) -> List[Path]:
    """Write ``history.csv`` and ``best_config.json``; wall times are left out."""
    directory = Path(directory)
    frame = history_frame(result)
    return [
        write_csv(directory / "history.csv", frame),
        write_json(directory / "best_config.json", best_config(result, target, input_dim)),
    ]
