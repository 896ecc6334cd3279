"""
Command handlers and run-configuration resolution.

Values are resolved in the order defaults < preset < config file < flags;
the result is written to ``config-resolved.json`` before the command runs,
so ``--from-config`` on that file replays the run.
"""

import argparse
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..config import settings
from ..models.dataset import Dataset, SynthDomain, SynthSpec
from ..models.network import Activation, ArchSpec
from ..models.physics import DerivativeMode, PdeProblem
from ..models.report import RunConfig
from ..models.training import Schedule, TrainConfig, TrainMode, TransferPlan
from ..services import mlp as mlp_io
from ..services.benchmark import MODEL_NAMES, benchmark_frame, benchmark_suite, model_spec, source_network
from ..services.blending import BlendingNeuron, lambda_p_histogram
from ..services.data_service import apply_norm, load_csv, normalize, save_csv, split, synthesize
from ..services.eval_stats import kde, mann_whitney_u, mape, monte_carlo_cv, robustness_frame, variance_ordering_warning
from ..services.hyperopt import (
    GP_SPACE,
    SVR_SPACE,
    bayes_opt,
    ga_search,
    gp_objective,
    mlp_arch_objective,
    random_search,
    svr_objective,
    write_search,
)
from ..services.mlp import Mlp
from ..services.physics import NUSSELT_SMOOTHNESS, make_problem, nusselt_smoothness, problem_dataset
from ..services.trainer import predict_raw, train, write_report
from ..services.transfer import fine_tune, layer_sweep
from ..utils.file_utils import read_json, write_csv, write_json
from ..utils.seeding import derive_seed
from ..utils.validation import DataError, ShapeMismatchError, ValidationError
from .errors import CliArgumentParser

COMMANDS = ["gen-data", "train", "transfer", "hyperopt", "benchmark", "mc-validate", "stats"]
RESOLVED_CONFIG = "config-resolved.json"
PROBLEM_POINTS = 60
ROBUSTNESS_MODELS = ["TL-NN", "NN", "PINN"]

# argparse dest -> (run-config section, field)
FLAG_MAP = {
    "source": ("data", "source"),
    "target": ("data", "target"),
    "target_column": ("data", "target_column"),
    "domain": ("data", "domain"),
    "n_points": ("data", "n_points"),
    "source_points": ("data", "source_points"),
    "noise": ("data", "noise"),
    "holdout": ("data", "holdout_fraction"),
    "arch": ("model", "arch"),
    "activation": ("model", "activation"),
    "mode": ("model", "mode"),
    "problem": ("model", "problem"),
    "n_collocation": ("model", "n_collocation"),
    "boundary_weight": ("model", "boundary_weight"),
    "derivative_mode": ("model", "derivative_mode"),
    "lr": ("train", "learning_rate"),
    "epochs": ("train", "max_epochs"),
    "patience": ("train", "early_stop_patience"),
    "val_fraction": ("train", "val_fraction"),
    "decay_factor": ("train", "decay_factor"),
    "decay_every": ("train", "decay_every"),
    "alternate": ("train", "alternate"),
    "checkpoint": ("transfer", "checkpoint"),
    "layers": ("transfer", "layers"),
    "freeze": ("transfer", "freeze"),
    "soft_freeze": ("transfer", "soft_freeze"),
    "fine_tune_alpha": ("transfer", "fine_tune_alpha"),
    "sweep": ("transfer", "sweep"),
    "sweep_seeds": ("transfer", "sweep_seeds"),
    "method": ("hyperopt", "method"),
    "search_target": ("hyperopt", "target"),
    "budget": ("hyperopt", "budget"),
    "n_init": ("hyperopt", "n_init"),
    "folds": ("hyperopt", "folds"),
    "population": ("hyperopt", "population"),
    "generations": ("hyperopt", "generations"),
    "trials": ("eval", "trials"),
    "seeds": ("eval", "seeds"),
    "models": ("eval", "models"),
    "cv_folds": ("eval", "folds"),
    "search_budget": ("eval", "search_budget"),
    "train_report": ("eval", "train_report"),
}


class RunContext:
    """Resolved configuration plus execution options that do not affect results."""

    def __init__(self, run: RunConfig, jobs: int = 1, quiet: bool = False):
        self.run = run
        self.seed = int(run.seed)
        self.out = Path(run.output_dir)
        self.jobs = max(1, int(jobs))
        self.quiet = quiet


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_data_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--source", help="Source-domain CSV (synthetic water analog when absent)")
    g.add_argument("--target", help="Target-domain CSV (synthetic sodium analog when absent)")
    g.add_argument("--target-column", help="Target column name (last column by default)")
    g.add_argument("--domain", choices=[d.value for d in SynthDomain], help="Synthetic domain")
    g.add_argument("--n", dest="n_points", type=int, help="Number of target-domain points")
    g.add_argument("--source-n", dest="source_points", type=int, help="Number of source-domain points")
    g.add_argument("--noise", type=float, help="Relative noise of synthetic targets")
    g.add_argument("--holdout", type=float, help="Holdout fraction")


def _add_model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--arch", help="Architecture, e.g. 3-[20,20,12]-1")
    g.add_argument("--activation", choices=[a.value for a in Activation])
    g.add_argument("--mode", choices=[m.value for m in TrainMode])
    g.add_argument("--problem", help="nusselt-smoothness, conduction1d, conduction-vark1d or convdiff1d")
    g.add_argument("--n-collocation", type=int)
    g.add_argument("--boundary-weight", type=float)
    g.add_argument("--derivative-mode", choices=[m.value for m in DerivativeMode])


def _add_train_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, help="Learning rate")
    g.add_argument("--epochs", type=int, help="Maximum epochs")
    g.add_argument("--patience", type=int, help="Early-stopping patience")
    g.add_argument("--val-fraction", type=float)
    g.add_argument("--decay-factor", type=float, help="Step-decay factor (1 = constant rate)")
    g.add_argument("--decay-every", type=int)
    g.add_argument("--alternate", action="store_true", help="Alternate data and physics epochs")


def _add_transfer_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("transfer")
    g.add_argument("--checkpoint", help="Source network checkpoint (pretrained on the source data when absent)")
    g.add_argument("--layers", type=_int_list, help="Layers to copy, e.g. 0,1")
    g.add_argument("--no-freeze", dest="freeze", action="store_false", help="Let copied layers train")
    g.add_argument("--soft-freeze", action="store_true", help="Train copied layers at 0.1x learning rate")
    g.add_argument("--freeze-alpha", dest="fine_tune_alpha", action="store_false",
                   help="Keep the blending scalar fixed")
    g.add_argument("--sweep", action="store_true", help="Also run the one-layer-at-a-time sweep")
    g.add_argument("--sweep-seeds", type=int)


def _add_hyperopt_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("search")
    g.add_argument("--method", choices=["random", "bayes", "ga"])
    g.add_argument("--search-target", choices=["svr", "gp", "mlp"])
    g.add_argument("--budget", type=int)
    g.add_argument("--n-init", type=int)
    g.add_argument("--folds", type=int)
    g.add_argument("--population", type=int)
    g.add_argument("--generations", type=int)


def _add_eval_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("evaluation")
    g.add_argument("--trials", type=int, help="Monte Carlo trials")
    g.add_argument("--seeds", type=int, help="Splits per benchmark row")
    g.add_argument("--models", type=_str_list, help=f"Comma-separated subset of {','.join(MODEL_NAMES)}")
    g.add_argument("--cv-folds", type=int)
    g.add_argument("--search-budget", type=int)
    g.add_argument("--train-report", help="Training-report CSV for the lambda_p histogram")


def build_parser() -> CliArgumentParser:
    """Top-level parser with one subcommand per experiment."""
    common = CliArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("run")
    g.add_argument("--seed", type=int, help="Root seed (default: config file, then ADAPTIVE_PINN_SEED)")
    g.add_argument("--config", help="JSON run configuration; flags override its values")
    g.add_argument("--from-config", help="Replay a config-resolved.json")
    g.add_argument("--preset", help="Named preset from config/presets.json")
    g.add_argument("--output-dir", help="Report directory")
    g.add_argument("--jobs", type=int, help="Parallel workers")
    g.add_argument("--quiet", action="store_true", help="Warnings only, no progress bars")
    g.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = CliArgumentParser(
        prog="adaptive-pinn",
        description="Adaptive PINN toolkit. Precedence: defaults < --preset < --config/--from-config < flags.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    groups = {
        "gen-data": [_add_data_flags],
        "train": [_add_data_flags, _add_model_flags, _add_train_flags],
        "transfer": [_add_data_flags, _add_model_flags, _add_train_flags, _add_transfer_flags],
        "hyperopt": [_add_data_flags, _add_model_flags, _add_train_flags, _add_hyperopt_flags],
        "benchmark": [_add_data_flags, _add_model_flags, _add_train_flags, _add_eval_flags],
        "mc-validate": [_add_data_flags, _add_model_flags, _add_train_flags, _add_eval_flags],
        "stats": [_add_data_flags, _add_eval_flags],
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS)
        for add in groups[name]:
            add(p)
    return parser


# ---------------------------------------------------------------------------
# Configuration resolution
# ---------------------------------------------------------------------------

def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; ``override`` wins."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_presets(path: Optional[str] = None) -> Dict[str, Any]:
    presets_path = Path(path or settings.PRESETS_FILE)
    if not presets_path.exists():
        return {}
    return read_json(presets_path)


def _read_config(path: str) -> Dict[str, Any]:
    if not Path(path).exists():
        raise DataError(f"Config file not found: {path}")
    try:
        payload = read_json(path)
    except ValueError as e:
        raise DataError(f"{path}: malformed JSON ({e})")
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a JSON object")
    return payload


def resolve_run(args: argparse.Namespace) -> RunConfig:
    """
    Merge preset, config file and flags into a run configuration.

    Args:
        args: Parsed command line

    Returns:
        RunConfig with command, seed and output directory filled in
    """
    options = vars(args)
    if "config" in options and "from_config" in options:
        raise ValidationError("--config and --from-config are mutually exclusive")

    file_config: Dict[str, Any] = {}
    if "from_config" in options:
        file_config = _read_config(options["from_config"])
        recorded = file_config.get("command")
        if recorded is not None and recorded != args.command:
            raise ValidationError(f"{options['from_config']} records command {recorded!r}, not {args.command!r}")
    elif "config" in options:
        file_config = _read_config(options["config"])

    merged: Dict[str, Any] = {}
    preset_name = options.get("preset", file_config.get("preset"))
    if preset_name is not None:
        presets = load_presets()
        if preset_name not in presets:
            raise ValidationError(f"Unknown preset {preset_name!r}; available: {sorted(presets)}")
        merged = deep_merge(merged, presets[preset_name])
        merged["preset"] = preset_name
    merged = deep_merge(merged, file_config)

    flags: Dict[str, Dict[str, Any]] = {}
    for dest, (section, field) in FLAG_MAP.items():
        if dest in options:
            flags.setdefault(section, {})[field] = options[dest]
    merged = deep_merge(merged, flags)
    merged["command"] = args.command

    if "seed" in options:
        merged["seed"] = options["seed"]
    elif merged.get("seed") is None:
        merged["seed"] = settings.SEED
    if "output_dir" in options:
        merged["output_dir"] = options["output_dir"]
    elif merged.get("output_dir") is None:
        merged["output_dir"] = settings.OUTPUT_DIR

    return RunConfig.model_validate(merged)


def write_resolved(run: RunConfig) -> Path:
    return write_json(Path(run.output_dir) / RESOLVED_CONFIG, run.model_dump(mode="json"))


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def arch_of(run: RunConfig, input_dim: Optional[int] = None) -> ArchSpec:
    try:
        activation = Activation(run.model.activation)
    except ValueError:
        raise ValidationError(f"Unknown activation {run.model.activation!r}")
    arch = ArchSpec.parse(run.model.arch, activation)
    if input_dim is not None and arch.input_dim != input_dim:
        raise ShapeMismatchError(f"Architecture {arch.to_string()} takes {arch.input_dim} inputs, data has {input_dim}")
    return arch


def train_mode(run: RunConfig) -> TrainMode:
    try:
        return TrainMode(run.model.mode)
    except ValueError:
        raise ValidationError(f"Unknown mode {run.model.mode!r}; choose from {[m.value for m in TrainMode]}")


def train_config(run: RunConfig, seed: int, mode: Optional[TrainMode] = None) -> TrainConfig:
    t = run.train
    schedule = Schedule.step_decay(t.decay_factor, t.decay_every) if t.decay_factor < 1.0 else Schedule()
    return TrainConfig(
        learning_rate=t.learning_rate,
        max_epochs=t.max_epochs,
        early_stop_patience=t.early_stop_patience,
        val_fraction=t.val_fraction,
        schedule=schedule,
        seed=derive_seed(seed, "train"),
        mode=mode or train_mode(run),
        alternate=t.alternate,
    )


def synthetic(domain: SynthDomain, n_points: Optional[int], noise: float, seed: int) -> Dataset:
    spec = SynthSpec.default(domain, n_points, noise, derive_seed(seed, "data", domain.value))
    return synthesize(spec)


def target_dataset(run: RunConfig, seed: int) -> Dataset:
    d = run.data
    if d.target:
        return load_csv(d.target, d.target_column or settings.DEFAULT_TARGET_COLUMN)
    return synthetic(d.domain or SynthDomain.SODIUM, d.n_points, d.noise, seed)


def source_dataset(run: RunConfig, seed: int) -> Dataset:
    d = run.data
    if d.source:
        return load_csv(d.source, d.target_column or settings.DEFAULT_TARGET_COLUMN)
    return synthetic(SynthDomain.WATER, d.source_points, d.noise, seed)


def prepared_data(run: RunConfig, seed: int, pinn: bool) -> Tuple[Dataset, Dataset, Dataset, Optional[PdeProblem]]:
    """
    Raw holdout, training split as the network sees it, holdout likewise, and the physics problem.

    Nusselt data is standardized with training-split statistics and gets the
    smoothness residual; problem presets train on raw coordinates against
    the problem's analytic solution (noise-free) unless a target CSV is given.
    """
    m = run.model
    split_seed = derive_seed(seed, "holdout")
    if m.problem == NUSSELT_SMOOTHNESS:
        ds = target_dataset(run, seed)
        holdout, train_raw = split(ds, run.data.holdout_fraction, split_seed)
        train_ds, stats = normalize(train_raw)
        prob = nusselt_smoothness(train_ds, m.n_collocation, derive_seed(seed, "collocation")) if pinn else None
        return holdout, train_ds, apply_norm(holdout, stats), prob

    try:
        overrides: Dict[str, Any] = {"derivative_mode": DerivativeMode(m.derivative_mode)}
    except ValueError:
        raise ValidationError(f"Unknown derivative mode {m.derivative_mode!r}")
    if m.boundary_weight is not None:
        overrides["boundary_weight"] = m.boundary_weight
    problem = make_problem(m.problem, m.n_collocation, derive_seed(seed, "collocation"), **overrides)
    if run.data.target:
        ds = target_dataset(run, seed)
    else:
        ds = problem_dataset(problem, run.data.n_points or PROBLEM_POINTS, derive_seed(seed, "data", m.problem))
    holdout, train_ds = split(ds, run.data.holdout_fraction, split_seed)
    return holdout, train_ds, holdout, problem if pinn else None


def holdout_summary(net: Mlp, report, holdout_raw: Dataset, holdout_seen: Dataset) -> Dict[str, Any]:
    predictions = predict_raw(net, report, holdout_seen.features)
    truth = holdout_raw.clean_targets if holdout_raw.clean_targets is not None else holdout_raw.raw_targets()
    trace = report.lambda_p_trace
    summary = {
        "holdout_mape": mape(holdout_raw.raw_targets(), predictions).mape,
        "within_8pct_of_truth": mape(truth, predictions).within_margin(0.08),
        "n_holdout": holdout_raw.n_samples,
        "alpha_final": report.alpha_final,
        "lambda_p_mean_last_half": float(np.mean(trace[len(trace) // 2:])) if trace else None,
    }
    logger.info(f"Holdout MAPE {summary['holdout_mape']:.6g}, "
                f"{100 * summary['within_8pct_of_truth']:.1f}% within 8% of truth")
    return summary


def _histogram_frame(bins) -> pd.DataFrame:
    return pd.DataFrame([b.model_dump() for b in bins], columns=["low", "high", "count"])


def _write_training(ctx: RunContext, net: Mlp, report, holdout_raw: Dataset, holdout_seen: Dataset,
                    stem: str) -> List[Path]:
    written = [mlp_io.save(net, ctx.out / "model.json"), *write_report(report, ctx.out, stem)]
    written.append(write_json(ctx.out / "holdout.json", holdout_summary(net, report, holdout_raw, holdout_seen)))
    if holdout_seen.norm is not None:
        stats = holdout_seen.norm
        written.append(write_json(ctx.out / "normalization.json",
                                  {"mean": stats.mean.tolist(), "std": stats.std.tolist()}))
    if report.lambda_p_trace:
        histogram = _histogram_frame(lambda_p_histogram(report.lambda_p_trace))
        written.append(write_csv(ctx.out / "lambda_p_hist.csv", histogram))
    return written


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_data(ctx: RunContext) -> List[Path]:
    """Write ``water.csv`` and ``sodium.csv`` (or only ``--domain``)."""
    d = ctx.run.data
    if d.domain is not None:
        plan = [(d.domain, d.n_points)]
    else:
        plan = [(SynthDomain.WATER, d.source_points), (SynthDomain.SODIUM, d.n_points)]
    written = []
    for domain, n_points in plan:
        ds = synthetic(domain, n_points, d.noise, ctx.seed)
        written.append(save_csv(ds, ctx.out / f"{domain.value}.csv"))
        logger.info(f"Generated {ds.n_samples} {domain.value} points")
    return written


def cmd_train(ctx: RunContext) -> List[Path]:
    """Train a plain network or an adaptive PINN and score it on a holdout."""
    run = ctx.run
    mode = train_mode(run)
    pinn = mode is TrainMode.PINN
    holdout_raw, train_ds, holdout_seen, prob = prepared_data(run, ctx.seed, pinn)
    arch = arch_of(run, train_ds.n_features)
    net = Mlp.init(arch, derive_seed(ctx.seed, "init"))
    neuron = BlendingNeuron(0.0) if pinn else None
    net, _, report = train(net, neuron, train_ds, prob, train_config(run, ctx.seed, mode))
    return _write_training(ctx, net, report, holdout_raw, holdout_seen, "train")


def cmd_transfer(ctx: RunContext) -> List[Path]:
    """Fine-tune a target network from source layers; optionally sweep the transferred layer."""
    run = ctx.run
    t = run.transfer
    mode = train_mode(run)
    pinn = mode is TrainMode.PINN
    cfg = train_config(run, ctx.seed, mode)
    written: List[Path] = []

    holdout_raw, train_ds, holdout_seen, prob = prepared_data(run, ctx.seed, pinn)
    arch = arch_of(run, train_ds.n_features)
    if t.checkpoint:
        source = mlp_io.load(t.checkpoint)
    else:
        source = source_network(source_dataset(run, ctx.seed), arch, cfg, ctx.seed)
        written.append(mlp_io.save(source, ctx.out / "source.json"))

    plan = TransferPlan(
        source_checkpoint=t.checkpoint,
        layers_to_copy=set(t.layers),
        freeze_copied=t.freeze,
        soft_freeze=t.soft_freeze,
        fine_tune_alpha=t.fine_tune_alpha,
    )
    net, _, report = fine_tune(source, train_ds, prob, cfg, plan, derive_seed(ctx.seed, "transfer"), arch)
    written.extend(_write_training(ctx, net, report, holdout_raw, holdout_seen, "transfer"))

    if t.sweep:
        target = target_dataset(run, ctx.seed)
        normalized, _ = normalize(target)
        sweep_prob = nusselt_smoothness(normalized, run.model.n_collocation,
                                        derive_seed(ctx.seed, "collocation")) if pinn else None
        seeds = [derive_seed(ctx.seed, "sweep", i) for i in range(t.sweep_seeds)]
        frame = layer_sweep(source, normalized, sweep_prob, cfg, seeds, run.data.holdout_fraction, ctx.jobs)
        written.append(write_csv(ctx.out / "layer_sweep.csv", frame))
    return written


def cmd_hyperopt(ctx: RunContext) -> List[Path]:
    """Random / Bayesian search over kernel hyperparameters, or GA search over architectures."""
    run = ctx.run
    h = run.hyperopt
    ds = target_dataset(run, ctx.seed)
    search_seed = derive_seed(ctx.seed, "search")

    if h.target == "mlp":
        if h.method != "ga":
            raise ValidationError("Architecture search uses --method ga")
        normalized, _ = normalize(ds)
        objective = mlp_arch_objective(normalized, train_config(run, ctx.seed, TrainMode.DATA_ONLY),
                                       derive_seed(ctx.seed, "init"), arch_of(run).activation)
        result = ga_search(objective, h.population, h.generations, search_seed, jobs=ctx.jobs)
        return write_search(result, ctx.out, "mlp", normalized.n_features)

    if h.target == "svr":
        space, objective = SVR_SPACE, svr_objective(ds, h.folds, derive_seed(ctx.seed, "folds"))
    elif h.target == "gp":
        space, objective = GP_SPACE, gp_objective(ds, h.folds, derive_seed(ctx.seed, "folds"))
    else:
        raise ValidationError(f"Unknown search target {h.target!r}; choose from svr, gp, mlp")

    if h.method == "random":
        result = random_search(space, objective, h.budget, search_seed, ctx.jobs)
    elif h.method == "bayes":
        result = bayes_opt(space, objective, h.budget, h.n_init, search_seed)
    else:
        raise ValidationError(f"Method {h.method!r} does not apply to {h.target}; use random or bayes")
    return write_search(result, ctx.out, h.target)


def selected_models(run: RunConfig, default: List[str]) -> List[str]:
    models = run.eval.models or default
    unknown = [m for m in models if m not in MODEL_NAMES + ["SVR"]]
    if unknown:
        raise ValidationError(f"Unknown models {unknown}; choose from {MODEL_NAMES + ['SVR']}")
    return models


def cmd_benchmark(ctx: RunContext) -> List[Path]:
    """Six-model comparison on repeated holdout splits."""
    run = ctx.run
    models = selected_models(run, MODEL_NAMES)
    target = target_dataset(run, ctx.seed)
    rows = benchmark_suite(
        source_dataset(run, ctx.seed),
        target,
        arch_of(run, target.n_features),
        train_config(run, ctx.seed, TrainMode.PINN),
        run.eval,
        derive_seed(ctx.seed, "benchmark"),
        run.data.holdout_fraction,
        run.model.n_collocation,
        models,
    )
    return [write_csv(ctx.out / "benchmark.csv", benchmark_frame(rows))]


def cmd_mc_validate(ctx: RunContext) -> List[Path]:
    """Monte Carlo robustness study of the configured models on a shared holdout."""
    run = ctx.run
    target = target_dataset(run, ctx.seed)
    arch = arch_of(run, target.n_features)
    cfg = train_config(run, ctx.seed, TrainMode.PINN)
    models = selected_models(run, ROBUSTNESS_MODELS)
    source = None
    if "TL-NN" in models:
        source = source_network(source_dataset(run, ctx.seed), arch, cfg, ctx.seed)

    reports = []
    for name in models:
        spec = model_spec(name, arch, cfg, run.eval, source, run.model.n_collocation)
        reports.append(monte_carlo_cv(spec, target, run.eval.trials, run.data.holdout_fraction,
                                      derive_seed(ctx.seed, "mc"), ctx.jobs, progress=not ctx.quiet))
    ordering = variance_ordering_warning({r.model: r for r in reports})
    summary = {
        "prediction_variance": "variance across trials of raw predictions at a holdout drawn once, maximized "
                               "over holdout points; max_var_pred divides it by the variance of all targets",
        "trials": run.eval.trials,
        "pinn_variance_below_nn": ordering,
        "mean_mape": {r.model: r.mean_mape for r in reports},
    }
    return [
        write_csv(ctx.out / "robustness.csv", robustness_frame(reports)),
        write_json(ctx.out / "robustness.json", summary),
    ]


def cmd_stats(ctx: RunContext) -> List[Path]:
    """U-test and KDE of source vs target targets; lambda_p histogram of a training report."""
    run = ctx.run
    samples = [("source", source_dataset(run, ctx.seed)), ("target", target_dataset(run, ctx.seed))]
    (name_a, a), (name_b, b) = [(ds.domain or label, ds) for label, ds in samples]
    if name_a == name_b:
        name_a, name_b = "source", "target"
    result = mann_whitney_u(a.raw_targets(), b.raw_targets())
    logger.info(f"Mann-Whitney U={result.u:g}, p={result.p_value:.3g} ({result.method.value})")
    written = [write_json(ctx.out / "utest.json", {"sample_a": name_a, "sample_b": name_b,
                                                   **result.model_dump(mode="json")})]
    for name, ds in ((name_a, a), (name_b, b)):
        curve = kde(ds.raw_targets())
        frame = pd.DataFrame({"grid": curve.grid, "density": curve.density})
        written.append(write_csv(ctx.out / f"kde_{name}.csv", frame))

    if run.eval.train_report:
        path = Path(run.eval.train_report)
        if not path.exists():
            raise DataError(f"Training report not found: {path}")
        frame = pd.read_csv(path)
        if "lambda_p" not in frame.columns:
            raise DataError(f"{path}: no lambda_p column")
        trace = frame["lambda_p"].dropna().to_numpy(dtype=float)
        written.append(write_csv(ctx.out / "lambda_p_hist.csv", _histogram_frame(lambda_p_histogram(trace))))
    return written


HANDLERS: Dict[str, Callable[[RunContext], List[Path]]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "transfer": cmd_transfer,
    "hyperopt": cmd_hyperopt,
    "benchmark": cmd_benchmark,
    "mc-validate": cmd_mc_validate,
    "stats": cmd_stats,
}


def dispatch(args: argparse.Namespace) -> int:
    """Resolve the configuration, record it, and run the command."""
    run = resolve_run(args)
    options = vars(args)
    ctx = RunContext(run, options.get("jobs", settings.MAX_WORKERS), options.get("quiet", False))
    ctx.out.mkdir(parents=True, exist_ok=True)
    write_resolved(run)
    logger.info(f"{args.command}: seed {ctx.seed}, output {ctx.out}")
    for path in HANDLERS[args.command](ctx):
        logger.info(f"Wrote {path}")
    return 0
