"""
Statistical acceptance runs: gradient checks on random networks, PINN learning,
the prediction margin, transfer ordering, optimality of the SVR solver, search
recovery rates, U-test oracles and the robustness study.
"""

import json

import numpy as np
import pandas as pd
import pytest
from scipy.stats import mannwhitneyu

from adaptive_pinn.main import main
from adaptive_pinn.models.dataset import SynthDomain, SynthSpec
from adaptive_pinn.models.network import ArchSpec
from adaptive_pinn.models.physics import FluidProperties
from adaptive_pinn.models.report import EvalSection
from adaptive_pinn.models.search import ParamDimension, ParamKind, ParamSpace
from adaptive_pinn.models.training import TrainConfig, TrainMode
from adaptive_pinn.services import autodiff as ad
from adaptive_pinn.services.benchmark import benchmark_suite, model_spec, ordering_checks, source_network
from adaptive_pinn.services.blending import BlendingNeuron, data_loss_of
from adaptive_pinn.services.data_service import normalize, split, synthesize
from adaptive_pinn.services.eval_stats import ROBUSTNESS_COLUMNS, kde, mann_whitney_u, mape, within_margin
from adaptive_pinn.services.hyperopt import bayes_opt, ga_search, random_search
from adaptive_pinn.services.kernel_baselines import kernel_matrix, svr_dual_objective, svr_fit, svr_predict
from adaptive_pinn.services.mlp import Mlp
from adaptive_pinn.services.physics import (
    NetworkField,
    evaluate,
    exact_solution,
    make_problem,
    physics_loss,
    physics_loss_of,
    problem_dataset,
)
from adaptive_pinn.services.trainer import predict_raw, train
from adaptive_pinn.services.transfer import layer_sweep
from adaptive_pinn.utils.file_utils import run_digest

pytestmark = pytest.mark.slow


def random_arch(rng, input_dim):
    widths = [int(w) for w in rng.integers(1, 9, size=int(rng.integers(1, 4)))]
    return ArchSpec(input_dim=input_dim, hidden=widths)


def central_gradient(loss, params, h=1e-6):
    gradient = np.zeros_like(params)
    for i in range(params.size):
        step = np.zeros_like(params)
        step[i] = h
        gradient[i] = (loss(params + step) - loss(params - step)) / (2 * h)
    return gradient


class TestGradientAcceptance:
    """Test taped parameter gradients on random networks."""

    def test_data_loss(self):
        """Test data-only gradients against central differences."""
        rng = np.random.default_rng(0)
        for trial in range(100):
            arch = random_arch(rng, 2)
            net = Mlp.init(arch, trial)
            x = rng.uniform(-1.0, 1.0, size=(10, 2))
            y = rng.normal(size=10)

            def loss(theta):
                return float(data_loss_of(arch, theta, x, y))

            _, (gradient,) = ad.value_and_grad(lambda theta: data_loss_of(arch, theta, x, y), net.params)
            np.testing.assert_allclose(gradient, central_gradient(loss, net.params), rtol=1e-5, atol=1e-7)

    def test_physics_loss(self):
        """Test gradients through first and second input derivatives."""
        rng = np.random.default_rng(1)
        for trial in range(100):
            arch = random_arch(rng, 1)
            net = Mlp.init(arch, 100 + trial)
            prob = make_problem("convdiff1d" if trial % 2 else "conduction-vark1d", 8, trial)
            _, (gradient,) = ad.value_and_grad(
                lambda theta: physics_loss_of(prob, NetworkField(arch, theta)), net.params
            )
            expected = central_gradient(lambda theta: physics_loss(net.with_params(theta), prob), net.params)
            np.testing.assert_allclose(gradient, expected, rtol=1e-4, atol=1e-6)


class TestPhysicsAcceptance:
    """Test residual exactness across Peclet numbers."""

    @pytest.mark.parametrize("peclet", [1.0, 10.0, 50.0])
    def test_convection_diffusion(self, peclet):
        """Test that the exponential profile has (numerically) zero physics loss."""
        prob = make_problem("convdiff1d", 64, 0, props=FluidProperties(u_adv=peclet))
        assert evaluate(prob, exact_solution(prob)).loss < 1e-9

    def test_conduction(self):
        """Test that sin(pi x) has zero physics loss."""
        prob = make_problem("conduction1d", 64, 0)
        assert evaluate(prob, exact_solution(prob)).loss < 1e-9


class TestPinnLearning:
    """Test that the adaptive PINN learns the convection-diffusion profile."""

    def test_holdout_mape_and_blending_trace(self):
        """Test holdout MAPE < 0.05 in at least 8 of 10 seeds with lambda_p centred in (0.2, 0.8)."""
        successes = 0
        for seed in range(10):
            # Dirichlet values 1 and 2 keep every target away from zero.
            prob = make_problem("convdiff1d", 32, seed, boundary=(1.0, 2.0))
            holdout, train_ds = split(problem_dataset(prob, 60, seed), 1 / 3, seed)
            assert (holdout.n_samples, train_ds.n_samples) == (20, 40)

            cfg = TrainConfig(mode=TrainMode.PINN, learning_rate=1e-3, max_epochs=1200, seed=seed)
            net, _, report = train(Mlp.init(ArchSpec.parse("1-[16,16]-1"), seed), BlendingNeuron(0.0),
                                   train_ds, prob, cfg)
            if mape(holdout.raw_targets(), predict_raw(net, report, holdout.features)).mape < 0.05:
                successes += 1

            trace = report.lambda_p_trace
            assert len(trace) == report.n_epochs
            assert 0.2 < np.mean(trace[len(trace) // 2:]) < 0.8
        assert successes >= 8


class TestMarginAcceptance:
    """Test the relative-error margin of PINN predictions on the sodium analog."""

    def test_within_eight_percent(self):
        """Test that the median over 5 seeds has at least 90% of holdout points within 8% of the clean truth."""
        cfg = TrainConfig(learning_rate=5e-3, max_epochs=1500, early_stop_patience=100)
        spec = model_spec("PINN", ArchSpec.parse("3-[16,16]-1"), cfg, EvalSection())
        fractions = []
        for seed in range(5):
            ds = synthesize(SynthSpec.default(SynthDomain.SODIUM, 87, 0.05, seed))
            holdout, train_ds = split(ds, 0.2, seed)
            fitted = spec.fit(train_ds, seed)
            fractions.append(within_margin(holdout.clean_targets, fitted.predict(holdout.features)))
        assert np.median(fractions) >= 0.9


class TestTransferAcceptance:
    """Test the water to sodium transfer orderings over 20 seeds."""

    ARCH = ArchSpec.parse("3-[16,16]-1")
    CFG = TrainConfig(learning_rate=5e-3, max_epochs=1500, early_stop_patience=100)

    @pytest.fixture(scope="class")
    def domains(self):
        water = synthesize(SynthSpec.default(SynthDomain.WATER, 400, 0.0, 1))
        sodium = synthesize(SynthSpec.default(SynthDomain.SODIUM, 87, 0.05, 2))
        return water, sodium

    def test_transfer_not_worse_than_plain(self, domains):
        """Test median holdout MAPE of TL-NN <= NN over 20 splits."""
        water, sodium = domains
        rows = benchmark_suite(water, sodium, self.ARCH, self.CFG, EvalSection(seeds=20), seed=0,
                               models=("TL-NN", "NN"))
        assert [r.status.value for r in rows] == ["ok", "ok"]
        assert all(len(r.mapes) == 20 for r in rows)
        assert ordering_checks(rows)["TL-NN<=NN"]

    def test_first_layer_sweep_not_worse_than_last(self, domains):
        """Test that freezing the first transferred layer is not worse than the last one."""
        water, sodium = domains
        source = source_network(water, self.ARCH, self.CFG, 0)
        target, _ = normalize(sodium)
        frame = layer_sweep(source, target, None, self.CFG, seeds=range(20), jobs=4)
        assert frame["seeds"].tolist() == [20, 20]
        assert frame["median_mape"].iloc[0] <= frame["median_mape"].iloc[-1]


class TestSvrAcceptance:
    """Test optimality of the SMO solution."""

    def test_dual_beats_random_feasible_points(self):
        """Test that the solved dual is at least as good as 1000 feasible points per problem."""
        rng = np.random.default_rng(2)
        C, gamma, epsilon = 5.0, 2.0, 0.05
        for _ in range(5):
            x = rng.uniform(0.0, 1.0, size=(15, 2))
            y = np.sin(3.0 * x[:, 0]) + x[:, 1] + 0.05 * rng.normal(size=15)
            model = svr_fit((x, y), C, gamma, epsilon)
            gram = kernel_matrix(x, gamma)
            best = svr_dual_objective(model.all_coef, gram, y, epsilon)
            for _ in range(1000):
                beta = rng.uniform(-C, C, size=15)
                beta -= beta.mean()
                beta *= min(1.0, C / np.max(np.abs(beta)))
                assert svr_dual_objective(beta, gram, y, epsilon) <= best + 1e-9

    def test_constant_target(self):
        """Test that a constant target needs no support vectors."""
        x = np.random.default_rng(3).uniform(size=(12, 2))
        model = svr_fit((x, np.full(12, 3.0)), C=1.0, gamma=1.0, epsilon=0.1)
        assert np.all(model.all_coef == 0.0)
        np.testing.assert_allclose(svr_predict(model, x), 3.0, atol=0.1)


class TestSearchAcceptance:
    """Test that Bayesian optimization beats random search on a smooth objective."""

    def test_bayes_not_worse_than_random(self):
        """Test median best objective over paired seeds with budget 30."""
        space = ParamSpace(dimensions=[
            ParamDimension(name="a", kind=ParamKind.LINEAR_REAL, low=0.0, high=1.0),
            ParamDimension(name="b", kind=ParamKind.LINEAR_REAL, low=0.0, high=1.0),
        ])

        def objective(p):
            return (p["a"] - 0.3) ** 2 + (p["b"] - 0.7) ** 2

        bayes = [bayes_opt(space, objective, 30, 5, seed).best.objective for seed in range(20)]
        rand = [random_search(space, objective, 30, seed).best.objective for seed in range(20)]
        assert np.median(bayes) <= np.median(rand)

    def test_bayes_recovery_rate(self):
        """Test that the best point lies within 0.05 of the minimizer in at least 18 of 20 seeds."""
        space = ParamSpace(dimensions=[ParamDimension(name="x", kind=ParamKind.LINEAR_REAL, low=0.0, high=1.0)])
        hits = 0
        for seed in range(20):
            best = bayes_opt(space, lambda p: (p["x"] - 0.3) ** 2, 30, 5, seed).best
            hits += abs(best.point["x"] - 0.3) <= 0.05
        assert hits >= 18

    def test_ga_recovers_two_layers_of_eight(self):
        """Test that random initial populations reach widths [8, 8] in at least 16 of 20 seeds."""
        def objective(genome):
            return abs(genome.n_layers - 2) + sum(abs(w - 8) for w in genome.widths)

        hits = 0
        for seed in range(20):
            result = ga_search(objective, population=40, generations=40, seed=seed)
            assert result.evaluations == 1600
            hits += result.best.widths == [8, 8]
        assert hits >= 16


class TestStatisticsAcceptance:
    """Test the U test and KDE against reference values."""

    def test_exact_p_values(self):
        """Test exact p-values against scipy on 100 random small samples."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            n1, n2 = (int(n) for n in rng.integers(1, 7, size=2))
            a, b = rng.normal(size=n1), rng.normal(0.5, 1.0, size=n2)
            result = mann_whitney_u(a, b)
            reference = mannwhitneyu(a, b, alternative="two-sided", method="exact")
            assert result.u == pytest.approx(reference.statistic)
            assert result.p_value == pytest.approx(reference.pvalue, rel=1e-9)

    def test_domains_differ(self):
        """Test that the water and sodium analogs are distinguishable."""
        water = synthesize(SynthSpec.default(SynthDomain.WATER, noise_stddev=0.05, seed=1))
        sodium = synthesize(SynthSpec.default(SynthDomain.SODIUM, noise_stddev=0.05, seed=2))
        assert mann_whitney_u(water.raw_targets(), sodium.raw_targets()).p_value < 0.05

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_kde_normalized(self, seed):
        """Test that density curves integrate to one."""
        sample = np.random.default_rng(seed).gamma(2.0, 1.5, size=87)
        assert kde(sample).integral() == pytest.approx(1.0, abs=0.02)


class TestRobustnessAcceptance:
    """Test the 100-trial robustness study of the three network models."""

    def test_report_shape_and_rerun(self, tmp_path):
        """Test one row per network model, the variance columns and byte-identical reruns."""
        argv = ["mc-validate", "--trials", "100", "--models", "TL-NN,NN,PINN", "--epochs", "200",
                "--seed", "5", "--quiet"]
        assert main(argv + ["--output-dir", str(tmp_path / "a"), "--jobs", "4"]) == 0
        assert main(argv + ["--output-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0

        frame = pd.read_csv(tmp_path / "a" / "robustness.csv")
        assert list(frame.columns) == ROBUSTNESS_COLUMNS
        assert frame["model"].tolist() == ["TL-NN", "NN", "PINN"]
        assert (frame["trials"] == 100).all()
        assert (frame[["max_var_pred", "max_var_mape", "avg_epochs"]] >= 0).all().all()

        # The variance ordering is recorded, not enforced.
        summary = json.loads((tmp_path / "a" / "robustness.json").read_text())
        assert isinstance(summary["pinn_variance_below_nn"], bool)
        assert run_digest(tmp_path / "a") == run_digest(tmp_path / "b")


class TestDeterminism:
    """Test that reruns reproduce their reports."""

    def test_mc_validate_rerun(self, tmp_path):
        """Test byte-identical robustness reports across reruns and worker counts."""
        argv = ["mc-validate", "--models", "GP,NN", "--trials", "4", "--n", "25", "--epochs", "5", "--seed", "11"]
        assert main(argv + ["--output-dir", str(tmp_path / "a")]) == 0
        assert main(argv + ["--output-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
        assert list(run_digest(tmp_path / "a")) == ["robustness.csv", "robustness.json"]
        assert run_digest(tmp_path / "a") == run_digest(tmp_path / "b")
