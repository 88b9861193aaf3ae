import math

import numpy as np
import pytest

import fgam.train as train_mod
from fgam.model import FGamConfig, init_params
from fgam.pipeline import prepare
from fgam.synthetic import default_interaction_spec, generate
from fgam.train import (
    SgdOptimizer,
    TrainConfig,
    TrainingDiverged,
    apply_weight_decay,
    cross_entropy,
    split,
    train_arrays,
    write_history,
)
from fgam.workflow import train_dataset, train_prepared


def small_problem(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x_tv = rng.normal(size=(n, 1))
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-2.5 * x_tv[:, 0]))).astype(float)
    x_static = np.zeros((n, 0))
    config = FGamConfig(
        static_cardinalities=(), d_tv=1, dnnn_depth=2, dnnn_width=4, dropout_rate=0.0
    )
    n_valid = n // 5
    return (
        x_static[n_valid:], x_tv[n_valid:], y[n_valid:],
        x_static[:n_valid], x_tv[:n_valid], y[:n_valid],
        config,
    )


class TestSplit:
    def test_ten_rows_default_fractions(self):
        s = split(10, (0.7, 0.1, 0.2), seed=1)
        assert (len(s.train), len(s.valid), len(s.test)) == (7, 1, 2)

    def test_same_seed_identical_partition(self):
        a, b = split(100, (0.7, 0.1, 0.2), 42), split(100, (0.7, 0.1, 0.2), 42)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.valid, b.valid)
        assert np.array_equal(a.test, b.test)

    def test_partition_is_disjoint_and_exhaustive(self):
        s = split(137, (0.6, 0.2, 0.2), 7)
        merged = np.sort(np.concatenate([s.train, s.valid, s.test]))
        assert np.array_equal(merged, np.arange(137))

    def test_bad_fraction_sum_rejected(self):
        with pytest.raises(ValueError):
            split(10, (0.7, 0.1, 0.1), 0)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            split(0, (0.7, 0.1, 0.2), 0)


class TestCrossEntropy:
    def test_coin_flip(self):
        assert cross_entropy([0.5], [1]) == pytest.approx(math.log(2), abs=1e-12)
        assert cross_entropy([0.5], [0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_near_perfect_prediction(self):
        assert cross_entropy([1.0 - 1e-12], [1]) < 2e-12

    def test_hand_arithmetic(self):
        want = -(math.log(0.9) + math.log(0.8)) / 2
        assert cross_entropy([0.9, 0.2], [1, 0]) == pytest.approx(want, abs=1e-9)
        assert want == pytest.approx(0.164252, abs=1e-6)

    def test_clipping_keeps_loss_finite(self):
        assert np.isfinite(cross_entropy([0.0, 1.0], [1, 0]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cross_entropy([0.5], [1, 0])


class TestWeightDecay:
    def scalar_params(self, theta):
        config = FGamConfig(
            static_cardinalities=(), d_tv=1, identity_features=True, dropout_rate=0.0
        )
        params = init_params(config, 0)
        params.weight_head.bias[...] = theta
        params.bias_head.bias[...] = 0.0
        return params

    def test_zero_decay_returns_grads_unchanged(self):
        params = self.scalar_params(2.0)
        grads = {n: np.zeros_like(a) for n, a in params.named_parameters()}
        assert apply_weight_decay(grads, params, 0.0) is grads

    def test_single_step_closed_form(self):
        eta, lam, theta0 = 0.1, 0.5, 2.0
        params = self.scalar_params(theta0)
        grads = {n: np.zeros_like(a) for n, a in params.named_parameters()}
        decayed = apply_weight_decay(grads, params, lam)
        SgdOptimizer(eta).step(params.named_parameters(trainable_only=True), decayed)
        assert params.weight_head.bias[0] == pytest.approx(
            theta0 * (1 - eta * lam), abs=1e-15
        )

    def test_k_steps_geometric(self):
        eta, lam, theta0, k = 0.05, 0.3, 1.7, 12
        params = self.scalar_params(theta0)
        opt = SgdOptimizer(eta)
        for _ in range(k):
            grads = {n: np.zeros_like(a) for n, a in params.named_parameters()}
            opt.step(
                params.named_parameters(trainable_only=True),
                apply_weight_decay(grads, params, lam),
            )
        assert params.weight_head.bias[0] == pytest.approx(
            theta0 * (1 - eta * lam) ** k, rel=1e-12
        )

    def test_embeddings_are_decayed_too(self):
        config = FGamConfig(static_cardinalities=(3,), d_tv=1, dropout_rate=0.0,
                            dnnn_depth=1, dnnn_width=2, trunk_widths=(2,))
        params = init_params(config, 0)
        grads = {n: np.zeros_like(a) for n, a in params.named_parameters()}
        decayed = apply_weight_decay(grads, params, 0.5)
        assert np.allclose(decayed["embedding.0"], 0.5 * params.embeddings[0].vectors)


class TestTrainLoop:
    def test_zero_learning_rate_leaves_parameters_at_init(self):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        tc = TrainConfig(learning_rate=0.0, max_epochs=5, patience=10, seed=3,
                         weight_decay=0.0)
        result = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        fresh = init_params(config, np.random.default_rng([3, 0xA11CE]))
        for (_, a), (_, b) in zip(
            result.params.named_parameters(), fresh.named_parameters()
        ):
            assert np.array_equal(a, b)
        assert len(set(result.history.valid_loss)) == 1  # flat history

    def test_early_stopping_rule(self, monkeypatch):
        # scripted validation losses: improve for 3 epochs, rise at epoch 4
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        scripted = iter([0.5, 0.4, 0.3, 0.6, 0.7, 0.8, 0.9, 1.0])
        monkeypatch.setattr(
            train_mod, "cross_entropy", lambda p, l: next(scripted)
        )
        tc = TrainConfig(learning_rate=0.01, max_epochs=50, patience=1, seed=0)
        result = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        assert result.history.stopped_epoch == 4
        assert result.history.best_epoch == 3

    def test_patience_counts_consecutive_failures(self, monkeypatch):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        scripted = iter([0.5, 0.6, 0.45, 0.7, 0.7, 0.7, 0.9])
        monkeypatch.setattr(train_mod, "cross_entropy", lambda p, l: next(scripted))
        tc = TrainConfig(learning_rate=0.01, max_epochs=50, patience=3, seed=0)
        result = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        assert result.history.best_epoch == 3
        assert result.history.stopped_epoch == 6

    def test_determinism_bitwise(self):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        tc = TrainConfig(learning_rate=0.02, max_epochs=6, seed=11)
        a = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        b = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        for (na, pa), (nb, pb) in zip(
            a.params.named_parameters(), b.params.named_parameters()
        ):
            assert na == nb
            assert np.array_equal(pa, pb)
        assert a.history.valid_loss == b.history.valid_loss

    def test_returns_best_epoch_parameters(self):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        tc = TrainConfig(learning_rate=0.05, max_epochs=30, patience=5, seed=2)
        result = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        h = result.history
        assert h.best_epoch <= h.stopped_epoch
        assert h.valid_loss[h.best_epoch - 1] == min(h.valid_loss)

    def test_learns_linearly_separable_synthetic(self):
        from fgam import metrics

        rng = np.random.default_rng(0)
        n = 1200
        x = rng.normal(size=(n, 1))
        y = (x[:, 0] > 0).astype(float)  # separable by the LR special case
        config = FGamConfig(
            static_cardinalities=(), d_tv=1, dnnn_depth=2, dnnn_width=4,
            dropout_rate=0.0,
        )
        tc = TrainConfig(learning_rate=0.02, max_epochs=50, patience=10, seed=5,
                         batch_size=128)
        result = train_arrays(
            np.zeros((900, 0)), x[:900], y[:900],
            np.zeros((300, 0)), x[900:], y[900:], config, tc,
        )
        from fgam.model import forward

        probs = forward(result.params, np.zeros((900, 0)), x[:900])
        assert metrics.auroc(probs, y[:900]) > 0.95
        assert result.history.stopped_epoch <= 50

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_diagnostic(self):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        tc = TrainConfig(learning_rate=1e12, optimizer="sgd", max_epochs=10, seed=0)
        with pytest.raises(TrainingDiverged):
            train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)

    def test_empty_split_rejected(self):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        with pytest.raises(ValueError):
            train_arrays(xs, xt, y, xsv[:0], xtv[:0], yv[:0], config, TrainConfig())

    def test_history_file_round_trip(self, tmp_path):
        xs, xt, y, xsv, xtv, yv, config = small_problem()
        tc = TrainConfig(learning_rate=0.02, max_epochs=4, seed=1)
        result = train_arrays(xs, xt, y, xsv, xtv, yv, config, tc)
        path = write_history(result.history, tmp_path / "history.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,valid_loss,valid_auroc"
        assert len(lines) == result.history.stopped_epoch + 1
        first = lines[1].split(",")
        assert float(first[1]) == result.history.train_loss[0]


class TestNoTestLeakage:
    def test_standardization_consults_only_train_rows(self, monkeypatch):
        import fgam.pipeline as pipeline_mod

        spec = default_interaction_spec(0.3)
        dataset, _ = generate(spec, 300, seed=4)
        # poison rows that will land in valid/test: huge numeric values
        seen_rows = []
        real_fit = pipeline_mod.fit_numeric_stats

        def spy(values):
            seen_rows.append(np.asarray(values).size)
            return real_fit(values)

        monkeypatch.setattr(pipeline_mod, "fit_numeric_stats", spy)
        prepared = prepare(dataset, (0.7, 0.1, 0.2), seed=9)
        n_train = len(prepared.split.train)
        assert seen_rows and all(size == n_train for size in seen_rows)

        # stats must equal hand-computed train-only statistics
        col = dataset.columns["vital_a"][prepared.split.train]
        assert prepared.stats.numeric["vital_a"].mean == pytest.approx(
            float(np.mean(col)), abs=1e-12
        )
        assert prepared.stats.numeric["vital_a"].std == pytest.approx(
            float(np.std(col)), abs=1e-12
        )

    def test_training_never_reads_test_rows(self, monkeypatch):
        spec = default_interaction_spec(0.3)
        dataset, _ = generate(spec, 240, seed=12)
        prepared = prepare(dataset, (0.7, 0.1, 0.2), seed=12)

        captured = {}
        real = train_mod.train_arrays

        def spy(xs, xt, y, xsv, xtv, yv, config, tc):
            captured["rows"] = xs.shape[0] + xsv.shape[0]
            return real(xs, xt, y, xsv, xtv, yv, config, tc)

        monkeypatch.setattr("fgam.workflow.train_arrays", spy)
        tc = TrainConfig(max_epochs=2, seed=12)
        train_prepared(prepared, tc, dnnn_depth=1, dnnn_width=2, trunk_widths=(4,))
        n_test = len(prepared.split.test)
        assert captured["rows"] == prepared.y.shape[0] - n_test


class TestEndToEndSmoke:
    def test_train_dataset_flow(self):
        spec = default_interaction_spec(0.25)
        dataset, _ = generate(spec, 900, seed=21)
        tc = TrainConfig(learning_rate=0.02, max_epochs=8, patience=4, seed=21,
                         batch_size=128)
        bundle, history, prepared = train_dataset(
            dataset, tc, dnnn_depth=2, dnnn_width=4, trunk_widths=(8,),
            dropout_rate=0.05,
        )
        assert bundle.params.config.d_tv == 4
        assert history.stopped_epoch >= 1
        assert len(bundle.tv_names) == 4
