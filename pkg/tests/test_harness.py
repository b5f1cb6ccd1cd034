import numpy as np
import pytest

from longae.dataio import DatasetBundle, dataset_stats
from longae.graph import ABSENT, PRESENT, build_adjacency
from longae.harness import (NumericError, TrainConfig, Trainer, aggregate, canonical_task, default_split,
                            run_link_prediction, run_multitask, run_node_classification, run_reconstruction)
from synth import sbm_bundle


def clique_pair():
    edges = [(i, j) for base in (0, 10) for i in range(base, base + 10) for j in range(i + 1, base + 10)]
    adj = build_adjacency(edges + [(0, 10)], 20)
    return DatasetBundle([str(i) for i in range(20)], adj, None, None, dataset_stats(adj), {})


def same_params(a, b):
    return all(t.tobytes() == b.tensors()[k].tobytes() for k, t in a.tensors().items())


class TestConfig:
    @pytest.mark.parametrize("task,epochs,batch", [("lp", 50, 8), ("reconstruct", 50, 8),
                                                   ("nc", 100, 64), ("multitask", 100, 64)])
    def test_task_defaults(self, task, epochs, batch):
        cfg = TrainConfig(task=task)
        assert (cfg.epochs, cfg.batch_size) == (epochs, batch)

    def test_input_dropout_only_for_link_tasks(self):
        assert TrainConfig(task="lp").model_config().input_dropout == 0.2
        assert TrainConfig(task="nc").model_config().input_dropout == 0.0
        assert TrainConfig(task="mt").model_config().hidden_dropout == 0.5

    def test_rejects(self):
        with pytest.raises(ValueError, match="unknown task"):
            canonical_task("clustering")
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)


class TestProtocols:
    def test_clique_pair_link_prediction(self):
        bundle = clique_pair()
        # four validation dyads are too coarse to early-stop on; train the full budget
        cfg = TrainConfig(task="lp", seed=0, val_frac=0.0)
        report, _ = run_link_prediction(bundle, default_split(bundle, cfg), cfg)
        assert report["test_auc"] > 0.9
        assert report["epochs_run"] == 50

    def test_two_cluster_node_classification(self):
        bundle = sbm_bundle(n=60, blocks=2, p_in=0.3, p_out=0.02, seed=4, labels_per_class=2)
        accs = [run_node_classification(bundle, TrainConfig(task="nc", seed=s, batch_size=8))[0]["test_accuracy"]
                for s in range(3)]
        assert np.mean(accs) > 0.9, accs

    def test_multitask_without_labels_is_link_prediction(self):
        bundle = sbm_bundle(n=40, seed=1)
        kw = dict(seed=3, epochs=6, batch_size=8)
        split = default_split(bundle, TrainConfig(task="lp"))
        lp, p_lp = run_link_prediction(bundle, split, TrainConfig(task="lp", **kw))
        mt, p_mt = run_multitask(bundle, split, TrainConfig(task="mt", **kw))
        assert same_params(p_lp, p_mt)
        assert mt["test_auc"] == lp["test_auc"] and mt["link_score"] == (lp["test_auc"] + lp["test_ap"]) / 2

    def test_multitask_reports_both(self):
        bundle = sbm_bundle(n=45, seed=2, n_features=3, labels_per_class=3, n_val=3)
        cfg = TrainConfig(task="mt", use_features=True, epochs=5, batch_size=16)
        report, params = run_multitask(bundle, default_split(bundle, cfg), cfg)
        assert {"link_score", "test_accuracy", "val_metric"} <= report.keys()
        assert params.n_classes == 3 and params.n_features == 3

    def test_task_mismatch_and_missing_labels(self):
        bundle = sbm_bundle(n=30)
        with pytest.raises(ValueError, match="task"):
            run_link_prediction(bundle, default_split(bundle, TrainConfig()), TrainConfig(task="nc"))
        with pytest.raises(ValueError, match="labels"):
            run_node_classification(bundle, TrainConfig(task="nc"))
        with pytest.raises(ValueError, match="features"):
            run_link_prediction(bundle, default_split(bundle, TrainConfig()), TrainConfig(use_features=True))


class TestReconstruction:
    def test_curve_rows(self):
        bundle = sbm_bundle(n=40, seed=0)
        report, _, curve = run_reconstruction(bundle, 0.3, [5, 20, 50], TrainConfig(task="rec", epochs=3))
        assert [k for k, _ in curve] == [5, 20, 50]
        assert report["edges"] == bundle.stats["edges"]
        assert report["density_baseline"] == pytest.approx(bundle.stats["edges"] / (40 * 39 / 2))

    def test_hidden_edges_counted(self):
        bundle = sbm_bundle(n=40, seed=0)
        report, _, _ = run_reconstruction(bundle, 0.5, [5], TrainConfig(task="rec", epochs=2, val_frac=0.0))
        assert report["hidden_edges"] == bundle.stats["edges"] // 2
        assert 0.0 <= report["hidden_precision"] <= 1.0
        full, _, _ = run_reconstruction(bundle, 0.0, [5], TrainConfig(task="rec", epochs=2, val_frac=0.0))
        assert full["hidden_edges"] == 0 and "hidden_precision" not in full

    def test_k_errors(self):
        bundle = sbm_bundle(n=10, seed=0)
        with pytest.raises(ValueError, match="exceeds"):
            run_reconstruction(bundle, 0.0, [46], TrainConfig(task="rec", epochs=1))
        with pytest.raises(ValueError, match="increasing"):
            run_reconstruction(bundle, 0.0, [5, 5], TrainConfig(task="rec", epochs=1))


class TestTraining:
    def test_deterministic(self):
        bundle = sbm_bundle(n=40, seed=0, n_features=3)
        cfg = TrainConfig(task="lp", use_features=True, epochs=4, seed=9)
        split = default_split(bundle, cfg)
        r1, p1 = run_link_prediction(bundle, split, cfg)
        r2, p2 = run_link_prediction(bundle, split, cfg)
        assert r1 == r2 and same_params(p1, p2)
        _, p3 = run_link_prediction(bundle, split, TrainConfig(task="lp", use_features=True, epochs=4, seed=10))
        assert not same_params(p1, p3)

    def test_held_out_truth_never_read(self):
        bundle = sbm_bundle(n=40, seed=5)
        cfg = TrainConfig(task="lp", epochs=4, seed=1)
        split = default_split(bundle, cfg)
        flipped = bundle.adjacency.with_values(split.test_pos, ABSENT).with_values(split.test_neg, PRESENT)
        other = DatasetBundle(bundle.node_ids, flipped, None, None, dataset_stats(flipped), {})
        _, p1 = run_link_prediction(bundle, split, cfg)
        _, p2 = run_link_prediction(other, split, cfg)
        assert same_params(p1, p2)

    def test_loss_decreases(self):
        bundle = sbm_bundle(n=40, seed=0)
        tr = Trainer(bundle.adjacency, None, TrainConfig(task="lp", epochs=10, seed=0))
        hist = tr.fit()
        assert hist[-1]["loss"] < hist[0]["loss"]

    def test_precision_64(self):
        bundle = sbm_bundle(n=20, seed=0)
        tr = Trainer(bundle.adjacency, None, TrainConfig(epochs=1, precision=64))
        tr.epoch()
        assert tr.params.dtype == np.float64

    def test_nan_loss_raises(self):
        bundle = sbm_bundle(n=20, seed=0)
        tr = Trainer(bundle.adjacency, None, TrainConfig(epochs=1))
        tr.params.b4[:] = np.nan
        with pytest.raises(NumericError):
            tr.epoch()

    def test_early_stop_restores_best(self):
        bundle = sbm_bundle(n=30, seed=0)
        tr = Trainer(bundle.adjacency, None, TrainConfig(epochs=20, patience=1))
        metrics = iter([0.5, 0.9, 0.4, 0.3, 0.2, 0.1] + [0.0] * 20)
        snapshots = []

        def monitor(p):
            snapshots.append(p.copy())
            return next(metrics)

        hist = tr.fit(monitor)
        assert len(hist) == 4 and tr.best_epoch == 2
        assert same_params(tr.params, snapshots[1])


def test_aggregate():
    out = aggregate([{"task": "lp", "seed": 0, "auc": 0.8}, {"task": "lp", "seed": 1, "auc": 0.9}])
    assert out["auc_mean"] == pytest.approx(0.85) and out["auc_std"] == pytest.approx(0.05)
    assert out["seeds"] == "0,1" and out["repeats"] == 2
    assert aggregate([{"task": "lp", "seed": 0, "auc": 0.8}]) == {"task": "lp", "seed": 0, "auc": 0.8}
