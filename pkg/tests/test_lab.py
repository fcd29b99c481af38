import json
import os

import numpy as np
import pytest

from multireduce import lab, synth
from multireduce.halfspace import BinarySample, exact_best_error
from multireduce.lab import ExperimentConfig


def small(name, **kw):
    return ExperimentConfig.from_dict({"experiment": name, **kw})


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------- configs

def test_config_rejects_unknown_keys_and_experiments():
    with pytest.raises(ValueError, match="unknown config keys: colour"):
        ExperimentConfig.from_dict({"experiment": "label_map", "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "label_maps"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"trials": 3})
    with pytest.raises(ValueError):
        small("label_map", trials=0)


def test_trial_seeds_are_base_plus_index():
    cfg = small("label_map", seed=40)
    assert [cfg.trial_seed(t) for t in range(3)] == [40, 41, 42]


def test_config_from_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"experiment": "error_curve", "m_grid": [5, 10]}))
    assert ExperimentConfig.from_json(str(p)).m_grid == [5, 10]


def test_wrappers_check_the_experiment_name():
    with pytest.raises(ValueError):
        lab.label_map_experiment(small("tree_root"))


def test_tree_from_spec():
    assert lab.tree_from_spec("chain", 4).to_string() == "(.(.(..)))"
    assert lab.tree_from_spec("((..).)", 3).num_leaves == 3
    with pytest.raises(ValueError):
        lab.tree_from_spec("((..).)", 4)


# ---------------------------------------------------------------- label-map experiment

def test_label_map_small_matches_direct_oracle():
    cfg = small("label_map", distribution={"kind": "circle", "k": 24}, trials=3, seed=5)
    res = lab.run_experiment(cfg)
    for rec in res.records:
        phi = synth.random_label_map(24, 0.5, "exact", cfg.trial_seed(rec.trial))
        b = synth.apply_label_map(synth.circle_points(24).support(), phi)
        assert rec.metrics["certified_error"] == exact_best_error(b)[0]
        assert rec.metrics["negative_mass"] == pytest.approx(0.5)
    assert res.warnings == []


def test_regime_warning_below_the_asymptotic_range(caplog):
    res = lab.run_experiment(small("label_map", distribution={"kind": "circle", "k": 6}, trials=2))
    assert res.warnings and "regime" in res.warnings[0]
    assert "regime" in caplog.text


def test_simplex_is_tight_for_every_label_map():
    cfg = small("label_map", distribution={"kind": "simplex", "d": 2}, params={"exhaustive": True})
    res = lab.run_experiment(cfg)
    assert len(res.records) == 8
    assert np.all(res.metric("certified_error") == 0)


def test_exhaustive_needs_small_k():
    with pytest.raises(ValueError):
        lab.run_experiment(small("label_map", distribution={"kind": "circle", "k": 20},
                                 params={"exhaustive": True}))


# ---------------------------------------------------------------- tree and code experiments

def test_tree_root_bracket_holds():
    cfg = small("tree_root", distribution={"kind": "circle", "k": 16}, trials=2)
    res = lab.run_experiment(cfg)
    assert np.all(res.metric("bracket_ok") == 1)
    assert np.all(res.metric("mu") == 0.5)
    assert np.all(res.metric("trained_tree_error") >= res.metric("certified_root_error"))


def test_tree_root_without_training():
    res = lab.run_experiment(small("tree_root", distribution={"kind": "circle", "k": 16},
                                   params={"train": False}))
    assert "trained_tree_error" not in res.records[0].metrics


def test_random_code_bracket_and_metrics():
    cfg = small("random_code", distribution={"kind": "circle", "k": 16}, trials=2,
                n_train=200, n_test=300, params={"code_length": 4})
    res = lab.run_experiment(cfg)
    assert np.all(res.metric("bracket_ok") == 1)
    assert np.all((res.metric("test_error") >= 0) & (res.metric("test_error") <= 1))
    assert any("k >> d l" in w for w in res.warnings)


def test_random_code_accepts_named_codes():
    res = lab.run_experiment(small("random_code", distribution={"kind": "circle", "k": 5},
                                   n_train=100, n_test=100, params={"code": "ova"}))
    assert res.records[0].metrics["certified_column_error"] == 0


# ---------------------------------------------------------------- showcase, containment, curves

def test_showcase_single_trial():
    res = lab.run_experiment(small("showcase_table", n_train=120, seed=3))
    m = res.records[0].metrics
    assert all(m[f"two-points.{meth}.train_error"] == 0 for meth in lab.SHOWCASE_METHODS)
    assert m["circle-9.msvm.train_error"] == 0 and m["circle-9.ova.train_error"] == 0
    assert m["center.msvm.train_error"] == 0
    assert m["center.ova.certified_center_error"] > 0
    assert res.summary["circle-9.msvm.train_error.fraction_zero"] == 1.0


def test_containment_single_trial():
    res = lab.run_experiment(small("containment_check", n_train=300, n_test=3000))
    m = res.records[0].metrics
    assert m["tree_msvm_disagreement"] <= 0.01
    assert m["msvm_ap_agreement"] == 1.0
    assert m["sector_msvm_error"] == 0 and m["sector_min_root_error"] > 0


def test_error_curve_and_svg(tmp_path):
    cfg = small("error_curve", m_grid=[10, 40], methods=["msvm", "ova"], n_test=300, trials=2)
    res = lab.run_experiment(cfg)
    assert set(res.records[0].metrics) == {"msvm.m10.test_error", "msvm.m40.test_error",
                                           "ova.m10.test_error", "ova.m40.test_error"}
    paths = lab.write_results(res, cfg, str(tmp_path))
    svg = (tmp_path / "curve.svg").read_text()
    assert str(tmp_path / "curve.svg") in paths
    assert svg.startswith("<svg") and svg.count("<polyline") == 2 and 'viewBox="0 0 400 300"' in svg


# ---------------------------------------------------------------- output and determinism

def test_csv_layout(tmp_path):
    cfg = small("label_map", distribution={"kind": "circle", "k": 6}, trials=2)
    lab.write_results(lab.run_experiment(cfg), cfg, str(tmp_path))
    rows = (tmp_path / "results.csv").read_text().splitlines()
    assert rows[0] == "experiment,trial,metric,value"
    assert rows[1].startswith("label_map,0,certified_error,")
    summary = (tmp_path / "summary.csv").read_text()
    assert summary.splitlines()[0] == "experiment,metric,value"
    assert "label_map,warning,regime violated" in summary
    assert json.loads((tmp_path / "config.json").read_text())["trials"] == 2


def test_rerun_is_byte_identical(tmp_path):
    cfg = small("random_code", distribution={"kind": "circle", "k": 12}, trials=2,
                n_train=100, n_test=100, params={"code_length": 4})
    for name in ("a", "b"):
        lab.write_results(lab.run_experiment(cfg), cfg, str(tmp_path / name))
    for f in ("results.csv", "summary.csv", "config.json"):
        assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f)


def test_parallel_trials_merge_in_order(tmp_path):
    cfg = small("label_map", distribution={"kind": "circle", "k": 32}, trials=4, seed=9)
    one = lab.run_experiment(cfg, threads=1)
    two = lab.run_experiment(cfg, threads=2)
    assert [r.metrics for r in one.records] == [r.metrics for r in two.records]
    lab.write_results(one, cfg, str(tmp_path / "one"))
    lab.write_results(two, cfg, str(tmp_path / "two"))
    assert read(tmp_path / "one" / "results.csv") == read(tmp_path / "two" / "results.csv")


def test_trial_subset_is_reproducible_on_its_own():
    full = lab.run_experiment(small("label_map", distribution={"kind": "circle", "k": 20}, trials=3, seed=2))
    tail = lab.run_experiment(small("label_map", distribution={"kind": "circle", "k": 20}, trials=1, seed=4))
    assert tail.records[0].metrics == full.records[2].metrics


def test_certify_beyond_two_dimensions():
    X = np.eye(3)
    assert lab._certify(BinarySample(X, [1, -1, -1])) == 0
    X4 = np.array([[0, 0, 0], [1, 1, 0], [0, 1, 0], [1, 0, 0]], dtype=float)
    with pytest.raises(ValueError):
        lab._certify(BinarySample(X4, [1, 1, -1, -1]))


def test_write_results_creates_directory(tmp_path):
    cfg = small("label_map", distribution={"kind": "circle", "k": 6})
    out = tmp_path / "deep" / "dir"
    paths = lab.write_results(lab.run_experiment(cfg), cfg, str(out))
    assert all(os.path.exists(p) for p in paths)
