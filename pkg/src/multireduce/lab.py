"""Seeded experiment harness.

Each experiment is a per-trial function plus a summary.  Trial ``t`` uses
seed ``cfg.seed + t``, so any subset of trials can be rerun on its own.
Approximation errors are bracketed: the exact oracle (d <= 2) gives
certified lower bounds, trained models give upper-bound witnesses.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import codes as C
from . import reducers as R
from . import synth
from . import trees as T
from .errors import NotRealizableError
from .halfspace import BinarySample, Halfspace, empirical_error, exact_best_error, train_realizable

log = logging.getLogger(__name__)

_FIELDS = {"experiment", "distribution", "methods", "trials", "seed", "mu", "nu", "eps", "rule",
           "n_train", "n_test", "m_grid", "params", "threads", "regime_factor", "out"}


@dataclass
class ExperimentConfig:
    experiment: str
    distribution: dict = field(default_factory=dict)
    methods: list = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    mu: float = 0.5
    nu: float = 0.1
    eps: float = 0.01
    rule: str = "exact"
    n_train: int = 500
    n_test: int = 2000
    m_grid: list = field(default_factory=lambda: [10, 30, 100, 300])
    params: dict = field(default_factory=dict)
    threads: int = 1
    regime_factor: float = 8.0
    out: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if int(self.trials) < 1:
            raise ValueError("trial count must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - _FIELDS
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "experiment" not in data:
            raise ValueError("config needs an 'experiment' key")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def trial_seed(self, trial: int) -> int:
        return int(self.seed) + int(trial)


@dataclass
class TrialRecord:
    trial: int
    metrics: dict


@dataclass
class ExperimentResult:
    experiment: str
    records: list
    summary: dict
    warnings: list = field(default_factory=list)

    def metric(self, name: str) -> np.ndarray:
        return np.array([r.metrics[name] for r in self.records], dtype=np.float64)


# ---------------------------------------------------------------- helpers

def _distribution(cfg: ExperimentConfig, default: dict) -> synth.SyntheticDistribution:
    spec = dict(default)
    spec.update(cfg.distribution)
    return synth.from_config(spec)


def _certify(binary: BinarySample) -> float:
    """Exact best halfspace error; for d > 2 only a zero certificate via separation."""
    if binary.dim <= 2:
        return exact_best_error(binary)[0]
    try:
        h = train_realizable(binary, budget=100_000)
    except NotRealizableError:
        raise ValueError("exact certification needs d <= 2 unless the problem is separable") from None
    return empirical_error(h, binary)


def _summary(records, keys=None) -> dict:
    out = {"trials": len(records)}
    if not records:
        return out
    keys = keys or list(records[0].metrics)
    for key in keys:
        v = np.array([r.metrics[key] for r in records], dtype=np.float64)
        out[f"{key}.mean"] = float(v.mean())
        out[f"{key}.min"] = float(v.min())
        out[f"{key}.q50"] = float(np.quantile(v, 0.5))
        out[f"{key}.max"] = float(v.max())
    return out


def _regime(cfg, k, needed, what) -> list:
    if k < needed:
        msg = f"regime violated: k={k} < {needed:g} ({what}); no lower-bound claim is made"
        log.warning(msg)
        return [msg]
    return []


def tree_from_spec(spec, k: int, seed=None) -> T.TreeShape:
    if spec in (None, "balanced"):
        return T.balanced_tree(k)
    if spec == "chain":
        return T.chain_tree(k)
    if spec == "random":
        return T.random_tree(k, seed)
    shape = T.TreeShape.from_string(spec)
    if shape.num_leaves != k:
        raise ValueError(f"tree has {shape.num_leaves} leaves, expected {k}")
    return shape


def fit_method(name: str, sample: R.MulticlassSample, k: int, seed: int, params: dict):
    """Best-effort training of one reduction; randomised parts (lambda, codes) use ``seed``."""
    learner = R.LearnerConfig(seed=seed)
    rng = np.random.default_rng([seed, 1])
    if name == "msvm":
        try:
            return R.train_msvm(sample, "realizable", budget=int(params.get("msvm_budget", 20_000)), k=k)
        except NotRealizableError:
            return R.train_msvm(sample, "approximate", seed=seed, k=k)
    if name == "ova":
        return R.train_ova(sample, learner, k)
    if name == "ap":
        return R.train_ap(sample, learner, k)
    if name == "tree":
        shape = tree_from_spec(params.get("tree", "balanced"), k, [seed, 2])
        labels = np.arange(1, k + 1) if params.get("tree_labels") == "identity" else rng.permutation(k) + 1
        return R.train_tree(shape, labels, sample, learner)
    if name == "ecoc":
        l = int(params.get("code_length", 4))
        M = C.random_code(k, l, [seed, 3], distinct_rows=2 ** l >= 2 * k)
        return R.train_ecoc(M, sample, learner)
    raise ValueError(f"unknown method {name!r}")


# ---------------------------------------------------------------- label-map experiment

def _label_map_trial(cfg, trial):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 512})
    support = dist.support()
    if cfg.params.get("exhaustive"):
        bits = (trial >> np.arange(dist.k)) & 1
        phi = synth.LabelMap(np.where(bits == 1, -1, 1), "enumerated")
    else:
        phi = synth.random_label_map(dist.k, cfg.mu, cfg.rule, cfg.trial_seed(trial))
    binary = synth.apply_label_map(support, phi)
    err = _certify(binary)
    neg_mass = float(binary.normalized_weights()[binary.y < 0].sum())
    return {"certified_error": err, "negative_mass": neg_mass,
            "meets_threshold": float(err >= cfg.mu - cfg.nu - 1e-12)}


def _label_map_summary(cfg, records):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 512})
    out = _summary(records)
    out["surrogate_threshold"] = cfg.mu - cfg.nu
    out["fraction_meeting_threshold"] = out.pop("meets_threshold.mean")
    return out, _regime(cfg, dist.k, cfg.regime_factor * (dist.d + 1), "k >> d+1")


def _label_map_trials(cfg):
    if cfg.params.get("exhaustive"):
        k = _distribution(cfg, {"kind": "circle-points", "k": 512}).k
        if k > 16:
            raise ValueError("exhaustive enumeration of label maps needs k <= 16")
        return 1 << k
    return cfg.trials


# ---------------------------------------------------------------- tree root experiment

def _tree_root_trial(cfg, trial):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 128})
    k = dist.k
    s = cfg.trial_seed(trial)
    rng = np.random.default_rng(s)
    shape = tree_from_spec(cfg.params.get("tree", "balanced"), k, [s, 2])
    labels = rng.permutation(k) + 1
    left, right = shape.subtree_leaves[0]
    support = dist.support()
    root = R.node_problem(shape, labels, support, 0)
    mu = min(len(left), len(right)) / k
    out = {"mu": mu, "certified_root_error": _certify(root)}
    out["meets_threshold"] = float(out["certified_root_error"] >= mu - cfg.nu - 1e-12)
    if cfg.params.get("train", True):
        model = R.train_tree(shape, labels, support, R.LearnerConfig(seed=s))
        out["trained_tree_error"] = R.multiclass_error(model, support)
        out["bracket_ok"] = float(out["trained_tree_error"] >= out["certified_root_error"] - 1e-12)
    return out


def _tree_root_summary(cfg, records):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 128})
    out = _summary(records)
    out["surrogate_threshold"] = cfg.mu - cfg.nu
    out["fraction_meeting_threshold"] = out.pop("meets_threshold.mean")
    return out, _regime(cfg, dist.k, cfg.regime_factor * (dist.d + 1), "k >> d+1")


# ---------------------------------------------------------------- random code experiment

def _code_from_params(params, k, seed):
    kind = params.get("code", "random")
    if kind == "random":
        l = int(params.get("code_length", 7))
        return C.random_code(k, l, params.get("code_seed", seed), distinct_rows=2 ** l >= 2 * k)
    if kind == "ova":
        return C.ova_code(k)
    if kind == "ap":
        return C.ap_code(k)
    return C.parse_code(kind.splitlines())


def _random_code_trial(cfg, trial):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 128})
    k = dist.k
    s = cfg.trial_seed(trial)
    rng = np.random.default_rng(s)
    M = _code_from_params(cfg.params, k, cfg.seed).with_label_map(rng.permutation(k) + 1)
    train = synth.sample(dist, cfg.n_train, [s, 1])
    test = synth.sample(dist, cfg.n_test, [s, 2])
    model = R.train_ecoc(M, train, R.LearnerConfig(seed=s))
    out = {"test_error": R.multiclass_error(model, test)}
    if dist.finitely_supported and dist.d <= 2:
        support = dist.support()
        rows = M.inverse_label_map()[support.y - 1]
        certified, trained = [], []
        for j in range(M.code_length):
            entry = M.entries[rows, j]
            keep = entry != 0
            binary = support.binary(keep, np.where(entry[keep] > 0, 1, -1))
            certified.append(_certify(binary))
            trained.append(empirical_error(model.column_classifier(j), binary))
        out["certified_column_error"] = float(np.mean(certified))
        out["trained_column_error"] = float(np.mean(trained))
        out["bracket_ok"] = float(all(t >= c - 1e-12 for t, c in zip(trained, certified)))
    return out


def _random_code_summary(cfg, records):
    dist = _distribution(cfg, {"kind": "circle-points", "k": 128})
    l = _code_from_params(cfg.params, dist.k, cfg.seed).code_length
    out = _summary(records)
    out["surrogate_threshold"] = 0.5 - cfg.nu
    return out, _regime(cfg, dist.k, cfg.regime_factor * dist.d * l, "k >> d l")


# ---------------------------------------------------------------- showcase table

SHOWCASE_METHODS = ("msvm", "ova", "tree", "ecoc")


def _showcase_dists(cfg):
    p = cfg.params
    return {
        "two-points": synth.two_points(),
        "circle-9": synth.circle_points(9),
        "center": synth.random_points(int(p.get("center_k", 6)), 2, int(p.get("center_seed", 0)),
                                      with_center=True),
    }


def _showcase_trial(cfg, trial):
    s = cfg.trial_seed(trial)
    methods = cfg.methods or list(SHOWCASE_METHODS)
    out = {}
    for name, dist in _showcase_dists(cfg).items():
        train = synth.sample(dist, cfg.n_train, [s, 1])
        for method in methods:
            model = fit_method(method, train, dist.k, s, cfg.params)
            out[f"{name}.{method}.train_error"] = R.multiclass_error(model, train)
        if name == "center":
            support = dist.support()
            center_vs_rest = support.binary(np.ones(dist.k, bool), np.where(support.y == dist.k, 1, -1))
            out["center.ova.certified_center_error"] = _certify(center_vs_rest)
    return out


def _showcase_summary(cfg, records):
    out = _summary(records)
    for key in records[0].metrics:
        v = np.array([r.metrics[key] for r in records])
        out[f"{key}.fraction_zero"] = float(np.mean(v == 0))
        out[f"{key}.fraction_above_0.2"] = float(np.mean(v > 0.2))
    return out, []


# ---------------------------------------------------------------- containment

def _containment_trial(cfg, trial):
    s = cfg.trial_seed(trial)
    p = cfg.params
    rng = np.random.default_rng(s)
    out = {}
    # (a) trees inside the MSVM class
    dist = synth.circle_points(int(p.get("k", 9)), float(p.get("sigma", 0.05)))
    k = dist.k
    train = synth.sample(dist, cfg.n_train, [s, 1])
    shape = tree_from_spec(p.get("tree", "balanced"), k, [s, 2])
    tree = R.train_tree(shape, rng.permutation(k) + 1, train, R.LearnerConfig(seed=s))
    reference = synth.sample(dist, int(p.get("n_reference", 2000)), [s, 3]).X
    W, rep = R.tree_to_msvm(tree, reference, cfg.eps, return_report=True)
    fresh = synth.sample(dist, cfg.n_test, [s, 4]).X
    out["tree_msvm_disagreement"] = float(np.mean(W.predict(fresh) != tree.predict(fresh)))
    out["tree_msvm_within_eps"] = float(out["tree_msvm_disagreement"] <= cfg.eps)
    out["tree_msvm_a"] = rep.a
    # (b) MSVM inside all-pairs
    msvm = fit_method("msvm", train, k, s, p)
    general = rng.uniform(-1.5, 1.5, size=(cfg.n_test, 2))
    ap = R.msvm_to_ap(msvm)
    out["msvm_ap_agreement"] = float(np.mean(ap.predict(general) == msvm.predict(general)))
    # (c) strictness on three sectors
    sec = synth.sample(synth.sector3(), int(p.get("n_sector", 300)), [s, 5])
    out["sector_msvm_error"] = R.multiclass_error(fit_method("msvm", sec, 3, s, p), sec)
    root_errors = [_certify(sec.binary(np.ones(len(sec), bool), np.where(sec.y == c, 1, -1)))
                   for c in (1, 2, 3)]
    out["sector_min_root_error"] = float(min(root_errors))
    return out


def _containment_summary(cfg, records):
    return _summary(records), []


# ---------------------------------------------------------------- error curves

CURVE_METHODS = ("msvm", "ova", "ap", "tree")


def _curve_trial(cfg, trial):
    s = cfg.trial_seed(trial)
    dist = _distribution(cfg, {"kind": "circle-points", "k": 5, "sigma": 0.1})
    test = synth.sample(dist, cfg.n_test, [s, 0])
    out = {}
    for m in cfg.m_grid:
        train = synth.sample(dist, int(m), [s, int(m)])
        for method in cfg.methods or CURVE_METHODS:
            model = fit_method(method, train, dist.k, s, cfg.params)
            out[f"{method}.m{int(m)}.test_error"] = R.multiclass_error(model, test)
    return out


def _curve_summary(cfg, records):
    return _summary(records, ), []


def curve_svg(result: ExperimentResult, cfg: ExperimentConfig) -> str:
    """Mean test error against log m, one polyline per method, fixed 400x300 viewBox."""
    methods = cfg.methods or list(CURVE_METHODS)
    grid = [int(m) for m in cfg.m_grid]
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    lo, hi = math.log(min(grid)), math.log(max(grid))
    span = hi - lo or 1.0

    def xy(m, e):
        return 40 + 340 * (math.log(m) - lo) / span, 270 - 250 * min(max(e, 0.0), 1.0)

    parts = ['<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 400 300" width="400" height="300">',
             '<rect x="0" y="0" width="400" height="300" fill="white"/>',
             '<line x1="40" y1="270" x2="380" y2="270" stroke="black"/>',
             '<line x1="40" y1="20" x2="40" y2="270" stroke="black"/>',
             '<text x="210" y="292" font-size="11" text-anchor="middle">training size m (log)</text>',
             '<text x="12" y="150" font-size="11" transform="rotate(-90 12 150)">test error</text>']
    for i, method in enumerate(methods):
        pts = [xy(m, result.summary[f"{method}.m{m}.test_error.mean"]) for m in grid]
        colour = palette[i % len(palette)]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"/>')
        parts.append(f'<text x="300" y="{30 + 14 * i}" font-size="11" fill="{colour}">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------- driver

@dataclass(frozen=True)
class _Experiment:
    trial: Callable
    summary: Callable
    count: Callable = lambda cfg: cfg.trials


EXPERIMENTS = {
    "label_map": _Experiment(_label_map_trial, _label_map_summary, _label_map_trials),
    "tree_root": _Experiment(_tree_root_trial, _tree_root_summary),
    "random_code": _Experiment(_random_code_trial, _random_code_summary),
    "showcase_table": _Experiment(_showcase_trial, _showcase_summary),
    "containment_check": _Experiment(_containment_trial, _containment_summary),
    "error_curve": _Experiment(_curve_trial, _curve_summary),
}


def _run_one(cfg, trial):
    return EXPERIMENTS[cfg.experiment].trial(cfg, trial)


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Run every trial (in parallel when threads > 1) and merge in trial order."""
    exp = EXPERIMENTS[cfg.experiment]
    n = exp.count(cfg)
    workers = min(threads or cfg.threads, n)
    job = functools.partial(_run_one, cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            metrics = list(pool.map(job, range(n)))
    else:
        metrics = [job(t) for t in range(n)]
    records = [TrialRecord(t, m) for t, m in enumerate(metrics)]
    summary, warnings = exp.summary(cfg, records)
    return ExperimentResult(cfg.experiment, records, summary, warnings)


def label_map_experiment(cfg): return run_experiment(_as(cfg, "label_map"))
def tree_root_experiment(cfg): return run_experiment(_as(cfg, "tree_root"))
def random_code_experiment(cfg): return run_experiment(_as(cfg, "random_code"))
def showcase_table(cfg): return run_experiment(_as(cfg, "showcase_table"))
def containment_check(cfg): return run_experiment(_as(cfg, "containment_check"))
def error_curve(cfg): return run_experiment(_as(cfg, "error_curve"))


def _as(cfg, name):
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict({**cfg, "experiment": name})
    if cfg.experiment != name:
        raise ValueError(f"config is for {cfg.experiment!r}, not {name!r}")
    return cfg


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_results(result: ExperimentResult, cfg: ExperimentConfig, out_dir: str) -> list[str]:
    """results.csv, summary.csv and (for error curves) curve.svg; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "results.csv"), os.path.join(out_dir, "summary.csv")]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "trial", "metric", "value"])
        for rec in result.records:
            for key, value in rec.metrics.items():
                w.writerow([result.experiment, rec.trial, key, _fmt(value)])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "metric", "value"])
        for key, value in result.summary.items():
            w.writerow([result.experiment, key, _fmt(value)])
        for msg in result.warnings:
            w.writerow([result.experiment, "warning", msg])
    if result.experiment == "error_curve":
        paths.append(os.path.join(out_dir, "curve.svg"))
        with open(paths[2], "w") as fh:
            fh.write(curve_svg(result, cfg))
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths + [os.path.join(out_dir, "config.json")]
