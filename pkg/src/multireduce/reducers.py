"""Multiclass predictors built from halfspaces, their trainers, and the
constructive conversions between them.

Class labels are 1..k throughout.  Every argmax breaks ties towards the
lowest index and every sign maps 0 to +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from . import codes as C
from .codes import CodeMatrix, ap_code, ap_pairs, ova_code
from .errors import NotRealizableError, ToleranceUnachievableError
from .halfspace import (BinarySample, Halfspace, augment, empirical_error, majority_halfspace,
                        polish_margin, sign, train_erm_approx, train_realizable)
from .trees import TreeShape


@dataclass(frozen=True, eq=False)
class MulticlassSample:
    X: np.ndarray
    y: np.ndarray
    num_classes: Optional[int] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.y).reshape(-1).astype(np.int64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different lengths")
        k = self.num_classes if self.num_classes is not None else (int(y.max()) if y.size else 0)
        if y.size and (y.min() < 1 or y.max() > k):
            raise ValueError(f"labels must lie in 1..{k}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "num_classes", int(k))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if w.shape != y.shape or np.any(w < 0):
                raise ValueError("weights must be non-negative, one per point")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weights / self.weights.sum()

    def binary(self, mask, labels) -> BinarySample:
        w = None if self.weights is None else self.weights[mask]
        return BinarySample(self.X[mask], labels, w)


# ---------------------------------------------------------------- models

@dataclass(frozen=True, eq=False)
class WeightMatrix:
    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 2 or W.shape[1] < 2:
            raise ValueError("weight matrix must be k x (d+1) with k >= 2, d >= 1")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1] - 1

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ValueError(f"point dimension {X.shape[-1]} does not match model dimension {self.dim}")
        return augment(X) @ self.W.T

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=-1) + 1


@dataclass(frozen=True, eq=False)
class TreeModel:
    shape: TreeShape
    leaf_labels: np.ndarray   # leaf index -> class label
    node_weights: np.ndarray  # (k-1, d+1), preorder

    def __post_init__(self):
        labels = np.asarray(self.leaf_labels, dtype=np.int64).reshape(-1)
        k = self.shape.num_leaves
        if sorted(labels.tolist()) != list(range(1, k + 1)):
            raise ValueError("leaf labels must be a bijection onto 1..k")
        W = np.array(self.node_weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != k - 1:
            raise ValueError("need one classifier per internal node")
        labels.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "leaf_labels", labels)
        object.__setattr__(self, "node_weights", W)

    @property
    def num_classes(self) -> int:
        return self.shape.num_leaves

    @property
    def dim(self) -> int:
        return self.node_weights.shape[1] - 1

    def node_classifier(self, v: int) -> Halfspace:
        return Halfspace(self.node_weights[v])

    def route(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Leaf reached by each point and the number of classifiers evaluated."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ValueError(f"point dimension {X.shape[-1]} does not match model dimension {self.dim}")
        Xb = augment(np.atleast_2d(X))
        ref = np.zeros(Xb.shape[0], dtype=np.int64)
        evals = np.zeros(Xb.shape[0], dtype=np.int64)
        active = ref >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            nodes = ref[idx]
            go_right = np.einsum("ij,ij->i", Xb[idx], self.node_weights[nodes]) >= 0
            ref[idx] = self.shape.children[nodes, go_right.astype(np.int64)]
            evals[idx] += 1
            active = ref >= 0
        return -ref - 1, evals

    def predict(self, X) -> np.ndarray:
        leaves, _ = self.route(X)
        out = self.leaf_labels[leaves]
        return out if np.asarray(X).ndim > 1 else out[0]


@dataclass(frozen=True, eq=False)
class EcocModel:
    code: CodeMatrix
    column_weights: np.ndarray  # (l, d+1)

    def __post_init__(self):
        W = np.array(self.column_weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != self.code.code_length:
            raise ValueError("need one classifier per code column")
        W.setflags(write=False)
        object.__setattr__(self, "column_weights", W)

    @property
    def num_classes(self) -> int:
        return self.code.num_classes

    @property
    def dim(self) -> int:
        return self.column_weights.shape[1] - 1

    def column_classifier(self, j: int) -> Halfspace:
        return Halfspace(self.column_weights[j])

    def column_outputs(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ValueError(f"point dimension {X.shape[-1]} does not match model dimension {self.dim}")
        return sign(augment(np.atleast_2d(X)) @ self.column_weights.T)

    def predict(self, X) -> np.ndarray:
        out = C.decode_many(self.code, self.column_outputs(X))
        return out if np.asarray(X).ndim > 1 else out[0]


MulticlassModel = Union[WeightMatrix, TreeModel, EcocModel]


def _single(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a single point")
    return int(np.asarray(model.predict(x[None, :]))[0])


def msvm_predict(W: WeightMatrix, x) -> int:
    return _single(W, x)


def tree_predict(T: TreeModel, x) -> int:
    return _single(T, x)


def ecoc_predict(E: EcocModel, x) -> int:
    return _single(E, x)


def multiclass_error(model: MulticlassModel, sample: MulticlassSample) -> float:
    if len(sample) == 0:
        raise ValueError("error of an empty sample is undefined")
    wrong = np.asarray(model.predict(sample.X)) != sample.y
    return float(np.sum(sample.normalized_weights()[wrong]))


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class LearnerConfig:
    """How binary subproblems are trained.

    ``auto`` runs the hinge heuristic and, if it leaves training errors,
    tries the perceptron with ``budget`` updates, keeping whichever is better.
    With ``polish`` the result is replaced by the widest-margin halfspace that
    labels the training points the same way.
    """
    mode: str = "auto"          # auto | realizable | approximate
    budget: int = 2_000
    restarts: int = 5
    iterations: int = 300
    seed: Optional[int] = 0
    polish: bool = True         # widen the margin without changing training predictions

    def __post_init__(self):
        if self.mode not in ("auto", "realizable", "approximate"):
            raise ValueError(f"unknown learner mode {self.mode!r}")


def _sub_seed(seed, *path):
    if seed is None:
        return None
    return [int(seed), *map(int, path)]


def train_binary(sample: BinarySample, cfg: LearnerConfig, seed=None) -> Halfspace:
    if len(sample) == 0 or np.all(sample.y == sample.y[0]):
        return majority_halfspace(sample)
    if cfg.mode == "realizable":
        h = train_realizable(sample, cfg.budget)
    else:
        h = train_erm_approx(sample, cfg.restarts, seed, iterations=cfg.iterations)
        if cfg.mode == "auto" and empirical_error(h, sample) > 0:
            try:
                h = train_realizable(sample, cfg.budget)
            except NotRealizableError:
                pass
    return polish_margin(h, sample.X) if cfg.polish else h


def train_ecoc(M: CodeMatrix, sample: MulticlassSample, cfg: LearnerConfig = LearnerConfig()) -> EcocModel:
    """One halfspace per column; examples whose code entry is 0 are left out."""
    if sample.num_classes > M.num_classes:
        raise ValueError("sample has more classes than the code")
    rows = M.inverse_label_map()[sample.y - 1]
    weights = []
    for j in range(M.code_length):
        entry = M.entries[rows, j]
        keep = entry != 0
        h = train_binary(sample.binary(keep, np.where(entry[keep] > 0, 1, -1)), cfg,
                         _sub_seed(cfg.seed, j))
        weights.append(h.weights)
    return EcocModel(M, np.array(weights).reshape(M.code_length, sample.dim + 1))


def train_ova(sample: MulticlassSample, cfg: LearnerConfig = LearnerConfig(), k: Optional[int] = None) -> EcocModel:
    return train_ecoc(ova_code(k or sample.num_classes), sample, cfg)


def train_ap(sample: MulticlassSample, cfg: LearnerConfig = LearnerConfig(), k: Optional[int] = None) -> EcocModel:
    return train_ecoc(ap_code(k or sample.num_classes), sample, cfg)


def node_problem(shape: TreeShape, leaf_labels, sample: MulticlassSample, v: int) -> BinarySample:
    """Binary problem of internal node ``v``: points whose leaf lies below it, right = +1."""
    leaf_of_label = np.empty(len(leaf_labels) + 1, dtype=np.int64)
    leaf_of_label[np.asarray(leaf_labels)] = np.arange(len(leaf_labels))
    leaves = leaf_of_label[sample.y]
    left, right = shape.subtree_leaves[v]
    in_left = np.isin(leaves, list(left))
    in_right = np.isin(leaves, list(right))
    mask = in_left | in_right
    return sample.binary(mask, np.where(in_right[mask], 1, -1))


def train_tree(shape: TreeShape, leaf_labels, sample: MulticlassSample,
               cfg: LearnerConfig = LearnerConfig()) -> TreeModel:
    leaf_labels = np.asarray(leaf_labels, dtype=np.int64)
    weights = []
    for v in range(shape.num_internal):
        h = train_binary(node_problem(shape, leaf_labels, sample, v), cfg, _sub_seed(cfg.seed, v))
        weights.append(h.weights)
    return TreeModel(shape, leaf_labels, np.array(weights))


def _multiclass_perceptron(Xb, y, k, budget):
    """Sequential multiclass perceptron requiring a strict margin over every rival."""
    n, p = Xb.shape
    W = np.zeros((k, p))
    updates = 0
    rows = y - 1
    while True:
        mistakes = 0
        for i in range(n):
            s = W @ Xb[i]
            t = rows[i]
            s_true = s[t]
            s[t] = -np.inf
            r = int(np.argmax(s))
            if s[r] >= s_true:
                W[t] += Xb[i]
                W[r] -= Xb[i]
                updates += 1
                mistakes += 1
                if updates >= budget:
                    raise NotRealizableError(f"no consistent weight matrix after {budget} updates")
        if mistakes == 0:
            return W


def _multiclass_hinge(Xb, y, k, pw, restarts, iterations, rng):
    rows = y - 1
    n = Xb.shape[0]
    best_W, best_err = np.zeros((k, Xb.shape[1])), np.inf
    for r in range(max(restarts, 1)):
        W = np.zeros_like(best_W) if r == 0 else rng.standard_normal(best_W.shape)
        for t in range(1, iterations + 1):
            S = Xb @ W.T
            pred = np.argmax(S, axis=1)
            err = float(np.sum(pw[pred != rows]))
            if err < best_err:
                best_err, best_W = err, W.copy()
                if err == 0:
                    break
            s_true = S[np.arange(n), rows]
            S[np.arange(n), rows] = -np.inf
            rival = np.argmax(S, axis=1)
            active = S[np.arange(n), rival] + 1 > s_true
            G = np.zeros_like(W)
            np.add.at(G, rows[active], -pw[active, None] * Xb[active])
            np.add.at(G, rival[active], pw[active, None] * Xb[active])
            norm = np.linalg.norm(G)
            if norm == 0:
                break
            W = W - G / (norm * math.sqrt(t))
        if best_err == 0:
            break
    return best_W


def train_msvm(sample: MulticlassSample, mode: str = "realizable", *, budget: int = 1_000_000,
               restarts: int = 5, iterations: int = 500, seed=0, k: Optional[int] = None) -> WeightMatrix:
    """Fit a k x (d+1) weight matrix.

    ``realizable`` runs the multiclass perceptron until every point beats every
    rival class strictly (NotRealizableError after ``budget`` updates);
    ``approximate`` runs Crammer-Singer style subgradient descent and keeps the
    iterate with the fewest training mistakes.
    """
    k = k or sample.num_classes
    if k < 2:
        raise ValueError("need at least two classes")
    if len(sample) == 0:
        raise ValueError("cannot train on an empty sample")
    Xb = augment(sample.X)
    scale = max(float(np.abs(Xb).max()), 1.0)
    if mode == "realizable":
        W = _multiclass_perceptron(Xb, sample.y, k, budget)
    elif mode == "approximate":
        rng = np.random.default_rng(seed)
        W = _multiclass_hinge(Xb / scale, sample.y, k, sample.normalized_weights(),
                              restarts, iterations, rng)
        W = W.copy()
        W[:, :-1] /= scale
        W[:, -1] /= scale
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return WeightMatrix(W)


# ---------------------------------------------------------------- conversions

@dataclass
class ConversionReport:
    r: float
    gamma: float
    a: float
    depth: int
    precision_ratio: float


def tree_to_msvm(T: TreeModel, reference, eps: float = 0.01, *, return_report: bool = False):
    """Weight matrix agreeing with the tree on all but an ``eps`` fraction of ``reference``.

    Row i is sum_j a^{-j} b_ij w~(v_ij) along the root-to-leaf path of label i,
    where w~ adds gamma to the bias, b_ij = +1 for a right turn, and
    a = 2 r^2 / gamma + 1.  Node weights are first rescaled to the norm of the
    (1 - eps/2)-quantile of |(x, 1)|, which leaves the tree's predictions
    unchanged.  gamma is half the (eps/2)-quantile of the distance of
    negatively classified reference points to the nearest node boundary: a
    shifted score lands in (-gamma, gamma) exactly when the raw score lies in
    (-2 gamma, 0).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    X = reference.X if isinstance(reference, MulticlassSample) else np.asarray(reference, dtype=np.float64)
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValueError("reference data must be nonempty")
    Xb = augment(X)
    n = Xb.shape[0]
    norms = np.sort(np.linalg.norm(Xb, axis=1))
    x_radius = float(norms[min(n - 1, math.ceil((1 - eps / 2) * n) - 1)])

    nodes = T.node_weights.copy()
    nn = np.linalg.norm(nodes, axis=1)
    flat = nn == 0
    nodes[flat, -1] = 1.0  # all-zero weights predict +1 everywhere, as does a positive bias
    nn[flat] = 1.0
    nodes *= (x_radius / nn)[:, None]

    raw = Xb @ nodes.T
    leaves, _ = T.route(X)
    on_path = np.zeros((T.num_classes, nodes.shape[0]), bool)
    for leaf, path in enumerate(T.shape.leaf_paths):
        on_path[leaf, [v for v, _ in path]] = True
    raw = np.where(on_path[leaves], raw, np.inf)
    neg_dist = np.where(raw < 0, -raw, np.inf).min(axis=1)
    neg_dist.sort()
    idx = math.ceil(eps * n / 2) - 1
    gamma = min(float(neg_dist[idx]) / 2, x_radius)
    if not gamma > 0:
        raise ToleranceUnachievableError("no positive margin gamma meets the tolerance")

    tilde = nodes.copy()
    tilde[:, -1] += gamma
    r = max(x_radius, float(np.linalg.norm(tilde, axis=1).max())) * (1 + 1e-6)
    a = 2 * r * r / gamma + 1
    depth = T.shape.depth()
    # score rounding error is at most about (d+1) * depth * eps * gamma while the
    # separation between the winning row and any rival is a^-depth * gamma
    needed = 16 * Xb.shape[1] * depth * np.finfo(np.float64).eps
    ratio = a ** (-depth) / needed
    if not ratio >= 1:
        raise ToleranceUnachievableError(
            f"tree depth {depth} with a = {a:.3g} exceeds double precision (margin ratio {ratio:.3g})")

    k = T.num_classes
    W = np.zeros((k, Xb.shape[1]))
    for leaf, path in enumerate(T.shape.leaf_paths):
        terms = np.array([a ** (-j) * turn * tilde[v] for j, (v, turn) in enumerate(path, start=1)])
        W[T.leaf_labels[leaf] - 1] = [math.fsum(col) for col in terms.T]
    model = WeightMatrix(W)
    if return_report:
        return model, ConversionReport(r, gamma, a, depth, ratio)
    return model


def msvm_to_ap(W: WeightMatrix) -> EcocModel:
    """All-pairs model whose column (i, j) classifier is sign(<W[j] - W[i], x>)."""
    pairs = ap_pairs(W.num_classes)
    cols = np.array([W.W[j] - W.W[i] for i, j in pairs])
    return EcocModel(ap_code(W.num_classes), cols)


# ---------------------------------------------------------------- text format

def _fmt_row(row) -> str:
    return " ".join(repr(float(x)) for x in row)


def format_model(model: MulticlassModel) -> str:
    if isinstance(model, WeightMatrix):
        lines = [f"msvm {model.num_classes} {model.dim}"]
        lines += [_fmt_row(r) for r in model.W]
    elif isinstance(model, TreeModel):
        lines = [f"tree {model.num_classes} {model.dim}",
                 model.shape.to_string(),
                 " ".join(str(int(x)) for x in model.leaf_labels)]
        lines += [_fmt_row(r) for r in model.node_weights]
    elif isinstance(model, EcocModel):
        lines = [f"ecoc {model.num_classes} {model.code.code_length} {model.dim}"]
        lines.append(C.format_code(model.code).rstrip("\n"))
        lines += [_fmt_row(r) for r in model.column_weights]
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return "\n".join(lines) + "\n"


def parse_model(lines: Iterable[str]) -> MulticlassModel:
    body = [ln.strip() for ln in lines if ln.strip()]
    if not body:
        raise ValueError("empty model file")
    head = body[0].split()
    kind = head[0]

    def floats(rows):
        return np.array([[float(t) for t in r.split()] for r in rows])

    try:
        if kind == "msvm":
            k, d = int(head[1]), int(head[2])
            W = floats(body[1:1 + k])
            if W.shape != (k, d + 1):
                raise ValueError("weight rows do not match header")
            return WeightMatrix(W)
        if kind == "tree":
            k, d = int(head[1]), int(head[2])
            shape = TreeShape.from_string(body[1])
            labels = [int(t) for t in body[2].split()]
            W = floats(body[3:3 + k - 1])
            if W.shape != (k - 1, d + 1):
                raise ValueError("node rows do not match header")
            return TreeModel(shape, labels, W)
        if kind == "ecoc":
            k, l, d = int(head[1]), int(head[2]), int(head[3])
            code = C.parse_code(body[1:1 + k + 2])
            W = floats(body[1 + k + 2:1 + k + 2 + l])
            if W.shape != (l, d + 1):
                raise ValueError("column rows do not match header")
            return EcocModel(code, W)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed {kind} model: {exc}") from None
    raise ValueError(f"unknown model kind {kind!r}")


def write_model(model: MulticlassModel, fh: TextIO) -> None:
    fh.write(format_model(model))


def read_model(fh: TextIO) -> MulticlassModel:
    return parse_model(fh)
