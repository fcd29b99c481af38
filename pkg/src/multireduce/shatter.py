"""Finite hypothesis classes, G/N-shattering, and the witness constructions
used to lower-bound Natarajan dimensions of ECOC and tree classes.

A ``FiniteFunctionClass`` is an explicit table: one row per function, one
column per domain point.  Binary classes use labels -1/+1; multiclass ones
use 1..k.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from . import codes as C
from .codes import CodeMatrix
from .errors import BudgetExceededError, EmbeddingInvalidError
from .halfspace import Halfspace
from .trees import TreeShape

SUBSET_BUDGET = 20          # largest set whose 2^|S| subsets are enumerated
DIMENSION_DOMAIN_BUDGET = 16
COMPOSE_BUDGET = 2_000_000  # largest number of distinct partial score tables (or tuples, for trees)


@dataclass(frozen=True, eq=False)
class FiniteFunctionClass:
    domain: tuple
    table: np.ndarray
    params: Optional[tuple] = field(default=None, repr=False)  # optional per-row provenance

    def __post_init__(self):
        dom = tuple(self.domain)
        if len(set(dom)) != len(dom):
            raise ValueError("domain points must be distinct")
        t = np.asarray(self.table, dtype=np.int64)
        if t.ndim == 1:
            t = t.reshape(1, -1)
        if t.shape[1] != len(dom):
            raise ValueError("every function must be total on the domain")
        t.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "table", t)
        if self.params is not None and len(self.params) != t.shape[0]:
            raise ValueError("params must have one entry per function")

    def __len__(self):
        return self.table.shape[0]

    @property
    def labels(self) -> set:
        return set(np.unique(self.table).tolist())

    def index(self, points: Sequence[Hashable]) -> list[int]:
        pos = {p: i for i, p in enumerate(self.domain)}
        try:
            return [pos[p] for p in points]
        except KeyError as exc:
            raise ValueError(f"point {exc.args[0]!r} is not in the domain") from None

    def deduplicated(self) -> "FiniteFunctionClass":
        _, first = np.unique(self.table, axis=0, return_index=True)
        first.sort()
        params = None if self.params is None else tuple(self.params[i] for i in first)
        return FiniteFunctionClass(self.domain, self.table[first], params)

    def restrict(self, points: Sequence[Hashable]) -> "FiniteFunctionClass":
        """Restriction to ``points``, duplicates removed."""
        cols = self.index(points)
        return FiniteFunctionClass(tuple(points), self.table[:, cols]).deduplicated()

    def contains(self, values) -> bool:
        return bool(np.any(np.all(self.table == np.asarray(values), axis=1)))


def full_class(domain: Sequence[Hashable], labels: Sequence[int]) -> FiniteFunctionClass:
    """All maps domain -> labels."""
    rows = list(itertools.product(labels, repeat=len(domain)))
    return FiniteFunctionClass(tuple(domain), np.array(rows).reshape(len(rows), len(domain)))


# ---------------------------------------------------------------- shattering

def _patterns(H, S):
    if len(S) > SUBSET_BUDGET:
        raise BudgetExceededError(f"|S| = {len(S)} exceeds the subset budget {SUBSET_BUDGET}")
    cols = H.index(S)
    return np.unique(H.table[:, cols], axis=0)


def _covers_all_subsets(agree_f1, valid, s):
    if s == 0:
        return bool(np.any(valid))
    bits = 1 << np.arange(s, dtype=np.int64)
    masks = agree_f1[valid].astype(np.int64) @ bits
    return np.unique(masks).size == (1 << s)


def check_g_shatter(H: FiniteFunctionClass, S: Sequence[Hashable], f) -> bool:
    """True iff for every T in S some g agrees with f exactly on T."""
    P = _patterns(H, S)
    f = np.asarray(f).reshape(-1)
    if f.size != len(S):
        raise ValueError("witness must give one label per point of S")
    return _covers_all_subsets(P == f, np.ones(len(P), bool), len(S))


def check_n_shatter(H: FiniteFunctionClass, S: Sequence[Hashable], f1, f2) -> bool:
    """True iff for every T in S some g equals f1 on T and f2 on S minus T."""
    P = _patterns(H, S)
    f1 = np.asarray(f1).reshape(-1)
    f2 = np.asarray(f2).reshape(-1)
    if f1.size != len(S) or f2.size != len(S):
        raise ValueError("witnesses must give one label per point of S")
    if np.any(f1 == f2):
        raise ValueError("N-shattering witnesses must differ at every point")
    a1 = P == f1
    valid = np.all(a1 | (P == f2), axis=1)
    return _covers_all_subsets(a1, valid, len(S))


def _shattered_by_some_witness(P, s, kind):
    if len(P) < (1 << s):
        return False
    if kind == "G":
        # taking T = S shows the witness f is itself a pattern of the class
        return any(_covers_all_subsets(P == f, np.ones(len(P), bool), s) for f in P)
    for a, f1 in enumerate(P):
        a1 = P == f1
        for f2 in P[a + 1:]:
            if np.any(f1 == f2):
                continue
            valid = np.all(a1 | (P == f2), axis=1)
            if _covers_all_subsets(a1, valid, s):
                return True
    return False


def _dimension(H, kind):
    n = len(H.domain)
    if n > DIMENSION_DOMAIN_BUDGET:
        raise BudgetExceededError(f"domain size {n} exceeds {DIMENSION_DOMAIN_BUDGET}")
    best = 0
    # shattering is inherited by subsets, so stop at the first size with no shattered set
    for s in range(1, n + 1):
        if (1 << s) > len(H):
            break
        found = False
        for S in itertools.combinations(range(n), s):
            P = np.unique(H.table[:, list(S)], axis=0)
            if _shattered_by_some_witness(P, s, kind):
                found = True
                break
        if not found:
            break
        best = s
    return best


def natarajan_dimension(H: FiniteFunctionClass) -> int:
    return _dimension(H, "N")


def graph_dimension(H: FiniteFunctionClass) -> int:
    return _dimension(H, "G")


def vc_dimension(H: FiniteFunctionClass) -> int:
    """Largest set on which the binary class realises all 2^|S| patterns."""
    if not H.labels <= {-1, 1}:
        raise ValueError("VC dimension needs a binary (+-1) class")
    n = len(H.domain)
    if n > DIMENSION_DOMAIN_BUDGET:
        raise BudgetExceededError(f"domain size {n} exceeds {DIMENSION_DOMAIN_BUDGET}")
    best = 0
    for s in range(1, n + 1):
        if (1 << s) > len(H):
            break
        if not any(np.unique(H.table[:, list(S)], axis=0).shape[0] == (1 << s)
                   for S in itertools.combinations(range(n), s)):
            break
        best = s
    return best


# ---------------------------------------------------------------- witness classes

def _grid(d, l):
    return tuple((u, v) for u in range(1, d + 1) for v in range(1, l + 1))


def _check_grid(d, l):
    if d < 1 or l < 1:
        raise ValueError("need d >= 1 and l >= 1")
    if (2 ** d) * l * 2 > COMPOSE_BUDGET or d * l > 64:
        raise BudgetExceededError(f"d={d}, l={l} is too large to tabulate")


def build_F(d: int, l: int) -> FiniteFunctionClass:
    """f^{i,j}(u, v) = f(u) on column v = i, j elsewhere; rows keep duplicates."""
    _check_grid(d, l)
    dom = _grid(d, l)
    rows, params = [], []
    for f in itertools.product((-1, 1), repeat=d):
        for i in range(1, l + 1):
            for j in (-1, 1):
                rows.append([f[u - 1] if v == i else j for u, v in dom])
                params.append((f, i, j))
    return FiniteFunctionClass(dom, np.array(rows), tuple(params))


def build_G(d: int, l: int, *, positive_only: bool = False) -> FiniteFunctionClass:
    """g^{i,j}(u, v) = g(u) on v = i, j for v > i, -j for v < i.

    ``positive_only`` keeps only j = +1 (the variant class of VC dimension d).
    """
    _check_grid(d, l)
    dom = _grid(d, l)
    rows, params = [], []
    for g in itertools.product((-1, 1), repeat=d):
        for i in range(1, l + 1):
            for j in ((1,) if positive_only else (-1, 1)):
                rows.append([g[u - 1] if v == i else (j if v > i else -j) for u, v in dom])
                params.append((g, i, j))
    return FiniteFunctionClass(dom, np.array(rows), tuple(params))


# ---------------------------------------------------------------- composition

def _binary_table(H):
    if not H.labels <= {-1, 1}:
        raise ValueError("composition needs a binary (+-1) base class")
    return H.table


def _tuples(m, r, budget):
    total = m ** r
    if total > budget:
        raise BudgetExceededError(f"{m}^{r} = {total} tuples exceed the budget {budget}")
    return np.indices((m,) * r).reshape(r, -1).T


def _unique_rows(A):
    A = np.ascontiguousarray(A)
    view = A.view(np.dtype((np.void, A.dtype.itemsize * A.shape[1]))).ravel()
    _, idx = np.unique(view, return_index=True)
    return A[np.sort(idx)]


def compose_with_code(H: FiniteFunctionClass, M: CodeMatrix, budget: int = COMPOSE_BUDGET,
                      chunk: int = 400_000) -> FiniteFunctionClass:
    """All functions x -> decode(M, (h_1(x), ..., h_l(x))) with h_j in H.

    Scores are additive over columns, so instead of the |H|^l tuples we keep
    the distinct partial score tables (k x |domain|) after each column. For
    integer codes each table is shifted so the per-point leader scores 0 and
    rows too far behind to ever reach the lead are clamped; neither changes
    the final argmax, and both collapse many tables.
    """
    B = _binary_table(H)
    E = M.entries
    m, n = B.shape
    k, l = E.shape
    integral = np.issubdtype(E.dtype, np.integer) or bool(np.all(E == np.round(E)))
    if integral:
        E = np.round(E).astype(np.int16 if np.abs(E).sum(axis=1).max() < 2 ** 14 else np.int64)
    # most a row can still gain on another over the columns after j
    reach = np.r_[np.cumsum((2 * np.abs(E).max(axis=0))[::-1])[::-1][1:], 0]
    contribs = [(E[:, j][None, :, None] * B[:, None, :]).astype(E.dtype) for j in range(l)]
    states = np.zeros((1, k, n), dtype=E.dtype)
    for j in range(l):
        if len(states) > budget:
            raise BudgetExceededError(f"{len(states)} partial score tables exceed the budget {budget}")
        last = j == l - 1
        parts = []
        step = max(1, chunk // m)
        for a in range(0, len(states), step):
            cand = (states[a:a + step, None] + contribs[j][None]).reshape(-1, k, n)
            if last:
                cand = M.label_map[np.argmax(cand, axis=1)]
            elif integral:
                cand = cand - cand.max(axis=1, keepdims=True)
                np.maximum(cand, -(reach[j] + 1), out=cand)
            parts.append(_unique_rows(cand.reshape(len(cand), -1)))
        states = _unique_rows(np.concatenate(parts))
        if not last:
            states = states.reshape(-1, k, n)
    return FiniteFunctionClass(H.domain, states)


def compose_with_tree(H: FiniteFunctionClass, shape: TreeShape, leaf_labels=None,
                      budget: int = COMPOSE_BUDGET, chunk: int = 50_000) -> FiniteFunctionClass:
    """All tree predictors whose internal nodes carry members of H."""
    B = _binary_table(H)
    k = shape.num_leaves
    labels = np.arange(1, k + 1) if leaf_labels is None else np.asarray(leaf_labels)
    tuples = _tuples(len(H), shape.num_internal, budget)
    n = B.shape[1]
    found = []
    for start in range(0, len(tuples), chunk):
        O = B[tuples[start:start + chunk]]                 # (c, nodes, n)
        c = O.shape[0]
        ref = np.zeros((c, n), dtype=np.int64)
        ci, pi = np.meshgrid(np.arange(c), np.arange(n), indexing="ij")
        for _ in range(shape.depth()):
            active = ref >= 0
            node = np.where(active, ref, 0)
            out = O[ci, node, pi]
            nxt = shape.children[node, (out > 0).astype(np.int64)]
            ref = np.where(active, nxt, ref)
        found.append(np.unique(labels[-ref - 1], axis=0))
    return FiniteFunctionClass(H.domain, np.unique(np.vstack(found), axis=0))


def tree_class_contains(H: FiniteFunctionClass, shape: TreeShape, target, leaf_labels=None) -> bool:
    """Whether some assignment of H-members to nodes realises ``target`` on H's domain.

    A point reaches node v exactly when its target leaf lies below v, so the
    node constraints decouple: v needs a member of H that sends those points
    to the correct side.
    """
    B = _binary_table(H)
    k = shape.num_leaves
    labels = np.arange(1, k + 1) if leaf_labels is None else np.asarray(leaf_labels)
    leaf_of = {int(lab): leaf for leaf, lab in enumerate(labels)}
    target_leaf = np.array([leaf_of.get(int(t), -1) for t in np.asarray(target)])
    if np.any(target_leaf < 0):
        return False
    for v, (left, right) in enumerate(shape.subtree_leaves):
        in_left = np.isin(target_leaf, list(left))
        in_right = np.isin(target_leaf, list(right))
        need = in_left | in_right
        if not np.any(need):
            continue
        want = np.where(in_right, 1, -1)[need]
        if not np.any(np.all(B[:, need] == want, axis=1)):
            return False
    return True


def _all_patterns_in_tree_class(B, shape, g1, g2):
    """Vectorised ``tree_class_contains`` over every mix of g1 and g2 (labels = leaf + 1)."""
    s = B.shape[1]
    mask = (np.arange(1 << s)[:, None] >> np.arange(s)) & 1 == 1
    leaf = np.where(mask, np.asarray(g1) - 1, np.asarray(g2) - 1)      # (2^s, s)
    ok = np.ones(1 << s, dtype=bool)
    for left, right in shape.subtree_leaves:
        in_left = np.isin(leaf, list(left))
        in_right = np.isin(leaf, list(right))
        need = in_left | in_right
        want = np.where(in_right, 1, -1)
        clash = need[:, None, :] & (B[None, :, :] != want[:, None, :])  # (2^s, |H|, s)
        ok &= np.any(~np.any(clash, axis=2), axis=1)
    return bool(np.all(ok))


# ---------------------------------------------------------------- witnesses

@dataclass
class ShatterResult:
    holds: bool
    points: list
    f1: list
    f2: list
    note: str = ""

    @property
    def size(self) -> int:
        return len(self.points)


def code_witness_check(M: CodeMatrix, u, d: int, budget: int = COMPOSE_BUDGET) -> ShatterResult:
    """Verify that [d] x (sensitive coordinates of u) is N-shattered by F^l composed with M.

    Witnesses: g1 = decode(u) everywhere, g2(x, y) = decode(u with coordinate y flipped).
    """
    u = np.asarray(u)
    q, coords = C.sensitivity(M, u)
    if d * q > SUBSET_BUDGET:
        raise BudgetExceededError(f"d*q = {d * q} exceeds the subset budget {SUBSET_BUDGET}")
    if q == 0:
        return ShatterResult(True, [], [], [], "q = 0: empty set is shattered vacuously")
    points = [(x, j + 1) for x in range(1, d + 1) for j in coords]
    base = C.decode(M, u)
    g1 = [base] * len(points)
    g2 = [C.decode(M, C.flip(u, j - 1)) for _, j in points]
    F = build_F(d, M.code_length).restrict(points)
    composed = compose_with_code(F, M, budget)
    holds = check_n_shatter(composed, points, g1, g2)
    return ShatterResult(holds, points, g1, g2, f"q = {q}, |F restricted| = {len(F)}")


def tree_witness(shape: TreeShape, d: int):
    """Points [d] x N(T) (nodes ranked in-order) and the two leaf witnesses.

    g1 goes right once from the node and then left to a leaf; g2 goes left
    once and then right.  Labels are leaf index + 1.
    """
    order = shape.inorder()
    points, g1, g2 = [], [], []
    for i in range(1, d + 1):
        for rank, v in enumerate(order, start=1):
            points.append((i, rank))
            g1.append(shape.extreme_leaf(int(shape.children[v, 1]), -1) + 1)
            g2.append(shape.extreme_leaf(int(shape.children[v, 0]), 1) + 1)
    return points, g1, g2


def tree_witness_check(shape: TreeShape, d: int, *, method: str = "auto",
               budget: int = COMPOSE_BUDGET, positive_only: bool = False) -> ShatterResult:
    """Verify that [d] x N(T) is N-shattered by G^{k-1} composed with the tree.

    ``explicit`` tabulates the composed class; ``decomposed`` tests each
    required pattern node by node (exact, and feasible for larger trees).
    """
    l = shape.num_internal
    if d * l > SUBSET_BUDGET:
        raise BudgetExceededError(f"d*(k-1) = {d * l} exceeds the subset budget {SUBSET_BUDGET}")
    points, g1, g2 = tree_witness(shape, d)
    G = build_G(d, l, positive_only=positive_only).deduplicated()
    if method == "auto":
        method = "explicit" if len(G) ** l <= budget else "decomposed"
    if method == "explicit":
        composed = compose_with_tree(G, shape, budget=budget)
        holds = check_n_shatter(composed, points, g1, g2)
    elif method == "decomposed":
        holds = _all_patterns_in_tree_class(G.table[:, G.index(points)], shape, g1, g2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ShatterResult(holds, points, g1, g2, f"method = {method}")


def format_witness(res: ShatterResult) -> str:
    lines = [f"holds {str(res.holds).lower()}", f"size {res.size}"]
    if res.note:
        lines.append(f"note {res.note}")
    for p, a, b in zip(res.points, res.f1, res.f2):
        lines.append(f"{' '.join(map(str, p))} {a} {b}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- embeddings

@dataclass
class Embedding:
    points: dict            # (u, v) -> point in R^d
    weights: list           # one halfspace per class member, aligned with ``functions``
    functions: FiniteFunctionClass
    report: dict

    def realized(self, idx: int) -> bool:
        X = np.array([self.points[p] for p in self.functions.domain])
        return bool(np.array_equal(Halfspace(self.weights[idx]).predict(X), self.functions.table[idx]))


def _affine_interpolant(P, values, extra_rows=(), extra_vals=()):
    """Solve <c, p> + c0 = value for each row of P (plus extra linear constraints on c)."""
    P = np.asarray(P, dtype=np.float64)
    A = np.hstack([P, np.ones((P.shape[0], 1))])
    if len(extra_rows):
        A = np.vstack([A, np.hstack([np.asarray(extra_rows), np.zeros((len(extra_rows), 1))])])
    b = np.r_[np.asarray(values, dtype=np.float64), np.asarray(extra_vals, dtype=np.float64)]
    sol = np.linalg.solve(A, b)
    return sol[:-1], sol[-1]


def _min_margin(w, X, labels):
    z = np.r_[X.T, np.ones((1, X.shape[0]))].T @ w
    return float(np.min(labels * z) / np.linalg.norm(w))


def embed_F_halfspaces(d: int, l: int, seed=None, *, radius: float = 1e-2,
                       max_resample: int = 20) -> Embedding:
    """Place [d] x [l] in R^d so every member of F^l is cut out by a halfspace.

    Column i goes to d affinely independent points on the tangent hyperplane
    <x, e_i> = 1 within ``radius`` of a random unit vector e_i.  Member
    f^{i,j} uses the affine interpolant of f on that hyperplane (constant
    along e_i) plus alpha (<x, e_i> - 1) with sign(alpha) = -j, doubling
    |alpha| until every point is labelled correctly.
    """
    if d < 2:
        raise ValueError("embedding F needs d >= 2")
    if l < 2:
        raise ValueError("F^l is defined for l >= 2")
    F = build_F(d, l)
    rng = np.random.default_rng(seed)
    last_error = None
    for attempt in range(max_resample):
        try:
            return _embed_F_once(F, d, l, rng, radius, attempt)
        except EmbeddingInvalidError as exc:
            last_error = exc
    raise EmbeddingInvalidError(f"no valid embedding after {max_resample} draws: {last_error}")


def _embed_F_once(F, d, l, rng, radius, attempt):
    E = rng.standard_normal((l, d))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    gram = E @ E.T
    np.fill_diagonal(gram, -np.inf)
    if gram.max() >= 1 - 1e-6:
        raise EmbeddingInvalidError("two directions coincide")
    points = {}
    for i in range(l):
        # orthonormal basis of the tangent space of e_i
        Q = np.linalg.qr(np.column_stack([E[i], rng.standard_normal((d, d - 1))]))[0][:, 1:]
        T = rng.standard_normal((d, d - 1))
        T /= max(np.linalg.norm(T, axis=1).max(), 1e-12)
        X = E[i] + radius * T @ Q.T
        if np.linalg.matrix_rank(X[1:] - X[0]) < d - 1:
            raise EmbeddingInvalidError("points on a tangent hyperplane are affinely dependent")
        others = np.delete(E, i, axis=0)
        if np.any(X @ others.T >= 1):
            raise EmbeddingInvalidError("a point is not strictly inside the other hyperplanes")
        for m in range(d):
            points[(m + 1, i + 1)] = X[m]
    dom_X = np.array([points[p] for p in F.domain])
    weights, alphas, margins = [], [], []
    for row, (f, i, j) in zip(F.table, F.params):
        P = np.array([points[(m, i)] for m in range(1, d + 1)])
        c, c0 = _affine_interpolant(P, f, [E[i - 1]], [0.0])
        alpha = 1.0
        for _ in range(80):
            a = -j * alpha
            w = np.r_[c + a * E[i - 1], c0 - a]
            if np.array_equal(Halfspace(w).predict(dom_X), row):
                break
            alpha *= 2
        else:
            raise EmbeddingInvalidError(f"member {(f, i, j)} not realised")
        weights.append(w)
        alphas.append(alpha)
        margins.append(_min_margin(w, dom_X, row))
    report = {"d": d, "l": l, "radius": radius, "attempt": attempt, "realized": len(weights),
              "total": len(F), "max_alpha": max(alphas), "min_margin": min(margins)}
    return Embedding(points, weights, F, report)


def embed_G_halfspaces(d: int, l: int, *, slope: float = 10.0) -> Embedding:
    """Place (m, i) at (e_m, i) in R^{d-1} x R with e_1 = 0 and e_m the unit vectors.

    Member g^{i,j} uses the affine interpolant A of g on the e_m plus
    j * slope * (height - i).
    """
    if d < 2:
        raise ValueError("embedding G needs d >= 2")
    G = build_G(d, l)
    base = np.vstack([np.zeros(d - 1), np.eye(d - 1)])     # d affinely independent points
    points = {(m, i): np.r_[base[m - 1], float(i)] for m in range(1, d + 1) for i in range(1, l + 1)}
    dom_X = np.array([points[p] for p in G.domain])
    weights, margins = [], []
    for row, (g, i, j) in zip(G.table, G.params):
        c, c0 = _affine_interpolant(base, g)
        w = np.r_[c, j * slope, c0 - j * slope * i]
        if not np.array_equal(Halfspace(w).predict(dom_X), row):
            raise EmbeddingInvalidError(f"member {(g, i, j)} not realised with slope {slope}")
        weights.append(w)
        margins.append(_min_margin(w, dom_X, row))
    report = {"d": d, "l": l, "slope": slope, "realized": len(weights), "total": len(G),
              "min_margin": min(margins)}
    return Embedding(points, weights, G, report)


def format_embedding(emb: Embedding) -> str:
    lines = [" ".join(f"{k}={v}" for k, v in emb.report.items())]
    for p in emb.functions.domain:
        lines.append(f"{p[0]} {p[1]} " + " ".join(repr(float(x)) for x in emb.points[p]))
    return "\n".join(lines) + "\n"
