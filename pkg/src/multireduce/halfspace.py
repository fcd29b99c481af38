"""Binary halfspaces over R^d with the bias stored as the last weight.

A halfspace predicts ``sign(<w, (x, 1)>)`` with ``sign(0) = +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import NotRealizableError


def augment(X) -> np.ndarray:
    """Append the constant-one coordinate to every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return np.append(X, 1.0)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def sign(z) -> np.ndarray:
    return np.where(np.asarray(z) >= 0, 1, -1)


@dataclass(frozen=True, eq=False)
class Halfspace:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.size < 2:
            raise ValueError("halfspace weights need at least one feature plus the bias")
        if not np.all(np.isfinite(w)):
            raise ValueError("halfspace weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.size - 1

    @classmethod
    def constant(cls, d: int, label: int = 1) -> "Halfspace":
        w = np.zeros(d + 1)
        w[-1] = 1.0 if label >= 0 else -1.0
        return cls(w)

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ValueError(f"point dimension {X.shape[-1]} does not match halfspace dimension {self.dim}")
        return augment(X) @ self.weights

    def predict(self, X) -> np.ndarray:
        return sign(self.decision(X))

    def __neg__(self):
        return Halfspace(-self.weights)


def predict(h: Halfspace, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes a single point; use Halfspace.predict for batches")
    return int(h.predict(x))


@dataclass(frozen=True, eq=False)
class BinarySample:
    X: np.ndarray
    y: np.ndarray
    weights: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.y).reshape(-1).astype(np.int64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different lengths")
        if not np.all(np.abs(y) == 1):
            raise ValueError("binary labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
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

    def flipped(self) -> "BinarySample":
        return BinarySample(self.X, -self.y, self.weights)


def empirical_error(h: Halfspace, sample: BinarySample) -> float:
    if len(sample) == 0:
        raise ValueError("empirical error of an empty sample is undefined")
    wrong = h.predict(sample.X) != sample.y
    return math.fsum(sample.normalized_weights()[wrong])


def majority_halfspace(sample: BinarySample) -> Halfspace:
    """Pure-bias classifier predicting the heavier label (+1 on ties and on empty samples)."""
    d = sample.dim
    if len(sample) == 0:
        return Halfspace.constant(d, 1)
    w = sample.normalized_weights()
    pos = w[sample.y == 1].sum()
    return Halfspace.constant(d, 1 if pos >= 1 - pos else -1)


def train_realizable(sample: BinarySample, budget: int = 100_000, *, order_seed=None) -> Halfspace:
    """Perceptron run until every point is strictly on its correct side.

    Raises NotRealizableError after ``budget`` updates.  Points are visited
    in index order unless ``order_seed`` shuffles each epoch.
    """
    if len(sample) == 0:
        raise ValueError("cannot train on an empty sample")
    Z = augment(sample.X) * sample.y[:, None]
    w = np.zeros(Z.shape[1])
    rng = np.random.default_rng(order_seed) if order_seed is not None else None
    updates = 0
    n = Z.shape[0]
    while True:
        order = rng.permutation(n) if rng is not None else range(n)
        mistakes = 0
        for i in order:
            if Z[i] @ w <= 0:
                w += Z[i]
                updates += 1
                mistakes += 1
                if updates >= budget:
                    if np.all(Z @ w > 0):
                        return Halfspace(w)
                    raise NotRealizableError(f"no consistent halfspace after {budget} perceptron updates")
        if mistakes == 0:
            return Halfspace(w)


def train_erm_approx(sample: BinarySample, restarts: int = 5, seed=None, *,
                     iterations: int = 300) -> Halfspace:
    """Best-of-restarts subgradient descent on the hinge loss.

    Every iterate (and both constant classifiers) is a candidate; the one
    with the lowest weighted 0-1 training error wins, earliest first.
    Steps are ``1/sqrt(t)`` along the normalised subgradient.
    """
    if len(sample) == 0:
        raise ValueError("cannot train on an empty sample")
    rng = np.random.default_rng(seed)
    Xb = augment(sample.X)
    y = sample.y
    pw = sample.normalized_weights()
    scale = max(float(np.abs(Xb).max()), 1.0)
    Xs = Xb / scale

    best_w = majority_halfspace(sample).weights.copy()
    best_err = float(np.sum(pw[sign(Xs @ best_w) != y]))
    for r in range(max(restarts, 1)):
        if r == 0:
            w = np.zeros(Xs.shape[1])
        else:
            w = rng.standard_normal(Xs.shape[1])
        for t in range(1, iterations + 1):
            margins = y * (Xs @ w)
            err = float(np.sum(pw[margins < 0]) + np.sum(pw[(margins == 0) & (y < 0)]))
            if err < best_err:
                best_err, best_w = err, w.copy()
                if err == 0:
                    break
            active = margins < 1
            g = -(pw[active] * y[active]) @ Xs[active]
            norm = np.linalg.norm(g)
            if norm == 0:
                break
            w = w - g / (norm * math.sqrt(t))
        if best_err == 0:
            break
    return Halfspace(best_w / np.r_[np.full(Xb.shape[1] - 1, scale), scale])


def polish_margin(h: Halfspace, X) -> Halfspace:
    """Widest-margin halfspace inducing the same labelling of ``X`` as ``h``.

    Solves max t s.t. yhat_i <w, x_i> >= t with |w_c| <= 1 (an LP); returns
    ``h`` unchanged when the labelling is constant or the LP result would
    relabel a point.
    """
    locs = np.unique(np.asarray(X, dtype=np.float64), axis=0)
    yhat = h.predict(locs)
    if np.all(yhat == yhat[0]):
        return h
    Z = augment(locs) * yhat[:, None]
    p = Z.shape[1]
    scale = max(float(np.abs(Z).max()), 1.0)
    c = np.zeros(p + 1)
    c[-1] = -1.0
    A = np.hstack([-Z / scale, np.ones((Z.shape[0], 1))])
    res = linprog(c, A_ub=A, b_ub=np.zeros(Z.shape[0]),
                  bounds=[(-1, 1)] * p + [(None, 1)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        return h
    cand = Halfspace(res.x[:p])
    if np.array_equal(cand.predict(locs), yhat) and np.all(np.abs(cand.decision(locs)) > 0):
        return cand
    return h


# ---------------------------------------------------------------- exact oracle

def _merge_locations(sample: BinarySample):
    """Collapse repeated points; return locations, positive mass, negative mass."""
    w = sample.normalized_weights()
    locs, inv = np.unique(sample.X, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    wp = np.bincount(inv, weights=w * (sample.y == 1), minlength=len(locs))
    wn = np.bincount(inv, weights=w * (sample.y == -1), minlength=len(locs))
    return locs, wp, wn


def _best_1d(locs, wp, wn):
    x = locs[:, 0]
    order = np.argsort(x)
    x, wp, wn = x[order], wp[order], wn[order]
    # labeling "+1 iff x >= t": cutting before index c puts points [c:] on the + side
    neg_before = np.r_[0.0, np.cumsum(wp)]          # positives labelled -1
    neg_after = np.r_[np.cumsum(wn[::-1])[::-1], 0.0]  # negatives labelled +1
    up = neg_before + neg_after
    down = 1.0 - up
    cuts = np.r_[x[0] - 1.0, (x[:-1] + x[1:]) / 2, x[-1] + 1.0]
    c_up, c_down = int(np.argmin(up)), int(np.argmin(down))
    if up[c_up] <= down[c_down]:
        return float(up[c_up]), Halfspace([1.0, -cuts[c_up]])
    return float(down[c_down]), Halfspace([-1.0, cuts[c_down]])


_TWO_PI = 2.0 * math.pi


def _range_sum(cs, th3, lo, hi, lo_closed, hi_closed):
    a = np.searchsorted(th3, lo, side="left" if lo_closed else "right")
    b = np.searchsorted(th3, hi, side="right" if hi_closed else "left")
    return cs[b] - cs[a]


def _best_2d(locs, wp, wn, tol=1e-10):
    """Exact minimum of sum_{labelled -1} g + sum(wn), g = wp - wn.

    Every non-constant linear dichotomy is realised by a line through a pivot
    location p and a second location; the pivot, the ray towards the second
    location, the opposite ray and the two open half-planes can then be
    labelled independently (tiny shift, tiny rotation, orientation).
    """
    g = wp - wn
    base = wn.sum()
    best = (base + min(0.0, g.sum()), None)  # constant classifiers
    n = len(locs)
    for p in range(n if n > 1 else 0):
        others = np.r_[0:p, p + 1:n]
        v = locs[others] - locs[p]
        th = np.mod(np.arctan2(v[:, 1], v[:, 0]), _TWO_PI)
        order = np.argsort(th, kind="stable")
        th, gs = th[order], g[others][order]
        th3 = np.concatenate([th - _TWO_PI, th, th + _TWO_PI])
        cs = np.r_[0.0, np.cumsum(np.tile(gs, 3))]
        a = th
        ray_a = _range_sum(cs, th3, a - tol, a + tol, True, True)
        left = _range_sum(cs, th3, a + tol, a + math.pi - tol, False, False)
        ray_b = _range_sum(cs, th3, a + math.pi - tol, a + math.pi + tol, True, True)
        right = _range_sum(cs, th3, a + math.pi + tol, a + _TWO_PI - tol, False, False)
        vals = base + np.minimum(left, right) + np.minimum(ray_a, ray_b) + min(0.0, g[p])
        c = int(np.argmin(vals))
        if vals[c] < best[0] - 1e-15:
            orient = 1 if right[c] <= left[c] else -1    # +1: left half-plane positive
            ray_sign = 1 if ray_b[c] <= ray_a[c] else -1  # label of ray A
            pivot_sign = -1 if g[p] < 0 else 1
            best = (float(vals[c]), (p, float(a[c]), orient, ray_sign, pivot_sign))
    return best


def _witness_2d(locs, spec, tol=1e-10):
    p, alpha, orient, ray_sign, pivot_sign = spec
    P = locs[p]
    v = np.delete(locs, p, axis=0) - P
    ang = np.mod(np.arctan2(v[:, 1], v[:, 0]) - alpha, math.pi)
    off = np.minimum(ang, math.pi - ang)
    off = off[off > tol]
    gap = off.min() if off.size else math.pi / 2
    rho = -orient * ray_sign * min(gap / 4, 1e-3)
    beta = alpha + rho
    normal = np.array([-math.sin(beta), math.cos(beta)])
    vals = orient * (v @ normal)
    nz = np.abs(vals[np.abs(vals) > 0])
    eta = (nz.min() / 4) if nz.size else 1.0
    w = np.r_[orient * normal, -orient * float(normal @ P) + pivot_sign * eta]
    return Halfspace(w)


def exact_best_error(sample: BinarySample) -> tuple[float, Halfspace]:
    """Exact minimum weighted 0-1 error over all halfspaces, for d in {1, 2}."""
    if len(sample) == 0:
        raise ValueError("exact_best_error needs a nonempty sample")
    d = sample.dim
    if d not in (1, 2):
        raise ValueError(f"exact oracle supports d = 1 or 2, got d = {d}")
    locs, wp, wn = _merge_locations(sample)
    if d == 1:
        err, h = _best_1d(locs, wp, wn)
    else:
        err, spec = _best_2d(locs, wp, wn)
        if spec is None:
            h = Halfspace.constant(2, 1 if wn.sum() <= wp.sum() else -1)
        else:
            h = _witness_2d(locs, spec)
    # the sweep accumulates prefix sums; report the witness's own error when it
    # matches, so a perfect split gives exactly 0
    realized = empirical_error(h, sample)
    return (realized if abs(realized - err) <= 1e-9 else float(err)), h
