"""Seeded synthetic multiclass distributions and random binary label maps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .halfspace import BinarySample
from .reducers import MulticlassSample

KINDS = ("point-classes", "circle-points", "sector-3", "random-points", "simplex")

TWO_POINTS = np.array([[0.0, 0.7], [0.7, 0.0]])


@dataclass(frozen=True, eq=False)
class SyntheticDistribution:
    kind: str
    k: int
    d: int
    centers: Optional[np.ndarray] = None       # (k, d); None for sector-3
    class_probabilities: Optional[np.ndarray] = None
    sigma: float = 0.0
    seed: Optional[int] = None
    max_class_mass: Optional[float] = None     # c in the p_i <= c/k regime; None = unchecked

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.k < 2 or self.d < 1:
            raise ValueError("need k >= 2 classes and dimension d >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        p = (np.full(self.k, 1.0 / self.k) if self.class_probabilities is None
             else np.asarray(self.class_probabilities, dtype=np.float64))
        if p.shape != (self.k,) or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("class probabilities must be a length-k probability vector")
        object.__setattr__(self, "class_probabilities", p / p.sum())
        if self.centers is not None:
            c = np.asarray(self.centers, dtype=np.float64)
            if c.shape != (self.k, self.d):
                raise ValueError(f"centers must have shape ({self.k}, {self.d})")
            object.__setattr__(self, "centers", c)
        elif self.kind != "sector-3":
            raise ValueError(f"{self.kind} distributions need class centers")
        if self.max_class_mass is not None and p.max() > self.max_class_mass / self.k + 1e-12:
            raise ValueError(f"largest class mass {p.max():.4g} exceeds {self.max_class_mass}/k")

    @property
    def finitely_supported(self) -> bool:
        return self.centers is not None and self.sigma == 0

    def support(self) -> MulticlassSample:
        """The distribution itself as weighted atoms (only when it has finite support)."""
        if not self.finitely_supported:
            raise ValueError(f"{self.kind} with sigma={self.sigma} has no finite support")
        return MulticlassSample(self.centers, np.arange(1, self.k + 1), self.k, self.class_probabilities)

    def describe(self) -> dict:
        out = {"kind": self.kind, "k": self.k, "d": self.d, "sigma": self.sigma, "seed": self.seed}
        if self.max_class_mass is not None:
            out["max_class_mass"] = self.max_class_mass
        return out


def point_classes(centers, probabilities=None, sigma: float = 0.0, **kw) -> SyntheticDistribution:
    c = np.asarray(centers, dtype=np.float64)
    return SyntheticDistribution("point-classes", c.shape[0], c.shape[1], c, probabilities, sigma, **kw)


def two_points(sigma: float = 0.0) -> SyntheticDistribution:
    return point_classes(TWO_POINTS, sigma=sigma)


def circle_points(k: int, sigma: float = 0.0, **kw) -> SyntheticDistribution:
    """Class i (1-based) sits at angle 2 pi (i-1) / k on the unit circle."""
    ang = 2 * np.pi * np.arange(k) / k
    c = np.column_stack([np.cos(ang), np.sin(ang)])
    return SyntheticDistribution("circle-points", k, 2, c, None, sigma, **kw)


def sector3() -> SyntheticDistribution:
    """Uniform on the unit disc, labelled by three 120-degree sectors starting at angle 0."""
    return SyntheticDistribution("sector-3", 3, 2)


SECTOR_MID_ANGLES = np.array([np.pi / 3, np.pi, 5 * np.pi / 3])


def random_points(k: int, d: int = 2, seed=None, *, with_center: bool = False,
                  sigma: float = 0.0, **kw) -> SyntheticDistribution:
    """k centers uniform in the unit ball; with_center moves the last one to the centroid of the rest."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((k, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(k) ** (1.0 / d)
    c = direction * radius[:, None]
    if with_center:
        c[-1] = c[:-1].mean(axis=0)
    return SyntheticDistribution("random-points", k, d, c, None, sigma, seed, **kw)


def simplex(d: int) -> SyntheticDistribution:
    """d+1 affinely independent points (origin and unit vectors), mass 1/(d+1) each."""
    c = np.vstack([np.zeros(d), np.eye(d)])
    return SyntheticDistribution("simplex", d + 1, d, c)


def sample(dist: SyntheticDistribution, n: int, seed=None) -> MulticlassSample:
    if n < 1:
        raise ValueError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    if dist.kind == "sector-3":
        theta = rng.random(n) * 2 * np.pi
        rad = np.sqrt(rng.random(n))
        X = np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
        y = sector_labels(X)
        return MulticlassSample(X, y, 3)
    y = rng.choice(dist.k, size=n, p=dist.class_probabilities) + 1
    X = dist.centers[y - 1].copy()
    if dist.sigma > 0:
        X += dist.sigma * rng.standard_normal(X.shape)
    return MulticlassSample(X, y, dist.k)


def sector_labels(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    theta = np.mod(np.arctan2(X[:, 1], X[:, 0]), 2 * np.pi)
    return np.minimum((theta // (2 * np.pi / 3)).astype(np.int64), 2) + 1


# ---------------------------------------------------------------- label maps

@dataclass(frozen=True, eq=False)
class LabelMap:
    signs: np.ndarray          # signs[i-1] = phi(i)
    rule: str = "iid"
    mu: Optional[float] = None

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=np.int64).reshape(-1)
        if not np.all(np.abs(s) == 1):
            raise ValueError("label map values must be +-1")
        object.__setattr__(self, "signs", s)

    @property
    def k(self) -> int:
        return self.signs.shape[0]

    def __call__(self, labels):
        return self.signs[np.asarray(labels) - 1]


def random_label_map(k: int, mu: float = 0.5, rule: str = "exact", seed=None) -> LabelMap:
    """phi: [k] -> {-1, +1}.

    ``iid``: each phi(i) = -1 independently with probability mu.
    ``exact``: uniform among maps with exactly round(mu k) negatives.
    """
    if not 0 < mu <= 0.5:
        raise ValueError(f"mu must lie in (0, 1/2], got {mu}")
    rng = np.random.default_rng(seed)
    if rule == "iid":
        signs = np.where(rng.random(k) < mu, -1, 1)
    elif rule == "exact":
        neg = round(mu * k)
        if neg < 1:
            raise ValueError(f"round(mu k) = 0 for mu={mu}, k={k}")
        signs = np.ones(k, dtype=np.int64)
        signs[rng.choice(k, size=neg, replace=False)] = -1
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return LabelMap(signs, rule, mu)


def apply_label_map(sample: MulticlassSample, phi: LabelMap) -> BinarySample:
    if len(sample) and (sample.y.min() < 1 or sample.y.max() > phi.k):
        raise ValueError(f"labels outside 1..{phi.k}")
    return BinarySample(sample.X, phi(sample.y), sample.weights)


# ---------------------------------------------------------------- I/O

def from_config(cfg: dict) -> SyntheticDistribution:
    """Distribution from a JSON-style description {kind, k, d, seed, ...flags}."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    seed = cfg.pop("seed", None)
    sigma = float(cfg.pop("sigma", 0.0))
    mass = cfg.pop("max_class_mass", None)
    extra = {} if mass is None else {"max_class_mass": float(mass)}
    aliases = {"circle": "circle-points", "sector3": "sector-3", "random": "random-points",
               "points": "point-classes", "two-points": "two-points"}
    kind = aliases.get(kind, kind)
    if kind == "two-points":
        return two_points(sigma)
    if kind == "circle-points":
        return circle_points(int(cfg.pop("k")), sigma, seed=seed, **extra)
    if kind == "sector-3":
        return sector3()
    if kind == "random-points":
        return random_points(int(cfg.pop("k")), int(cfg.pop("d", 2)), seed,
                             with_center=bool(cfg.pop("with_center", False)), sigma=sigma, **extra)
    if kind == "simplex":
        return simplex(int(cfg.pop("d")))
    if kind == "point-classes":
        return point_classes(cfg.pop("centers"), cfg.pop("probabilities", None), sigma, seed=seed, **extra)
    raise ValueError(f"unknown distribution kind {kind!r}")


def write_csv(sample, fh: TextIO) -> None:
    """Rows ``x1,...,xd,y``; works for multiclass and binary samples."""
    w = csv.writer(fh, lineterminator="\n")
    d = sample.X.shape[1]
    w.writerow([f"x{i + 1}" for i in range(d)] + ["y"])
    for x, y in zip(sample.X, sample.y):
        w.writerow([repr(float(v)) for v in x] + [int(y)])


def sample_to_csv(sample) -> str:
    buf = io.StringIO()
    write_csv(sample, buf)
    return buf.getvalue()


def read_csv(fh: TextIO, num_classes: Optional[int] = None) -> MulticlassSample:
    rows = list(csv.reader(fh))
    if rows and rows[0] and not _is_number(rows[0][0]):
        rows = rows[1:]
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError("empty sample file")
    try:
        X = np.array([[float(v) for v in r[:-1]] for r in rows])
        y = np.array([int(float(r[-1])) for r in rows])
    except ValueError as exc:
        raise ValueError(f"malformed CSV sample: {exc}") from None
    return MulticlassSample(X, y, num_classes)


def read_binary_csv(fh: TextIO) -> BinarySample:
    rows = [r for r in csv.reader(fh) if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    X = np.array([[float(v) for v in r[:-1]] for r in rows])
    y = np.array([int(float(r[-1])) for r in rows])
    return BinarySample(X, y)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False
