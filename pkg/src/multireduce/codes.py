"""Error-correcting output codes: construction, decoding and distance analysis.

Rows of a code matrix are indexed from 0; class labels run from 1 to k.
``label_map[i]`` is the class label attached to row ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, TextIO

import numpy as np

from .errors import NoSensitiveVectorError


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    entries: np.ndarray
    label_map: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.ndim != 2:
            raise ValueError("code matrix must be two-dimensional")
        k, l = entries.shape
        if k < 2 or l < 1:
            raise ValueError(f"code matrix needs k >= 2 and l >= 1, got {k}x{l}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("code matrix entries must be finite")
        if np.all(entries == np.round(entries)):
            entries = entries.astype(np.int64)
        else:
            entries = entries.astype(np.float64)
        labels = np.asarray(self.label_map, dtype=np.int64).reshape(-1)
        if labels.shape != (k,) or sorted(labels.tolist()) != list(range(1, k + 1)):
            raise ValueError("label_map must be a bijection onto 1..k")
        entries.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "label_map", labels)

    @property
    def num_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def code_length(self) -> int:
        return self.entries.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(np.all(np.abs(self.entries) == 1))

    def row_of(self, label: int) -> int:
        """Row index carrying ``label`` (the inverse label map)."""
        return int(np.flatnonzero(self.label_map == label)[0])

    def inverse_label_map(self) -> np.ndarray:
        inv = np.empty(self.num_classes, dtype=np.int64)
        inv[self.label_map - 1] = np.arange(self.num_classes)
        return inv

    def with_label_map(self, label_map) -> "CodeMatrix":
        return CodeMatrix(self.entries, label_map)

    def __eq__(self, other):
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return (self.entries.shape == other.entries.shape
                and np.array_equal(self.entries, other.entries)
                and np.array_equal(self.label_map, other.label_map))

    __hash__ = None


def _identity_labels(k):
    return np.arange(1, k + 1)


def _check_k(k):
    if int(k) != k or k < 2:
        raise ValueError(f"need at least two classes, got k={k}")
    return int(k)


def ova_code(k: int) -> CodeMatrix:
    k = _check_k(k)
    m = -np.ones((k, k), dtype=np.int64)
    np.fill_diagonal(m, 1)
    return CodeMatrix(m, _identity_labels(k))


def ap_pairs(k: int) -> list[tuple[int, int]]:
    """Column order of the all-pairs code: 0-based pairs (i, j), i < j, lexicographic."""
    return list(combinations(range(k), 2))


def ap_code(k: int) -> CodeMatrix:
    k = _check_k(k)
    pairs = ap_pairs(k)
    m = np.zeros((k, len(pairs)), dtype=np.int64)
    for c, (i, j) in enumerate(pairs):
        m[i, c] = -1
        m[j, c] = 1
    return CodeMatrix(m, _identity_labels(k))


def random_code(k: int, l: int, seed=None, *, random_labels: bool = False,
                distinct_rows: bool = False, max_tries: int = 10_000) -> CodeMatrix:
    """Code with i.i.d. uniform +-1 entries.

    With ``distinct_rows`` the matrix is redrawn until no two rows coincide.
    ``random_labels`` draws the row-to-label bijection from the same generator,
    after the entries.
    """
    k = _check_k(k)
    if int(l) != l or l < 1:
        raise ValueError(f"code length must be >= 1, got {l}")
    l = int(l)
    if distinct_rows and 2 ** l < k:
        raise ValueError(f"cannot draw {k} distinct rows of length {l}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        m = rng.choice(np.array([-1, 1], dtype=np.int64), size=(k, l))
        if not distinct_rows or len(np.unique(m, axis=0)) == k:
            break
    else:
        raise ValueError(f"no code with distinct rows after {max_tries} draws")
    labels = rng.permutation(k) + 1 if random_labels else _identity_labels(k)
    return CodeMatrix(m, labels)


def _as_vector(u, l):
    u = np.asarray(u)
    if u.ndim != 1 or u.shape[0] != l:
        raise ValueError(f"expected a vector of length {l}, got shape {u.shape}")
    return u


def code_scores(M: CodeMatrix, U) -> np.ndarray:
    """Row scores sum_j M_ij u_j; ``U`` may be one vector or a stack of vectors (n, l)."""
    U = np.asarray(U)
    if U.shape[-1] != M.code_length:
        raise ValueError(f"expected length-{M.code_length} vectors, got shape {U.shape}")
    if M.entries.dtype.kind == "i" and np.all(U == np.round(U)):
        U = U.astype(np.int64)
    return U @ M.entries.T


def decode(M: CodeMatrix, u) -> int:
    """Label of the lowest-indexed row with maximal score."""
    u = _as_vector(u, M.code_length)
    return int(M.label_map[int(np.argmax(code_scores(M, u)))])


def decode_many(M: CodeMatrix, U) -> np.ndarray:
    U = np.asarray(U)
    if U.ndim != 2:
        raise ValueError("decode_many expects an (n, l) array")
    # np.argmax returns the first maximiser, which is the tie-breaking rule we need
    return M.label_map[np.argmax(code_scores(M, U), axis=1)]


def _check_binary_vector(u):
    if not np.all(np.abs(u) == 1):
        raise ValueError("binary vectors must have entries in {-1, +1}")


def hamming_distance(u, v) -> int:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return int(np.count_nonzero(u != v))


def _pairwise_distances(M: CodeMatrix) -> np.ndarray:
    if not M.is_binary:
        raise ValueError("distances are defined for +-1 codes only")
    e = M.entries
    return (e[:, None, :] != e[None, :, :]).sum(axis=2)


def code_distance(M: CodeMatrix) -> int:
    """Minimum Hamming distance between two distinct rows."""
    dist = _pairwise_distances(M)
    iu = np.triu_indices(M.num_classes, 1)
    return int(dist[iu].min())


def _nearest_distances(M):
    dist = _pairwise_distances(M)
    np.fill_diagonal(dist, np.iinfo(dist.dtype).max)
    return dist, dist.min(axis=1)


def max_min_distance(M: CodeMatrix) -> int:
    """Largest distance from a row to its nearest other row."""
    _, nearest = _nearest_distances(M)
    return int(nearest.max())


def flip(u, j: int) -> np.ndarray:
    out = np.array(u, copy=True)
    out[j] = -out[j]
    return out


def sensitivity(M: CodeMatrix, u) -> tuple[int, list[int]]:
    """Coordinates whose flip changes the decoded label, and their count."""
    u = _as_vector(u, M.code_length)
    _check_binary_vector(u)
    base = decode(M, u)
    flips = np.tile(u, (M.code_length, 1))
    idx = np.arange(M.code_length)
    flips[idx, idx] = -flips[idx, idx]
    changed = np.flatnonzero(decode_many(M, flips) != base)
    return len(changed), changed.tolist()


def sensitive_vector(M: CodeMatrix) -> np.ndarray:
    """Vector that is at least ceil(Delta(M)/2)-sensitive.

    Take the lowest row ``i1`` whose nearest neighbour is at distance
    Delta(M) and that neighbour ``i2`` (lowest index on ties).  On the first
    ceil(Delta/2) coordinates where they differ, copy the lower-indexed of the
    two rows; everywhere else copy the higher-indexed one.
    """
    dist, nearest = _nearest_distances(M)
    delta = int(nearest.max())
    if delta == 0:
        raise NoSensitiveVectorError("code has identical rows; Delta(M) = 0")
    i1 = int(np.flatnonzero(nearest == delta)[0])
    i2 = int(np.flatnonzero(dist[i1] == delta)[0])
    lo, hi = min(i1, i2), max(i1, i2)
    rows = M.entries
    differ = np.flatnonzero(rows[i1] != rows[i2])
    head = differ[: math.ceil(delta / 2)]
    u = rows[hi].copy()
    u[head] = rows[lo][head]
    return u


def ova_sensitive_vector(k: int) -> np.ndarray:
    """All -1: every row ties, label 1 wins, and flipping any j > 1 hands the win to row j."""
    return -np.ones(_check_k(k), dtype=np.int64)


def ap_sensitive_vector(k: int) -> np.ndarray:
    """For odd k: u[(i, j)] = +1 iff j - i <= (k-1)/2, columns in ``ap_pairs`` order.

    Each class wins exactly half of its pairs, so all scores are 0.
    """
    k = _check_k(k)
    if k % 2 == 0:
        raise ValueError("the balanced all-pairs vector needs an odd number of classes")
    return np.array([1 if j - i <= (k - 1) // 2 else -1 for i, j in ap_pairs(k)], dtype=np.int64)


# ---------------------------------------------------------------- text format

def _fmt_entry(x) -> str:
    if isinstance(x, (np.integer, int)):
        return str(int(x))
    return repr(float(x))


def format_code(M: CodeMatrix) -> str:
    lines = [f"{M.num_classes} {M.code_length}"]
    for row in M.entries:
        lines.append(" ".join(_fmt_entry(x) for x in row))
    lines.append(" ".join(str(int(x)) for x in M.label_map))
    return "\n".join(lines) + "\n"


def parse_code(lines: Iterable[str]) -> CodeMatrix:
    it = (ln.strip() for ln in lines)
    it = (ln for ln in it if ln)
    try:
        k, l = (int(t) for t in next(it).split())
        rows = [[float(t) for t in next(it).split()] for _ in range(k)]
        labels = [int(t) for t in next(it).split()]
    except (StopIteration, ValueError) as exc:
        raise ValueError(f"malformed code matrix: {exc}") from None
    if any(len(r) != l for r in rows):
        raise ValueError("code matrix row length does not match header")
    return CodeMatrix(np.array(rows), labels)


def write_code(M: CodeMatrix, fh: TextIO) -> None:
    fh.write(format_code(M))


def read_code(fh: TextIO) -> CodeMatrix:
    return parse_code(fh)
