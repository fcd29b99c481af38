"""Full binary tree shapes over k leaves.

Internal nodes are numbered 0..k-2 in preorder (root = 0); leaves are
numbered 0..k-1 from left to right.  A child reference ``c >= 0`` is an
internal node, ``c < 0`` is the leaf ``-c - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

import numpy as np


def leaf_ref(leaf: int) -> int:
    return -leaf - 1


def ref_leaf(ref: int) -> int:
    return -ref - 1


@dataclass(frozen=True, eq=False)
class TreeShape:
    children: np.ndarray  # (k-1, 2): left and right child references

    def __post_init__(self):
        ch = np.asarray(self.children, dtype=np.int64).reshape(-1, 2)
        n = ch.shape[0]
        if n < 1:
            raise ValueError("a tree for k classes needs k >= 2 leaves")
        internal = sorted(int(c) for c in ch.ravel() if c >= 0)
        leaves = sorted(ref_leaf(int(c)) for c in ch.ravel() if c < 0)
        if internal != list(range(1, n)) or leaves != list(range(n + 1)):
            raise ValueError("children do not describe a full binary tree")
        ch.setflags(write=False)
        object.__setattr__(self, "children", ch)
        self._check_preorder()

    def _check_preorder(self):
        seen_nodes, seen_leaves = [], []

        def walk(ref):
            if ref < 0:
                seen_leaves.append(ref_leaf(ref))
                return
            seen_nodes.append(ref)
            walk(int(self.children[ref, 0]))
            walk(int(self.children[ref, 1]))

        walk(0)
        if seen_nodes != list(range(self.num_internal)) or seen_leaves != list(range(self.num_leaves)):
            raise ValueError("nodes must be numbered in preorder and leaves left to right")

    @property
    def num_internal(self) -> int:
        return self.children.shape[0]

    @property
    def num_leaves(self) -> int:
        return self.children.shape[0] + 1

    def __eq__(self, other):
        return isinstance(other, TreeShape) and np.array_equal(self.children, other.children)

    def __hash__(self):
        return hash(self.children.tobytes())

    # ------------------------------------------------------------ structure

    @cached_property
    def leaf_paths(self) -> list[list[tuple[int, int]]]:
        """For each leaf, the root-to-leaf path as (node, direction) with direction +1 = right."""
        paths: list[Optional[list]] = [None] * self.num_leaves

        def walk(ref, prefix):
            if ref < 0:
                paths[ref_leaf(ref)] = prefix
                return
            walk(int(self.children[ref, 0]), prefix + [(ref, -1)])
            walk(int(self.children[ref, 1]), prefix + [(ref, 1)])

        walk(0, [])
        return paths  # type: ignore[return-value]

    @cached_property
    def subtree_leaves(self) -> list[tuple[frozenset, frozenset]]:
        """For each internal node, the leaves under its left and right child."""
        out = [None] * self.num_internal

        def collect(ref):
            if ref < 0:
                return frozenset([ref_leaf(ref)])
            left = collect(int(self.children[ref, 0]))
            right = collect(int(self.children[ref, 1]))
            out[ref] = (left, right)
            return left | right

        collect(0)
        return out  # type: ignore[return-value]

    def depth(self) -> int:
        """Largest number of internal nodes on a root-to-leaf path."""
        return max(len(p) for p in self.leaf_paths)

    def inorder(self) -> list[int]:
        """Internal nodes in in-order: left subtree, node, right subtree."""
        order = []

        def walk(ref):
            if ref < 0:
                return
            walk(int(self.children[ref, 0]))
            order.append(ref)
            walk(int(self.children[ref, 1]))

        walk(0)
        return order

    def extreme_leaf(self, ref: int, side: int) -> int:
        """Leaf reached from ``ref`` by always moving to ``side`` (+1 right, -1 left)."""
        col = 1 if side > 0 else 0
        while ref >= 0:
            ref = int(self.children[ref, col])
        return ref_leaf(ref)

    # ------------------------------------------------------------ text form

    def to_string(self) -> str:
        """Parenthesised form: a leaf is ``.``, a node is ``(LR)``."""
        def render(ref):
            if ref < 0:
                return "."
            return "(" + render(int(self.children[ref, 0])) + render(int(self.children[ref, 1])) + ")"
        return render(0)

    @classmethod
    def from_string(cls, text: str) -> "TreeShape":
        text = "".join(text.split())
        pos = 0

        def parse():
            nonlocal pos
            if pos >= len(text):
                raise ValueError("truncated tree string")
            ch = text[pos]
            pos += 1
            if ch == ".":
                return None
            if ch != "(":
                raise ValueError(f"unexpected character {ch!r} in tree string")
            left = parse()
            right = parse()
            if pos >= len(text) or text[pos] != ")":
                raise ValueError("unbalanced tree string")
            pos += 1
            return (left, right)

        nested = parse()
        if pos != len(text) or nested is None:
            raise ValueError("tree string must describe a single tree with k >= 2 leaves")
        return cls.from_nested(nested)

    @classmethod
    def from_nested(cls, nested) -> "TreeShape":
        """Build from nested pairs, ``None`` standing for a leaf."""
        rows: list[list[int]] = []
        leaf_count = 0

        def build(t):
            nonlocal leaf_count
            if t is None:
                leaf_count += 1
                return leaf_ref(leaf_count - 1)
            idx = len(rows)
            rows.append([0, 0])
            rows[idx][0] = build(t[0])
            rows[idx][1] = build(t[1])
            return idx

        if nested is None:
            raise ValueError("a single leaf is not a tree for k >= 2 classes")
        build(nested)
        return cls(np.array(rows))

    def __repr__(self):
        return f"TreeShape({self.to_string()!r})"


def _nested_balanced(k):
    if k == 1:
        return None
    return (_nested_balanced(k // 2), _nested_balanced(k - k // 2))


def balanced_tree(k: int) -> TreeShape:
    if k < 2:
        raise ValueError("need k >= 2")
    return TreeShape.from_nested(_nested_balanced(k))


def chain_tree(k: int) -> TreeShape:
    """Every internal node has a leaf as its left child (the OvA-like tree)."""
    if k < 2:
        raise ValueError("need k >= 2")
    nested = None
    for _ in range(k - 1):
        nested = (None, nested)
    return TreeShape.from_nested(nested)


def random_tree(k: int, seed=None) -> TreeShape:
    """Random shape: each subtree splits its leaves at a uniform point."""
    if k < 2:
        raise ValueError("need k >= 2")
    rng = np.random.default_rng(seed)

    def grow(n):
        if n == 1:
            return None
        left = int(rng.integers(1, n))
        return (grow(left), grow(n - left))

    return TreeShape.from_nested(grow(k))


def _all_nested(k):
    if k == 1:
        yield None
        return
    for left in range(1, k):
        for a in _all_nested(left):
            for b in _all_nested(k - left):
                yield (a, b)


def all_trees(k: int) -> Iterator[TreeShape]:
    """Every full binary tree shape with k leaves (Catalan many)."""
    if k < 2:
        raise ValueError("need k >= 2")
    for nested in _all_nested(k):
        yield TreeShape.from_nested(nested)


def root_split(shape: TreeShape) -> tuple[frozenset, frozenset]:
    return shape.subtree_leaves[0]
