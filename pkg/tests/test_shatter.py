import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multireduce import codes as C
from multireduce import shatter as S
from multireduce import trees as T
from multireduce.errors import BudgetExceededError, EmbeddingInvalidError
from multireduce.halfspace import BinarySample, train_realizable
from multireduce.shatter import FiniteFunctionClass


# ---------------------------------------------------------------- brute-force oracles

def brute_n_shattered(table, cols, labels):
    """Try every pair of witnesses drawn from the full label set, not just realised patterns."""
    P = {tuple(r) for r in table[:, cols]}
    s = len(cols)
    for f1 in itertools.product(labels, repeat=s):
        for f2 in itertools.product(labels, repeat=s):
            if any(a == b for a, b in zip(f1, f2)):
                continue
            if all(tuple(f1[i] if (mask >> i) & 1 else f2[i] for i in range(s)) in P
                   for mask in range(1 << s)):
                return True
    return False


def brute_g_shattered(table, cols, labels):
    rows = table[:, cols]
    s = len(cols)
    for f in itertools.product(labels, repeat=s):
        f = np.array(f)
        masks = {tuple(r == f) for r in rows}
        if len(masks) == 1 << s:
            return True
    return False


def brute_dimension(H, shattered):
    labels = sorted(H.labels)
    best = 0
    n = len(H.domain)
    for s in range(1, n + 1):
        if any(shattered(H.table, list(c), labels) for c in itertools.combinations(range(n), s)):
            best = s
    return best


@st.composite
def finite_classes(draw, max_domain=4, max_labels=3, max_funcs=12):
    n = draw(st.integers(1, max_domain))
    k = draw(st.integers(2, max_labels))
    m = draw(st.integers(1, max_funcs))
    cells = draw(st.lists(st.integers(1, k), min_size=n * m, max_size=n * m))
    return FiniteFunctionClass(tuple(range(n)), np.array(cells).reshape(m, n))


def brute_decode_compose(H, M):
    out = set()
    for combo in itertools.product(range(len(H)), repeat=M.code_length):
        U = H.table[list(combo)]          # (l, n)
        out.add(tuple(C.decode(M, U[:, p]) for p in range(U.shape[1])))
    return out


def brute_tree_compose(H, shape):
    out = set()
    for combo in itertools.product(range(len(H)), repeat=shape.num_internal):
        row = []
        for p in range(len(H.domain)):
            ref = 0
            while ref >= 0:
                ref = int(shape.children[ref, 1 if H.table[combo[ref], p] > 0 else 0])
            row.append(-ref)
        out.add(tuple(row))
    return out


# ---------------------------------------------------------------- basics

def test_class_validation_and_restrict():
    with pytest.raises(ValueError):
        FiniteFunctionClass((0, 0), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        FiniteFunctionClass((0, 1), np.zeros((1, 3)))
    H = FiniteFunctionClass(("a", "b", "c"), np.array([[1, 2, 1], [1, 2, 2], [1, 2, 1]]))
    assert len(H.deduplicated()) == 2
    R = H.restrict(["c", "a"])
    assert R.domain == ("c", "a") and len(R) == 2
    assert H.contains([1, 2, 2]) and not H.contains([2, 2, 2])
    with pytest.raises(ValueError):
        H.restrict(["z"])


def test_full_class_shatters_everything():
    assert S.vc_dimension(S.full_class([0, 1, 2], [-1, 1])) == 3
    assert check_all(S.full_class([0, 1, 2], [1, 2]))


def check_all(H):
    return S.check_n_shatter(H, list(H.domain), [1] * len(H.domain), [2] * len(H.domain))


def test_witness_validation():
    H = S.full_class([0, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        S.check_n_shatter(H, [0, 1], [1, 2], [1, 3])
    with pytest.raises(ValueError):
        S.check_g_shatter(H, [0, 1], [1])
    assert S.check_g_shatter(H, [0, 1], [3, 1])
    assert S.check_n_shatter(H, [], [], [])


def test_subset_budget():
    H = S.full_class(list(range(2)), [-1, 1])
    big = FiniteFunctionClass(tuple(range(21)), np.ones((1, 21)))
    with pytest.raises(BudgetExceededError):
        S.check_g_shatter(big, list(range(21)), [1] * 21)
    assert S.vc_dimension(H) == 2


@settings(max_examples=60, deadline=None)
@given(finite_classes())
def test_dimensions_match_brute_force_over_all_witnesses(H):
    assert S.natarajan_dimension(H) == brute_dimension(H, brute_n_shattered)
    assert S.graph_dimension(H) == brute_dimension(H, brute_g_shattered)
    assert S.natarajan_dimension(H) <= S.graph_dimension(H)


@settings(max_examples=60, deadline=None)
@given(finite_classes(max_domain=6, max_labels=2, max_funcs=40))
def test_binary_classes_have_equal_dimensions(H):
    H = FiniteFunctionClass(H.domain, np.where(H.table == 1, -1, 1))
    v = S.vc_dimension(H)
    assert S.natarajan_dimension(H) == v == S.graph_dimension(H)


def test_vc_needs_binary_labels():
    with pytest.raises(ValueError):
        S.vc_dimension(S.full_class([0], [1, 2, 3]))


# ---------------------------------------------------------------- witness classes

def test_F_definition_and_counts():
    F = S.build_F(2, 3)
    assert len(F) == 2 ** 2 * 3 * 2
    assert F.domain == tuple((u, v) for u in (1, 2) for v in (1, 2, 3))
    row = dict(zip(F.domain, F.table[F.params.index(((1, -1), 2, -1))]))
    assert row[(1, 2)] == 1 and row[(2, 2)] == -1
    assert all(row[(u, v)] == -1 for u in (1, 2) for v in (1, 3))
    # f = (j, ..., j) at column i coincides with the constant j
    assert len(S.build_F(1, 2).deduplicated()) == 4


def test_G_definition():
    G = S.build_G(1, 4)
    row = dict(zip(G.domain, G.table[G.params.index(((1,), 2, -1))]))
    assert [row[(1, v)] for v in (1, 2, 3, 4)] == [1, 1, -1, -1]
    assert len(S.build_G(2, 3, positive_only=True)) == 4 * 3


@pytest.mark.parametrize("d,l", [(1, 2), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
def test_vc_of_witness_classes(d, l):
    assert S.vc_dimension(S.build_F(d, l).deduplicated()) == d + 1
    assert S.vc_dimension(S.build_G(d, l).deduplicated()) == d + 1
    assert S.vc_dimension(S.build_G(d, l, positive_only=True).deduplicated()) == d


@pytest.mark.parametrize("l", [3, 4])
def test_F_on_a_single_row_grid_shatters_three_points(l):
    # one point per column: every pattern with at most one minority value is
    # realised, and on three points that is every pattern
    F = S.build_F(1, l).deduplicated()
    assert S.vc_dimension(F) == 3
    pts = [(1, 1), (1, 2), (1, 3)]
    got = {tuple(r) for r in F.restrict(pts).table}
    assert got == set(itertools.product((-1, 1), repeat=3))
    assert S.vc_dimension(S.build_G(1, l).deduplicated()) == 2


def test_grid_budget():
    with pytest.raises(BudgetExceededError):
        S.build_F(20, 4)


# ---------------------------------------------------------------- composition

@pytest.mark.parametrize("code", [C.ova_code(3), C.random_code(3, 2, seed=1), C.ap_code(3)])
def test_compose_with_code_matches_brute_force(code):
    H = S.build_F(1, 2).deduplicated()
    assert {tuple(r) for r in S.compose_with_code(H, code).table} == brute_decode_compose(H, code)


@pytest.mark.parametrize("text", ["(..)", "((..).)", "(.(..))", "((..)(..))"])
def test_compose_with_tree_matches_brute_force(text):
    shape = T.TreeShape.from_string(text)
    H = S.build_G(1, 3).deduplicated()
    got = {tuple(r) for r in S.compose_with_tree(H, shape).table}
    assert got == brute_tree_compose(H, shape)


def test_compose_budget():
    with pytest.raises(BudgetExceededError):
        S.compose_with_code(S.build_F(2, 4).deduplicated(), C.random_code(4, 8, seed=0), budget=1000)


@pytest.mark.parametrize("text", ["((..).)", "((..)(..))", "(.((..).))"])
def test_node_decomposition_matches_explicit_membership(text):
    shape = T.TreeShape.from_string(text)
    H = S.build_G(1, shape.num_internal).deduplicated()
    explicit = {tuple(r) for r in S.compose_with_tree(H, shape).table}
    k = shape.num_leaves
    for target in itertools.product(range(1, k + 1), repeat=len(H.domain)):
        assert S.tree_class_contains(H, shape, target) == (target in explicit)


# ---------------------------------------------------------------- witness constructions

@pytest.mark.parametrize("k", [3, 4])
def test_ova_all_negative_witness_is_shattered(k):
    res = S.code_witness_check(C.ova_code(k), C.ova_sensitive_vector(k), 2)
    assert res.holds and res.size == 2 * (k - 1)
    assert set(res.f1) == {1}
    assert res.f2 == [j for _ in range(2) for j in range(2, k + 1)]


@pytest.mark.parametrize("k,l,d", [(3, 3, 2), (4, 4, 2), (5, 3, 2), (4, 5, 1), (5, 5, 1)])
def test_random_code_witness(k, l, d):
    for seed in range(3):
        M = C.random_code(k, l, seed=seed, distinct_rows=True)
        u = C.sensitive_vector(M)
        res = S.code_witness_check(M, u, d)
        assert res.holds and res.size == d * C.sensitivity(M, u)[0]


def test_composition_budget_counts_partial_tables():
    M = C.random_code(5, 5, seed=7)
    with pytest.raises(BudgetExceededError):
        S.code_witness_check(M, C.sensitive_vector(M), 2, budget=1000)


def test_zero_sensitivity_is_vacuous():
    M = C.CodeMatrix(np.array([[1, 1, 1], [-1, -1, -1]]), [1, 2])
    res = S.code_witness_check(M, np.array([1, 1, 1]), 2)
    assert res.holds and res.size == 0


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_tree_witness_all_shapes(k):
    for shape in T.all_trees(k):
        for d in (1, 2):
            assert S.tree_witness_check(shape, d, method="decomposed").holds


@pytest.mark.parametrize("k", [3, 4])
def test_tree_witness_explicit_agrees(k):
    for shape in T.all_trees(k):
        assert S.tree_witness_check(shape, 2, method="explicit").holds


def test_tree_witness_needs_inorder_ranks():
    # ranking nodes in preorder instead breaks the witness on this shape
    shape = T.TreeShape.from_string("((..)(..))")
    G = S.build_G(1, 3).deduplicated()
    points = [(1, r) for r in (1, 2, 3)]
    g1 = [shape.extreme_leaf(int(shape.children[v, 1]), -1) + 1 for v in range(3)]
    g2 = [shape.extreme_leaf(int(shape.children[v, 0]), 1) + 1 for v in range(3)]
    assert not S.check_n_shatter(S.compose_with_tree(G, shape), points, g1, g2)


def test_witness_text_format():
    res = S.code_witness_check(C.ova_code(3), C.ova_sensitive_vector(3), 1)
    text = S.format_witness(res)
    assert text.splitlines()[:2] == ["holds true", "size 2"]
    assert text.splitlines()[-2:] == ["1 2 1 2", "1 3 1 3"]


# ---------------------------------------------------------------- embeddings

@pytest.mark.parametrize("d,l", [(2, 2), (2, 3), (3, 2)])
def test_F_embedding_realises_every_member(d, l):
    emb = S.embed_F_halfspaces(d, l, seed=0)
    assert emb.report["realized"] == emb.report["total"] == 2 ** d * l * 2
    assert all(emb.realized(i) for i in range(len(emb.weights)))


@pytest.mark.parametrize("d,l", [(2, 2), (2, 3), (3, 3)])
def test_G_embedding_realises_every_member(d, l):
    emb = S.embed_G_halfspaces(d, l)
    assert all(emb.realized(i) for i in range(len(emb.weights)))
    assert emb.report["min_margin"] > 0


def test_embedding_certified_independently_by_perceptron():
    emb = S.embed_F_halfspaces(2, 3, seed=1)
    X = np.array([emb.points[p] for p in emb.functions.domain])
    for row in emb.functions.deduplicated().table:
        train_realizable(BinarySample(X, row), budget=1_000_000)


def test_embedding_invalid_cases():
    with pytest.raises(EmbeddingInvalidError):
        S.embed_G_halfspaces(2, 3, slope=0.5)
    with pytest.raises(EmbeddingInvalidError):
        S.embed_F_halfspaces(2, 3, seed=0, radius=5.0, max_resample=3)
    with pytest.raises(ValueError):
        S.embed_F_halfspaces(1, 2)
