"""Prompt pools: init, query projection, top-k retrieval, composition."""

import numpy as np
import pytest

from promptrestore import tensor as T
from promptrestore.pool import (PromptPool, PromptSelection, QueryProjector,
                                compose, compute_query, init_pool,
                                select_top_k)
from promptrestore.tensor import ShapeError, Tensor


def brute_force_top_k(keys: np.ndarray, query: np.ndarray, k: int):
    """Exhaustive oracle: all cosines via an explicit loop, full stable sort."""
    sims = []
    for j in range(keys.shape[0]):
        kj = keys[j]
        nk, nq = np.sqrt((kj * kj).sum()), np.sqrt((query * query).sum())
        sims.append(0.0 if nk == 0 or nq == 0 else float((kj * query).sum() / (nk * nq)))
    order = sorted(range(len(sims)), key=lambda j: (-sims[j], j))
    return order[:k], [sims[j] for j in order[:k]]


def make_pool(keys, values, temperature=1.0, kind="task"):
    return PromptPool(keys=Tensor(keys, requires_grad=True),
                      values=Tensor(values, requires_grad=True),
                      temperature=temperature, kind=kind)


# ---------------------------------------------------------------------------
# init

def test_init_full_scale_shapes():
    pool = init_pool(15, 2, 1024, 1.0, np.random.default_rng(0))
    assert pool.keys.shape == (15, 1024)
    assert pool.values.shape == (15, 2, 1024)


def test_init_desk_scale_shapes():
    pool = init_pool(4, 2, 8, 1.0, np.random.default_rng(0))
    assert pool.keys.shape == (4, 8)
    assert pool.values.shape == (4, 2, 8)


def test_init_deterministic_per_seed():
    a = init_pool(6, 2, 16, 1.0, np.random.default_rng(42))
    b = init_pool(6, 2, 16, 1.0, np.random.default_rng(42))
    c = init_pool(6, 2, 16, 1.0, np.random.default_rng(43))
    np.testing.assert_array_equal(a.keys.data, b.keys.data)
    np.testing.assert_array_equal(a.values.data, b.values.data)
    assert not np.array_equal(a.keys.data, c.keys.data)


def test_init_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_pool(0, 2, 8, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        init_pool(4, 2, 8, -1.0, np.random.default_rng(0))


def test_pool_leaves_are_trainable():
    pool = init_pool(4, 2, 8, 1.0, np.random.default_rng(0))
    assert pool.keys.requires_grad and pool.values.requires_grad


# ---------------------------------------------------------------------------
# query projector

def test_zero_features_zero_biases_give_zero_query():
    proj = QueryProjector(3, 16, np.random.default_rng(1))
    q = compute_query(proj, T.zeros(3, 8, 8))
    np.testing.assert_allclose(q.data, np.zeros(16), atol=1e-15)


def test_query_length_matches_key_dim():
    rng = np.random.default_rng(2)
    for c, d in ((3, 16), (8, 24)):
        proj = QueryProjector(c, d, rng)
        q = compute_query(proj, T.randn(rng, c, 8, 8))
        assert q.shape == (d,)


def test_linear_configuration_scales_linearly():
    rng = np.random.default_rng(3)
    proj = QueryProjector(4, 8, rng, activation="identity")
    x = rng.standard_normal((4, 8, 8))
    q1 = compute_query(proj, Tensor(x))
    q2 = compute_query(proj, Tensor(2.0 * x))
    np.testing.assert_allclose(q2.data, 2.0 * q1.data, rtol=1e-12)


def test_channel_mismatch_rejected():
    proj = QueryProjector(3, 8, np.random.default_rng(4))
    with pytest.raises(ShapeError):
        compute_query(proj, T.zeros(5, 8, 8))


def test_batched_query_matches_per_sample():
    rng = np.random.default_rng(5)
    proj = QueryProjector(3, 12, rng)
    batch = rng.standard_normal((4, 3, 8, 8))
    qb = proj.forward(Tensor(batch))
    for i in range(4):
        qi = proj.forward(Tensor(batch[i]))
        np.testing.assert_allclose(qb.data[i], qi.data, atol=1e-12)


# ---------------------------------------------------------------------------
# top-k selection

def test_orthonormal_keys_pick_matching_basis_vector():
    pool = make_pool(np.eye(4), np.zeros((4, 2, 4)))
    sel = select_top_k(pool, Tensor(np.eye(4)[1]), k=1)
    assert sel.indices == [1]
    assert abs(sel.similarities.data[0] - 1.0) < 1e-12


def test_identical_keys_tie_break_by_lower_index():
    keys = np.tile(np.array([0.5, -0.2, 0.1]), (5, 1))
    pool = make_pool(keys, np.zeros((5, 2, 3)))
    sel = select_top_k(pool, Tensor([1.0, 0.0, 0.0]), k=2)
    assert sel.indices == [0, 1]


def test_matches_brute_force_oracle_on_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n, d = int(rng.integers(2, 16)), int(rng.integers(2, 12))
        k = int(rng.integers(1, n + 1))
        keys = rng.standard_normal((n, d))
        query = rng.standard_normal(d)
        pool = make_pool(keys, np.zeros((n, 2, d)))
        sel = select_top_k(pool, Tensor(query), k)
        expected, _ = brute_force_top_k(keys, query, k)
        assert sel.indices == expected


def test_k_out_of_range():
    pool = make_pool(np.eye(3), np.zeros((3, 2, 3)))
    for bad in (0, 4):
        with pytest.raises(ValueError):
            select_top_k(pool, Tensor([1.0, 0.0, 0.0]), bad)


def test_selection_fields_consistent():
    rng = np.random.default_rng(7)
    pool = make_pool(rng.standard_normal((8, 6)), rng.standard_normal((8, 2, 6)))
    sel = select_top_k(pool, Tensor(rng.standard_normal(6)), k=3)
    assert len(set(sel.indices)) == 3
    assert np.all(np.diff(sel.similarities.data) <= 0)
    assert abs(sel.weights.data.sum() - 1.0) < 1e-12
    assert np.all(sel.weights.data > 0)
    assert abs(sel.full_probs.data.sum() - 1.0) < 1e-12
    assert sel.full_probs.shape == (8,)


def test_zero_query_defined_and_deterministic():
    pool = make_pool(np.eye(3), np.zeros((3, 2, 3)))
    with pytest.warns(RuntimeWarning):
        sel = select_top_k(pool, Tensor(np.zeros(3)), k=2)
    assert sel.indices == [0, 1]
    np.testing.assert_allclose(sel.weights.data, [0.5, 0.5], atol=1e-12)


# ---------------------------------------------------------------------------
# composition

def test_compose_single_selection_is_exact_value():
    rng = np.random.default_rng(8)
    values = rng.standard_normal((4, 2, 6))
    pool = make_pool(rng.standard_normal((4, 6)), values)
    query = pool.keys.data[2].copy()
    sel = select_top_k(pool, Tensor(query), k=1)
    assert sel.indices == [2]
    pr = compose(sel, pool)
    np.testing.assert_array_equal(pr.data, values[2])


def test_compose_equal_similarities_is_mean():
    values = np.random.default_rng(9).standard_normal((3, 2, 4))
    keys = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (3, 1))
    pool = make_pool(keys, values)
    sel = select_top_k(pool, Tensor([2.0, 0.0, 0.0, 0.0]), k=3)
    pr = compose(sel, pool)
    np.testing.assert_allclose(pr.data, values.mean(axis=0), atol=1e-14)


def test_compose_weighted_sum_oracle():
    # similarities [0.9, 0.5, 0.1] at T=1: weights are the direct exp ratios
    rng = np.random.default_rng(10)
    values = rng.standard_normal((3, 2, 5))
    sims = np.array([0.9, 0.5, 0.1])
    e = np.exp(sims)
    alpha = e / e.sum()
    np.testing.assert_allclose(alpha, [0.471776, 0.316241, 0.211983], atol=1e-6)
    pool = make_pool(np.zeros((3, 5)), values, temperature=1.0)
    sel_sims = Tensor(sims, requires_grad=True)
    sel = PromptSelection(indices=[0, 1, 2], similarities=sel_sims,
                          weights=T.softmax(sel_sims, temperature=1.0),
                          full_probs=T.softmax(sel_sims, temperature=1.0),
                          pool_size=3)
    pr = compose(sel, pool)
    expected = sum(alpha[j] * values[j] for j in range(3))
    np.testing.assert_allclose(pr.data, expected, atol=1e-12)


def test_compose_rejects_stale_selection():
    rng = np.random.default_rng(11)
    big = make_pool(rng.standard_normal((8, 4)), rng.standard_normal((8, 2, 4)))
    small = make_pool(rng.standard_normal((3, 4)), rng.standard_normal((3, 2, 4)))
    sel = select_top_k(big, Tensor(big.keys.data[7].copy()), k=1)
    assert sel.indices == [7]
    with pytest.raises(IndexError):
        compose(sel, small)


# ---------------------------------------------------------------------------
# invariants

def test_weights_sum_to_one_and_monotone():
    rng = np.random.default_rng(12)
    for _ in range(30):
        n = int(rng.integers(3, 12))
        pool = make_pool(rng.standard_normal((n, 8)),
                         rng.standard_normal((n, 2, 8)),
                         temperature=float(rng.uniform(0.2, 3.0)))
        sel = select_top_k(pool, Tensor(rng.standard_normal(8)), k=min(3, n))
        w, s = sel.weights.data, sel.similarities.data
        assert abs(w.sum() - 1.0) < 1e-12
        for i in range(len(w)):
            for j in range(len(w)):
                if s[i] > s[j]:
                    assert w[i] > w[j]


def test_low_temperature_concentrates_on_top_prompt():
    keys = np.array([[1.0, 0.0], [np.cos(0.6), np.sin(0.6)], [0.0, 1.0]])
    pool = make_pool(keys, np.zeros((3, 2, 2)), temperature=1e-3)
    sel = select_top_k(pool, Tensor([1.0, 0.0]), k=3)
    assert sel.similarities.data[0] - sel.similarities.data[1] >= 0.1
    assert sel.weights.data[0] > 1 - 1e-6


def test_permuting_pool_prompts_leaves_pr_unchanged():
    rng = np.random.default_rng(13)
    keys = rng.standard_normal((6, 5))
    values = rng.standard_normal((6, 2, 5))
    query = Tensor(rng.standard_normal(5))
    pool = make_pool(keys, values)
    sel = select_top_k(pool, query, k=3)
    pr = compose(sel, pool)

    perm = rng.permutation(6)
    pool_p = make_pool(keys[perm], values[perm])
    sel_p = select_top_k(pool_p, query, k=3)
    pr_p = compose(sel_p, pool_p)

    # new index i refers to old prompt perm[i]
    assert [int(perm[i]) for i in sel_p.indices] == sel.indices
    np.testing.assert_allclose(pr_p.data, pr.data, atol=1e-12)


def test_gradient_touches_only_selected_values():
    rng = np.random.default_rng(14)
    pool = make_pool(rng.standard_normal((6, 4)), rng.standard_normal((6, 2, 4)))
    query = Tensor(rng.standard_normal(4), requires_grad=True)
    T.reset_tape()
    sel = select_top_k(pool, query, k=2)
    pr = compose(sel, pool)
    T.tsum(T.mul(pr, pr)).backward()
    grad = pool.values.grad
    for j in range(6):
        if j in sel.indices:
            assert np.abs(grad[j]).max() > 0
        else:
            np.testing.assert_array_equal(grad[j], np.zeros((2, 4)))
    # similarity path stays differentiable w.r.t. the query and keys
    assert np.abs(query.grad).max() > 0
    assert np.abs(pool.keys.grad).max() > 0


def test_composition_gradcheck():
    rng = np.random.default_rng(15)
    for seed in range(20):
        r = np.random.default_rng(200 + seed)
        keys = Tensor(r.standard_normal((5, 4)), requires_grad=True)
        values = Tensor(r.standard_normal((5, 2, 4)), requires_grad=True)
        query = Tensor(r.standard_normal(4), requires_grad=True)
        probe = Tensor(r.standard_normal((2, 4)))

        def f(q):
            pool = PromptPool(keys=keys, values=values, temperature=0.8)
            sel = select_top_k(pool, q, k=3)
            return T.tsum(T.mul(compose(sel, pool), probe))

        T.reset_tape()
        query.zero_grad()
        f(query).backward()
        num = T.finite_diff_grad(f, query)
        assert T.relative_error(query.grad, num) < 1e-5
