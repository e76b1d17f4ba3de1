"""Tensor core: arithmetic, autodiff vs finite differences, DFT oracle."""

import cmath
import math
import warnings

import numpy as np
import pytest

from promptrestore import tensor as T
from promptrestore.tensor import (NonFiniteError, ShapeError, Tensor,
                                  cosine_similarity, dft2, finite_diff_grad,
                                  relative_error, softmax)


def naive_matmul(a, b):
    """Triple-loop reference product."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


def naive_dft2(img):
    """Literal double-sum DFT, the independent oracle."""
    h, w = img.shape
    X = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            s = 0j
            for x in range(h):
                for y in range(w):
                    s += img[x, y] * cmath.exp(-2j * cmath.pi * (u * x / h + v * y / w))
            X[u, v] = s
    return X


# ---------------------------------------------------------------------------
# elementwise

def test_add():
    out = T.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
    np.testing.assert_array_equal(out.data, [4.0, 6.0])


def test_max_with_scalar_hinge_clamp():
    out = T.maximum(Tensor([-0.5, 0.3]), 0.0)
    np.testing.assert_array_equal(out.data, [0.0, 0.3])


def test_mul_by_zero_scalar():
    out = T.mul(Tensor([2.0, 3.0]), 0.0)
    np.testing.assert_array_equal(out.data, [0.0, 0.0])


def test_broadcast_trailing_dim():
    out = T.add(Tensor(np.ones((2, 3))), Tensor([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(out.data, [[2, 3, 4], [2, 3, 4]])


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as exc:
        T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
    assert "(2, 3)" in str(exc.value) and "(4,)" in str(exc.value)


def test_div_by_zero_rejected():
    with pytest.raises(NonFiniteError):
        T.div(Tensor([1.0]), Tensor([0.0]))


# ---------------------------------------------------------------------------
# matmul

def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = T.matmul(Tensor(np.eye(2)), a)
    np.testing.assert_array_equal(out.data, a.data)


def test_matmul_dot_product():
    out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    np.testing.assert_array_equal(out.data, [[11.0]])


def test_matmul_matches_triple_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3))
        out = T.matmul(Tensor(a), Tensor(b))
        np.testing.assert_allclose(out.data, naive_matmul(a, b), atol=1e-12)


def test_matmul_inner_mismatch():
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


# ---------------------------------------------------------------------------
# softmax

def test_softmax_symmetry():
    for temp in (0.5, 1.0, 3.0):
        p = softmax(Tensor([2.0, 2.0, 2.0]), temperature=temp)
        np.testing.assert_allclose(p.data, [1 / 3] * 3, atol=1e-15)


def test_softmax_frozen_values():
    # direct evaluation of the exp ratios at T=1, frozen to 6 decimals
    e = np.exp([0.9, 0.5, 0.1])
    expected = e / e.sum()
    p = softmax(Tensor([0.9, 0.5, 0.1]), temperature=1.0)
    np.testing.assert_allclose(p.data, expected, atol=1e-12)
    np.testing.assert_allclose(p.data, [0.471776, 0.316241, 0.211983], atol=1e-6)


def test_softmax_low_temperature_limit():
    # closed-form two-entry logistic: weight_0 = 1/(1+exp(-10/T))
    p = softmax(Tensor([10.0, 0.0]), temperature=0.01)
    assert p.data[0] > 1 - 1e-8


def test_softmax_sums_to_one_and_shift_invariant():
    rng = np.random.default_rng(11)
    for _ in range(25):
        x = rng.standard_normal(6)
        p = softmax(Tensor(x))
        q = softmax(Tensor(x + 123.456))
        assert abs(p.data.sum() - 1.0) < 1e-12
        assert np.all(p.data > 0)
        np.testing.assert_allclose(p.data, q.data, atol=1e-12)


def test_softmax_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        softmax(Tensor([1.0, 2.0]), temperature=0.0)


# ---------------------------------------------------------------------------
# cosine similarity

def test_cosine_orthogonal():
    assert cosine_similarity(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).item() == 0.0


def test_cosine_collinear():
    c = cosine_similarity(Tensor([1.0, 2.0, 3.0]), Tensor([2.0, 4.0, 6.0]))
    assert abs(c.item() - 1.0) < 1e-12


def test_cosine_antipodal():
    a = np.array([0.3, -1.2, 0.7])
    c = cosine_similarity(Tensor(a), Tensor(-a))
    assert abs(c.item() + 1.0) < 1e-12


def test_cosine_zero_norm_warns_and_returns_zero():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        c = cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 2.0]))
    assert c.item() == 0.0
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_cosine_in_unit_range():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = rng.standard_normal(5), rng.standard_normal(5)
        c = cosine_similarity(Tensor(a), Tensor(b)).item()
        assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# reductions / shape algebra

def test_mean():
    assert T.tmean(Tensor([1.0, 2.0, 3.0])).item() == 2.0


def test_flatten_row_major():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(x.flatten().data, np.arange(6.0))


def test_sum_axis0():
    out = T.tsum(Tensor([[1.0, 2.0], [3.0, 4.0]]), axis=0)
    np.testing.assert_array_equal(out.data, [4.0, 6.0])


def test_reshape_after_flatten_is_identity():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 4, 5))
    back = Tensor(x).flatten().reshape(3, 4, 5)
    np.testing.assert_array_equal(back.data, x)


def test_reshape_preserves_element_count():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))).reshape(4, 2)


def test_concat_and_transpose():
    a, b = Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]])
    out = T.concat([a, b], axis=0)
    np.testing.assert_array_equal(out.data, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(out.T.data, [[1, 3], [2, 4]])


# ---------------------------------------------------------------------------
# dft2

def test_dft2_constant_image_is_dc_only():
    c, h, w = 0.7, 6, 4
    re, im = dft2(Tensor(np.full((h, w), c)))
    assert abs(re.data[0, 0] - c * h * w) < 1e-10
    mask = np.ones((h, w), dtype=bool)
    mask[0, 0] = False
    assert np.abs(re.data[mask]).max() < 1e-10
    assert np.abs(im.data).max() < 1e-10


def test_dft2_impulse_flat_spectrum():
    img = np.zeros((5, 5))
    img[0, 0] = 1.0
    re, im = dft2(Tensor(img))
    np.testing.assert_allclose(re.data, np.ones((5, 5)), atol=1e-12)
    np.testing.assert_allclose(im.data, np.zeros((5, 5)), atol=1e-12)


def test_dft2_matches_double_sum_oracle():
    rng = np.random.default_rng(13)
    for _ in range(5):
        img = rng.standard_normal((8, 8))
        re, im = dft2(Tensor(img))
        X = naive_dft2(img)
        np.testing.assert_allclose(re.data, X.real, atol=1e-9)
        np.testing.assert_allclose(im.data, X.imag, atol=1e-9)


def test_dft2_linearity():
    rng = np.random.default_rng(17)
    x, y = rng.standard_normal((6, 6)), rng.standard_normal((6, 6))
    a, b = 1.7, -0.4
    re1, im1 = dft2(Tensor(a * x + b * y))
    rex, imx = dft2(Tensor(x))
    rey, imy = dft2(Tensor(y))
    np.testing.assert_allclose(re1.data, a * rex.data + b * rey.data, atol=1e-9)
    np.testing.assert_allclose(im1.data, a * imx.data + b * imy.data, atol=1e-9)


def test_dft2_parseval():
    rng = np.random.default_rng(19)
    img = rng.standard_normal((8, 8))
    re, im = dft2(Tensor(img))
    spec = (re.data ** 2 + im.data ** 2).sum()
    pix = 64 * (img ** 2).sum()
    assert abs(spec - pix) / pix < 1e-6


def test_dft2_per_channel():
    rng = np.random.default_rng(23)
    img = rng.standard_normal((3, 4, 4))
    re, im = dft2(Tensor(img))
    assert re.shape == (3, 4, 4)
    for c in range(3):
        rc, ic = dft2(Tensor(img[c]))
        np.testing.assert_allclose(re.data[c], rc.data, atol=1e-12)
        np.testing.assert_allclose(im.data[c], ic.data, atol=1e-12)


def test_dft2_differentiable():
    rng = np.random.default_rng(29)
    img = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
    probe = Tensor(rng.standard_normal((4, 4)))

    def f(t):
        re, im = dft2(t)
        return T.tsum(T.mul(re, probe)) + T.tsum(T.mul(im, probe))

    T.reset_tape()
    f(img).backward()
    num = finite_diff_grad(f, img)
    assert relative_error(img.grad, num) < 1e-6


# ---------------------------------------------------------------------------
# backward / finite differences

def test_backward_of_sum_is_ones():
    x = Tensor(np.arange(5.0), requires_grad=True)
    T.reset_tape()
    T.tsum(x).backward()
    np.testing.assert_array_equal(x.grad, np.ones(5))


def test_backward_of_squared_norm():
    v = np.array([1.0, -2.0, 0.5])
    x = Tensor(v, requires_grad=True)
    T.reset_tape()
    T.tsum(T.mul(x, x)).backward()
    np.testing.assert_allclose(x.grad, 2 * v, atol=1e-12)


def test_backward_rejects_nonscalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        T.add(x, x).backward()


def test_grad_accumulates_without_reset():
    x = Tensor(np.ones(3), requires_grad=True)
    T.reset_tape()
    loss = T.tsum(T.mul(x, x))
    loss.backward()
    loss.backward()
    np.testing.assert_allclose(x.grad, 4 * np.ones(3), atol=1e-12)


def test_finite_diff_of_sum_is_ones():
    x = Tensor(np.array([0.3, -1.1, 2.0]))
    g = finite_diff_grad(lambda t: T.tsum(t), x)
    np.testing.assert_allclose(g, np.ones(3), atol=1e-8)


def test_finite_diff_quadratic_exact():
    g = finite_diff_grad(lambda t: T.tsum(T.mul(t, t)), Tensor([3.0]), eps=1e-6)
    assert abs(g[0] - 6.0) < 1e-6


def test_finite_diff_softmax_jacobian_row():
    # analytic row: p_1 * (delta_1j - p_j)
    x0 = np.array([0.9, 0.5, 0.1])
    e = np.exp(x0)
    p = e / e.sum()
    expected = p[0] * (np.eye(3)[0] - p)
    g = finite_diff_grad(
        lambda t: T.take(softmax(t), [0]).item(), Tensor(x0), eps=1e-6)
    np.testing.assert_allclose(g, expected, atol=1e-6)


def _composed_expression(x, w, px, pw):
    # linear anchor terms keep every gradient entry well above the
    # central-difference noise floor without masking chain-rule errors
    y = T.silu(T.matmul(x, w))
    z = softmax(y, temperature=0.7, axis=-1)
    out = T.add(T.tmean(T.mul(z, y)), T.tmean(T.mul(y, y)))
    anchors = T.add(T.tsum(T.mul(x, px)), T.tsum(T.mul(w, pw)))
    return T.add(out, T.mul(anchors, 0.1))


def test_composed_expression_grads_match_finite_diff():
    rng = np.random.default_rng(101)
    for _ in range(20):
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        px = Tensor(rng.uniform(0.5, 1.5, size=(3, 4)))
        pw = Tensor(rng.uniform(0.5, 1.5, size=(4, 5)))
        T.reset_tape()
        _composed_expression(x, w, px, pw).backward()
        num_x = finite_diff_grad(lambda t: _composed_expression(t, w, px, pw), x)
        num_w = finite_diff_grad(lambda t: _composed_expression(x, t, px, pw), w)
        assert relative_error(x.grad, num_x) < 1e-5
        assert relative_error(w.grad, num_w) < 1e-5


OPS = {
    "add": lambda a, b: T.add(a, b),
    "sub": lambda a, b: T.sub(a, b),
    "mul": lambda a, b: T.mul(a, b),
    "div": lambda a, b: T.div(a, T.add(T.mul(b, b), 1.0)),
    "maximum": lambda a, b: T.maximum(T.add(a, 0.5), 0.0),
    "exp": lambda a, b: T.exp(a),
    "log": lambda a, b: T.log(T.add(T.mul(a, a), 1.0)),
    "sqrt": lambda a, b: T.sqrt(T.add(T.mul(a, a), 0.5)),
    "sigmoid": lambda a, b: T.sigmoid(a),
    "silu": lambda a, b: T.silu(a),
    "matmul": lambda a, b: T.matmul(a, b.T),
    "softmax": lambda a, b: softmax(a, temperature=0.8),
    "transpose": lambda a, b: T.mul(a.T, b.T),
    "concat": lambda a, b: T.concat([a, b], axis=0),
    "take": lambda a, b: T.take(a, [2, 0, 2]),
    "abs": lambda a, b: T.tabs(T.add(a, 3.0)),  # shifted away from the kink
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_diff_20_seeds(name):
    op = OPS[name]
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        probe = Tensor(rng.standard_normal(op(a, b).shape))

        def f(t):
            return T.tsum(T.mul(op(t, b), probe))

        T.reset_tape()
        f(a).backward()
        num = finite_diff_grad(f, a)
        assert relative_error(a.grad, num) < 1e-5, f"{name} seed {seed}"


def test_conv2d_gradients_match_finite_diff():
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        x = Tensor(rng.standard_normal((2, 3, 6, 6)), requires_grad=True)
        w = Tensor(0.4 * rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
        b = Tensor(0.1 * rng.standard_normal(4), requires_grad=True)
        probe = Tensor(rng.standard_normal((2, 4, 3, 3)))

        def f_w(t):
            return T.tsum(T.mul(T.conv2d(x, t, b, stride=2, padding=1), probe))

        T.reset_tape()
        f_w(w).backward()
        assert relative_error(w.grad, finite_diff_grad(f_w, w)) < 1e-5
        assert relative_error(b.grad, finite_diff_grad(
            lambda t: T.tsum(T.mul(T.conv2d(x, w, t, stride=2, padding=1), probe)), b)) < 1e-5
        assert relative_error(x.grad, finite_diff_grad(
            lambda t: T.tsum(T.mul(T.conv2d(t, w, b, stride=2, padding=1), probe)), x)) < 1e-5


def test_upsample_nearest_gradients():
    rng = np.random.default_rng(77)
    x = Tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
    probe = Tensor(rng.standard_normal((1, 2, 6, 6)))

    def f(t):
        return T.tsum(T.mul(T.upsample_nearest2(t), probe))

    T.reset_tape()
    f(x).backward()
    assert relative_error(x.grad, finite_diff_grad(f, x)) < 1e-6


def test_tensor_invariants():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    assert math.prod(x.shape) == x.data.size
    T.reset_tape()
    T.tsum(x).backward()
    assert x.grad.shape == x.data.shape
    with pytest.raises(NonFiniteError):
        Tensor([np.nan])


def test_no_grad_suppresses_recording():
    x = Tensor(np.ones(3), requires_grad=True)
    T.reset_tape()
    with T.no_grad():
        y = T.mul(x, x)
    assert not y.requires_grad
    assert len(T.tape()) == 0
