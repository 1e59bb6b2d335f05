import numpy as np
import pytest

from bddseq import autodiff as ad
from bddseq.autodiff import Adam, Tensor


def fd_check(build, shapes, eps=1e-5, tol=1e-6, seed=0, probes=6):
    """Vector-norm relative error between backward() and central differences."""
    rng = np.random.default_rng(seed)
    params = [Tensor(rng.standard_normal(s), requires_grad=True) for s in shapes]

    def value():
        out = build(*params)
        return out if out.data.ndim == 0 else ad.tsum(out)

    loss = value()
    for p in params:
        p.grad = None
    loss.backward()
    for p in params:
        flat = p.data.reshape(-1)
        grad = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        idxs = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
        fd = np.zeros(len(idxs))
        an = np.zeros(len(idxs))
        for k, i in enumerate(idxs):
            old = flat[i]
            flat[i] = old + eps
            up = value().item()
            flat[i] = old - eps
            down = value().item()
            flat[i] = old
            fd[k] = (up - down) / (2 * eps)
            an[k] = grad[i]
        denom = max(np.linalg.norm(fd), np.linalg.norm(an), 1e-12)
        assert np.linalg.norm(fd - an) / denom < tol


def test_matmul_grad():
    fd_check(lambda a, b: ad.matmul(a, b), [(3, 4), (4, 2)])


def test_add_broadcast_grad():
    fd_check(lambda a, b: ad.add(a, b), [(3, 4), (1, 4)])


def test_mul_div_grad():
    fd_check(lambda a, b: ad.mul(a, b), [(3, 4), (3, 4)])
    fd_check(
        lambda a, b: ad.div(a, ad.add(ad.mul(b, b), Tensor(np.ones((3, 4))))),
        [(3, 4), (3, 4)],
    )


def test_activations_grad():
    fd_check(lambda a: ad.tanh(a), [(3, 4)])
    fd_check(lambda a: ad.sigmoid(a), [(3, 4)])
    fd_check(lambda a: ad.leaky_relu(a), [(3, 4)])
    fd_check(lambda a: ad.exp(a), [(2, 3)])
    fd_check(lambda a: ad.log(ad.add(ad.mul(a, a), Tensor(np.ones((2, 3))))), [(2, 3)])


def test_gather_scatter_grad():
    idx = np.array([0, 2, 1, 2])
    fd_check(lambda a: ad.gather_rows(a, idx), [(3, 4)])
    fd_check(lambda a: ad.scatter_add_rows(a, np.array([0, 2, 1, 2, 0]), 3), [(5, 4)])


def test_slice_concat_flatten_take_grad():
    fd_check(lambda a: ad.slice_cols(a, 1, 3), [(3, 5)])
    fd_check(lambda a, b: ad.concat_rows([a, b]), [(2, 3), (4, 3)])
    fd_check(lambda a: ad.flatten(a), [(3, 4)])
    fd_check(lambda a: ad.take(ad.flatten(a), 5), [(3, 4)])


def test_heads_ops_grad():
    fd_check(lambda h, a: ad.heads_dot(h, a, 2), [(5, 6), (2, 3)])
    fd_check(lambda h, s: ad.heads_scale(h, s, 2), [(5, 6), (5, 2)])


def test_log_softmax_grad_masked():
    mask = np.array([0, -1e9, 0, 0, -1e9, 0.0])
    fd_check(lambda a: ad.take(ad.log_softmax_vec(a, mask), 2), [(6,)])
    fd_check(lambda a: ad.take(ad.log_softmax_vec(a), 0), [(6,)])


def test_log_softmax_probabilities():
    x = Tensor(np.array([0.3, -1.2, 2.0]))
    y = ad.log_softmax_vec(x)
    assert np.exp(y.data).sum() == pytest.approx(1.0, abs=1e-12)


def test_shared_subgraph_accumulates():
    a = Tensor(np.array([[2.0]]), requires_grad=True)
    out = ad.add(ad.mul(a, a), ad.mul(a, a))  # 2a^2, d/da = 4a
    out.backward(np.array([[1.0]]))
    assert a.grad[0, 0] == pytest.approx(8.0)


def test_adam_zero_lr_keeps_params():
    p = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    before = p.data.copy()
    opt = Adam({"p": p}, lr=0.0)
    for _ in range(5):
        opt.zero_grad()
        ad.tsum(ad.mul(p, p)).backward()
        opt.step()
    assert np.array_equal(p.data, before)


def test_adam_descends():
    p = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        ad.tsum(ad.mul(p, p)).backward()
        opt.step()
    assert np.abs(p.data).max() < 0.3


def test_backward_is_deterministic():
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
    idx = np.array([0, 1, 1, 3, 2])

    def run():
        a.grad = None
        out = ad.scatter_add_rows(ad.gather_rows(ad.tanh(a), idx), idx, 4)
        ad.tsum(out).backward()
        return a.grad.copy()

    assert np.array_equal(run(), run())
