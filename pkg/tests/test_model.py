import numpy as np
import pytest

from bddseq import autodiff as ad
from bddseq import model as M
from bddseq.autodiff import Tensor
from bddseq.bdd import VarOrder
from bddseq.blif import parse_blif
from bddseq.graph import CircuitGraph, FeatureConfig, blif2graph


def tiny_graph(net, L=4):
    return blif2graph(net, FeatureConfig(max_table_len=L))


def tiny_params(graph, hidden=8, layers=2, heads=2, seed=1, jitter=0.05):
    cfg = M.ModelConfig(
        feature_dim=graph.features.shape[1], hidden=hidden, layers=layers, heads=heads
    )
    params = M.init_params(cfg, seed=seed)
    if jitter:
        M.perturb_params(params, jitter, seed=seed + 1)
    return params


def test_encode_single_node_finite():
    graph = CircuitGraph(
        node_names=["a"],
        edges=[],
        features=np.ones((1, 8)),
        raw_structural=np.zeros((1, 4), dtype=np.int64),
        pi_positions=[0],
        max_table_len=4,
    )
    params = tiny_params(graph)
    emb = M.encode(graph, params)
    assert emb.shape == (1, 8)
    assert np.isfinite(emb.data).all()


def test_encode_permutation_equivariance(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph)
    emb = M.encode(graph, params).data
    perm = [3, 0, 4, 1, 2, 8, 6, 7, 5]  # relabeling of the nine nodes
    inv = {p: i for i, p in enumerate(perm)}
    permuted = CircuitGraph(
        node_names=[graph.node_names[p] for p in perm],
        edges=[(inv[u], inv[v]) for u, v in graph.edges],
        features=graph.features[perm],
        raw_structural=graph.raw_structural[perm],
        pi_positions=[inv[i] for i in graph.pi_positions],
        max_table_len=graph.max_table_len,
    )
    emb_p = M.encode(permuted, params).data
    assert np.allclose(emb_p, emb[perm], atol=1e-9)


def test_encode_isomorphic_components_equal():
    # two disconnected, identical two-node components
    feats = np.zeros((4, 8))
    feats[0] = feats[2] = [0, 0, 0, 0, 1, 0, 0, 1]
    feats[1] = feats[3] = [0, 0, 0, 1, 2, 1, 1, 0]
    graph = CircuitGraph(
        node_names=["a", "g", "b", "h"],
        edges=[(0, 1), (2, 3)],
        features=feats,
        raw_structural=np.zeros((4, 4), dtype=np.int64),
        pi_positions=[0, 2],
        max_table_len=4,
    )
    params = tiny_params(graph)
    emb = M.encode(graph, params).data
    assert np.allclose(emb[0], emb[2])
    assert np.allclose(emb[1], emb[3])


def test_pointer_step_single_unvisited(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph)
    emb = M.encode(graph, params)
    pis = M.pi_embeddings(graph, emb)
    state = M.DecoderState(
        hidden=Tensor(np.zeros((1, 8))),
        cell=Tensor(np.zeros((1, 8))),
        visited=frozenset({0, 1, 2, 3}),
        step=4,
    )
    log_probs, _ = M.pointer_step(state, M.start_embedding(params), pis, params)
    assert log_probs.data[4] == pytest.approx(0.0, abs=1e-12)
    probs = np.exp(log_probs.data)
    assert probs[list({0, 1, 2, 3})].sum() == 0.0


def test_pointer_step_all_visited_raises(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph)
    emb = M.encode(graph, params)
    pis = M.pi_embeddings(graph, emb)
    state = M.DecoderState(
        hidden=Tensor(np.zeros((1, 8))),
        cell=Tensor(np.zeros((1, 8))),
        visited=frozenset(range(5)),
        step=5,
    )
    with pytest.raises(ValueError, match="visited"):
        M.pointer_step(state, M.start_embedding(params), pis, params)


def test_pointer_uniform_with_zero_weights(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph, jitter=0.0)
    for name in ("ptr.Wq", "ptr.Wk", "ptr.v"):
        params[name].data[:] = 0.0
    emb = M.encode(graph, params)
    pis = M.pi_embeddings(graph, emb)
    state = M.initial_state(params)
    log_probs, _ = M.pointer_step(state, M.start_embedding(params), pis, params)
    assert np.allclose(log_probs.data, np.log(1 / 5), atol=1e-12)


def test_teacher_forced_proper_distributions(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph)
    label = VarOrder((4, 2, 0, 1, 3))
    emb = M.encode(graph, params)
    pis = M.pi_embeddings(graph, emb)
    state = M.initial_state(params)
    prev = M.start_embedding(params)
    for token in label.permutation:
        log_probs, state = M.pointer_step(state, prev, pis, params)
        assert np.exp(log_probs.data).sum() == pytest.approx(1.0, abs=1e-6)
        state = M.DecoderState(
            state.hidden, state.cell, state.visited | {token}, state.step + 1
        )
        prev = M.selection_embedding(pis, token)


def test_teacher_forced_single_pi():
    net = parse_blif(".model t\n.inputs a\n.outputs o\n.names a o\n1 1\n.end")
    graph = tiny_graph(net)
    params = tiny_params(graph)
    lps = M.forward_teacher_forced(graph, VarOrder((0,)), params)
    assert len(lps) == 1
    assert lps[0].item() == pytest.approx(0.0, abs=1e-12)


def test_teacher_forced_rejects_bad_label(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph)
    with pytest.raises(ValueError):
        M.forward_teacher_forced(graph, VarOrder((0, 1, 2)), params)


def test_loss_identities():
    zero = M.loss([[Tensor(0.0)]], [[1]], [1.0])
    assert zero.item() == pytest.approx(0.0)
    one = M.loss([[Tensor(-1.0), Tensor(-1.0)]], [[1, 1]], [1.0, 1.0])
    assert one.item() == pytest.approx(1.0)


def test_loss_padded_batch_matches_per_sample():
    rng = np.random.default_rng(3)
    lp_a = [Tensor(-float(x)) for x in rng.uniform(0.1, 2.0, size=3)]
    lp_b = [Tensor(-float(x)) for x in rng.uniform(0.1, 2.0, size=5)]
    weights = [M.position_weight(t) for t in range(5)]
    padded = M.loss(
        [lp_a + [Tensor(0.0), Tensor(0.0)], lp_b],
        [[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]],
        weights,
    )
    separate = 0.5 * (
        M.loss([lp_a], [[1, 1, 1]], weights).item()
        + M.loss([lp_b], [[1] * 5], weights).item()
    )
    assert padded.item() == pytest.approx(separate)


def test_loss_all_zero_mask_raises():
    with pytest.raises(ZeroDivisionError):
        M.loss([[Tensor(-1.0)]], [[0]], [1.0])


def test_gradient_check_tiny_model(t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph, hidden=8, layers=2, heads=2)
    errors = M.gradient_check(graph, VarOrder((2, 0, 1, 4, 3)), params, probes_per_group=4)
    assert max(errors.values()) < 1e-4


def test_train_zero_lr_keeps_params(t5):
    graph = tiny_graph(t5)
    label = VarOrder((2, 0, 1, 4, 3))
    params = tiny_params(graph)
    before = {k: p.data.copy() for k, p in params.tensors.items()}
    cfg = M.TrainConfig(epochs=3, batch_size=1, learning_rate=0.0, seed=0)
    params, _, _ = M.train([(graph, label)], cfg, params=params)
    for k, p in params.tensors.items():
        assert np.array_equal(p.data, before[k])


def test_train_deterministic(t5):
    graph = tiny_graph(t5)
    label = VarOrder((2, 0, 1, 4, 3))

    def run():
        cfg = M.ModelConfig(feature_dim=graph.features.shape[1], hidden=16, layers=2, heads=2)
        params = M.init_params(cfg, seed=5)
        tcfg = M.TrainConfig(epochs=4, batch_size=1, learning_rate=1e-2, seed=5)
        params, history, _ = M.train([(graph, label)], tcfg, params=params)
        return history[-1]["train_loss"], {k: p.data.copy() for k, p in params.tensors.items()}

    loss_a, tensors_a = run()
    loss_b, tensors_b = run()
    assert loss_a == loss_b
    for k in tensors_a:
        assert np.array_equal(tensors_a[k], tensors_b[k])


def test_save_load_roundtrip(tmp_path, t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph, hidden=8, layers=2, heads=2)
    path_a = tmp_path / "w1.bin"
    path_b = tmp_path / "w2.bin"
    M.save_params(params, path_a)
    loaded = M.load_params(path_a)
    M.save_params(loaded, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()
    assert loaded.config == params.config


def test_load_rejects_corrupt_header(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(M.WeightFormatError, match="magic"):
        M.load_params(path)


def test_load_rejects_shape_mismatch(tmp_path, t5):
    graph = tiny_graph(t5)
    params = tiny_params(graph, hidden=8, layers=2, heads=2)
    named = {k: t.data for k, t in params.tensors.items()}
    named["ptr.v"] = np.zeros((4, 1))  # wrong hidden dimension
    M.save_tensors(tmp_path / "w.bin", params.config, named)
    with pytest.raises(M.WeightFormatError, match="shape"):
        M.load_params(tmp_path / "w.bin")


def test_checkpoint_roundtrip(tmp_path, t5):
    graph = tiny_graph(t5)
    label = VarOrder((2, 0, 1, 4, 3))
    cfg = M.ModelConfig(feature_dim=graph.features.shape[1], hidden=8, layers=2, heads=2)
    params = M.init_params(cfg, seed=2)
    tcfg = M.TrainConfig(epochs=2, batch_size=1, learning_rate=1e-2, seed=2)
    params, _, opt_state = M.train([(graph, label)], tcfg, params=params)
    M.save_checkpoint(params, opt_state, 2, tmp_path / "ck.bin")
    p2, s2, epoch = M.load_checkpoint(tmp_path / "ck.bin")
    assert epoch == 2
    assert s2["step"] == opt_state["step"]
    # resuming twice produces identical continuations
    ra, _, _ = M.train([(graph, label)], tcfg, params=p2, optimizer_state=s2, start_epoch=2)
    p3, s3, _ = M.load_checkpoint(tmp_path / "ck.bin")
    rb, _, _ = M.train([(graph, label)], tcfg, params=p3, optimizer_state=s3, start_epoch=2)
    for k in ra.tensors:
        assert np.array_equal(ra.tensors[k].data, rb.tensors[k].data)


def test_train_diverges_raises(t5):
    graph = tiny_graph(t5)
    label = VarOrder((2, 0, 1, 4, 3))
    params = tiny_params(graph)
    params["ptr.v"].data[:] = np.nan
    cfg = M.TrainConfig(epochs=1, batch_size=1, learning_rate=1e-3, seed=0)
    with pytest.raises(M.TrainingDiverged):
        M.train([(graph, label)], cfg, params=params)
