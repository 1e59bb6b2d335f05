"""Attention-based graph encoder and LSTM pointer decoder.

The encoder runs multi-head attention message passing over the circuit graph
(augmented with reverse edges and self-loops), concatenating heads between
layers and averaging them at the last layer, with a residual connection per
layer. The decoder is an LSTM that, at each step, consumes the previously
selected input's embedding, attends over the primary-input embeddings, masks
already-chosen positions, and emits log-probabilities over the rest.

Desk-scale defaults are hidden=64 / 3 layers / 4 heads / batch 8; the study
this reproduces ran hidden=512 / 6 layers at batch 16.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import log as _ln

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .bdd import VarOrder
from .graph import CircuitGraph


class WeightFormatError(Exception):
    """Unreadable or incompatible weight file."""


class TrainingDiverged(Exception):
    """The loss became non-finite."""


@dataclass
class ModelConfig:
    feature_dim: int
    hidden: int = 64
    layers: int = 3
    heads: int = 4

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")

    def head_dim(self, layer: int) -> int:
        # concatenated heads keep width `hidden`; the averaged last layer
        # gives each head the full width
        if layer == self.layers - 1:
            return self.hidden
        return self.hidden // self.heads


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


@dataclass
class DecoderState:
    hidden: Tensor
    cell: Tensor
    visited: frozenset[int]
    step: int


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    h = config.hidden
    shapes: dict[str, tuple[int, ...]] = {
        "enc.in_proj.W": (config.feature_dim, h),
        "enc.in_proj.b": (1, h),
    }
    for i in range(config.layers):
        d = config.head_dim(i)
        shapes[f"enc.l{i}.W"] = (h, config.heads * d)
        shapes[f"enc.l{i}.a_src"] = (config.heads, d)
        shapes[f"enc.l{i}.a_dst"] = (config.heads, d)
    shapes.update(
        {
            "dec.start": (1, h),
            "dec.Wx": (h, 4 * h),
            "dec.Wh": (h, 4 * h),
            "dec.b": (1, 4 * h),
            "ptr.Wq": (h, h),
            "ptr.Wk": (h, h),
            "ptr.v": (h, 1),
        }
    )
    return shapes


def init_params(config: ModelConfig, seed: int = 42) -> ModelParams:
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in expected_shapes(config).items():
        if name.endswith(".b"):
            data = np.zeros(shape)
        else:
            fan_in = shape[0]
            data = rng.standard_normal(shape) / np.sqrt(fan_in)
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    return ModelParams(config=config, tensors=tensors)


def message_edges(graph: CircuitGraph) -> tuple[np.ndarray, np.ndarray]:
    """Directed edges plus reverses and self-loops, deduplicated."""
    seen = set()
    src, dst = [], []
    for u, v in graph.edges:
        for a, b in ((u, v), (v, u)):
            if (a, b) not in seen:
                seen.add((a, b))
                src.append(a)
                dst.append(b)
    for i in range(graph.num_nodes):
        if (i, i) not in seen:
            seen.add((i, i))
            src.append(i)
            dst.append(i)
    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)


def _segment_max(values: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    out = np.full((n,) + values.shape[1:], -np.inf)
    np.maximum.at(out, idx, values)
    return out


def encode(graph: CircuitGraph, params: ModelParams) -> Tensor:
    """Node embeddings of shape (num_nodes, hidden)."""
    cfg = params.config
    if graph.features.shape[1] != cfg.feature_dim:
        raise ValueError(
            f"feature width {graph.features.shape[1]} does not match "
            f"model feature_dim {cfg.feature_dim}"
        )
    src, dst = message_edges(graph)
    n = graph.num_nodes
    x = Tensor(graph.features)
    h = ad.add(ad.matmul(x, params["enc.in_proj.W"]), params["enc.in_proj.b"])
    for layer in range(cfg.layers):
        w = params[f"enc.l{layer}.W"]
        a_src = params[f"enc.l{layer}.a_src"]
        a_dst = params[f"enc.l{layer}.a_dst"]
        proj = ad.matmul(h, w)  # (N, heads*d)
        s_src = ad.heads_dot(proj, a_src, cfg.heads)  # (N, heads)
        s_dst = ad.heads_dot(proj, a_dst, cfg.heads)
        e = ad.leaky_relu(
            ad.add(ad.gather_rows(s_src, src), ad.gather_rows(s_dst, dst))
        )  # (E, heads)
        # per-destination softmax; the max shift is constant w.r.t. gradients
        shift = _segment_max(e.data, dst, n)[dst]
        ex = ad.exp(ad.sub(e, Tensor(shift)))
        denom = ad.scatter_add_rows(ex, dst, n)  # (N, heads)
        alpha = ad.div(ex, ad.gather_rows(denom, dst))
        msg = ad.heads_scale(ad.gather_rows(proj, src), alpha, cfg.heads)
        agg = ad.scatter_add_rows(msg, dst, n)  # (N, heads*d)
        if layer == cfg.layers - 1:
            blocks = np.concatenate(
                [np.eye(cfg.hidden) / cfg.heads for _ in range(cfg.heads)], axis=0
            )
            agg = ad.matmul(agg, Tensor(blocks))  # average heads
        h = ad.add(ad.tanh(agg), h)  # residual
    return h


def pi_embeddings(graph: CircuitGraph, embeddings: Tensor) -> Tensor:
    return ad.gather_rows(embeddings, np.asarray(graph.pi_positions, dtype=np.int64))


def initial_state(params: ModelParams) -> DecoderState:
    h = params.config.hidden
    return DecoderState(
        hidden=Tensor(np.zeros((1, h))),
        cell=Tensor(np.zeros((1, h))),
        visited=frozenset(),
        step=0,
    )


def start_embedding(params: ModelParams) -> Tensor:
    return params["dec.start"]


def selection_embedding(pi_embs: Tensor, index: int) -> Tensor:
    return ad.gather_rows(pi_embs, np.asarray([index], dtype=np.int64))


def decoder_advance(
    state: DecoderState, prev_emb: Tensor, pi_embs: Tensor, params: ModelParams
) -> tuple[Tensor, DecoderState]:
    """One LSTM step followed by pointer attention; returns raw scores."""
    hdim = params.config.hidden
    z = ad.add(
        ad.add(ad.matmul(prev_emb, params["dec.Wx"]), ad.matmul(state.hidden, params["dec.Wh"])),
        params["dec.b"],
    )
    gate_i = ad.sigmoid(ad.slice_cols(z, 0, hdim))
    gate_f = ad.sigmoid(ad.slice_cols(z, hdim, 2 * hdim))
    gate_g = ad.tanh(ad.slice_cols(z, 2 * hdim, 3 * hdim))
    gate_o = ad.sigmoid(ad.slice_cols(z, 3 * hdim, 4 * hdim))
    cell = ad.add(ad.mul(gate_f, state.cell), ad.mul(gate_i, gate_g))
    hidden = ad.mul(gate_o, ad.tanh(cell))
    q = ad.matmul(hidden, params["ptr.Wq"])  # (1, H)
    keys = ad.matmul(pi_embs, params["ptr.Wk"])  # (P, H)
    scores = ad.matmul(ad.tanh(ad.add(keys, q)), params["ptr.v"])  # (P, 1)
    flat = ad.flatten(scores)
    new_state = DecoderState(
        hidden=hidden, cell=cell, visited=state.visited, step=state.step
    )
    return flat, new_state


MASK_VALUE = -1e9


def visited_mask(visited, num_pis: int) -> np.ndarray:
    mask = np.zeros(num_pis)
    for i in visited:
        mask[i] = MASK_VALUE
    return mask


def pointer_step(
    state: DecoderState, prev_emb: Tensor, pi_embs: Tensor, params: ModelParams
) -> tuple[Tensor, DecoderState]:
    """Masked log-probabilities over unvisited primary inputs."""
    num_pis = pi_embs.data.shape[0]
    if len(state.visited) >= num_pis:
        raise ValueError("all positions already visited")
    raw, new_state = decoder_advance(state, prev_emb, pi_embs, params)
    log_probs = ad.log_softmax_vec(raw, visited_mask(state.visited, num_pis))
    return log_probs, new_state


def forward_teacher_forced(
    graph: CircuitGraph, label: VarOrder, params: ModelParams
) -> list[Tensor]:
    """Per-step log-probabilities of the label tokens under teacher forcing."""
    num_pis = graph.num_pis
    if sorted(label.permutation) != list(range(num_pis)):
        raise ValueError("label does not permute the primary inputs")
    emb = encode(graph, params)
    pis = pi_embeddings(graph, emb)
    state = initial_state(params)
    prev = start_embedding(params)
    out: list[Tensor] = []
    for token in label.permutation:
        log_probs, state = pointer_step(state, prev, pis, params)
        out.append(ad.take(log_probs, token))
        state = DecoderState(
            hidden=state.hidden,
            cell=state.cell,
            visited=state.visited | {token},
            step=state.step + 1,
        )
        prev = selection_embedding(pis, token)
    return out


def position_weight(t: int) -> float:
    """Early positions weigh more; t is 0-based."""
    return 1.0 / _ln(t + 2)


def loss(log_probs, masks, weights) -> Tensor:
    """Mean over the batch of mask-normalized weighted negative log-likelihoods."""
    batch = len(log_probs)
    if batch == 0:
        raise ValueError("empty batch")
    total = Tensor(0.0)
    for lps, ms in zip(log_probs, masks):
        denom = float(sum(ms))
        if denom == 0.0:
            raise ZeroDivisionError("sample with all-zero mask")
        num = Tensor(0.0)
        for t, (lp, m) in enumerate(zip(lps, ms)):
            if m:
                num = ad.add(num, ad.scale(lp, -float(weights[t]) * float(m)))
        total = ad.add(total, ad.scale(num, 1.0 / denom))
    return ad.scale(total, 1.0 / batch)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    learning_rate: float = 3e-3  # reference study used 1e-5 at full scale
    seed: int = 42
    uniform_weights: bool = False  # disable the early-position emphasis


def sample_loss_terms(graph, label, params, uniform_weights=False):
    lps = forward_teacher_forced(graph, label, params)
    t_len = len(lps)
    ws = [1.0 if uniform_weights else position_weight(t) for t in range(t_len)]
    return lps, [1] * t_len, ws


def train(
    dataset,
    config: TrainConfig,
    params: ModelParams | None = None,
    val_dataset=None,
    eval_fn=None,
    optimizer_state=None,
    start_epoch: int = 0,
):
    """Adam training with teacher forcing; deterministic for a fixed seed.

    dataset and val_dataset are sequences of (CircuitGraph, VarOrder).
    eval_fn(params, val_dataset) may return extra per-epoch metrics such as
    rank correlations of decoded orders. Returns (params, history) where
    history has one row per epoch.
    """
    if not dataset:
        raise ValueError("empty dataset")
    if params is None:
        feature_dim = dataset[0][0].features.shape[1]
        params = init_params(ModelConfig(feature_dim=feature_dim), seed=config.seed)
    opt = Adam(params.tensors, lr=config.learning_rate)
    if optimizer_state is not None:
        opt.m = {k: v.astype(np.float64) for k, v in optimizer_state["m"].items()}
        opt.v = {k: v.astype(np.float64) for k, v in optimizer_state["v"].items()}
        opt.step_count = int(optimizer_state["step"])
    history = []
    for epoch in range(start_epoch, start_epoch + config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        indices = rng.permutation(len(dataset))
        epoch_losses = []
        for ofs in range(0, len(indices), config.batch_size):
            batch = indices[ofs : ofs + config.batch_size]
            opt.zero_grad()
            lps_b, ms_b, ws_max = [], [], []
            for i in batch:
                graph_i, label_i = dataset[i]
                lps, ms, ws = sample_loss_terms(
                    graph_i, label_i, params, config.uniform_weights
                )
                lps_b.append(lps)
                ms_b.append(ms)
                if len(ws) > len(ws_max):
                    ws_max = ws
            batch_loss = loss(lps_b, ms_b, ws_max)
            value = batch_loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}"
                )
            batch_loss.backward()
            opt.step()
            epoch_losses.append(value)
        row = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses))}
        if val_dataset:
            vals = []
            for graph_i, label_i in val_dataset:
                lps, ms, ws = sample_loss_terms(
                    graph_i, label_i, params, config.uniform_weights
                )
                vals.append(loss([lps], [ms], ws).item())
            row["val_loss"] = float(np.mean(vals))
        if eval_fn is not None and val_dataset:
            row.update(eval_fn(params, val_dataset))
        history.append(row)
    opt_state = {"m": opt.m, "v": opt.v, "step": opt.step_count}
    return params, history, opt_state


def perturb_params(params: ModelParams, scale: float, seed: int) -> None:
    """Jitter all parameters to a generic point (kinks off exact zeros)."""
    rng = np.random.default_rng(seed)
    for p in params.tensors.values():
        p.data += scale * rng.standard_normal(p.data.shape)


def gradient_check(
    graph: CircuitGraph,
    label: VarOrder,
    params: ModelParams,
    eps: float = 1e-5,
    probes_per_group: int = 8,
    seed: int = 0,
) -> dict[str, float]:
    """Central finite differences vs backward() on the teacher-forced loss.

    Returns the vector-norm relative error per parameter group over the
    probed entries.
    """

    def value() -> float:
        lps, ms, ws = sample_loss_terms(graph, label, params)
        return loss([lps], [ms], ws).item()

    lps, ms, ws = sample_loss_terms(graph, label, params)
    for p in params.tensors.values():
        p.grad = None
    loss([lps], [ms], ws).backward()
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, p in params.tensors.items():
        flat = p.data.reshape(-1)
        grad = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        idxs = rng.choice(flat.size, size=min(probes_per_group, flat.size), replace=False)
        fd = np.zeros(len(idxs))
        an = np.zeros(len(idxs))
        for k, i in enumerate(idxs):
            old = flat[i]
            flat[i] = old + eps
            up = value()
            flat[i] = old - eps
            down = value()
            flat[i] = old
            fd[k] = (up - down) / (2.0 * eps)
            an[k] = grad[i]
        denom = max(np.linalg.norm(fd), np.linalg.norm(an), 1e-12)
        errors[name] = float(np.linalg.norm(fd - an) / denom)
    return errors


# -- persistence ----------------------------------------------------------------

_MAGIC = b"BSQW"
_VERSION = 1


def _config_blob(config: ModelConfig) -> bytes:
    text = (
        f"feature_dim={config.feature_dim}\n"
        f"hidden={config.hidden}\n"
        f"layers={config.layers}\n"
        f"heads={config.heads}\n"
    )
    return text.encode("utf-8")


def _parse_config(blob: bytes) -> ModelConfig:
    fields = {}
    for line in blob.decode("utf-8").splitlines():
        if line.strip():
            key, value = line.split("=", 1)
            fields[key.strip()] = int(value)
    try:
        return ModelConfig(
            feature_dim=fields["feature_dim"],
            hidden=fields["hidden"],
            layers=fields["layers"],
            heads=fields["heads"],
        )
    except KeyError as exc:
        raise WeightFormatError(f"config missing field {exc}") from exc


def save_tensors(path, config: ModelConfig, named: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        blob = _config_blob(config)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(named)))
        for name, data in named.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            arr = np.asarray(data, dtype=np.float32)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes(order="C"))


def load_tensors(path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise WeightFormatError(f"bad magic {magic!r}; not a weight file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise WeightFormatError(f"unsupported format version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        config = _parse_config(fh.read(blob_len))
        (count,) = struct.unpack("<I", fh.read(4))
        named: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", fh.read(1))
            shape = tuple(
                struct.unpack("<I", fh.read(4))[0] for _ in range(rank)
            )
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(4 * n_items), dtype=np.float32)
            named[name] = data.reshape(shape).astype(np.float64)
    return config, named


def save_params(params: ModelParams, path) -> None:
    save_tensors(
        path, params.config, {k: t.data for k, t in params.tensors.items()}
    )


def load_params(path) -> ModelParams:
    config, named = load_tensors(path)
    shapes = expected_shapes(config)
    tensors: dict[str, Tensor] = {}
    for name, shape in shapes.items():
        if name not in named:
            raise WeightFormatError(f"missing tensor '{name}'")
        if named[name].shape != shape:
            raise WeightFormatError(
                f"tensor '{name}' has shape {named[name].shape}, "
                f"config implies {shape}"
            )
        tensors[name] = Tensor(named[name], requires_grad=True, name=name)
    return ModelParams(config=config, tensors=tensors)


def save_checkpoint(params: ModelParams, opt_state, next_epoch: int, path) -> None:
    named = {k: t.data for k, t in params.tensors.items()}
    for k, v in opt_state["m"].items():
        named[f"opt.m.{k}"] = v
    for k, v in opt_state["v"].items():
        named[f"opt.v.{k}"] = v
    named["opt.meta"] = np.array([opt_state["step"], next_epoch], dtype=np.float64)
    save_tensors(path, params.config, named)


def load_checkpoint(path):
    config, named = load_tensors(path)
    shapes = expected_shapes(config)
    tensors = {}
    for name, shape in shapes.items():
        if name not in named or named[name].shape != shape:
            raise WeightFormatError(f"checkpoint missing or misshaped '{name}'")
        tensors[name] = Tensor(named[name], requires_grad=True, name=name)
    params = ModelParams(config=config, tensors=tensors)
    opt_state = {
        "m": {k: named[f"opt.m.{k}"] for k in shapes},
        "v": {k: named[f"opt.v.{k}"] for k in shapes},
        "step": int(named["opt.meta"][0]),
    }
    next_epoch = int(named["opt.meta"][1])
    return params, opt_state, next_epoch
