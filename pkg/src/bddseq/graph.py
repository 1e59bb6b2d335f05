"""Netlist-to-graph conversion with truth-table and structural node features.

Every primary input and gate becomes a node; edges run from driver to
consumer. A gate's feature vector is its padded truth table followed by four
structural scalars (topological rank, depth, fan-in, fan-out); primary inputs
carry an all-zero truth-table segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blif import LogicGate, Netlist


@dataclass
class FeatureConfig:
    max_table_len: int = 16  # power of two; bounds gate arity at log2
    normalize_structural: bool = True

    def __post_init__(self):
        L = self.max_table_len
        if L < 4 or (L & (L - 1)) != 0:
            raise ValueError("max_table_len must be a power of two >= 4")


@dataclass
class CircuitGraph:
    node_names: list[str]  # primary inputs first, then gates topologically
    edges: list[tuple[int, int]]
    features: np.ndarray  # (N, L + 4) floats, consumed by the encoder
    raw_structural: np.ndarray  # (N, 4) raw rank/depth/fanin/fanout counts
    pi_positions: list[int]
    max_table_len: int

    @property
    def num_nodes(self) -> int:
        return len(self.node_names)

    @property
    def num_pis(self) -> int:
        return len(self.pi_positions)


def truth_table_embedding(gate: LogicGate, max_table_len: int) -> np.ndarray:
    """Bit vector of the gate function over lexicographic input combinations.

    Index i enumerates assignments with the first input most significant;
    entries past 2^arity are zero padding.
    """
    n = gate.arity
    if (1 << n) > max_table_len:
        raise ValueError(
            f"gate '{gate.output}' arity {n} does not fit table length "
            f"{max_table_len}; bound fan-in first"
        )
    vec = np.zeros(max_table_len, dtype=np.float64)
    for i in range(1 << n):
        values = [(i >> (n - 1 - j)) & 1 for j in range(n)]
        vec[i] = gate.eval(values)
    return vec


def structural_features(netlist: Netlist) -> dict[str, tuple[int, int, int, int]]:
    """Per-signal (rank, depth, fanin, fanout) over PIs and gate outputs."""
    topo = netlist.topo_gates()
    order = list(netlist.primary_inputs) + [g.output for g in topo]
    rank = {s: i for i, s in enumerate(order)}
    depth = {s: 0 for s in netlist.primary_inputs}
    for g in topo:
        depth[g.output] = 1 + max((depth[s] for s in g.inputs), default=-1)
    fanin = {s: 0 for s in netlist.primary_inputs}
    fanout = {s: 0 for s in order}
    for g in topo:
        fanin[g.output] = g.arity
        for s in g.inputs:
            fanout[s] += 1
    for s in netlist.primary_outputs:
        fanout[s] += 1
    return {s: (rank[s], depth[s], fanin[s], fanout[s]) for s in order}


def blif2graph(netlist: Netlist, config: FeatureConfig) -> CircuitGraph:
    L = config.max_table_len
    topo = netlist.topo_gates()
    names = list(netlist.primary_inputs) + [g.output for g in topo]
    index = {s: i for i, s in enumerate(names)}
    stats = structural_features(netlist)

    edges = []
    for g in topo:
        for s in g.inputs:
            edges.append((index[s], index[g.output]))

    n_nodes = len(names)
    features = np.zeros((n_nodes, L + 4), dtype=np.float64)
    raw = np.zeros((n_nodes, 4), dtype=np.int64)
    for g in topo:
        features[index[g.output], :L] = truth_table_embedding(g, L)
    for s, tup in stats.items():
        raw[index[s]] = tup

    scalars = raw.astype(np.float64)
    if config.normalize_structural and n_nodes > 0:
        lo = scalars.min(axis=0)
        hi = scalars.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        scalars = (scalars - lo) / span
    features[:, L:] = scalars

    return CircuitGraph(
        node_names=names,
        edges=edges,
        features=features,
        raw_structural=raw,
        pi_positions=list(range(len(netlist.primary_inputs))),
        max_table_len=L,
    )


def serialize_graph(graph: CircuitGraph) -> str:
    """Line-oriented dump: header, one feature row per node, one edge per line."""
    lines = [
        f"{graph.num_nodes} {len(graph.edges)} {graph.max_table_len} {graph.num_pis}"
    ]
    for row in graph.features:
        lines.append(" ".join(f"{v:.9g}" for v in row))
    for src, dst in graph.edges:
        lines.append(f"{src} {dst}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> CircuitGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n_nodes, n_edges, L, n_pis = (int(t) for t in lines[0].split())
    feats = np.array(
        [[float(t) for t in lines[1 + i].split()] for i in range(n_nodes)],
        dtype=np.float64,
    ).reshape(n_nodes, L + 4)
    edges = []
    for i in range(n_edges):
        src, dst = lines[1 + n_nodes + i].split()
        edges.append((int(src), int(dst)))
    return CircuitGraph(
        node_names=[f"n{i}" for i in range(n_nodes)],
        edges=edges,
        features=feats,
        raw_structural=np.zeros((n_nodes, 4), dtype=np.int64),
        pi_positions=list(range(n_pis)),
        max_table_len=L,
    )
