import numpy as np
import pytest

from bddseq.blif import Cube, LogicGate, Netlist, parse_blif
from bddseq.graph import (
    FeatureConfig,
    blif2graph,
    parse_graph,
    serialize_graph,
    structural_features,
    truth_table_embedding,
)


def test_truth_table_and2_padded():
    gate = LogicGate(["a", "b"], "o", [Cube("11", 1)])
    assert truth_table_embedding(gate, 8).tolist() == [0, 0, 0, 1, 0, 0, 0, 0]


def test_truth_table_or2():
    gate = LogicGate(["a", "b"], "o", [Cube("1-", 1), Cube("-1", 1)])
    assert truth_table_embedding(gate, 4).tolist() == [0, 1, 1, 1]


def test_truth_table_inverter():
    gate = LogicGate(["a"], "o", [Cube("0", 1)])
    assert truth_table_embedding(gate, 4).tolist() == [1, 0, 0, 0]


def test_truth_table_arity_overflow():
    gate = LogicGate(["a", "b", "c"], "o", [Cube("111", 1)])
    with pytest.raises(ValueError, match="bound fan-in"):
        truth_table_embedding(gate, 4)


def test_structural_features_basics(and2):
    stats = structural_features(and2)
    assert stats["a"] == (0, 0, 0, 1)
    assert stats["b"] == (1, 0, 0, 1)
    assert stats["o"] == (2, 1, 2, 1)


def test_structural_depth_chain():
    src = (
        ".model chain\n.inputs a\n.outputs o\n"
        ".names a t1\n0 1\n.names t1 t2\n0 1\n.names t2 o\n0 1\n.end"
    )
    stats = structural_features(parse_blif(src))
    assert stats["o"][1] == 3


def test_structural_po_fanout_counts():
    src = ".model t\n.inputs a\n.outputs o o2\n.names a o\n1 1\n.names a o2\n0 1\n.end"
    stats = structural_features(parse_blif(src))
    assert stats["a"][3] == 2  # feeds both gates
    assert stats["o"][3] == 1  # consumed once as a primary output


def test_blif2graph_and2(and2):
    graph = blif2graph(and2, FeatureConfig(max_table_len=4, normalize_structural=False))
    assert graph.num_nodes == 3
    assert graph.edges == [(0, 2), (1, 2)]
    assert graph.pi_positions == [0, 1]
    assert graph.features[2].tolist() == [0, 0, 0, 1, 2, 1, 2, 1]
    assert graph.features[0][:4].tolist() == [0, 0, 0, 0]


def test_blif2graph_pairs6(pairs6):
    graph = blif2graph(pairs6, FeatureConfig(max_table_len=8))
    assert graph.num_nodes == 6 + 4
    assert all(graph.raw_structural[i][3] == 1 for i in graph.pi_positions)
    # one edge per gate input
    assert len(graph.edges) == sum(g.arity for g in pairs6.gates)


def test_blif2graph_pi_only():
    net = Netlist("wires", ["a", "b"], ["a"], [])
    net.validate()
    graph = blif2graph(net, FeatureConfig())
    assert graph.num_nodes == 2
    assert graph.edges == []


def test_graph_matches_dependency_relation(pairs6):
    graph = blif2graph(pairs6, FeatureConfig(max_table_len=8))
    index = {name: i for i, name in enumerate(graph.node_names)}
    expected = {
        (index[s], index[g.output]) for g in pairs6.gates for s in g.inputs
    }
    assert set(graph.edges) == expected


def test_feature_vector_width_uniform(pairs6, c17):
    config = FeatureConfig(max_table_len=16)
    for net in (pairs6, c17):
        graph = blif2graph(net, config)
        assert graph.features.shape == (graph.num_nodes, 16 + 4)


def test_serialization_deterministic(pairs6):
    config = FeatureConfig(max_table_len=8)
    a = serialize_graph(blif2graph(pairs6, config))
    b = serialize_graph(blif2graph(pairs6, config))
    assert a == b


def test_serialization_roundtrip(pairs6):
    config = FeatureConfig(max_table_len=8)
    graph = blif2graph(pairs6, config)
    back = parse_graph(serialize_graph(graph))
    assert back.num_nodes == graph.num_nodes
    assert back.edges == graph.edges
    assert back.pi_positions == graph.pi_positions
    assert np.allclose(back.features, graph.features)


def test_feature_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(max_table_len=12)
    with pytest.raises(ValueError):
        FeatureConfig(max_table_len=2)
