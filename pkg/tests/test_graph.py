import numpy as np
import pytest
import scipy.sparse as sp

from hetpath.graph import (
    GraphError,
    HetGraph,
    LabelSet,
    MetaPath,
    MetaPathError,
    Relation,
    check_metapath,
    parse_metapath,
    relation_degrees,
    reverse_name,
    validate_graph,
)

from conftest import adj_from_edges, build_graph


@pytest.fixture
def acm_shaped():
    counts = {"P": 4, "A": 3, "S": 2}
    rels = [
        ("P-A", "P", "A", [(0, 0), (1, 0), (2, 1), (3, 2)]),
        ("P-S", "P", "S", [(0, 0), (1, 0), (2, 1), (3, 1)]),
    ]
    features = {"P": np.eye(4), "A": np.ones((3, 2))}
    return build_graph(counts, rels, "P", features, labels=[0, 0, 1, 1])


def test_wellformed_graph_has_no_violations(acm_shaped):
    assert validate_graph(acm_shaped) == []


def test_validate_is_idempotent(acm_shaped):
    first = validate_graph(acm_shaped)
    second = validate_graph(acm_shaped)
    assert first == second == []


def test_shape_mismatch_reported():
    # P-A adjacency says A has 5 nodes, schema says 7
    bad = sp.csr_array(np.ones((10, 5), dtype=np.int64))
    g = HetGraph(
        {"P": 10, "A": 7},
        {
            "P-A": Relation("P-A", "P", "A", bad),
            "A-P": Relation("A-P", "A", "P", sp.csr_array(bad.T)),
        },
        {},
        "P",
    )
    shape_violations = [v for v in validate_graph(g) if "shape" in v and "'P-A'" in v]
    assert len(shape_violations) == 1


def test_homogeneous_graph_violates_heterogeneity():
    adj = np.zeros((3, 3), dtype=np.int64)
    adj[0, 1] = adj[1, 0] = 1
    g = HetGraph(
        {"P": 3},
        {"P-P": Relation("P-P", "P", "P", sp.csr_array(adj))},
        {},
        "P",
    )
    violations = validate_graph(g)
    assert len(violations) == 1
    assert "heterogeneous" in violations[0]


def test_missing_reverse_reported():
    g = HetGraph(
        {"P": 2, "A": 2},
        {"P-A": Relation("P-A", "P", "A", sp.csr_array(np.eye(2, dtype=np.int64)))},
        {},
        "P",
    )
    assert any("reverse" in v for v in validate_graph(g))


def test_non_transpose_reverse_reported():
    a = sp.csr_array(np.array([[1, 0], [0, 1]], dtype=np.int64))
    b = sp.csr_array(np.array([[0, 1], [1, 0]], dtype=np.int64))
    g = HetGraph(
        {"P": 2, "A": 2},
        {
            "P-A": Relation("P-A", "P", "A", a),
            "A-P": Relation("A-P", "A", "P", b),
        },
        {},
        "P",
    )
    assert any("transpose" in v for v in validate_graph(g))


def test_label_violations():
    labels = LabelSet(np.array([0, 5, 1]), np.array([True, True, True]), 2)
    g = build_graph(
        {"P": 3, "A": 2},
        [("P-A", "P", "A", [(0, 0), (1, 1), (2, 0)])],
        "P",
    )
    g = HetGraph(g.node_counts, g.relations, g.features, "P", labels)
    assert any("class ids" in v for v in validate_graph(g))


def test_relation_degrees_row_sums():
    g = build_graph(
        {"P": 3, "A": 3},
        [("P-A", "P", "A", [(0, 0), (0, 2), (2, 1)])],
        "P",
    )
    assert relation_degrees(g, "P-A").tolist() == [2, 0, 1]


def test_relation_degrees_regular_bipartite():
    # 2-regular 4x4: each source connects to columns i and (i+1) mod 4
    edges = [(i, i) for i in range(4)] + [(i, (i + 1) % 4) for i in range(4)]
    g = build_graph({"P": 4, "A": 4}, [("P-A", "P", "A", edges)], "P")
    assert relation_degrees(g, "P-A").tolist() == [2, 2, 2, 2]


def test_relation_degrees_unknown_relation():
    g = build_graph({"P": 2, "A": 2}, [("P-A", "P", "A", [(0, 0)])], "P")
    with pytest.raises(GraphError, match="P-X"):
        relation_degrees(g, "P-X")


def test_degree_sum_equals_edge_count_with_multiplicity():
    edges = [(0, 0, 2), (0, 1, 1), (1, 1, 3)]
    g = build_graph({"P": 2, "A": 2}, [("P-A", "P", "A", edges)], "P")
    assert relation_degrees(g, "P-A").sum() == 6


def test_transpose_degree_consistency():
    rng = np.random.default_rng(5)
    dense = (rng.random((6, 4)) < 0.4).astype(np.int64)
    g = build_graph({"P": 6, "A": 4}, [("P-A", "P", "A", dense)], "P")
    out_deg = relation_degrees(g, "P-A")
    in_deg_of_reverse = np.asarray(g.relations["A-P"].adj.sum(axis=0)).ravel()
    assert (out_deg == in_deg_of_reverse).all()


def test_reverse_name_roundtrip():
    assert reverse_name("P-A") == "A-P"
    assert reverse_name(reverse_name("M-D")) == "M-D"


def test_parse_metapath(acm_shaped):
    path = parse_metapath(acm_shaped, "PAP")
    assert path.relations == ("P-A", "A-P")
    longer = parse_metapath(acm_shaped, "PSPAP")
    assert longer.relations == ("P-S", "S-P", "P-A", "A-P")


def test_parse_metapath_rejects_bad_endpoints(acm_shaped):
    with pytest.raises(MetaPathError, match="target"):
        parse_metapath(acm_shaped, "APA")


def test_parse_metapath_rejects_unknown_step(acm_shaped):
    with pytest.raises(MetaPathError, match="no relation"):
        parse_metapath(acm_shaped, "PSAP")


def test_parse_metapath_ambiguity():
    counts = {"P": 2, "A": 2}
    rels = [
        ("P-A", "P", "A", [(0, 0)]),
        ("P-A2", "P", "A", [(1, 1)]),
    ]
    g = build_graph(counts, rels, "P")
    with pytest.raises(MetaPathError, match="ambiguous"):
        parse_metapath(g, "PAP")


def test_check_metapath_names_offending_step(acm_shaped):
    bad = MetaPath("PAA", ("P-A", "P-A"))
    with pytest.raises(MetaPathError, match="step 1"):
        check_metapath(acm_shaped, bad)


def test_graph_features_are_readonly(acm_shaped):
    with pytest.raises(ValueError):
        acm_shaped.features["P"][0, 0] = 9.0
