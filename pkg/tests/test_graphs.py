import random
from itertools import combinations, product

import pytest

from graphgame.graphs import (
    Graph,
    GraphError,
    TUPLE_SEP,
    are_adjacent,
    complete_graph,
    connected_components,
    cycle_graph,
    edgeless_graph,
    factorize,
    induced_subgraph,
    path_graph,
    star_graph,
    strong_product,
)

from conftest import random_graph


PATH_ABC = path_graph(["a", "b", "c"])


def four_cycle_over_axes() -> Graph:
    nodes = ["s1|s1", "s1|s2", "s2|s1", "s2|s2"]
    edges = [
        ("s1|s1", "s2|s1"),
        ("s1|s1", "s1|s2"),
        ("s1|s2", "s2|s2"),
        ("s2|s1", "s2|s2"),
    ]
    return Graph(nodes, edges)


class TestAdjacency:
    @pytest.mark.parametrize(
        "u, v, expected",
        [("a", "b", True), ("a", "a", True), ("a", "c", False)],
    )
    def test_path_examples(self, u, v, expected):
        assert are_adjacent(PATH_ABC, u, v) == expected

    def test_unknown_node(self):
        with pytest.raises(GraphError):
            are_adjacent(PATH_ABC, "a", "z")

    def test_symmetric_and_reflexive(self):
        rng = random.Random(11)
        for _ in range(20):
            labels = [f"n{i}" for i in range(rng.randint(1, 7))]
            g = random_graph(rng, labels)
            for u in labels:
                assert are_adjacent(g, u, u)
                for v in labels:
                    assert are_adjacent(g, u, v) == are_adjacent(g, v, u)

    def test_rejects_stored_self_loop(self):
        with pytest.raises(GraphError):
            Graph(["a"], [("a", "a")])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(GraphError):
            Graph(["a", "b"], [("a", "b"), ("b", "a")])


class TestComponents:
    def test_isolated(self):
        g = edgeless_graph(["a", "b"])
        assert connected_components(g) == [frozenset({"a"}), frozenset({"b"})]

    def test_path_connected(self):
        assert connected_components(PATH_ABC) == [frozenset({"a", "b", "c"})]

    def test_example_graph_single_component(self, example_graph):
        comps = connected_components(example_graph)
        assert len(comps) == 1
        assert len(comps[0]) == 4

    def test_order_by_smallest_index(self):
        g = Graph(["d", "c", "b", "a"], [("d", "b"), ("c", "a")])
        assert connected_components(g) == [
            frozenset({"d", "b"}),
            frozenset({"c", "a"}),
        ]


class TestInducedSubgraph:
    def test_path_endpoints(self):
        sub = induced_subgraph(PATH_ABC, {"a", "c"})
        assert sub.labels == ("a", "c")
        assert sub.edge_labels() == frozenset()

    def test_example_graph_support(self, example_graph):
        sub = induced_subgraph(example_graph, {"s1", "s2"})
        assert sub.n == 2
        assert not sub.edge_labels()
        assert len(connected_components(sub)) == 2

    def test_identity(self):
        rng = random.Random(5)
        for _ in range(10):
            labels = [f"n{i}" for i in range(rng.randint(1, 6))]
            g = random_graph(rng, labels)
            assert induced_subgraph(g, g.labels) == g

    def test_unknown_member(self):
        with pytest.raises(GraphError):
            induced_subgraph(PATH_ABC, {"a", "zz"})


def brute_strong_product_edges(factors):
    """Independent pairwise check of the per-coordinate adjacency rule."""
    combos = list(product(*(f.labels for f in factors)))
    edges = set()
    for x, y in combinations(combos, 2):
        ok = True
        for h, f in enumerate(factors):
            if x[h] != y[h] and frozenset((x[h], y[h])) not in f.edge_labels():
                ok = False
                break
        if ok:
            edges.add(frozenset((TUPLE_SEP.join(x), TUPLE_SEP.join(y))))
    return edges


class TestStrongProduct:
    def test_k2_k2_is_k4(self):
        k2a = complete_graph(["0", "1"])
        k2b = complete_graph(["x", "y"])
        prod = strong_product([k2a, k2b])
        assert prod.n == 4
        assert len(prod.edge_labels()) == 6

    def test_single_factor_identity(self):
        g = path_graph(["a", "b", "c"])
        assert strong_product([g]) == g

    def test_p2_p2_is_k4(self):
        p2a = path_graph(["a", "b"])
        p2b = path_graph(["c", "d"])
        prod = strong_product([p2a, p2b])
        assert set(prod.labels) == {"a|c", "a|d", "b|c", "b|d"}
        assert prod.edge_labels() == brute_strong_product_edges([p2a, p2b])
        assert len(prod.edge_labels()) == 6

    def test_node_count_and_edges_match_brute_force(self):
        rng = random.Random(23)
        for _ in range(15):
            r = rng.randint(1, 3)
            factors = []
            for h in range(r):
                labels = [f"f{h}n{i}" for i in range(rng.randint(1, 3))]
                factors.append(random_graph(rng, labels))
            prod = strong_product(factors)
            count = 1
            for f in factors:
                count *= f.n
            assert prod.n == count
            assert prod.edge_labels() == brute_strong_product_edges(factors)

    def test_empty_factor_rejected(self):
        with pytest.raises(GraphError):
            strong_product([])


class TestFactorize:
    def test_k4_over_two_axes(self):
        k4 = strong_product([complete_graph(["0", "1"]), complete_graph(["x", "y"])])
        dec = factorize(k4, [["0", "1"], ["x", "y"]])
        assert dec is not None
        assert dec.factors[0] == complete_graph(["0", "1"])
        assert dec.factors[1] == complete_graph(["x", "y"])

    def test_four_cycle_not_decomposable(self):
        g = four_cycle_over_axes()
        assert factorize(g, [["s1", "s2"], ["s1", "s2"]]) is None

    def test_round_trip_p2_p3(self):
        p2 = path_graph(["a", "b"])
        p3 = path_graph(["x", "y", "z"])
        prod = strong_product([p2, p3])
        dec = factorize(prod, [p2.labels, p3.labels])
        assert dec is not None
        assert dec.factors == (p2, p3)

    def test_round_trip_random(self):
        rng = random.Random(77)
        for _ in range(40):
            r = rng.randint(1, 3)
            factors = []
            for h in range(r):
                labels = [f"f{h}n{i}" for i in range(rng.randint(1, 4))]
                factors.append(random_graph(rng, labels))
            prod = strong_product(factors)
            dec = factorize(prod, [f.labels for f in factors])
            assert dec is not None
            assert dec.factors == tuple(factors)
            assert dec.axis_map[prod.labels[0]] == tuple(
                f.labels[0] for f in factors
            )

    def test_rejects_partial_product_node_set(self):
        g = Graph(["a|x", "a|y", "b|x"], [])
        with pytest.raises(GraphError):
            factorize(g, [["a", "b"], ["x", "y"]])

    def test_rejects_malformed_tuple(self):
        g = Graph(["a|x", "a|y", "b|x", "junk"], [])
        with pytest.raises(GraphError):
            factorize(g, [["a", "b"], ["x", "y"]])


class TestGenerators:
    def test_shapes(self):
        assert len(path_graph(["a", "b", "c"]).edge_labels()) == 2
        assert len(cycle_graph(["a", "b", "c", "d"]).edge_labels()) == 4
        assert len(star_graph(["hub", "l1", "l2", "l3"]).edge_labels()) == 3
        assert len(complete_graph(["a", "b", "c"]).edge_labels()) == 3
        assert not edgeless_graph(["a", "b"]).edge_labels()
