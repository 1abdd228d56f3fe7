import random
import warnings
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from graphgame.chains import (
    Schedule,
    SupportSplitError,
    TransitionKernel,
    build_kernel,
    smooth,
    stationary_distribution,
)
from graphgame.graphs import (
    Graph,
    complete_graph,
    connected_components,
    path_graph,
    strong_product,
)
from graphgame.mixed import Distribution, total_variation
from graphgame.simulate import (
    ComponentSpec,
    ProductChainSpec,
    Trace,
    empirical_distribution,
    ergodic_average,
    run_homogeneous,
    run_nonhomogeneous,
    run_product,
    verify_consistency,
)
from graphgame.chains import GapConditionError


def dist(*masses):
    return Distribution(np.array(masses, dtype=float))


def power_gap_quiet(c=1, e=3):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Schedule.power_gap(c, e)


TWO_STATE_KERNEL = build_kernel(dist(2 / 3, 1 / 3), path_graph(["a", "b"]))


class TestHomogeneous:
    def test_deterministic_replay(self):
        a = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 5000, seed=99)
        b = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 5000, seed=99)
        assert a.states.tobytes() == b.states.tobytes()
        c = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 5000, seed=100)
        assert a.states.tobytes() != c.states.tobytes()

    def test_identity_kernel_constant(self):
        kernel = TransitionKernel(np.eye(3), ("a", "b", "c"), 0.0)
        trace = run_homogeneous(kernel, dist(0.2, 0.5, 0.3), 1000, seed=4)
        assert np.all(trace.states == trace.states[0])

    def test_single_step_is_initial_draw(self):
        trace = run_homogeneous(TWO_STATE_KERNEL, dist(1.0, 0.0), 1, seed=0)
        assert trace.length == 1
        assert trace.states[0] == 0

    def test_long_run_hits_stationary_law(self):
        target = dist(2 / 3, 1 / 3)
        trace = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 10**6, seed=7)
        emp = empirical_distribution(trace)
        assert total_variation(emp, target) <= 0.01
        pi = stationary_distribution(TWO_STATE_KERNEL)
        assert np.allclose(pi, target.masses, atol=1e-12)
        assert total_variation(emp, Distribution(pi)) <= 0.01

    def test_consistency_replay(self):
        g = path_graph(["a", "b", "c", "d"])
        kernel = build_kernel(dist(0.4, 0.3, 0.2, 0.1), g)
        trace = run_homogeneous(kernel, dist(0.25, 0.25, 0.25, 0.25), 20000, seed=13)
        assert verify_consistency(trace, g)

    def test_init_shape_checked(self):
        with pytest.raises(ValueError):
            run_homogeneous(TWO_STATE_KERNEL, dist(1.0), 10, seed=0)


class TestNonhomogeneous:
    def test_single_step(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        trace = run_nonhomogeneous(
            mu, example_graph, power_gap_quiet(), dist(1, 0, 0, 0), 1, seed=3
        )
        assert trace.length == 1
        assert trace.state_labels == example_graph.labels
        assert trace.states[0] == 0

    def test_consistent_with_graph(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        trace = run_nonhomogeneous(
            mu,
            example_graph,
            power_gap_quiet(),
            dist(0.25, 0.25, 0.25, 0.25),
            50_000,
            seed=21,
        )
        assert verify_consistency(trace, example_graph)

    def test_empirical_approaches_target(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        trace = run_nonhomogeneous(
            mu,
            example_graph,
            power_gap_quiet(),
            dist(0.25, 0.25, 0.25, 0.25),
            400_000,
            seed=5,
        )
        assert total_variation(empirical_distribution(trace), mu) <= 0.12

    def test_counterexample_schedule_freezes(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        sched = Schedule.counterexample()
        stuck = 0
        for seed in range(10):
            trace = run_nonhomogeneous(
                mu, example_graph, sched, dist(1, 0, 0, 0), 20_000, seed=seed
            )
            if trace.counts[0] / trace.length >= 0.9:
                stuck += 1
        assert stuck >= 9

    def test_split_support_rejected(self):
        g = Graph(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
        with pytest.raises(SupportSplitError):
            run_nonhomogeneous(
                g=g,
                mu=dist(0.5, 0, 0.5, 0),
                schedule=power_gap_quiet(),
                init=dist(0.25, 0.25, 0.25, 0.25),
                steps=10,
                seed=0,
            )

    def test_init_confined_to_component(self):
        g = Graph(["a", "b", "c", "x", "y"], [("a", "b"), ("b", "c"), ("x", "y")])
        mu = dist(0.5, 0.0, 0.5, 0.0, 0.0)
        with pytest.raises(ValueError):
            run_nonhomogeneous(
                mu, g, power_gap_quiet(), dist(0, 0, 0, 0.5, 0.5), 10, seed=0
            )

    def test_restricted_component_counts(self):
        g = Graph(["a", "b", "c", "x", "y"], [("a", "b"), ("b", "c"), ("x", "y")])
        mu = dist(0.5, 0.0, 0.5, 0.0, 0.0)
        trace = run_nonhomogeneous(
            mu, g, power_gap_quiet(), dist(1.0, 0, 0, 0, 0), 5000, seed=1
        )
        assert trace.counts[3] == 0 and trace.counts[4] == 0
        assert verify_consistency(trace, g)


class TestProduct:
    def test_degenerate_product_equals_plain_run(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        sched = power_gap_quiet()
        init = dist(0.25, 0.25, 0.25, 0.25)
        direct = run_nonhomogeneous(mu, example_graph, sched, init, 9999, seed=17)
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=mu, graph=example_graph, schedule=sched, init=init),
            ),
            steps=9999,
            seed=17,
        )
        joint = run_product(spec)
        assert np.array_equal(joint.components[0].states, direct.states)

    def test_two_uniform_factors(self):
        k2a = complete_graph(["0", "1"])
        k2b = complete_graph(["x", "y"])
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=dist(0.5, 0.5), graph=k2a),
                ComponentSpec(target=dist(0.5, 0.5), graph=k2b),
            ),
            steps=200_000,
            seed=31,
        )
        joint = run_product(spec)
        target = Distribution(np.full(4, 0.25))
        assert total_variation(empirical_distribution(joint), target) <= 0.02
        prod_graph = strong_product([k2a, k2b])
        assert joint.state_labels == prod_graph.labels
        assert verify_consistency(joint, prod_graph)

    def test_components_reproducible_and_distinct(self):
        k2 = complete_graph(["0", "1"])
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=dist(0.5, 0.5), graph=k2),
                ComponentSpec(target=dist(0.5, 0.5), graph=k2),
            ),
            steps=4000,
            seed=55,
        )
        a = run_product(spec)
        b = run_product(spec)
        for ca, cb in zip(a.components, b.components):
            assert ca.states.tobytes() == cb.states.tobytes()
        assert a.components[0].states.tobytes() != a.components[1].states.tobytes()

    def test_point_mass_component_constant(self):
        g = path_graph(["a", "b", "c"])
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=dist(0, 1, 0), graph=g),
                ComponentSpec(target=dist(0.5, 0.5), graph=complete_graph(["x", "y"])),
            ),
            steps=500,
            seed=2,
        )
        joint = run_product(spec)
        assert np.all(joint.components[0].states == 1)
        emp = empirical_distribution(joint.components[0])
        assert emp.masses[1] == 1.0

    def test_joint_consistent_with_supergraphs(self):
        p2 = path_graph(["a", "b"])
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=dist(0.5, 0.5), graph=p2),
                ComponentSpec(target=dist(0.5, 0.5), graph=p2),
            ),
            steps=3000,
            seed=8,
        )
        joint = run_product(spec)
        base = strong_product([p2, p2])
        assert verify_consistency(joint, base)
        # adding edges can never break consistency
        extra = Graph(
            base.labels,
            sorted(tuple(sorted(e)) for e in (tuple(x) for x in base.edge_labels())),
        )
        assert verify_consistency(joint, extra)

    def test_split_component_rejected(self):
        g = Graph(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
        spec = ProductChainSpec(
            components=(ComponentSpec(target=dist(0.5, 0, 0.5, 0), graph=g),),
            steps=10,
            seed=0,
        )
        with pytest.raises(SupportSplitError):
            run_product(spec)

    def test_gap_condition_enforced(self, example_graph):
        mu = dist(0.5, 0.5, 0.0, 0.0)
        slow = Schedule.explicit(list(range(1, 50)))  # unit gaps
        spec = ProductChainSpec(
            components=(
                ComponentSpec(target=mu, graph=example_graph, schedule=slow),
            ),
            steps=40,
            seed=0,
            gap_c=1,
            gap_e=3,
        )
        with pytest.raises(GapConditionError):
            run_product(spec)


class TestAccumulators:
    def test_empirical_basics(self):
        trace = Trace(
            states=np.array([0, 1, 0, 1]),
            state_labels=("a", "b"),
            seed=0,
            counts=np.array([2, 2]),
        )
        emp = empirical_distribution(trace)
        assert np.array_equal(emp.masses, np.array([0.5, 0.5]))

    def test_counts_sum_exactly_in_rationals(self):
        trace = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 12345, seed=6)
        total = sum(Fraction(int(c), trace.length) for c in trace.counts)
        assert total == 1

    def test_ergodic_average_identities(self):
        trace = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 9999, seed=6)
        assert ergodic_average(trace, lambda s: 1.0) == 1.0
        emp = empirical_distribution(trace)
        ind = ergodic_average(trace, lambda s: 1.0 if s == "a" else 0.0)
        assert ind == emp.masses[list(trace.state_labels).index("a")]

    def test_ergodic_average_tracks_expectation(self):
        # a kernel targeting the level-k smoothing keeps the long-run average
        # of f within (1/k) * max|f| of the expectation under the base target
        mu = dist(0.5, 0.5, 0.0, 0.0)
        epsilon = 0.1
        k = 10  # ceil(1/epsilon)
        smoothed = smooth(mu, k).smoothed
        g = Graph(
            ["s1", "s2", "s3", "s4"], [("s1", "s3"), ("s3", "s4"), ("s2", "s4")]
        )
        kernel = build_kernel(smoothed, g)
        init = Distribution(
            np.array([smoothed.masses[g.index(lab)] for lab in kernel.state_labels])
        )
        f = {"s1": 2.0, "s2": -1.0, "s3": 0.5, "s4": 3.0}
        expectation_base = sum(f[lab] * mu.masses[g.index(lab)] for lab in g.labels)
        max_f = max(abs(v) for v in f.values())
        for seed in (11, 12, 13):
            trace = run_homogeneous(kernel, init, 500_000, seed=seed)
            avg = ergodic_average(trace, lambda s: f[s])
            assert abs(avg - expectation_base) <= epsilon * max_f

    def test_prefix_counts(self):
        trace = run_homogeneous(TWO_STATE_KERNEL, dist(0.5, 0.5), 100, seed=1)
        assert np.array_equal(trace.prefix_counts(trace.length), trace.counts)
        assert trace.prefix_counts(1).sum() == 1


class TestConsistencyCheck:
    def test_constant_trace(self):
        g = path_graph(["a", "b", "c"])
        trace = Trace(np.zeros(5, dtype=int), g.labels, 0, np.array([5, 0, 0]))
        assert verify_consistency(trace, g)

    def test_jump_detected(self):
        g = path_graph(["a", "b", "c"])
        trace = Trace(np.array([0, 2]), g.labels, 0, np.array([1, 0, 1]))
        assert not verify_consistency(trace, g)

    def test_relabeled_states(self):
        # trace labels ordered differently from the graph
        g = path_graph(["a", "b", "c"])
        trace = Trace(np.array([0, 1]), ("c", "b", "a"), 0, np.array([1, 1, 0]))
        assert verify_consistency(trace, g)


class TestImpossibility:
    def test_no_consistent_trace_spans_components(self):
        g = Graph(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
        comps = connected_components(g)
        assert len(comps) == 2
        # exhaustive enumeration of consistent traces of length 4
        comp_of = {}
        for comp in comps:
            for lab in comp:
                comp_of[lab] = comp
        all_traces = 0
        for walk in product(range(g.n), repeat=4):
            if all(
                g.adjacent_indices(walk[i], walk[i + 1]) for i in range(len(walk) - 1)
            ):
                all_traces += 1
                touched = {comp_of[g.labels[i]] is comps[0] for i in walk}
                assert len(touched) == 1
        assert all_traces > 0

    def test_reachability_closed_in_components(self):
        rng = random.Random(3)
        for _ in range(10):
            labels = [f"n{i}" for i in range(6)]
            edges = [("n0", "n1"), ("n2", "n3"), ("n4", "n5")]
            g = Graph(labels, edges)
            for comp in connected_components(g):
                for lab in comp:
                    i = g.index(lab)
                    reach = {i} | set(g.neighbors(i))
                    assert {g.labels[j] for j in reach} <= comp


class TestTVDecreasesWithHorizon:
    def test_majority_of_seeds_decrease(self):
        # "decreases with T": strictly lower at the final horizon than the
        # first, with at most one noise uptick along the decade grid
        g = path_graph(["a", "b", "c", "d", "e"])
        target = Distribution(np.full(5, 0.2))
        kernel = build_kernel(target, g)
        init = Distribution(np.full(5, 0.2))
        checkpoints = [10**3, 10**4, 10**5, 10**6]
        good = 0
        for seed in range(50):
            trace = run_homogeneous(kernel, init, checkpoints[-1], seed=seed)
            tvs = [
                total_variation(
                    Distribution(trace.prefix_counts(t) / t), target
                )
                for t in checkpoints
            ]
            upticks = sum(1 for a, b in zip(tvs, tvs[1:]) if not a > b)
            if tvs[-1] < tvs[0] and upticks <= 1:
                good += 1
        assert good >= 45
