"""Seeded execution of homogeneous, schedule-driven, and product chains.

A trace records T states X(0..T-1); X(0) is drawn from the initial
distribution and the transition at time t uses the kernel in force at t.
Every sampler consumes uniforms from one numpy Generator per chain in a
fixed order (initial draw first, then one per step), so replays are
byte-identical and product components are independent spawned streams.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chains import (
    CaseLabel,
    GapConditionError,
    Schedule,
    SmoothedKernelFamily,
    SupportSplitError,
    TransitionKernel,
    build_kernel,
    classify_case,
)
from .graphs import Graph, induced_subgraph
from .mixed import Distribution


@dataclass(frozen=True)
class Trace:
    """A realized path over `state_labels`, with exact integer counts."""

    states: np.ndarray
    state_labels: tuple[str, ...]
    seed: int
    counts: np.ndarray
    components: tuple["Trace", ...] | None = None

    @property
    def length(self) -> int:
        return int(self.states.size)

    def prefix_counts(self, t: int) -> np.ndarray:
        """Counts over the first t states only."""
        if not 1 <= t <= self.length:
            raise ValueError("prefix length out of range")
        return np.bincount(self.states[:t], minlength=len(self.state_labels))


class UniformStream:
    """Buffered float64 uniforms from one generator.

    numpy draws the same value sequence whether asked singly or in blocks,
    so buffering never changes what a consumer sees.
    """

    def __init__(self, rng: np.random.Generator, chunk: int = 8192):
        self._rng = rng
        self._chunk = chunk
        self._buf: list[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._rng.random(self._chunk).tolist()
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return value

    def take(self, n: int) -> list[float]:
        out: list[float] = []
        while n > 0:
            if self._pos == len(self._buf):
                if n >= self._chunk:
                    out.extend(self._rng.random(n).tolist())
                    return out
                self._buf = self._rng.random(self._chunk).tolist()
                self._pos = 0
            grab = min(len(self._buf) - self._pos, n)
            out.extend(self._buf[self._pos : self._pos + grab])
            self._pos += grab
            n -= grab
        return out


def make_stream(seed: int) -> UniformStream:
    return UniformStream(np.random.default_rng(np.random.SeedSequence(seed)))


def spawn_streams(seed: int, count: int) -> list[UniformStream]:
    """Independent child streams derived from one master seed."""
    return [
        UniformStream(np.random.default_rng(child))
        for child in np.random.SeedSequence(seed).spawn(count)
    ]


def component_streams(seed: int, count: int) -> list[UniformStream]:
    """Streams for multi-component engines: a single component consumes the
    master stream directly, so a degenerate product replays the plain chain
    byte for byte; several components get independent spawned streams."""
    if count == 1:
        return [make_stream(seed)]
    return spawn_streams(seed, count)


def cumulative_row(masses: np.ndarray) -> list[float]:
    cum = np.cumsum(np.asarray(masses, dtype=float))
    cum[-1] = 1.0  # guard against rounding so a draw can never overflow
    return cum.tolist()


def cumulative_rows(matrix: np.ndarray) -> list[list[float]]:
    cum = np.cumsum(matrix, axis=1)
    cum[:, -1] = 1.0
    return [row.tolist() for row in cum]


def draw_index(cum: list[float], u: float) -> int:
    return bisect_right(cum, u)


def _advance(
    cumrows: list[list[float]],
    state: int,
    uniforms: list[float],
    out: np.ndarray,
    offset: int,
) -> int:
    i = offset
    for u in uniforms:
        state = bisect_right(cumrows[state], u)
        out[i] = state
        i += 1
    return state


def run_homogeneous(
    kernel: TransitionKernel, init: Distribution, steps: int, seed: int
) -> Trace:
    """Fixed-kernel chain of `steps` states over the kernel's label order."""
    if steps < 1:
        raise ValueError("need at least one step")
    if init.n != kernel.n:
        raise ValueError("initial distribution does not match the kernel states")
    stream = make_stream(seed)
    states = np.empty(steps, dtype=np.int64)
    state = draw_index(cumulative_row(init.masses), stream.next())
    states[0] = state
    if steps > 1:
        _advance(
            cumulative_rows(kernel.matrix), state, stream.take(steps - 1), states, 1
        )
    counts = np.bincount(states, minlength=kernel.n)
    return Trace(states, kernel.state_labels, seed, counts)


class _ScheduledSampler:
    """Stepwise sampler for a smoothing-schedule chain on one graph.

    Operates on the component-restricted node order of its kernel family;
    per-level permutation arrays translate between node order and each
    kernel's mass-sorted order.
    """

    def __init__(self, family: SmoothedKernelFamily):
        self.family = family
        self.schedule = family.schedule
        self._per_level: dict[int, tuple[list[list[float]], np.ndarray, np.ndarray]] = {}

    def tables(self, level: int) -> tuple[list[list[float]], np.ndarray, np.ndarray]:
        cached = self._per_level.get(level)
        if cached is None:
            kernel = self.family.kernel_for_level(level)
            labels = self.family.graph.labels
            pos_of_node = np.empty(len(labels), dtype=np.int64)
            for pos, lab in enumerate(kernel.state_labels):
                pos_of_node[self.family.graph.index(lab)] = pos
            node_of_pos = np.argsort(pos_of_node)
            cached = (cumulative_rows(kernel.matrix), pos_of_node, node_of_pos)
            self._per_level[level] = cached
        return cached

    def run(self, start_node: int, steps: int, stream: UniformStream, out: np.ndarray) -> None:
        """Fill out[0:steps] with node-order states, starting at start_node."""
        out[0] = start_node
        filled = 1
        t = 0  # transition time producing out[filled]
        first = self.schedule.first_time
        node = start_node
        while filled < steps:
            if t < first:
                hold = min(first - t, steps - filled)
                out[filled : filled + hold] = node
                filled += hold
                t += hold
                continue
            interval = self.schedule.interval_index(t)
            level = self.schedule.smoothing_index(interval)
            # merge consecutive intervals sharing a smoothing level
            end = self.schedule.interval_end(interval)
            while end is not None and end - t < steps - filled:
                if self.schedule.smoothing_index(interval + 1) != level:
                    break
                interval += 1
                end = self.schedule.interval_end(interval)
            count = steps - filled if end is None else min(end - t, steps - filled)
            cumrows, pos_of_node, node_of_pos = self.tables(level)
            pos = int(pos_of_node[node])
            pos = _advance(cumrows, pos, stream.take(count), out, filled)
            out[filled : filled + count] = node_of_pos[out[filled : filled + count]]
            node = int(out[filled + count - 1])
            filled += count
            t += count


def run_nonhomogeneous(
    mu: Distribution,
    g: Graph,
    schedule: Schedule,
    init: Distribution,
    steps: int,
    seed: int,
) -> Trace:
    """Schedule-driven chain for a target whose support is disconnected
    inside one component of `g`; states reported in the full node order."""
    if steps < 1:
        raise ValueError("need at least one step")
    if init.n != g.n:
        raise ValueError("initial distribution does not match the graph")
    family = SmoothedKernelFamily(mu, g, schedule)
    sub = family.graph
    keep = [g.index(lab) for lab in sub.labels]
    if abs(float(init.masses[keep].sum()) - 1.0) > 1e-12:
        raise ValueError(
            "initial distribution must be confined to the component carrying the target"
        )
    stream = make_stream(seed)
    start_local = draw_index(cumulative_row(init.masses[keep]), stream.next())
    local = np.empty(steps, dtype=np.int64)
    _ScheduledSampler(family).run(start_local, steps, stream, local)
    states = np.asarray(keep, dtype=np.int64)[local] if sub.n != g.n else local
    counts = np.bincount(states, minlength=g.n)
    return Trace(states, g.labels, seed, counts)


@dataclass(frozen=True)
class ComponentSpec:
    """One factor of a product chain: target and graph, plus the switch
    schedule used when the target needs smoothing."""

    target: Distribution
    graph: Graph
    schedule: Schedule | None = None
    init: Distribution | None = None  # defaults to the target


@dataclass(frozen=True)
class ProductChainSpec:
    components: tuple[ComponentSpec, ...]
    steps: int
    seed: int
    gap_c: int = 1
    gap_e: int = 3


def _run_component(
    comp: ComponentSpec, steps: int, stream: UniformStream, spec: ProductChainSpec
) -> np.ndarray:
    """States over the component's full node order, consuming exactly one
    initial draw plus one uniform per transition."""
    g = comp.graph
    target = comp.target
    init = comp.init if comp.init is not None else target
    if init.n != g.n or target.n != g.n:
        raise ValueError("component distributions must match the factor graph")
    case = classify_case(g, target)
    states = np.empty(steps, dtype=np.int64)
    if case is CaseLabel.POINT_MASS:
        start = draw_index(cumulative_row(init.masses), stream.next())
        atom = target.support()[0]
        if start != atom:
            raise ValueError("point-mass component must start at its atom")
        states[:] = atom
        return states
    if case is CaseLabel.SUPPORT_CONNECTED:
        support = [g.labels[i] for i in target.support()]
        sub = induced_subgraph(g, support)
        keep = [g.index(lab) for lab in sub.labels]
        if abs(float(init.masses[keep].sum()) - 1.0) > 1e-12:
            raise ValueError("initial distribution must live on the target support")
        kernel = build_kernel(Distribution(target.masses[keep]), sub)
        pos_of_keep = {lab: pos for pos, lab in enumerate(kernel.state_labels)}
        init_kernel_order = np.array(
            [init.masses[g.index(lab)] for lab in kernel.state_labels]
        )
        state = draw_index(cumulative_row(init_kernel_order), stream.next())
        states[0] = state
        if steps > 1:
            _advance(cumulative_rows(kernel.matrix), state, stream.take(steps - 1), states, 1)
        full_of_pos = np.array(
            [g.index(lab) for lab in kernel.state_labels], dtype=np.int64
        )
        return full_of_pos[states]
    if case is CaseLabel.SUPPORT_SPLIT:
        raise SupportSplitError(
            "component target support spans several factor components"
        )
    schedule = comp.schedule
    if schedule is None:
        raise ValueError(
            "a schedule is required when the component target needs smoothing"
        )
    if not schedule.gap_ok(spec.gap_c, spec.gap_e, horizon=steps):
        raise GapConditionError(
            f"schedule {schedule.label} violates the gap bound "
            f"{spec.gap_c} * l**{spec.gap_e} below horizon {steps}"
        )
    family = SmoothedKernelFamily(target, g, schedule)
    sub = family.graph
    keep = [g.index(lab) for lab in sub.labels]
    if abs(float(init.masses[keep].sum()) - 1.0) > 1e-12:
        raise ValueError(
            "initial distribution must be confined to the component carrying the target"
        )
    start_local = draw_index(cumulative_row(init.masses[keep]), stream.next())
    local = np.empty(steps, dtype=np.int64)
    _ScheduledSampler(family).run(start_local, steps, stream, local)
    return np.asarray(keep, dtype=np.int64)[local] if sub.n != g.n else local


def run_product(spec: ProductChainSpec) -> Trace:
    """Independent per-component chains assembled into a joint trace.

    The joint trace is indexed over the row-major product of the factor node
    orders, matching the strong product's label order; it is consistent with
    the strong product graph by construction.
    """
    if spec.steps < 1:
        raise ValueError("need at least one step")
    if not spec.components:
        raise ValueError("need at least one component")
    streams = component_streams(spec.seed, len(spec.components))
    factor_states = [
        _run_component(comp, spec.steps, stream, spec)
        for comp, stream in zip(spec.components, streams)
    ]
    dims = tuple(comp.graph.n for comp in spec.components)
    joint = np.ravel_multi_index(factor_states, dims)
    from itertools import product as iproduct

    from .graphs import TUPLE_SEP

    joint_labels = tuple(
        TUPLE_SEP.join(combo)
        for combo in iproduct(*(comp.graph.labels for comp in spec.components))
    )
    component_traces = tuple(
        Trace(
            arr,
            comp.graph.labels,
            spec.seed,
            np.bincount(arr, minlength=comp.graph.n),
        )
        for comp, arr in zip(spec.components, factor_states)
    )
    counts = np.bincount(joint, minlength=int(np.prod(dims)))
    return Trace(joint, joint_labels, spec.seed, counts, components=component_traces)


def empirical_distribution(trace: Trace) -> Distribution:
    """Visit frequencies; the integer counts always sum to the trace length."""
    return Distribution(trace.counts / trace.length)


def ergodic_average(trace: Trace, f: Callable[[str], float]) -> float:
    """Average of f along the trace, computed from the exact counts so it
    equals the frequency-weighted sum identically."""
    total = 0.0
    for label, count in zip(trace.state_labels, trace.counts.tolist()):
        if count:
            total += f(label) * count
    return total / trace.length


def verify_consistency(trace: Trace, g: Graph) -> bool:
    """Every consecutive pair of states is adjacent-or-equal in `g`."""
    if trace.length <= 1:
        return True
    perm = np.array([g.index(lab) for lab in trace.state_labels], dtype=np.int64)
    seq = perm[trace.states]
    adjacent = np.eye(g.n, dtype=bool)
    for i, j in g.edge_indices:
        adjacent[i, j] = True
        adjacent[j, i] = True
    return bool(np.all(adjacent[seq[:-1], seq[1:]]))
