"""Repeated play of games on decomposable strategy graphs.

Each coalition walks on its own factor graph: a stage strategy must be
adjacent-or-equal to the previous one in that factor. Under minimal
information a policy sees only the time and its own past strategies, so the
per-coalition processes are independent by construction; the engine gives
each coalition its own random stream and never shows a policy anything else.
Long-run average payoffs of kernel policies realize the expected payoff of
the mixed profile they target, which is what the deviation harness probes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .chains import (
    CaseLabel,
    Schedule,
    SmoothedKernelFamily,
    SupportSplitError,
    TransitionKernel,
    build_kernel,
    classify_case,
)
from .games import GGame, Profile, is_pure_c_equilibrium
from .graphs import (
    Decomposition,
    Graph,
    NotDecomposableError,
    factorize,
    induced_subgraph,
    strong_product,
)
from .mixed import (
    Distribution,
    MixedProfile,
    is_mixed_c_equilibrium,
    payoff_vector,
)
from .simulate import (
    Trace,
    UniformStream,
    component_streams,
    cumulative_row,
    cumulative_rows,
    draw_index,
)


class RepeatedError(Exception):
    """Invalid repeated-game configuration or execution."""


class ConsistencyViolationError(RepeatedError):
    """A policy emitted a strategy not adjacent to its previous one."""


class InfoModel(Enum):
    MAXIMAL = "maximal"
    MINIMAL = "minimal"


@dataclass(frozen=True)
class PlayersInit:
    """Initial strategies chosen by the coalitions themselves."""

    profile: Profile


@dataclass(frozen=True)
class RefereeInit:
    """Initial strategies assigned by a referee: either a fixed profile or
    per-coalition distributions drawn on each coalition's own stream."""

    profile: Profile | None = None
    distributions: tuple[Distribution, ...] | None = None

    def __post_init__(self) -> None:
        if (self.profile is None) == (self.distributions is None):
            raise ValueError("provide exactly one of profile or distributions")


def _next_hop_table(g: Graph, targets: set[int]) -> list[int | None]:
    """For each node, the deterministic neighbor one step closer to the
    target set (itself when already inside; None when unreachable)."""
    dist = [None] * g.n
    frontier = sorted(targets)
    hop: list[int | None] = [None] * g.n
    for i in frontier:
        dist[i] = 0
        hop[i] = i
    while frontier:
        nxt = []
        for node in frontier:
            for nb in sorted(g.neighbors(node)):
                if dist[nb] is None:
                    dist[nb] = dist[node] + 1
                    hop[nb] = node
                    nxt.append(nb)
        frontier = sorted(nxt)
    return hop


class Policy:
    """Rule producing a coalition's stage-t strategy from its own history.

    `step` must return a strategy adjacent-or-equal (in the coalition's
    factor graph) to `own_history[-1]`; `joint_history` is populated only
    under maximal information.
    """

    name = "policy"

    def step(
        self,
        t: int,
        own_history: Sequence[int],
        stream: UniformStream,
        joint_history: Sequence[Sequence[int]] | None = None,
    ) -> int:
        raise NotImplementedError


class ConstantPolicy(Policy):
    """Hold one strategy; walks a shortest path there first if started
    elsewhere."""

    def __init__(self, graph: Graph, atom: int, name: str | None = None):
        self.atom = atom
        self._hop = _next_hop_table(graph, {atom})
        self.name = name or f"constant[{graph.labels[atom]}]"

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        hop = self._hop[cur]
        if hop is None:
            raise RepeatedError("target strategy unreachable from the current one")
        return hop


class StationaryKernelPolicy(Policy):
    """Walk a fixed kernel defined on a subset of the factor's nodes,
    bridging toward that subset when started outside it."""

    name = "stationary-kernel"

    def __init__(self, graph: Graph, kernel: TransitionKernel):
        self.kernel = kernel
        self._cumrows = cumulative_rows(kernel.matrix)
        self._node_of_pos = [graph.index(lab) for lab in kernel.state_labels]
        self._pos_of_node: dict[int, int] = {
            node: pos for pos, node in enumerate(self._node_of_pos)
        }
        self._hop = _next_hop_table(graph, set(self._node_of_pos))

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        pos = self._pos_of_node.get(cur)
        if pos is None:
            hop = self._hop[cur]
            if hop is None:
                raise RepeatedError("kernel states unreachable from the current one")
            return hop
        nxt = draw_index(self._cumrows[pos], stream.next())
        return self._node_of_pos[nxt]


class ScheduledKernelPolicy(Policy):
    """Walk the smoothing-schedule kernels of one target on one factor."""

    name = "scheduled-kernel"

    def __init__(self, factor: Graph, family: SmoothedKernelFamily):
        self.family = family
        self.factor = factor
        self._factor_of_local = [factor.index(lab) for lab in family.graph.labels]
        self._local_of_factor: dict[int, int] = {
            node: local for local, node in enumerate(self._factor_of_local)
        }
        self._hop = _next_hop_table(factor, set(self._factor_of_local))
        self._tables: dict[int, tuple[list[list[float]], dict[int, int], list[int]]] = {}

    def _level_tables(self, level: int):
        cached = self._tables.get(level)
        if cached is None:
            kernel = self.family.kernel_for_level(level)
            local_of_pos = [
                self.family.graph.index(lab) for lab in kernel.state_labels
            ]
            pos_of_local = {local: pos for pos, local in enumerate(local_of_pos)}
            cached = (cumulative_rows(kernel.matrix), pos_of_local, local_of_pos)
            self._tables[level] = cached
        return cached

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        local = self._local_of_factor.get(cur)
        if local is None:
            hop = self._hop[cur]
            if hop is None:
                raise RepeatedError("chain component unreachable from the current one")
            return hop
        transition_time = t - 1
        schedule = self.family.schedule
        if transition_time < schedule.first_time:
            return cur
        level = schedule.smoothing_index(schedule.interval_index(transition_time))
        cumrows, pos_of_local, local_of_pos = self._level_tables(level)
        pos = draw_index(cumrows[pos_of_local[local]], stream.next())
        return self._factor_of_local[local_of_pos[pos]]


class ScriptedPolicy(Policy):
    """Replay a fixed strategy sequence (index 0 is the initial strategy)."""

    name = "scripted"

    def __init__(self, sequence: Sequence[int]):
        self.sequence = tuple(int(s) for s in sequence)

    def step(self, t, own_history, stream, joint_history=None):
        if t >= len(self.sequence):
            raise RepeatedError("script exhausted before the horizon")
        return self.sequence[t]


class CustomPolicy(Policy):
    """User callback; receives exactly what the information model allows."""

    def __init__(self, fn: Callable, name: str = "custom"):
        self._fn = fn
        self.name = name

    def step(self, t, own_history, stream, joint_history=None):
        return int(self._fn(t, own_history, stream, joint_history))


class LazyRandomWalkPolicy(Policy):
    """Stay with probability 1/2, else move to a uniform strict neighbor."""

    name = "lazy-walk"

    def __init__(self, graph: Graph):
        self._neighbors = [sorted(graph.neighbors(i)) for i in range(graph.n)]

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        nbrs = self._neighbors[cur]
        u = stream.next()
        if u < 0.5 or not nbrs:
            return cur
        idx = min(int((u - 0.5) * 2 * len(nbrs)), len(nbrs) - 1)
        return nbrs[idx]


class RandomWalkPolicy(Policy):
    """Uniform draw over the closed neighborhood (self plus neighbors)."""

    name = "walk"

    def __init__(self, graph: Graph):
        self._closed = [
            sorted(set(graph.neighbors(i)) | {i}) for i in range(graph.n)
        ]

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        options = self._closed[cur]
        idx = min(int(stream.next() * len(options)), len(options) - 1)
        return options[idx]


class MyopicGreedyPolicy(Policy):
    """Best reply among adjacent strategies against a uniform belief on the
    other coalitions, as if every round were the last; ties break low."""

    name = "myopic-greedy"

    def __init__(self, graph: Graph, weights: np.ndarray):
        self._weights = np.asarray(weights, dtype=float)
        self._closed = [
            sorted(set(graph.neighbors(i)) | {i}) for i in range(graph.n)
        ]

    @classmethod
    def for_coalition(cls, game: GGame, decomposition: Decomposition, coalition: int):
        weights = payoff_vector(game, MixedProfile.uniform(game), coalition)
        return cls(decomposition.factors[coalition], weights)

    def step(self, t, own_history, stream, joint_history=None):
        cur = own_history[-1]
        best = cur
        best_value = -np.inf
        for cand in self._closed[cur]:
            value = self._weights[cand]
            if value > best_value:
                best = cand
                best_value = value
        return best


def decompose_game(game: GGame) -> Decomposition:
    """Factorize the game graph over the coalition strategy spaces; raises
    NotDecomposableError when no factorization exists."""
    dec = factorize(game.graph, game.spaces)
    if dec is None:
        raise NotDecomposableError(
            "the game graph is not the strong product of per-coalition factors"
        )
    return dec


@dataclass(frozen=True)
class RepeatedConfig:
    """A repeated game ready to run: decomposition, policies, information
    model, initial-strategy rule, and horizon (None means open-ended,
    evaluated over `t_eval` stages)."""

    game: GGame
    decomposition: Decomposition
    policies: tuple[Policy, ...]
    init: PlayersInit | RefereeInit
    info: InfoModel = InfoModel.MINIMAL
    horizon: int | None = None
    t_eval: int = 10_000

    def __post_init__(self) -> None:
        game = self.game
        if len(self.policies) != game.r:
            raise ValueError("one policy per coalition required")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.horizon is None and self.t_eval < 1:
            raise ValueError("t_eval must be positive")
        factors = self.decomposition.factors
        if len(factors) != game.r:
            raise ValueError("decomposition arity does not match the game")
        for h, factor in enumerate(factors):
            if factor.labels != game.spaces[h]:
                raise ValueError(
                    f"factor {h} nodes do not match the coalition strategy space"
                )
        rebuilt = strong_product(list(factors))
        if set(rebuilt.labels) != set(game.graph.labels) or rebuilt.edge_labels() != game.graph.edge_labels():
            raise ValueError("decomposition does not reproduce the game graph")
        if isinstance(self.init, PlayersInit):
            game.validate_profile(self.init.profile)
        elif self.init.profile is not None:
            game.validate_profile(self.init.profile)
        else:
            dists = self.init.distributions
            if dists is None or len(dists) != game.r:
                raise ValueError("one referee distribution per coalition required")
            for h, d in enumerate(dists):
                if d.n != game.dims[h]:
                    raise ValueError(f"referee distribution {h} has wrong size")

    @property
    def stages(self) -> int:
        return self.horizon if self.horizon is not None else self.t_eval


def _initial_strategy(config: RepeatedConfig, h: int, stream: UniformStream) -> int:
    init = config.init
    if isinstance(init, PlayersInit):
        return init.profile[h]
    if init.profile is not None:
        return init.profile[h]
    return draw_index(cumulative_row(init.distributions[h].masses), stream.next())


def _check_move(factor: Graph, h: int, prev: int, nxt: int, t: int) -> None:
    if not 0 <= nxt < factor.n:
        raise ConsistencyViolationError(
            f"coalition {h} emitted strategy index {nxt} outside its space at stage {t}"
        )
    if not factor.adjacent_indices(prev, nxt):
        raise ConsistencyViolationError(
            f"coalition {h} jumped {factor.labels[prev]} -> {factor.labels[nxt]} "
            f"at stage {t}; the strategies are not adjacent"
        )


def _simulate_component(
    config: RepeatedConfig,
    h: int,
    policy: Policy,
    stream: UniformStream,
    stages: int,
) -> np.ndarray:
    """Run one coalition alone; valid only under minimal information."""
    factor = config.decomposition.factors[h]
    history = [_initial_strategy(config, h, stream)]
    step = policy.step
    for t in range(1, stages):
        nxt = step(t, history, stream)
        _check_move(factor, h, history[-1], nxt, t)
        history.append(nxt)
    return np.asarray(history, dtype=np.int64)


def _simulate_lockstep(
    config: RepeatedConfig, streams: list[UniformStream], stages: int
) -> list[np.ndarray]:
    factors = config.decomposition.factors
    histories: list[list[int]] = [
        [_initial_strategy(config, h, streams[h])] for h in range(config.game.r)
    ]
    for t in range(1, stages):
        for h, policy in enumerate(config.policies):
            joint = histories if config.info is InfoModel.MAXIMAL else None
            nxt = policy.step(t, histories[h], streams[h], joint_history=joint)
            _check_move(factors[h], h, histories[h][-1], nxt, t)
            histories[h].append(nxt)
    return [np.asarray(hist, dtype=np.int64) for hist in histories]


def _joint_trace(
    config: RepeatedConfig, factor_states: list[np.ndarray], seed: int
) -> Trace:
    game = config.game
    dims = game.dims
    joint = np.ravel_multi_index(factor_states, dims)
    labels = tuple(GGame.joint_labels(game.spaces))
    components = tuple(
        Trace(
            arr,
            config.decomposition.factors[h].labels,
            seed,
            np.bincount(arr, minlength=dims[h]),
        )
        for h, arr in enumerate(factor_states)
    )
    counts = np.bincount(joint, minlength=int(np.prod(dims)))
    return Trace(joint, labels, seed, counts, components=components)


def _stage_payoffs(game: GGame, factor_states: list[np.ndarray], coalition: int) -> np.ndarray:
    return game.payoffs[coalition][tuple(factor_states)]


def repeated_payoff(
    trace: Trace, game: GGame, coalition: int, horizon: int | None
) -> float:
    """Average stage payoff over a finite horizon, or the tail estimate of
    the limit-inferior average when the horizon is open-ended.

    The open-ended estimate is the minimum running average over the second
    half of the trace; for converging policies it agrees with the final
    average up to noise, and a gap flags non-convergence.
    """
    if trace.components is None:
        raise ValueError("need a joint trace with per-coalition components")
    factor_states = [c.states for c in trace.components]
    if horizon is not None:
        if horizon < 1 or horizon > trace.length:
            raise ValueError("horizon exceeds the trace length")
        stage = _stage_payoffs(game, [s[:horizon] for s in factor_states], coalition)
        labels = tuple(GGame.joint_labels(game.spaces))
        # exact identity with the count-weighted ergodic average
        counts = np.bincount(
            np.ravel_multi_index([s[:horizon] for s in factor_states], game.dims),
            minlength=len(labels),
        )
        pay = game.payoffs[coalition].reshape(-1)
        total = 0.0
        for idx, count in enumerate(counts.tolist()):
            if count:
                total += pay[idx] * count
        return total / horizon
    stage = _stage_payoffs(game, factor_states, coalition)
    running = np.cumsum(stage) / np.arange(1, stage.size + 1)
    start = stage.size // 2
    return float(running[start:].min())


def final_average_payoff(trace: Trace, game: GGame, coalition: int) -> float:
    return repeated_payoff(trace, game, coalition, horizon=trace.length)


@dataclass(frozen=True)
class CoalitionPayoff:
    final_average: float
    tail_liminf: float | None


@dataclass(frozen=True)
class PayoffReport:
    per_coalition: tuple[CoalitionPayoff, ...]


def simulate_repeated(config: RepeatedConfig, seed: int) -> tuple[Trace, PayoffReport]:
    """Run the repeated game and report per-coalition payoffs.

    Coalition h consumes the h-th stream spawned from `seed`: one draw for a
    referee-distribution start, then whatever its policy draws per stage.
    """
    stages = config.stages
    streams = component_streams(seed, config.game.r)
    if config.info is InfoModel.MINIMAL:
        factor_states = [
            _simulate_component(config, h, policy, streams[h], stages)
            for h, policy in enumerate(config.policies)
        ]
    else:
        factor_states = _simulate_lockstep(config, streams, stages)
    trace = _joint_trace(config, factor_states, seed)
    per = []
    for h in range(config.game.r):
        final = final_average_payoff(trace, config.game, h)
        tail = (
            repeated_payoff(trace, config.game, h, horizon=None)
            if config.horizon is None
            else None
        )
        per.append(CoalitionPayoff(final_average=final, tail_liminf=tail))
    return trace, PayoffReport(per_coalition=tuple(per))


def equilibrium_policies(
    game: GGame,
    decomposition: Decomposition,
    mixed: MixedProfile,
    schedule_factory: Callable[[], Schedule] | None = None,
) -> tuple[Policy, ...]:
    """One chain policy per coalition whose empirical law realizes its part
    of a certified mixed equilibrium on its factor graph.

    Point masses become constant policies; connected supports get a fixed
    kernel on the support; disconnected supports inside one factor component
    get the smoothing schedule (default power-gap)."""
    if not is_mixed_c_equilibrium(game, mixed, tol=1e-6):
        raise ValueError("profile is not a certified mixed equilibrium")
    policies: list[Policy] = []
    for h in range(game.r):
        factor = decomposition.factors[h]
        target = mixed.parts[h]
        case = classify_case(factor, target)
        if case is CaseLabel.POINT_MASS:
            policies.append(ConstantPolicy(factor, target.support()[0]))
        elif case is CaseLabel.SUPPORT_CONNECTED:
            support = [factor.labels[i] for i in target.support()]
            sub = induced_subgraph(factor, support)
            keep = [factor.index(lab) for lab in sub.labels]
            kernel = build_kernel(Distribution(target.masses[keep]), sub)
            policies.append(StationaryKernelPolicy(factor, kernel))
        elif case is CaseLabel.SUPPORT_IN_COMPONENT:
            schedule = (
                schedule_factory() if schedule_factory is not None else Schedule.power_gap()
            )
            family = SmoothedKernelFamily(target, factor, schedule)
            policies.append(ScheduledKernelPolicy(factor, family))
        else:
            raise SupportSplitError(
                f"coalition {h}: support spans several factor components; "
                "no consistent realization exists"
            )
    return tuple(policies)


def stock_deviation_policies(
    game: GGame, decomposition: Decomposition, coalition: int
) -> tuple[Policy, ...]:
    """The five standard probes: both extreme constants, lazy and plain
    random walks, and the myopic greedy reply."""
    factor = decomposition.factors[coalition]
    return (
        ConstantPolicy(factor, 0),
        ConstantPolicy(factor, factor.n - 1),
        LazyRandomWalkPolicy(factor),
        RandomWalkPolicy(factor),
        MyopicGreedyPolicy.for_coalition(game, decomposition, coalition),
    )


@dataclass(frozen=True)
class DeviationReport:
    coalition: int
    policy_name: str
    equilibrium_mean: float
    deviation_mean: float
    equilibrium_stderr: float
    deviation_stderr: float
    paired_stderr: float
    margin: float
    improved: bool

    @property
    def verdict(self) -> str:
        return "Improved" if self.improved else "NotImproved"


def deviation_test(
    config: RepeatedConfig,
    coalition: int,
    deviation: Policy,
    t_eval: int,
    replicas: int,
    seed: int,
    margin_scale: float = 3.0,
) -> DeviationReport:
    """Compare one coalition's mean payoff under a deviation policy against
    its equilibrium policy across paired replicas.

    Each replica spawns one stream per coalition; the deviation reuses the
    deviating coalition's stream while the other coalitions' paths are
    shared between the two arms, which pairs the comparison and keeps the
    deviation independent of their randomness.
    """
    if config.info is not InfoModel.MINIMAL:
        raise ValueError("deviation testing requires minimal information")
    if replicas < 2:
        raise ValueError("need at least two replicas for a standard error")
    game = config.game
    r = game.r
    eq_means = np.empty(replicas)
    dev_means = np.empty(replicas)
    replica_seeds = np.random.SeedSequence(seed).spawn(replicas)
    for i, replica_seed in enumerate(replica_seeds):
        children = replica_seed.spawn(r)
        base_streams = [UniformStream(np.random.default_rng(c)) for c in children]
        states = [
            _simulate_component(config, h, config.policies[h], base_streams[h], t_eval)
            for h in range(r)
        ]
        eq_means[i] = float(_stage_payoffs(game, states, coalition).mean())
        dev_stream = UniformStream(np.random.default_rng(children[coalition]))
        dev_states = list(states)
        dev_states[coalition] = _simulate_component(
            config, coalition, deviation, dev_stream, t_eval
        )
        dev_means[i] = float(_stage_payoffs(game, dev_states, coalition).mean())
    diffs = dev_means - eq_means
    paired_stderr = float(diffs.std(ddof=1) / np.sqrt(replicas))
    margin = margin_scale * paired_stderr
    eq_mean = float(eq_means.mean())
    dev_mean = float(dev_means.mean())
    return DeviationReport(
        coalition=coalition,
        policy_name=deviation.name,
        equilibrium_mean=eq_mean,
        deviation_mean=dev_mean,
        equilibrium_stderr=float(eq_means.std(ddof=1) / np.sqrt(replicas)),
        deviation_stderr=float(dev_means.std(ddof=1) / np.sqrt(replicas)),
        paired_stderr=paired_stderr,
        margin=margin,
        improved=bool(dev_mean > eq_mean + margin),
    )


def two_stage_check(game: GGame, sbar: Profile, decomposition: Decomposition) -> bool:
    """With a referee placing play at a pure equilibrium and full information,
    no coalition can profit at the single remaining stage by moving to an
    adjacent strategy in its factor: check that neighborhood optimality."""
    if not is_pure_c_equilibrium(game, sbar):
        raise ValueError("profile is not a pure equilibrium")
    for h in range(game.r):
        factor = decomposition.factors[h]
        base = game.payoff(h, sbar)
        for cand in factor.neighbors(sbar[h]) | {sbar[h]}:
            candidate = sbar[:h] + (cand,) + sbar[h + 1 :]
            if game.payoff(h, candidate) > base:
                return False
    return True
