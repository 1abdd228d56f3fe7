"""File formats: JSON graphs/games/targets/profiles, CSV kernels and traces.

All writers are deterministic: keys are sorted, floats carry 17 significant
digits (enough to round-trip float64 exactly), and no timestamps appear, so
re-running a command reproduces its outputs byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .chains import TransitionKernel
from .games import CoalitionStructure, GGame
from .graphs import Graph
from .mixed import Distribution, MixedProfile
from .simulate import Trace


class FormatError(Exception):
    """Malformed input file."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def dump_json(payload: Any, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def coalition_name(index: int) -> str:
    return f"C{index + 1}"


# -- graphs -----------------------------------------------------------------

def graph_to_dict(g: Graph) -> dict:
    edges = sorted(
        sorted(tuple(e)) for e in (tuple(x) for x in g.edge_labels())
    )
    return {"nodes": list(g.labels), "edges": [list(e) for e in edges]}


def graph_from_dict(data: dict) -> Graph:
    try:
        nodes = data["nodes"]
        edges = data["edges"]
    except (TypeError, KeyError) as exc:
        raise FormatError("graph document needs 'nodes' and 'edges'") from exc
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise FormatError("graph 'nodes' must be a list of strings")
    pairs = []
    for e in edges:
        if not isinstance(e, list) or len(e) != 2:
            raise FormatError(f"edge {e!r} is not a two-element list")
        pairs.append((e[0], e[1]))
    try:
        return Graph(nodes, pairs)
    except Exception as exc:
        raise FormatError(str(exc)) from exc


def load_graph(path: Path) -> Graph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return graph_from_dict(data)


def dump_graph(g: Graph, path: Path) -> None:
    dump_json(graph_to_dict(g), path)


# -- games ------------------------------------------------------------------

def load_game(path: Path) -> GGame:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return game_from_dict(data, base_dir=path.parent)


def game_from_dict(data: dict, base_dir: Path | None = None) -> GGame:
    if not isinstance(data, dict):
        raise FormatError("game document must be a JSON object")
    players_field = data.get("players")
    if isinstance(players_field, int):
        players = tuple(range(1, players_field + 1))
    elif isinstance(players_field, list):
        players = tuple(int(p) for p in players_field)
    else:
        raise FormatError("'players' must be a count or a list of ids")
    coalitions = data.get("coalitions")
    if not isinstance(coalitions, list) or not coalitions:
        raise FormatError("'coalitions' must be a nonempty list of player lists")
    try:
        structure = CoalitionStructure(
            players, tuple(tuple(int(p) for p in c) for c in coalitions)
        )
    except ValueError as exc:
        raise FormatError(f"bad coalition structure: {exc}") from exc
    strategies = data.get("strategies")
    if (
        not isinstance(strategies, list)
        or len(strategies) != structure.r
        or not all(isinstance(s, list) and s for s in strategies)
    ):
        raise FormatError("'strategies' must list one nonempty space per coalition")
    spaces = tuple(tuple(str(x) for x in space) for space in strategies)
    dims = tuple(len(s) for s in spaces)
    total = int(np.prod(dims))

    def parse_tensors(field: str, count: int) -> tuple[np.ndarray, ...] | None:
        raw = data.get(field)
        if raw is None:
            return None
        if not isinstance(raw, list) or len(raw) != count:
            raise FormatError(f"'{field}' must list {count} flat payoff arrays")
        out = []
        for i, flat in enumerate(raw):
            if not isinstance(flat, list) or len(flat) != total:
                raise FormatError(
                    f"'{field}'[{i}] must hold {total} values (row-major over "
                    f"the coalition strategy spaces)"
                )
            out.append(np.array(flat, dtype=float).reshape(dims))
        return tuple(out)

    payoffs = parse_tensors("payoffs", structure.r)
    player_payoffs = parse_tensors("player_payoffs", len(players))
    if payoffs is None and player_payoffs is None:
        raise FormatError("provide 'payoffs' or 'player_payoffs'")

    graph_field = data.get("graph")
    if isinstance(graph_field, str):
        base = base_dir if base_dir is not None else Path(".")
        graph = load_graph(base / graph_field)
    elif isinstance(graph_field, dict):
        graph = graph_from_dict(graph_field)
    else:
        raise FormatError("'graph' must be inline or a file reference")
    try:
        return GGame(structure, spaces, payoffs, graph, player_payoffs=player_payoffs)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def game_to_dict(game: GGame) -> dict:
    return {
        "players": list(game.structure.players),
        "coalitions": [list(c) for c in game.structure.coalitions],
        "strategies": [list(s) for s in game.spaces],
        "payoffs": [t.reshape(-1).tolist() for t in game.payoffs],
        "graph": graph_to_dict(game.graph),
    }


# -- distributions ----------------------------------------------------------

def load_target(path: Path, g: Graph) -> Distribution:
    """Target file: JSON object mapping node label to mass (or under a
    'masses' key); unlisted nodes carry zero mass."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    if isinstance(data, dict) and isinstance(data.get("masses"), dict):
        data = data["masses"]
    if not isinstance(data, dict):
        raise FormatError("target document must map node labels to masses")
    masses = np.zeros(g.n)
    for label, value in data.items():
        try:
            masses[g.index(label)] = float(value)
        except Exception as exc:
            raise FormatError(f"bad target entry {label!r}: {exc}") from exc
    try:
        return Distribution(masses)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def mixed_to_dict(profile: MixedProfile) -> dict:
    return {
        coalition_name(h): [float(x) for x in part.masses]
        for h, part in enumerate(profile.parts)
    }


def mixed_from_dict(data: dict, game: GGame) -> MixedProfile:
    parts = []
    for h in range(game.r):
        key = coalition_name(h)
        if key not in data:
            raise FormatError(f"mixed profile missing {key}")
        parts.append(Distribution(np.array(data[key], dtype=float)))
    return MixedProfile(tuple(parts))


# -- CSV artifacts ----------------------------------------------------------

def dump_kernel_csv(kernel: TransitionKernel, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(kernel.state_labels)
        for row in kernel.matrix:
            writer.writerow([fmt_float(x) for x in row])


def load_kernel_csv(path: Path) -> tuple[tuple[str, ...], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty kernel file")
    labels = tuple(rows[0])
    matrix = np.array([[float(x) for x in row] for row in rows[1:]])
    if matrix.shape != (len(labels), len(labels)):
        raise FormatError("kernel matrix shape does not match its header")
    return labels, matrix


def dump_trace_csv(trace: Trace, path: Path) -> None:
    """Columns: t plus one state label per component (single column for a
    plain trace)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if trace.components is None:
            writer.writerow(["t", "state"])
            labels = trace.state_labels
            for t, s in enumerate(trace.states.tolist()):
                writer.writerow([t, labels[s]])
        else:
            writer.writerow(
                ["t"] + [f"state_{coalition_name(h)}" for h in range(len(trace.components))]
            )
            columns = [c.states.tolist() for c in trace.components]
            label_sets = [c.state_labels for c in trace.components]
            for t in range(trace.length):
                writer.writerow(
                    [t] + [label_sets[h][columns[h][t]] for h in range(len(columns))]
                )


def dump_empirical_csv(trace: Trace, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["state", "count", "frequency"])
        for label, count in zip(trace.state_labels, trace.counts.tolist()):
            writer.writerow([label, count, fmt_float(count / trace.length)])


def dump_series_csv(rows: Iterable[tuple], header: tuple[str, ...], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [fmt_float(x) if isinstance(x, float) else x for x in row]
            )
