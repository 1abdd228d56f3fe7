"""Expected payoffs under product distributions and mixed equilibria.

Everything here depends only on the coalition structure and the payoff
tensors, never on the strategy graph: a profile of per-coalition
distributions is an equilibrium when no coalition can raise its expected
payoff by unilaterally replacing its own marginal. Because the expected
payoff is linear in each marginal, the supremum over deviations is attained
at a point mass, so checking pure deviations is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .games import GGame, Profile

MASS_TOL = 1e-12
TIE_TOL = 1e-12
DEFAULT_TOL = 1e-6
FICTITIOUS_PLAY_CAP = 100_000


class NoConvergenceError(Exception):
    """The iterative solver hit its cap without certifying an equilibrium."""


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite, externally indexed space."""

    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a nonempty vector")
        if np.any(m < 0):
            raise ValueError("negative probability mass")
        if abs(float(m.sum()) - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {m.sum()!r}, not 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return self.masses.size

    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.masses))

    @staticmethod
    def dirac(n: int, atom: int) -> "Distribution":
        m = np.zeros(n)
        m[atom] = 1.0
        return Distribution(m)

    @staticmethod
    def uniform(n: int) -> "Distribution":
        return Distribution(np.full(n, 1.0 / n))

    @staticmethod
    def uniform_on(n: int, members: Sequence[int]) -> "Distribution":
        m = np.zeros(n)
        m[list(members)] = 1.0 / len(members)
        return Distribution(m)


def total_variation(a: Distribution | np.ndarray, b: Distribution | np.ndarray) -> float:
    """Half the L1 distance between two probability vectors."""
    av = a.masses if isinstance(a, Distribution) else np.asarray(a, float)
    bv = b.masses if isinstance(b, Distribution) else np.asarray(b, float)
    if av.shape != bv.shape:
        raise ValueError("distributions live on different spaces")
    return float(0.5 * np.abs(av - bv).sum())


@dataclass(frozen=True)
class MixedProfile:
    """One distribution per coalition, read as a product distribution."""

    parts: tuple[Distribution, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("need at least one coalition distribution")

    @staticmethod
    def dirac(game: GGame, profile: Profile) -> "MixedProfile":
        game.validate_profile(profile)
        return MixedProfile(
            tuple(
                Distribution.dirac(game.dims[h], profile[h]) for h in range(game.r)
            )
        )

    @staticmethod
    def uniform(game: GGame) -> "MixedProfile":
        return MixedProfile(tuple(Distribution.uniform(d) for d in game.dims))

    def replace(self, index: int, dist: Distribution) -> "MixedProfile":
        parts = list(self.parts)
        parts[index] = dist
        return MixedProfile(tuple(parts))


def _check_shapes(game: GGame, profile: MixedProfile) -> None:
    if len(profile.parts) != game.r:
        raise ValueError("profile has wrong number of coalitions")
    for h, part in enumerate(profile.parts):
        if part.n != game.dims[h]:
            raise ValueError(
                f"coalition {h} distribution has {part.n} masses, space has {game.dims[h]}"
            )


def expected_payoff(game: GGame, profile: MixedProfile, coalition: int) -> float:
    """Multilinear contraction of one coalition's payoff tensor with the
    per-coalition mass vectors."""
    _check_shapes(game, profile)
    t = game.payoffs[coalition]
    for part in profile.parts:
        t = np.tensordot(part.masses, t, axes=(0, 0))
    return float(t)


def payoff_vector(game: GGame, profile: MixedProfile, coalition: int) -> np.ndarray:
    """Expected payoff of `coalition` for each of its pure strategies, holding
    the other coalitions at their profile distributions."""
    _check_shapes(game, profile)
    t = game.payoffs[coalition]
    # contracting in descending axis order keeps each original axis at its
    # own position until it is consumed
    for h in range(game.r - 1, -1, -1):
        if h == coalition:
            continue
        t = np.tensordot(t, profile.parts[h].masses, axes=(h, 0))
    return np.asarray(t, dtype=float).reshape(-1)


@dataclass(frozen=True)
class BestResponse:
    value: float
    argmax: tuple[int, ...]


def best_pure_response(game: GGame, profile: MixedProfile, coalition: int) -> BestResponse:
    """Best point-mass reply for one coalition; ties reported in index order."""
    v = payoff_vector(game, profile, coalition)
    best = float(v.max())
    argmax = tuple(int(i) for i in np.flatnonzero(v >= best - TIE_TOL))
    return BestResponse(value=best, argmax=argmax)


def is_mixed_c_equilibrium(
    game: GGame, profile: MixedProfile, tol: float = DEFAULT_TOL
) -> bool:
    """True iff no coalition's best point-mass reply beats its expected payoff
    by more than `tol`."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    for h in range(game.r):
        v = payoff_vector(game, profile, h)
        current = float(v @ profile.parts[h].masses)
        if current < float(v.max()) - tol:
            return False
    return True


def pure_in_mixed(game: GGame, profile: Profile) -> bool:
    """True iff the point-mass product at `profile` is a mixed equilibrium
    with zero tolerance."""
    return is_mixed_c_equilibrium(game, MixedProfile.dirac(game, profile), tol=0.0)


def _supports(n: int):
    for size in range(1, n + 1):
        yield from combinations(range(n), size)


def _support_enumeration_two(game: GGame, certify_tol: float) -> MixedProfile | None:
    """Exact search over support pairs for two-coalition games.

    For supports (I, J), each coalition's mixture must equalize the other's
    payoff across its support; the linear systems are solved directly and
    the assembled profile kept only if it certifies as an equilibrium.
    """
    a, b = game.payoffs
    m, n = game.dims
    pairs = sorted(
        ((i, j) for i in _supports(m) for j in _supports(n)),
        key=lambda ij: (len(ij[0]) + len(ij[1]), len(ij[0]), ij),
    )
    for supp_x, supp_y in pairs:
        x = _equalizing_mixture(b[np.ix_(supp_x, supp_y)].T, len(supp_x))
        y = _equalizing_mixture(a[np.ix_(supp_x, supp_y)], len(supp_y))
        if x is None or y is None:
            continue
        fx = np.zeros(m)
        fx[list(supp_x)] = x
        fy = np.zeros(n)
        fy[list(supp_y)] = y
        try:
            candidate = MixedProfile((Distribution(fx), Distribution(fy)))
        except ValueError:
            continue
        if is_mixed_c_equilibrium(game, candidate, tol=certify_tol):
            return candidate
    return None


def _equalizing_mixture(mat: np.ndarray, size: int) -> np.ndarray | None:
    """Solve for a mixture over `size` strategies making every row of `mat`
    (the opponent's supported payoffs) take one common value."""
    rows, cols = mat.shape
    assert cols == size
    system = np.zeros((rows + 1, size + 1))
    system[:rows, :size] = mat
    system[:rows, size] = -1.0
    system[rows, :size] = 1.0
    rhs = np.zeros(rows + 1)
    rhs[rows] = 1.0
    sol, residual, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < min(system.shape):
        # underdetermined solutions are fine; lstsq picks the minimum norm one
        pass
    if not np.allclose(system @ sol, rhs, atol=1e-9):
        return None
    x = sol[:size]
    if np.any(x < -1e-9):
        return None
    x = np.clip(x, 0.0, None)
    total = x.sum()
    if total <= 0:
        return None
    return x / total


def _fictitious_play(
    game: GGame, tol: float, cap: int
) -> MixedProfile:
    """Damped best-reply averaging; raises NoConvergenceError at the cap."""
    averages = [np.full(d, 1.0 / d) for d in game.dims]
    for iteration in range(1, cap + 1):
        profile = MixedProfile(tuple(Distribution(a) for a in averages))
        replies = [
            int(np.argmax(payoff_vector(game, profile, h))) for h in range(game.r)
        ]
        step = 1.0 / (iteration + 1)
        for h, reply in enumerate(replies):
            averages[h] *= 1.0 - step
            averages[h][reply] += step
        if iteration % 128 == 0 or iteration == cap:
            candidate = MixedProfile(
                tuple(Distribution(a / a.sum()) for a in averages)
            )
            if is_mixed_c_equilibrium(game, candidate, tol=tol):
                return candidate
    raise NoConvergenceError(
        f"fictitious play did not certify an equilibrium within {cap} iterations"
    )


def compute_mixed_equilibrium(
    game: GGame, tol: float = DEFAULT_TOL, cap: int = FICTITIOUS_PLAY_CAP
) -> MixedProfile:
    """Find a mixed equilibrium certified by `is_mixed_c_equilibrium`.

    Two-coalition games up to 4 strategies per coalition get exact support
    enumeration. Larger games first try every point-mass product, then fall
    back to damped fictitious play, which raises NoConvergenceError if the
    certification fails at the iteration cap.
    """
    if game.r == 1:
        best = int(np.argmax(game.payoffs[0]))
        return MixedProfile.dirac(game, (best,))
    if game.r == 2 and max(game.dims) <= 4:
        found = _support_enumeration_two(game, certify_tol=min(tol, 1e-9))
        if found is not None:
            return found
    for profile in game.profiles():
        candidate = MixedProfile.dirac(game, profile)
        if is_mixed_c_equilibrium(game, candidate, tol=0.0):
            return candidate
    return _fictitious_play(game, tol=tol, cap=cap)
