"""Exact and greedy set covering for one-shot view planning labels.

The exact solver is a depth-first branch and bound over view-inclusion
decisions in id order. Elements are deduplicated by coverage signature,
single-cover elements force their view, and subtrees are pruned with the
stronger of a counting bound and a pairwise-disjoint element bound. Among all
minimum-cardinality covers the lexicographically smallest id set is returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

MAX_SETS = 32
DEFAULT_NODE_BUDGET = 10_000_000


class InfeasibleCoverError(ValueError):
    """Raised when some universe element is covered by no set."""

    def __init__(self, message: str, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


@dataclass(frozen=True)
class CoverInstance:
    """Universe of dense element ids plus per-view element sets."""

    universe: frozenset[int]
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "universe", frozenset(self.universe))
        object.__setattr__(
            self, "sets", tuple(frozenset(s) for s in self.sets)
        )
        if len(self.sets) > MAX_SETS:
            raise ValueError(f"at most {MAX_SETS} sets supported")
        for s in self.sets:
            for e in s:
                if not isinstance(e, int):
                    raise ValueError("element ids must be integers")
        union = frozenset().union(*self.sets) if self.sets else frozenset()
        missing = self.universe - union
        if missing:
            raise InfeasibleCoverError(
                f"{len(missing)} universe elements covered by no set",
                missing=sorted(missing),
            )

    @classmethod
    def from_keys(
        cls, universe: Iterable[Hashable], view_sets: Sequence[Iterable[Hashable]]
    ) -> tuple["CoverInstance", dict[int, Hashable]]:
        """Build an instance from arbitrary hashable keys.

        Returns the instance plus the dense-id -> original-key mapping.
        Feasibility errors report the original keys.
        """
        keys = sorted(universe)
        ids = {k: i for i, k in enumerate(keys)}
        union = set().union(*map(set, view_sets)) if view_sets else set()
        missing = [k for k in keys if k not in union]
        if missing:
            raise InfeasibleCoverError(
                f"{len(missing)} universe elements covered by no view: "
                f"{missing[:8]}",
                missing=missing,
            )
        sets = tuple(
            frozenset(ids[k] for k in s if k in ids) for s in view_sets
        )
        instance = cls(universe=frozenset(ids.values()), sets=sets)
        return instance, {i: k for k, i in ids.items()}

    def dump(self) -> str:
        """Debug format: `|U| n_sets` then one line per view of sorted ids."""
        lines = [f"{len(self.universe)} {len(self.sets)}"]
        for vid, s in enumerate(self.sets):
            lines.append(" ".join([str(vid)] + [str(e) for e in sorted(s)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "CoverInstance":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n_universe, n_sets = (int(x) for x in lines[0].split())
        sets: list[frozenset[int]] = [frozenset()] * n_sets
        for ln in lines[1 : 1 + n_sets]:
            parts = [int(x) for x in ln.split()]
            sets[parts[0]] = frozenset(parts[1:])
        universe = frozenset().union(*sets) if sets else frozenset()
        if len(universe) != n_universe:
            raise ValueError(
                f"declared universe size {n_universe} != union size {len(universe)}"
            )
        return cls(universe=universe, sets=tuple(sets))


@dataclass(frozen=True)
class CoverSolution:
    chosen: tuple[int, ...]
    objective: int
    optimal: bool

    def __post_init__(self):
        object.__setattr__(self, "chosen", tuple(sorted(self.chosen)))
        if self.objective != len(self.chosen):
            raise ValueError("objective must equal the number of chosen sets")


def _element_masks(instance: CoverInstance) -> tuple[list[int], list[int]]:
    """Per-set bitmasks over signature-deduplicated elements.

    Elements covered by the same view subset are interchangeable for both the
    objective and the chosen id set, so one representative per signature is
    kept.
    """
    signature: dict[int, int] = {}
    for e in sorted(instance.universe):
        sig = 0
        for vid, s in enumerate(instance.sets):
            if e in s:
                sig |= 1 << vid
        signature.setdefault(sig, 0)
    sigs = sorted(signature)
    set_masks = [0] * len(instance.sets)
    for bit, sig in enumerate(sigs):
        for vid in range(len(instance.sets)):
            if sig >> vid & 1:
                set_masks[vid] |= 1 << bit
    return set_masks, sigs


def solve_greedy(instance: CoverInstance) -> CoverSolution:
    """Pick the set covering the most uncovered elements until done.

    Ties break toward the lowest view id. The optimality flag is never set.
    """
    uncovered = set(instance.universe)
    chosen: list[int] = []
    while uncovered:
        best_vid = -1
        best_gain = 0
        for vid, s in enumerate(instance.sets):
            if vid in chosen:
                continue
            gain = len(s & uncovered)
            if gain > best_gain:
                best_gain = gain
                best_vid = vid
        if best_vid < 0:  # pragma: no cover - construction asserts feasibility
            raise InfeasibleCoverError("greedy found uncovered elements")
        chosen.append(best_vid)
        uncovered -= instance.sets[best_vid]
    return CoverSolution(chosen=tuple(chosen), objective=len(chosen), optimal=False)


def solve_exact(
    instance: CoverInstance, node_budget: int = DEFAULT_NODE_BUDGET
) -> CoverSolution:
    """Minimum-cardinality cover by branch and bound.

    Deterministic: among optima the lexicographically smallest chosen id
    tuple wins. When the node budget runs out the greedy-seeded incumbent is
    returned with the optimality flag unset.
    """
    if not instance.universe:
        return CoverSolution(chosen=(), objective=0, optimal=True)

    set_masks, _ = _element_masks(instance)
    n_sets = len(instance.sets)
    universe_mask = 0
    for m in set_masks:
        universe_mask |= m

    greedy = solve_greedy(instance)
    best_size = greedy.objective
    best_ids: tuple[int, ...] | None = None

    # cover_of[bit] = mask of views covering that element.
    n_el = universe_mask.bit_length()
    cover_of = [0] * n_el
    for vid in range(n_sets):
        m = set_masks[vid]
        while m:
            low = m & -m
            cover_of[low.bit_length() - 1] |= 1 << vid
            m ^= low

    nodes = 0
    exhausted = False

    def lower_bound(uncovered: int, allowed: int) -> int:
        max_size = 0
        for vid in range(n_sets):
            if allowed >> vid & 1:
                size = (set_masks[vid] & uncovered).bit_count()
                if size > max_size:
                    max_size = size
        if max_size == 0:
            return 1 << 20  # uncovered but nothing allowed covers it
        count_bound = -(-uncovered.bit_count() // max_size)
        # Pairwise-disjoint elements each force a distinct set.
        disjoint = 0
        used_views = 0
        m = uncovered
        while m:
            low = m & -m
            bit = low.bit_length() - 1
            m ^= low
            views = cover_of[bit] & allowed
            if views & used_views == 0:
                disjoint += 1
                used_views |= views
        return max(count_bound, disjoint)

    def dfs(vid: int, chosen: list[int], uncovered: int, allowed: int) -> None:
        nonlocal best_size, best_ids, nodes, exhausted
        if exhausted:
            return
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            return

        if uncovered == 0:
            ids = tuple(chosen)
            if len(ids) < best_size or (
                len(ids) == best_size and (best_ids is None or ids < best_ids)
            ):
                best_size = len(ids)
                best_ids = ids
            return

        lb = len(chosen) + lower_bound(uncovered, allowed)
        if lb > best_size or (lb == best_size and best_ids is not None):
            return

        # Forced moves: an element covered by exactly one allowed view.
        m = uncovered
        while m:
            low = m & -m
            bit = low.bit_length() - 1
            m ^= low
            views = cover_of[bit] & allowed
            if views == 0:
                return  # infeasible branch
            if views & (views - 1) == 0:
                # Forced include; the branching index must not advance past
                # still-undecided views.
                forced = views.bit_length() - 1
                chosen.append(forced)
                dfs(
                    vid,
                    chosen,
                    uncovered & ~set_masks[forced],
                    allowed & ~(1 << forced),
                )
                chosen.pop()
                return

        if vid >= n_sets:
            return
        bit = 1 << vid
        rest = allowed & ~bit
        if allowed & bit and set_masks[vid] & uncovered:
            # Include-first in id order: the first solution found within a
            # size class is its lexicographically smallest member.
            chosen.append(vid)
            dfs(vid + 1, chosen, uncovered & ~set_masks[vid], rest)
            chosen.pop()
        dfs(vid + 1, chosen, uncovered, rest)

    dfs(0, [], universe_mask, (1 << n_sets) - 1)

    if exhausted:
        logger.warning(
            "set cover node budget (%d) exhausted; returning incumbent", node_budget
        )
        if best_ids is None:
            return CoverSolution(
                chosen=greedy.chosen, objective=greedy.objective, optimal=False
            )
        return CoverSolution(chosen=best_ids, objective=best_size, optimal=False)

    assert best_ids is not None
    return CoverSolution(chosen=best_ids, objective=best_size, optimal=True)


def brute_force_minimum(instance: CoverInstance) -> tuple[int, list[tuple[int, ...]]]:
    """Exhaustive subset enumeration (testing aid): minimum size plus all
    optimal chosen-id tuples."""
    n = len(instance.sets)
    universe = set(instance.universe)
    best = None
    optima: list[tuple[int, ...]] = []
    for size in range(n + 1):
        import itertools

        for combo in itertools.combinations(range(n), size):
            covered = set()
            for vid in combo:
                covered |= instance.sets[vid]
            if universe <= covered:
                optima.append(combo)
        if optima:
            best = size
            break
    if best is None:
        raise InfeasibleCoverError("no cover exists")
    return best, optima
