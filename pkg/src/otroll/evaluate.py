"""Note-level precision/recall/F1 with tolerance-based maximum matching.

A reference and an estimated note may match when their pitches are equal
and the onset error is within the tolerance window (50 ms by default,
boundary inclusive); in offset mode the offset error must additionally stay
within max(offset_min_tol_s, offset_ratio * reference duration).  The hit
count is the size of a maximum bipartite matching over the feasibility
graph, not a greedy pairing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .grid import NoteList

__all__ = ["MatchParams", "EvalReport", "match_notes"]


@dataclass(frozen=True)
class MatchParams:
    onset_tol_s: float = 0.05
    offset_min_tol_s: float = 0.05
    offset_ratio: float = 0.2
    use_offsets: bool = False

    def __post_init__(self):
        if self.onset_tol_s <= 0 or self.offset_min_tol_s <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.offset_ratio <= 1.0:
            raise ValueError(f"offset_ratio must be in (0, 1], got {self.offset_ratio}")


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    n_ref: int
    n_est: int
    n_match: int
    matches: Tuple[Tuple[int, int], ...]

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_ref": self.n_ref,
            "n_est": self.n_est,
            "n_match": self.n_match,
            "matches": [list(m) for m in self.matches],
        }


def _feasible(ref, est, params: MatchParams) -> bool:
    if ref.pitch != est.pitch:
        return False
    if abs(ref.onset_s - est.onset_s) > params.onset_tol_s:
        return False
    if params.use_offsets:
        tol = max(params.offset_min_tol_s, params.offset_ratio * ref.duration_s)
        if abs(ref.offset_s - est.offset_s) > tol:
            return False
    return True


def _max_matching(
    n_ref: int,
    adj: Sequence[Sequence[int]],
    banned_ref: frozenset = frozenset(),
    banned_est: frozenset = frozenset(),
) -> int:
    """Maximum bipartite matching size (Kuhn's algorithm, iterative DFS)."""
    match_est: dict[int, int] = {}
    match_ref: dict[int, int] = {}
    size = 0
    for start in range(n_ref):
        if start in banned_ref:
            continue
        visited_est: set = set()
        parent_est: dict[int, int] = {}
        stack = [start]
        aug_end = None
        while stack and aug_end is None:
            r = stack.pop()
            for e in adj[r]:
                if e in banned_est or e in visited_est:
                    continue
                visited_est.add(e)
                parent_est[e] = r
                holder = match_est.get(e)
                if holder is None:
                    aug_end = e
                    break
                stack.append(holder)
        if aug_end is None:
            continue
        e = aug_end
        while True:
            r = parent_est[e]
            freed = match_ref.get(r)
            match_est[e] = r
            match_ref[r] = e
            if r == start:
                break
            e = freed
        size += 1
    return size


def match_notes(ref: NoteList, est: NoteList, params: MatchParams = MatchParams()) -> EvalReport:
    """Score an estimated note list against a reference.

    n_match is the maximum-matching size over the feasibility graph.  Among
    maximum matchings, the reported pair list prefers smaller onset errors,
    then lower indices, making the list deterministic while leaving the
    count untouched.
    """
    n_ref, n_est = len(ref), len(est)
    adj: List[List[int]] = [[] for _ in range(n_ref)]
    edges = []
    for i, r in enumerate(ref):
        for j, e in enumerate(est):
            if _feasible(r, e, params):
                adj[i].append(j)
                edges.append((abs(r.onset_s - e.onset_s), i, j))
    target = _max_matching(n_ref, adj)

    # Build a deterministic maximum matching: take edges in (onset error,
    # ref index, est index) order whenever doing so still allows completing
    # a matching of maximum size on the remaining graph.
    edges.sort()
    chosen: List[Tuple[int, int]] = []
    used_ref: set = set()
    used_est: set = set()
    for _, i, j in edges:
        if len(chosen) == target:
            break
        if i in used_ref or j in used_est:
            continue
        rest = _max_matching(
            n_ref,
            adj,
            banned_ref=frozenset(used_ref | {i}),
            banned_est=frozenset(used_est | {j}),
        )
        if rest == target - len(chosen) - 1:
            chosen.append((i, j))
            used_ref.add(i)
            used_est.add(j)

    n_match = len(chosen)
    precision = n_match / n_est if n_est else 1.0
    recall = n_match / n_ref if n_ref else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        n_ref=n_ref,
        n_est=n_est,
        n_match=n_match,
        matches=tuple(chosen),
    )
