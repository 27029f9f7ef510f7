"""Canonical data model for approval-based committee elections.

Candidates are zero-based indices rendered as letters a, b, c, ...
Ballots and committees are bitmasks over candidate indices (candidate 0 is
the least significant bit).  A ballot is any nonempty proper subset of the
candidate set, so the valid ballot masks are exactly the integers
1 .. 2^m - 2 and the canonical ballot order is ascending mask value.
Profiles are ordered tuples of ballot masks (voters are distinguishable).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

CANDIDATE_LETTERS = "abcdefghijklmnopqrstuvwxyz"
MAX_CANDIDATES = len(CANDIDATE_LETTERS)

Ballot = int  # bitmask, nonempty proper subset of the candidate set
Committee = int  # bitmask with exactly k bits set
Profile = tuple  # tuple[Ballot, ...], one ballot per voter


@dataclass(frozen=True)
class ElectionParams:
    """Election sizes: m candidates, n voters, committee size k."""

    m: int
    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.m:
            raise ValueError(f"need 1 <= k <= m, got k={self.k}, m={self.m}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")
        if self.m > MAX_CANDIDATES:
            raise ValueError(f"at most {MAX_CANDIDATES} candidates supported")

    @property
    def candidate_mask(self) -> int:
        return (1 << self.m) - 1


def ballot_count(m: int) -> int:
    """Number of valid ballots over m candidates: 2^m - 2."""
    if m < 1:
        raise ValueError("need at least one candidate")
    return (1 << m) - 2


def profile_count(m: int, n: int) -> int:
    return ballot_count(m) ** n


def is_valid_ballot(ballot: int, m: int) -> bool:
    return 0 < ballot < (1 << m) - 1


def enumerate_ballots(m: int) -> list:
    """All 2^m - 2 ballots in canonical (ascending mask) order."""
    return list(range(1, (1 << m) - 1))


def union_mask(profile: Sequence[int]) -> int:
    u = 0
    for b in profile:
        u |= b
    return u


def is_admissible(profile: Sequence[int], params: ElectionParams) -> bool:
    """True iff the voters jointly approve at least k candidates."""
    return union_mask(profile).bit_count() >= params.k


def enumerate_profiles(
    params: ElectionParams, admissible_only: bool = False
) -> Iterator[tuple]:
    """Stream all (2^m - 2)^n profiles in lexicographic order of ballot masks.

    Voter 0 is the most significant position, matching profile_rank.
    """
    ballots = enumerate_ballots(params.m)
    if admissible_only:
        k = params.k
        for profile in itertools.product(ballots, repeat=params.n):
            if union_mask(profile).bit_count() >= k:
                yield profile
    else:
        yield from itertools.product(ballots, repeat=params.n)


def profile_rank(profile: Sequence[int], m: int) -> int:
    """Index of the profile in the canonical full enumeration."""
    rank = 0
    base = ballot_count(m)
    for b in profile:
        rank = rank * base + (b - 1)
    return rank


def profile_at_rank(rank: int, params: ElectionParams) -> tuple:
    base = ballot_count(params.m)
    out = []
    for _ in range(params.n):
        rank, idx = divmod(rank, base)
        out.append(idx + 1)
    return tuple(reversed(out))


def is_party_list(profile: Sequence[int]) -> bool:
    """True iff every pair of ballots is identical or disjoint."""
    distinct = set(profile)
    return all(
        a == b or not a & b for a, b in itertools.combinations(distinct, 2)
    )


def party_counts(profile: Sequence[int]) -> dict:
    """Multiplicity of each distinct ballot (the parties, if party-list)."""
    counts: dict = {}
    for b in profile:
        counts[b] = counts.get(b, 0) + 1
    return counts


def proper_nonempty_subsets(ballot: int) -> list:
    """All nonempty proper subsets of a ballot, ascending by mask."""
    out = []
    # enumerate submasks of ballot in increasing order
    for sub in range(1, ballot):
        if sub & ballot == sub:
            out.append(sub)
    return out


def i_variants(
    profile: Sequence[int], i: int, mode: str, m: int
) -> Iterator[tuple]:
    """Profiles differing from `profile` only in voter i's ballot.

    mode "proper-subset": replacement ballots are the nonempty proper
    subsets of profile[i].  mode "arbitrary": every other valid ballot.
    Yielded in ascending order of the replacement ballot mask.
    """
    if not 0 <= i < len(profile):
        raise IndexError(f"voter index {i} out of range")
    p = tuple(profile)
    if mode == "proper-subset":
        replacements: Iterable = proper_nonempty_subsets(p[i])
    elif mode == "arbitrary":
        replacements = (b for b in enumerate_ballots(m) if b != p[i])
    else:
        raise ValueError(f"unknown i-variant mode {mode!r}")
    for b in replacements:
        yield p[:i] + (b,) + p[i + 1 :]


def hamming(a: int, b: int) -> int:
    """Symmetric-difference cardinality of two bitmask sets."""
    return (a ^ b).bit_count()


def is_candidate_interval(profile: Sequence[int], ordering: Sequence[int]) -> bool:
    """True iff every ballot is contiguous under the given candidate ordering."""
    m = len(ordering)
    if sorted(ordering) != list(range(m)):
        raise ValueError("ordering must be a permutation of 0..m-1")
    pos = [0] * m
    for p, c in enumerate(ordering):
        pos[c] = p
    for ballot in profile:
        positions = [pos[c] for c in bits(ballot)]
        if max(positions) - min(positions) + 1 != len(positions):
            return False
    return True


def all_committees(m: int, k: int) -> list:
    """All size-k committees as bitmasks, in lexicographic member order."""
    out = []
    for combo in itertools.combinations(range(m), k):
        mask = 0
        for c in combo:
            mask |= 1 << c
        out.append(mask)
    return out


def bits(mask: int) -> Iterator[int]:
    """Indices of set bits, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# --- text forms -------------------------------------------------------------
#
# Ballots render as concatenated letters ("ab"), profiles as comma-separated
# ballots ("ab,c,d").  These forms appear in CLI input/output and JSON.


def set_to_str(mask: int) -> str:
    return "".join(CANDIDATE_LETTERS[c] for c in bits(mask))


def set_from_str(text: str, m: int) -> int:
    mask = 0
    for ch in text.strip():
        c = CANDIDATE_LETTERS.find(ch)
        if c < 0 or c >= m:
            raise ValueError(f"unknown candidate {ch!r} for m={m}")
        mask |= 1 << c
    return mask


def ballot_to_str(ballot: int) -> str:
    return set_to_str(ballot)


def ballot_from_str(text: str, m: int) -> int:
    mask = set_from_str(text, m)
    if not is_valid_ballot(mask, m):
        raise ValueError(f"ballot {text!r} is not a nonempty proper subset")
    return mask


def committee_to_str(committee: int) -> str:
    return set_to_str(committee)


def committee_from_str(text: str, params: ElectionParams) -> int:
    mask = set_from_str(text, params.m)
    if mask.bit_count() != params.k:
        raise ValueError(f"committee {text!r} does not have {params.k} members")
    return mask


def profile_to_str(profile: Sequence[int]) -> str:
    return ",".join(set_to_str(b) for b in profile)


def profile_from_str(text: str, m: int) -> tuple:
    parts = text.split(",")
    return tuple(ballot_from_str(part, m) for part in parts)
