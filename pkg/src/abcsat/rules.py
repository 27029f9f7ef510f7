"""Reference committee rules (AV, PAV) and explicit rule tables.

A rule table materializes a committee rule as a total mapping from
admissible profiles (keyed by full-enumeration rank) to committees.
PAV scoring uses exact rational arithmetic: floating point would risk
misclassifying ties, and lexicographic tie-breaking needs exact equality.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

from .core import (
    ElectionParams,
    all_committees,
    enumerate_profiles,
    is_admissible,
    profile_count,
    profile_rank,
)

TABLE_FORMAT = "rule-table/1"
DEFAULT_PROFILE_CAP = 10**8


def av(profile, params: ElectionParams) -> int:
    """The k candidates with highest approval score, ties broken
    lexicographically (lowest candidate index wins)."""
    if not is_admissible(profile, params):
        raise ValueError("profile is inadmissible (fewer than k candidates approved)")
    scores = [0] * params.m
    for ballot in profile:
        for c in range(params.m):
            if ballot >> c & 1:
                scores[c] += 1
    order = sorted(range(params.m), key=lambda c: (-scores[c], c))
    committee = 0
    for c in order[: params.k]:
        committee |= 1 << c
    return committee


def _harmonic_prefix_scaled(k: int) -> tuple:
    """(L, [H0*L, H1*L, ..., Hk*L]) with L = lcm(1..k), H0 = 0."""
    weights = [0] * (k + 1)
    lcm = math.lcm(*range(1, k + 1)) if k >= 1 else 1
    for r in range(1, k + 1):
        weights[r] = weights[r - 1] + lcm // r
    return lcm, weights


def pav_score(profile, committee: int) -> Fraction:
    """Exact harmonic-sum PAV utility of a committee: each voter contributes
    1 + 1/2 + ... + 1/r for r approved committee members (0 for r = 0)."""
    k = committee.bit_count()
    lcm, weights = _harmonic_prefix_scaled(k)
    total = 0
    for ballot in profile:
        total += weights[(ballot & committee).bit_count()]
    return Fraction(total, lcm)


def pav(profile, params: ElectionParams) -> int:
    """Exhaustive PAV: the committee maximizing the harmonic-sum score;
    among ties, the lexicographically first committee."""
    if not is_admissible(profile, params):
        raise ValueError("profile is inadmissible (fewer than k candidates approved)")
    _, weights = _harmonic_prefix_scaled(params.k)
    best_committee = -1
    best_score = -1
    for committee in all_committees(params.m, params.k):
        score = 0
        for ballot in profile:
            score += weights[(ballot & committee).bit_count()]
        if score > best_score:
            best_score = score
            best_committee = committee
    return best_committee


RULES: dict = {"av": av, "pav": pav}


@dataclass
class RuleTable:
    """A committee rule materialized over its admissible domain.

    entries maps the full-enumeration profile rank to a committee mask.
    domain_note records the profile domain ("admissible", or a note for
    restricted domains such as candidate-interval profiles).
    """

    params: ElectionParams
    entries: dict = field(default_factory=dict)
    domain_note: str = "admissible"

    def committee_for(self, profile) -> int:
        return self.entries[profile_rank(profile, self.params.m)]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json_dict(self) -> dict:
        p = self.params
        ranks = sorted(self.entries)
        return {
            "format": TABLE_FORMAT,
            "m": p.m,
            "n": p.n,
            "k": p.k,
            "domain": self.domain_note,
            "ranks": ranks,
            "committees": [self.entries[r] for r in ranks],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RuleTable":
        if data.get("format") != TABLE_FORMAT:
            raise ValueError(f"unsupported rule-table format {data.get('format')!r}")
        params = ElectionParams(data["m"], data["n"], data["k"])
        entries = dict(zip(data["ranks"], data["committees"]))
        return cls(params, entries, data.get("domain", "admissible"))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def load(cls, path) -> "RuleTable":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def resolve_rule(rule: Union[str, Callable]) -> Callable:
    if callable(rule):
        return rule
    try:
        return RULES[rule]
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; known: {sorted(RULES)}") from None


def build_table(
    rule: Union[str, Callable],
    params: ElectionParams,
    cap: int = DEFAULT_PROFILE_CAP,
    threads: int = 1,
) -> RuleTable:
    """Materialize a rule over the full admissible-profile enumeration."""
    total = profile_count(params.m, params.n)
    if total > cap:
        raise ValueError(
            f"enumeration of {total} profiles at m={params.m}, n={params.n} "
            f"exceeds the cap of {cap}"
        )
    fn = resolve_rule(rule)
    profiles = list(enumerate_profiles(params, admissible_only=True))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            committees = list(pool.map(lambda p: fn(p, params), profiles))
    else:
        committees = [fn(p, params) for p in profiles]
    entries = {
        profile_rank(p, params.m): w for p, w in zip(profiles, committees)
    }
    return RuleTable(params, entries)
