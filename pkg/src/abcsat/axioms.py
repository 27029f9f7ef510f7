"""Exhaustive checkers for representation and strategyproofness axioms.

Each checker runs over the whole domain of a rule table and either passes or
returns a concrete counterexample witness.  Witnesses carry enough structure
to re-apply the axiom definition to them alone (see revalidate_witness).

Quota comparisons are exact integer cross-multiplications: n/k need not be
an integer, and the Hare quota ("at least n/k") must not be blurred into the
Droop quota ("strictly more than n/(k+1)") by rounding.

Group search: JR violations are found through candidate-cohesive groups
restricted to unrepresented voters, which is sound and complete; PJR and EJR
use exact voter-subset search (n is at most 6 at desk scale).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from .core import (
    ElectionParams,
    hamming,
    i_variants,
    is_admissible,
    is_party_list,
    party_counts,
    profile_at_rank,
    profile_rank,
    profile_to_str,
    set_to_str,
    union_mask,
)
from .rules import RuleTable

SUBSET_SEARCH_MAX_VOTERS = 16

SP_VARIANTS = ("subset", "superset", "cardinality", "hamming")


@dataclass(frozen=True)
class Witness:
    """Counterexample data; unused fields stay None."""

    profile: tuple
    committee: Optional[int] = None
    candidate: Optional[int] = None
    party: Optional[int] = None
    group: Optional[tuple] = None
    ell: Optional[int] = None
    voter: Optional[int] = None
    variant_profile: Optional[tuple] = None
    variant_committee: Optional[int] = None
    required: Optional[int] = None

    def to_json_dict(self) -> dict:
        out: dict = {"profile": profile_to_str(self.profile)}
        if self.committee is not None:
            out["committee"] = set_to_str(self.committee)
        if self.candidate is not None:
            out["candidate"] = set_to_str(1 << self.candidate)
        if self.party is not None:
            out["party"] = set_to_str(self.party)
        if self.group is not None:
            out["group"] = [i + 1 for i in self.group]  # voters are 1-based in reports
        if self.ell is not None:
            out["ell"] = self.ell
        if self.voter is not None:
            out["voter"] = self.voter + 1
        if self.variant_profile is not None:
            out["variant_profile"] = profile_to_str(self.variant_profile)
        if self.variant_committee is not None:
            out["variant_committee"] = set_to_str(self.variant_committee)
        if self.required is not None:
            out["required"] = self.required
        return out


@dataclass
class AxiomVerdict:
    axiom: str
    passed: bool
    witness: Optional[Witness] = None
    witnesses: tuple = ()

    def to_json_dict(self) -> dict:
        out = {"axiom": self.axiom, "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness.to_json_dict()
        if self.witnesses:
            out["witnesses"] = [w.to_json_dict() for w in self.witnesses]
        return out


def _iter_domain(table: RuleTable):
    params = table.params
    for rank in sorted(table.entries):
        yield profile_at_rank(rank, params), table.entries[rank]


def _verdict(axiom: str, found: list, collect_all: bool) -> AxiomVerdict:
    if not found:
        return AxiomVerdict(axiom, True)
    return AxiomVerdict(
        axiom, False, found[0], tuple(found) if collect_all else ()
    )


def check_weak_efficiency(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """No committee member may be approved by zero voters when at least k
    candidates are approved overall."""
    k = table.params.k
    found = []
    for profile, committee in _iter_domain(table):
        union = union_mask(profile)
        if union.bit_count() < k:
            continue
        unapproved = committee & ~union
        if unapproved:
            found.append(
                Witness(
                    profile,
                    committee=committee,
                    candidate=(unapproved & -unapproved).bit_length() - 1,
                )
            )
            if not collect_all:
                break
    return _verdict("weak-efficiency", found, collect_all)


def check_proportionality(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """On party-list profiles, a singleton ballot {c} with at least n/k
    occurrences forces c into the committee."""
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        if not is_party_list(profile):
            continue
        for ballot, count in party_counts(profile).items():
            if (
                ballot.bit_count() == 1
                and count * p.k >= p.n
                and not committee & ballot
            ):
                found.append(
                    Witness(
                        profile,
                        committee=committee,
                        candidate=ballot.bit_length() - 1,
                    )
                )
                if not collect_all:
                    return _verdict("proportionality", found, collect_all)
    return _verdict("proportionality", found, collect_all)


def check_jr_party_lists(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """On party-list profiles, a ballot with at least n/k occurrences must
    intersect the committee."""
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        if not is_party_list(profile):
            continue
        for ballot, count in party_counts(profile).items():
            if count * p.k >= p.n and not committee & ballot:
                group = tuple(i for i, b in enumerate(profile) if b == ballot)
                found.append(
                    Witness(profile, committee=committee, party=ballot, group=group)
                )
                if not collect_all:
                    return _verdict("jr-party-lists", found, collect_all)
    return _verdict("jr-party-lists", found, collect_all)


def check_jr(
    table: RuleTable, collect_all: bool = False, exhaustive: bool = False
) -> AxiomVerdict:
    """Justified representation over all profiles.

    A group of at least n/k voters with a commonly approved candidate and no
    approved committee member at all is a violation.  The default search
    restricts candidate-cohesive groups to unrepresented voters, which finds
    a violating group iff one exists; `exhaustive` searches all voter
    subsets instead (for cross-checking, n capped).
    """
    if exhaustive:
        return _check_jr_subsets(table, collect_all)
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        unrepresented = [
            i for i, b in enumerate(profile) if not b & committee
        ]
        if len(unrepresented) * p.k < p.n:
            continue
        for c in range(p.m):
            bit = 1 << c
            group = tuple(i for i in unrepresented if profile[i] & bit)
            if len(group) * p.k >= p.n:
                found.append(
                    Witness(profile, committee=committee, candidate=c, group=group)
                )
                if not collect_all:
                    return _verdict("jr", found, collect_all)
                break  # one witness per profile in collect mode
    return _verdict("jr", found, collect_all)


def _subset_stats(profile: Sequence[int], n: int):
    """size, ballot-intersection and ballot-union for every voter subset."""
    count = 1 << n
    sizes = [0] * count
    inters = [0] * count
    unions = [0] * count
    inters[0] = -1  # all-ones sentinel
    for s in range(1, count):
        low = s & -s
        rest = s ^ low
        b = profile[low.bit_length() - 1]
        sizes[s] = sizes[rest] + 1
        inters[s] = inters[rest] & b
        unions[s] = unions[rest] | b
    return sizes, inters, unions


def _check_jr_subsets(table: RuleTable, collect_all: bool) -> AxiomVerdict:
    p = table.params
    if p.n > SUBSET_SEARCH_MAX_VOTERS:
        raise ValueError(f"subset search infeasible for n={p.n}")
    found = []
    for profile, committee in _iter_domain(table):
        sizes, inters, unions = _subset_stats(profile, p.n)
        for s in range(1, 1 << p.n):
            if (
                sizes[s] * p.k >= p.n
                and inters[s]
                and not unions[s] & committee
            ):
                group = tuple(i for i in range(p.n) if s >> i & 1)
                c = (inters[s] & -inters[s]).bit_length() - 1
                found.append(
                    Witness(profile, committee=committee, candidate=c, group=group)
                )
                break
        if found and not collect_all:
            break
    return _verdict("jr", found, collect_all)


def check_pjr(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """Proportional justified representation, by exact subset search: a group
    of size at least l*n/k commonly approving at least l candidates must see
    at least l committee members inside its ballot union."""
    p = table.params
    if p.n > SUBSET_SEARCH_MAX_VOTERS:
        raise ValueError(f"subset search infeasible for n={p.n}")
    found = []
    for profile, committee in _iter_domain(table):
        sizes, inters, unions = _subset_stats(profile, p.n)
        for s in range(1, 1 << p.n):
            ell = min(inters[s].bit_count(), sizes[s] * p.k // p.n, p.k)
            if ell >= 1 and (unions[s] & committee).bit_count() < ell:
                group = tuple(i for i in range(p.n) if s >> i & 1)
                found.append(
                    Witness(profile, committee=committee, group=group, ell=ell)
                )
                break
        if found and not collect_all:
            break
    return _verdict("pjr", found, collect_all)


def check_ejr(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """Extended justified representation: some member of every such group
    must personally approve at least l committee members."""
    p = table.params
    if p.n > SUBSET_SEARCH_MAX_VOTERS:
        raise ValueError(f"subset search infeasible for n={p.n}")
    found = []
    for profile, committee in _iter_domain(table):
        approved = [(b & committee).bit_count() for b in profile]
        sizes, inters, unions = _subset_stats(profile, p.n)
        for s in range(1, 1 << p.n):
            ell = min(inters[s].bit_count(), sizes[s] * p.k // p.n, p.k)
            if ell >= 1 and max(
                approved[i] for i in range(p.n) if s >> i & 1
            ) < ell:
                group = tuple(i for i in range(p.n) if s >> i & 1)
                found.append(
                    Witness(profile, committee=committee, group=group, ell=ell)
                )
                break
        if found and not collect_all:
            break
    return _verdict("ejr", found, collect_all)


def check_lower_quota(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """On party-list profiles, each party A gets at least
    floor(count(A) * k / n) seats."""
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        if not is_party_list(profile):
            continue
        for ballot, count in party_counts(profile).items():
            deserved = count * p.k // p.n
            if deserved and (committee & ballot).bit_count() < deserved:
                found.append(
                    Witness(
                        profile, committee=committee, party=ballot, required=deserved
                    )
                )
                if not collect_all:
                    return _verdict("lower-quota", found, collect_all)
    return _verdict("lower-quota", found, collect_all)


def check_disjoint_diversity(
    table: RuleTable, collect_all: bool = False
) -> AxiomVerdict:
    """On party-list profiles with at most k parties, every party gets at
    least one committee member."""
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        if not is_party_list(profile):
            continue
        parties = party_counts(profile)
        if len(parties) > p.k:
            continue
        for ballot in parties:
            if not committee & ballot:
                found.append(Witness(profile, committee=committee, party=ballot))
                if not collect_all:
                    return _verdict("disjoint-diversity", found, collect_all)
    return _verdict("disjoint-diversity", found, collect_all)


def check_droop_proportionality(
    table: RuleTable, collect_all: bool = False
) -> AxiomVerdict:
    """On any profile, a singleton ballot {c} occurring strictly more than
    n/(k+1) times forces c into the committee."""
    p = table.params
    found = []
    for profile, committee in _iter_domain(table):
        for ballot, count in party_counts(profile).items():
            if (
                ballot.bit_count() == 1
                and count * (p.k + 1) > p.n
                and not committee & ballot
            ):
                found.append(
                    Witness(
                        profile,
                        committee=committee,
                        candidate=ballot.bit_length() - 1,
                    )
                )
                if not collect_all:
                    return _verdict("droop-proportionality", found, collect_all)
    return _verdict("droop-proportionality", found, collect_all)


# --- strategyproofness ----------------------------------------------------------


def _improves(variant: str, truthful_ballot: int, old: int, new: int) -> bool:
    """Does switching the committee from `old` to `new` improve a voter with
    the given truthful ballot, under the variant's improvement relation?"""
    if variant in ("subset", "superset"):
        oi = old & truthful_ballot
        ni = new & truthful_ballot
        return oi != ni and oi & ni == oi
    if variant == "cardinality":
        return (new & truthful_ballot).bit_count() > (old & truthful_ballot).bit_count()
    if variant == "hamming":
        return hamming(new, truthful_ballot) < hamming(old, truthful_ballot)
    raise ValueError(f"unknown strategyproofness variant {variant!r}")


def _deviation_mode(variant: str) -> str:
    return "proper-subset" if variant == "subset" else "arbitrary"


def check_strategyproofness(
    table: RuleTable, variant: str, collect_all: bool = False
) -> AxiomVerdict:
    """No voter may reach, via the variant's deviations, a committee that
    improves on the truthful one (judged against the truthful ballot)."""
    if variant not in SP_VARIANTS:
        raise ValueError(f"unknown strategyproofness variant {variant!r}")
    p = table.params
    entries = table.entries
    mode = _deviation_mode(variant)
    found = []
    for profile, committee in _iter_domain(table):
        for i in range(p.n):
            ballot = profile[i]
            for variant_profile in i_variants(profile, i, mode, p.m):
                other = entries.get(profile_rank(variant_profile, p.m))
                if other is None:
                    continue
                if _improves(variant, ballot, committee, other):
                    found.append(
                        Witness(
                            profile,
                            committee=committee,
                            voter=i,
                            variant_profile=variant_profile,
                            variant_committee=other,
                        )
                    )
                    if not collect_all:
                        return _verdict(f"{variant}-sp", found, collect_all)
    return _verdict(f"{variant}-sp", found, collect_all)


def find_manipulation(
    table: Union[RuleTable, Callable],
    profile,
    variant: str,
    params: Optional[ElectionParams] = None,
) -> Optional[Witness]:
    """First successful manipulation from `profile` under the variant, or
    None.  Deterministic: voters from the highest index down, then deviation
    ballots ascending (so ties between symmetric manipulators resolve to the
    last voter, matching the usual presentation of such examples).

    `table` may be a RuleTable or a rule callable f(profile, params)."""
    if variant not in SP_VARIANTS:
        raise ValueError(f"unknown strategyproofness variant {variant!r}")
    if isinstance(table, RuleTable):
        params = table.params

        def evaluate(p):
            return table.entries.get(profile_rank(p, params.m))

    else:
        if params is None:
            raise ValueError("params required when passing a rule callable")
        fn = table

        def evaluate(p):
            if not is_admissible(p, params):
                return None
            return fn(p, params)

    profile = tuple(profile)
    if not is_admissible(profile, params):
        raise ValueError("profile is inadmissible")
    committee = evaluate(profile)
    if committee is None:
        raise ValueError("profile is outside the rule table domain")
    mode = _deviation_mode(variant)
    for i in range(params.n - 1, -1, -1):
        ballot = profile[i]
        for variant_profile in i_variants(profile, i, mode, params.m):
            other = evaluate(variant_profile)
            if other is None:
                continue
            if _improves(variant, ballot, committee, other):
                return Witness(
                    profile,
                    committee=committee,
                    voter=i,
                    variant_profile=variant_profile,
                    variant_committee=other,
                )
    return None


# --- registry and witness revalidation ----------------------------------------


def _sp_checker(variant: str):
    def run(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
        return check_strategyproofness(table, variant, collect_all)

    run.__name__ = f"check_{variant}_sp"
    return run


CHECKERS: dict = {
    "weak-efficiency": check_weak_efficiency,
    "proportionality": check_proportionality,
    "jr-party-lists": check_jr_party_lists,
    "jr": check_jr,
    "pjr": check_pjr,
    "ejr": check_ejr,
    "lower-quota": check_lower_quota,
    "disjoint-diversity": check_disjoint_diversity,
    "droop-proportionality": check_droop_proportionality,
    "subset-sp": _sp_checker("subset"),
    "superset-sp": _sp_checker("superset"),
    "cardinality-sp": _sp_checker("cardinality"),
    "hamming-sp": _sp_checker("hamming"),
}


def run_checks(
    table: RuleTable, axioms: Iterable[str], collect_all: bool = False
) -> list:
    verdicts = []
    for name in axioms:
        checker = CHECKERS.get(name)
        if checker is None:
            raise ValueError(f"unknown axiom {name!r}; known: {sorted(CHECKERS)}")
        verdicts.append(checker(table, collect_all=collect_all))
    return verdicts


def revalidate_witness(axiom: str, witness: Witness, table: RuleTable) -> bool:
    """Re-apply the axiom definition to the witness alone."""
    p = table.params
    profile = witness.profile
    committee = table.entries[profile_rank(profile, p.m)]
    if witness.committee is not None and witness.committee != committee:
        return False
    if axiom == "weak-efficiency":
        union = union_mask(profile)
        return (
            union.bit_count() >= p.k
            and witness.candidate is not None
            and not union >> witness.candidate & 1
            and committee >> witness.candidate & 1
        )
    if axiom == "proportionality":
        bit = 1 << witness.candidate
        count = sum(1 for b in profile if b == bit)
        return (
            is_party_list(profile)
            and count * p.k >= p.n
            and not committee & bit
        )
    if axiom == "jr-party-lists":
        count = sum(1 for b in profile if b == witness.party)
        return (
            is_party_list(profile)
            and count * p.k >= p.n
            and not committee & witness.party
        )
    if axiom == "jr":
        group = witness.group
        bit = 1 << witness.candidate
        union = 0
        for i in group:
            if not profile[i] & bit:
                return False
            union |= profile[i]
        return len(group) * p.k >= p.n and not union & committee
    if axiom in ("pjr", "ejr"):
        group = witness.group
        ell = witness.ell
        inter = -1
        union = 0
        for i in group:
            inter &= profile[i]
            union |= profile[i]
        if not (1 <= ell <= p.k):
            return False
        if inter.bit_count() < ell or len(group) * p.k < ell * p.n:
            return False
        if axiom == "pjr":
            return (union & committee).bit_count() < ell
        return all((profile[i] & committee).bit_count() < ell for i in group)
    if axiom == "lower-quota":
        count = sum(1 for b in profile if b == witness.party)
        deserved = count * p.k // p.n
        return (
            is_party_list(profile)
            and (committee & witness.party).bit_count() < deserved
        )
    if axiom == "disjoint-diversity":
        parties = party_counts(profile)
        return (
            is_party_list(profile)
            and len(parties) <= p.k
            and witness.party in parties
            and not committee & witness.party
        )
    if axiom == "droop-proportionality":
        bit = 1 << witness.candidate
        count = sum(1 for b in profile if b == bit)
        return count * (p.k + 1) > p.n and not committee & bit
    if axiom.endswith("-sp"):
        variant = axiom[:-3]
        i = witness.voter
        vp = witness.variant_profile
        if any(vp[j] != profile[j] for j in range(p.n) if j != i):
            return False
        if variant == "subset":
            if not (vp[i] != profile[i] and vp[i] & profile[i] == vp[i] and vp[i]):
                return False
        other = table.entries[profile_rank(vp, p.m)]
        if witness.variant_committee is not None and other != witness.variant_committee:
            return False
        return _improves(variant, profile[i], committee, other)
    raise ValueError(f"unknown axiom {axiom!r}")
