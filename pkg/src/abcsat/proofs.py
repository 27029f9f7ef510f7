"""Executable forms of the hand proofs: the singleton-approvers lemma, the
mechanical replay of the base-case deduction chain, and the rule
transformers behind the induction steps.

Replay semantics: each scripted step claims the rule's value at one profile
and names its justifications (proportionality, the singleton-approvers
lemma, or a strategyproofness link to an earlier step).  The step is checked
against the *restriction* of the full encoding to the profiles its
justifications involve: prior conclusions plus the negation of the claim
must be jointly unsatisfiable there.  Restricting matters: the full
base-case formula is globally unsatisfiable, so checking against all clauses
would verify anything.  Each restricted check is a solver call over at most
a few thousand clauses.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .axioms import AxiomVerdict, Witness, _verdict
from .core import (
    ElectionParams,
    committee_from_str,
    enumerate_profiles,
    is_valid_ballot,
    profile_at_rank,
    profile_from_str,
    profile_rank,
    profile_to_str,
    set_to_str,
)
from .encoder import (
    KIND_SP,
    KIND_SYMMETRY,
    Cnf,
    EncodeConfig,
    VarMap,
    encode,
)
from .rules import RuleTable
from .solver import Solver


# --- singleton-approvers lemma -----------------------------------------------


def check_lemma2(table: RuleTable, collect_all: bool = False) -> AxiomVerdict:
    """At m = k+1: a singleton ballot {c} held by at least n/k voters, with
    nobody else approving c, forces c into the committee.  Subset-
    strategyproof proportional rules satisfy this; the checker hunts for
    violations in any explicit table."""
    p = table.params
    if p.m != p.k + 1:
        raise ValueError(f"singleton-approvers lemma needs m = k+1, got {p.m}, {p.k}")
    found = []
    for rank in sorted(table.entries):
        profile = profile_at_rank(rank, p)
        committee = table.entries[rank]
        for c in range(p.m):
            bit = 1 << c
            singleton_voters = sum(1 for b in profile if b == bit)
            approvers = sum(1 for b in profile if b & bit)
            if (
                singleton_voters * p.k >= p.n
                and approvers == singleton_voters
                and not committee & bit
            ):
                found.append(Witness(profile, committee=committee, candidate=c))
                if not collect_all:
                    return _verdict("lemma2", found, collect_all)
    return _verdict("lemma2", found, collect_all)


def lemma2_chain(profile, candidate: int, m: int) -> list:
    """The profile chain used by the lemma's proof: start at the party-list
    profile where every non-{c} voter reports the complement of {c}, then
    restore the true ballots one voter at a time."""
    bit = 1 << candidate
    comp = ((1 << m) - 1) ^ bit
    cur = [bit if b == bit else comp for b in profile]
    chain = [tuple(cur)]
    for j, b in enumerate(profile):
        if b != bit and cur[j] != b:
            cur[j] = b
            chain.append(tuple(cur))
    return chain


# --- proof replay ---------------------------------------------------------------


@dataclass(frozen=True)
class ProofStep:
    label: str
    profile: tuple
    claim_kind: str  # "equals" | "in" | "contradiction"
    claim_committees: tuple  # () for contradiction
    justifications: tuple  # dicts: {"kind": ..., "candidate"/"from"/"voter": ...}


@dataclass
class StepOutcome:
    step: ProofStep
    premise_satisfiable: bool
    claim_forced: bool
    verified: bool
    restricted_clauses: int
    solver_stats: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        claim: dict = {}
        if self.step.claim_kind == "equals":
            claim["equals"] = set_to_str(self.step.claim_committees[0])
        elif self.step.claim_kind == "in":
            claim["in"] = [set_to_str(c) for c in self.step.claim_committees]
        else:
            claim["contradiction"] = True
        return {
            "label": self.step.label,
            "profile": profile_to_str(self.step.profile),
            "claim": claim,
            "justify": list(self.step.justifications),
            "premise_satisfiable": self.premise_satisfiable,
            "claim_forced": self.claim_forced,
            "verified": self.verified,
            "restricted_clauses": self.restricted_clauses,
            "solver_stats": self.solver_stats,
        }


@dataclass
class ProofReport:
    config: EncodeConfig
    outcomes: list
    verified: bool

    def to_json_dict(self) -> dict:
        return {
            "encoding": self.config.to_json_dict(),
            "steps": [o.to_json_dict() for o in self.outcomes],
            "verified": self.verified,
        }


def load_base_case_script() -> dict:
    ref = importlib.resources.files("abcsat").joinpath("data/base_case_steps.json")
    return json.loads(ref.read_text())


def _parse_script(script: dict) -> tuple:
    cfg = EncodeConfig.from_json_dict(script["encoding"])
    params = cfg.params
    steps = []
    labels = set()
    for raw in script["steps"]:
        profile = profile_from_str(raw["profile"], params.m)
        claim = raw["claim"]
        if "equals" in claim:
            kind = "equals"
            committees = (committee_from_str(claim["equals"], params),)
        elif "in" in claim:
            kind = "in"
            committees = tuple(
                committee_from_str(c, params) for c in claim["in"]
            )
        elif claim.get("contradiction"):
            kind = "contradiction"
            committees = ()
        else:
            raise ValueError(f"step {raw['label']}: unknown claim {claim}")
        for j in raw["justify"]:
            if j["kind"] == "sp" and j["from"] not in labels:
                raise ValueError(
                    f"step {raw['label']} references later step {j['from']}"
                )
        steps.append(
            ProofStep(
                raw["label"], profile, kind, committees, tuple(raw["justify"])
            )
        )
        labels.add(raw["label"])
    return cfg, steps


def _restricted_solver(cnf: Cnf, ranks: set) -> tuple:
    """Solver over the clauses whose axiom instances mention only the given
    profile ranks (variables keep their global numbering)."""
    solver = Solver(cnf.num_vars, use_restarts=False, use_deletion=False)
    group_profile = cnf.group_profile
    group_variant = cnf.group_variant
    group_kind = cnf.group_kind
    count = 0
    for ci, gid in enumerate(cnf.clause_group):
        p = group_profile[gid]
        if p not in ranks:
            continue
        if group_kind[gid] == KIND_SP and group_variant[gid] not in ranks:
            continue
        solver.add_clause(cnf.clause(ci))
        count += 1
    return solver, count


def replay_proof_script(
    script: dict,
    cnf: Optional[Cnf] = None,
    varmap: Optional[VarMap] = None,
) -> ProofReport:
    """Verify every scripted deduction against restricted sub-encodings."""
    cfg, steps = _parse_script(script)
    if cnf is None or varmap is None:
        cnf, varmap = encode(cfg)
    params = cfg.params
    m = params.m

    by_label: dict = {}
    priors: list = []  # (rank, committee) established equalities
    outcomes = []
    all_verified = True

    for step in steps:
        rank = profile_rank(step.profile, m)
        ranks = {rank}
        for j in step.justifications:
            if j["kind"] == "sp":
                ranks.add(by_label[j["from"]])
            elif j["kind"] == "lemma2":
                cand = next(
                    c for c in range(m) if set_to_str(1 << c) == j["candidate"]
                )
                for q in lemma2_chain(step.profile, cand, m):
                    ranks.add(profile_rank(q, m))
        solver, nclauses = _restricted_solver(cnf, ranks)
        assumptions = [varmap.var_for(r, w) for r, w in priors]

        premise = solver.solve(assumptions)
        if step.claim_kind == "contradiction":
            premise_sat = True  # the contradiction *is* the expected failure
            forced = not premise.satisfiable
            stats = premise.stats
        else:
            premise_sat = premise.satisfiable
            negation = []
            for w in step.claim_committees:
                try:
                    negation.append(-varmap.var_for(rank, w))
                except KeyError:
                    continue  # committee already pruned away: nothing to negate
            refute = solver.solve(assumptions + negation)
            forced = not refute.satisfiable
            stats = refute.stats
        verified = premise_sat and forced
        all_verified = all_verified and verified
        outcomes.append(
            StepOutcome(step, premise_sat, forced, verified, nclauses, stats)
        )
        by_label[step.label] = rank
        if step.claim_kind == "equals":
            priors.append((rank, step.claim_committees[0]))

    final_ok = bool(steps) and steps[-1].claim_kind == "contradiction"
    return ProofReport(cfg, outcomes, all_verified and final_ok)


def replay_base_case(script: Optional[dict] = None) -> ProofReport:
    """Mechanically replay the base-case impossibility chain (m=4, n=3, k=3,
    with the symmetry assumption pinning the first profile's committee)."""
    return replay_proof_script(script or load_base_case_script())


# --- rule transformers ------------------------------------------------------------


def reduce_voters(table: RuleTable, q: int) -> RuleTable:
    """From a rule for q*k voters to one for k voters: evaluate the big rule
    on q-fold copies of each profile.  Proportionality and (at m = k+1)
    ballot-dropping strategyproofness carry over."""
    p = table.params
    if q < 1:
        raise ValueError("q must be positive")
    if p.n != q * p.k:
        raise ValueError(f"table has n={p.n} voters, expected q*k = {q * p.k}")
    out_params = ElectionParams(p.m, p.k, p.k)
    entries = {}
    for profile in enumerate_profiles(out_params, admissible_only=True):
        big = profile * q
        try:
            committee = table.entries[profile_rank(big, p.m)]
        except KeyError:
            raise ValueError(
                f"input table undefined at ({profile_to_str(big)})"
            ) from None
        entries[profile_rank(profile, p.m)] = committee
    return RuleTable(out_params, entries, table.domain_note)


def reduce_alternatives(table: RuleTable) -> RuleTable:
    """Drop the last candidate: a weakly efficient rule never elects a
    candidate nobody approves, so its restriction to profiles over the
    remaining candidates is a rule over those candidates."""
    p = table.params
    if p.m - 1 < p.k:
        raise ValueError(f"cannot drop a candidate: m-1 = {p.m - 1} < k = {p.k}")
    out_params = ElectionParams(p.m - 1, p.n, p.k)
    dummy = 1 << (p.m - 1)
    entries = {}
    for profile in enumerate_profiles(out_params, admissible_only=True):
        try:
            committee = table.entries[profile_rank(profile, p.m)]
        except KeyError:
            raise ValueError(
                f"input table undefined at ({profile_to_str(profile)})"
            ) from None
        if committee & dummy:
            raise ValueError(
                f"input table is not weakly efficient: it elects the unapproved "
                f"candidate {set_to_str(dummy)} at ({profile_to_str(profile)})"
            )
        entries[profile_rank(profile, p.m - 1)] = committee
    return RuleTable(out_params, entries, table.domain_note)


def reduce_committee_size(table: RuleTable) -> RuleTable:
    """From committee size K (with K voters, K+1 candidates) to size K-1:
    append a phantom voter approving only a fresh candidate; the
    singleton-approvers lemma keeps that candidate in every winning
    committee, so stripping it leaves a size-(K-1) committee."""
    p = table.params
    if p.k < 2:
        raise ValueError("committee size must be at least 2")
    if p.n != p.k or p.m != p.k + 1:
        raise ValueError(
            f"expected n = k and m = k+1 at the input, got n={p.n}, m={p.m}, k={p.k}"
        )
    out_params = ElectionParams(p.m - 1, p.n - 1, p.k - 1)
    phantom = 1 << (p.m - 1)
    entries = {}
    for profile in enumerate_profiles(out_params, admissible_only=True):
        padded = profile + (phantom,)
        try:
            committee = table.entries[profile_rank(padded, p.m)]
        except KeyError:
            raise ValueError(
                f"input table undefined at ({profile_to_str(padded)})"
            ) from None
        if not committee & phantom:
            raise ValueError(
                f"input table violates the singleton-approvers lemma at "
                f"({profile_to_str(padded)}): {set_to_str(phantom)} not elected"
            )
        entries[profile_rank(profile, out_params.m)] = committee ^ phantom
    return RuleTable(out_params, entries, table.domain_note)


def droop_reduce(table: RuleTable, fixed_ballots: Sequence[int]) -> RuleTable:
    """Pad every profile with fixed ballots: a Droop-proportional
    strategyproof rule for q*k + r voters induces a Hare-proportional
    strategyproof rule for q*k voters."""
    p = table.params
    fixed = tuple(fixed_ballots)
    r = len(fixed)
    for b in fixed:
        if not is_valid_ballot(b, p.m):
            raise ValueError(f"fixed ballot {b} is not a nonempty proper subset")
    n_out = p.n - r
    if n_out <= 0 or n_out % p.k != 0:
        raise ValueError(
            f"{p.n} voters minus {r} fixed ballots is not a multiple of k={p.k}"
        )
    q = n_out // p.k
    if not 0 <= r < p.k <= q:
        raise ValueError(f"need 0 <= r < k <= q, got r={r}, k={p.k}, q={q}")
    # Droop quota arithmetic: n/(k+1) = (qk+r)/(k+1) < q, so q-sized groups
    # in the padded profile clear the Droop threshold
    if not p.n < q * (p.k + 1):
        raise AssertionError("quota guard violated despite r < k <= q")
    out_params = ElectionParams(p.m, n_out, p.k)
    entries = {}
    for profile in enumerate_profiles(out_params, admissible_only=True):
        padded = profile + fixed
        try:
            committee = table.entries[profile_rank(padded, p.m)]
        except KeyError:
            raise ValueError(
                f"input table undefined at ({profile_to_str(padded)})"
            ) from None
        entries[profile_rank(profile, p.m)] = committee
    return RuleTable(out_params, entries, table.domain_note)
