"""Propositional encoding of "a committee rule with the chosen axioms exists".

For fixed (m, n, k) the encoding introduces a variable x_{P,W} for every
admissible profile P and every committee W still allowed at P after the
configured proportionality axiom (and weak efficiency) pruned the committee
set.  Clauses say the rule is a total function (at-least-one / pairwise
at-most-one per profile) and that no voter can improve the committee, judged
against their truthful ballot, by deviating to an i-variant profile.

Every clause is registered with an axiom-instance group so that UNSAT cores
can be read back as proof ingredients.  The clause store is flat integer
arrays: the largest desk-scale instance (m=4, n=4, k=2 with arbitrary
deviations) has ~15 million binary clauses, which rules out per-clause
Python objects.
"""

from __future__ import annotations

import itertools
import json
from array import array
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .core import (
    ElectionParams,
    all_committees,
    ballot_count,
    committee_to_str,
    enumerate_ballots,
    is_admissible,
    is_candidate_interval,
    is_party_list,
    party_counts,
    profile_at_rank,
    profile_count,
    profile_from_str,
    profile_rank,
    profile_to_str,
    proper_nonempty_subsets,
    set_to_str,
    union_mask,
)

MANIFEST_FORMAT = "encode-manifest/1"
DEFAULT_PROFILE_CAP = 10**8
MANIFEST_CLAUSE_LIMIT = 5_000_000

PROP_MODES = ("hare-singleton", "jr-party-lists", "droop-singleton")
SP_VARIANTS = ("subset", "superset")

KIND_TOTALITY = 0
KIND_UNIQUENESS = 1
KIND_SP = 2
KIND_SYMMETRY = 3
KIND_EXTERNAL = 4
KIND_NAMES = (
    "function-totality",
    "function-uniqueness",
    "strategyproofness-pair",
    "symmetry-assumption",
    "external",
)


class EncodingError(ValueError):
    pass


class EmptyAllowedSet(EncodingError):
    """Some profile has no allowed committee: the instance is trivially UNSAT."""

    def __init__(self, profile, params):
        self.profile = profile
        super().__init__(
            f"no committee satisfies the configured axioms at profile "
            f"({profile_to_str(profile)}); instance is trivially unsatisfiable"
        )


class CapExceeded(EncodingError):
    pass


@dataclass(frozen=True)
class EncodeConfig:
    params: ElectionParams
    sp_variant: str = "subset"
    proportionality_mode: str = "hare-singleton"
    weak_efficiency: bool = False
    symmetry_break: bool = False
    ci_order: Optional[tuple] = None

    def __post_init__(self):
        if self.sp_variant not in SP_VARIANTS:
            raise ValueError(f"unknown sp_variant {self.sp_variant!r}")
        if self.proportionality_mode not in PROP_MODES:
            raise ValueError(
                f"unknown proportionality mode {self.proportionality_mode!r}"
            )
        if self.ci_order is not None:
            if sorted(self.ci_order) != list(range(self.params.m)):
                raise ValueError("ci_order must be a permutation of the candidates")
        if self.symmetry_break:
            p = self.params
            if p.n != 3 or p.k != 3 or p.m < 4:
                raise ValueError(
                    "symmetry breaking pins f(ab,c,d) = acd and needs "
                    "n = 3, k = 3, m >= 4"
                )

    def to_json_dict(self) -> dict:
        return {
            "m": self.params.m,
            "n": self.params.n,
            "k": self.params.k,
            "sp_variant": self.sp_variant,
            "proportionality_mode": self.proportionality_mode,
            "weak_efficiency": self.weak_efficiency,
            "symmetry_break": self.symmetry_break,
            "ci_order": list(self.ci_order) if self.ci_order else None,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EncodeConfig":
        return cls(
            params=ElectionParams(data["m"], data["n"], data["k"]),
            sp_variant=data["sp_variant"],
            proportionality_mode=data["proportionality_mode"],
            weak_efficiency=data["weak_efficiency"],
            symmetry_break=data["symmetry_break"],
            ci_order=tuple(data["ci_order"]) if data.get("ci_order") else None,
        )


@dataclass(frozen=True)
class AxiomInstance:
    """The election-semantics payload behind a clause group."""

    kind: str
    profile_rank: int = -1
    voter: int = -1  # 0-based; rendered 1-based in reports
    variant_rank: int = -1

    def describe(self, params: Optional[ElectionParams]) -> str:
        if params is None or self.profile_rank < 0:
            return self.kind
        ptext = profile_to_str(profile_at_rank(self.profile_rank, params))
        if self.kind == KIND_NAMES[KIND_SP]:
            vtext = profile_to_str(profile_at_rank(self.variant_rank, params))
            return (
                f"strategyproofness links ({ptext}) and ({vtext}) "
                f"for voter {self.voter + 1}"
            )
        if self.kind == KIND_NAMES[KIND_SYMMETRY]:
            return f"symmetry assumption at profile ({ptext})"
        return f"{self.kind} at profile ({ptext})"


class _GroupView:
    """Lazy mapping from clause index to AxiomInstance."""

    def __init__(self, cnf: "Cnf"):
        self._cnf = cnf

    def __getitem__(self, clause_index: int) -> AxiomInstance:
        return self._cnf.instance_for_clause(clause_index)

    def __len__(self) -> int:
        return self._cnf.num_clauses


class Cnf:
    """CNF formula with flat-array storage and per-clause axiom groups."""

    def __init__(self, num_vars: int = 0, params=None, config=None):
        self.num_vars = num_vars
        self.params = params
        self.config = config
        self._lits = array("i")  # 0-terminated clause literal stream
        self._starts = array("i")
        self.clause_group = array("i")
        self.group_kind = bytearray()
        self.group_profile = array("i")
        self.group_voter = array("b")
        self.group_variant = array("i")

    # -- construction ---------------------------------------------------

    def new_group(self, kind: int, profile: int = -1, voter: int = -1,
                  variant: int = -1) -> int:
        gid = len(self.group_kind)
        self.group_kind.append(kind)
        self.group_profile.append(profile)
        self.group_voter.append(voter)
        self.group_variant.append(variant)
        return gid

    def add_clause(self, lits: Sequence[int], group: int = -1) -> None:
        if not lits:
            raise ValueError("empty clause")
        for lit in lits:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"literal {lit} out of range")
        if group < 0:
            group = self.new_group(KIND_EXTERNAL)
        self._starts.append(len(self._lits))
        self._lits.extend(lits)
        self._lits.append(0)
        self.clause_group.append(group)

    # -- access ----------------------------------------------------------

    @property
    def num_clauses(self) -> int:
        return len(self._starts)

    @property
    def num_groups(self) -> int:
        return len(self.group_kind)

    def clause(self, index: int) -> list:
        start = self._starts[index]
        lits = self._lits
        end = start
        while lits[end] != 0:
            end += 1
        return list(lits[start:end])

    def iter_clauses(self) -> Iterator[list]:
        lits = self._lits
        cur: list = []
        for lit in lits:
            if lit == 0:
                yield cur
                cur = []
            else:
                cur.append(lit)

    def instance(self, group_id: int) -> AxiomInstance:
        return AxiomInstance(
            kind=KIND_NAMES[self.group_kind[group_id]],
            profile_rank=self.group_profile[group_id],
            voter=self.group_voter[group_id],
            variant_rank=self.group_variant[group_id],
        )

    def instance_for_clause(self, clause_index: int) -> AxiomInstance:
        return self.instance(self.clause_group[clause_index])

    @property
    def groups(self) -> _GroupView:
        return _GroupView(self)

    def clauses_by_group(self) -> dict:
        out: dict = {}
        for ci, gid in enumerate(self.clause_group):
            out.setdefault(gid, []).append(ci)
        return out


class VarMap:
    """Bijection between variable ids and (profile rank, committee) pairs."""

    def __init__(self, params: ElectionParams):
        self.params = params
        self.committees = all_committees(params.m, params.k)
        self._cindex = {c: i for i, c in enumerate(self.committees)}
        self.ranks: list = []  # encoded profile ranks, ascending
        self.var_profile = array("i")
        self.var_committee = array("i")
        self._slots: dict = {}  # rank -> tuple of var ids per committee index
        self.domain_note = "admissible"

    def add_profile(self, rank: int, allowed_mask: int) -> tuple:
        nc = len(self.committees)
        slots = [0] * nc
        base = len(self.var_profile)
        for ci in range(nc):
            if allowed_mask >> ci & 1:
                self.var_profile.append(rank)
                self.var_committee.append(self.committees[ci])
                base += 1
                slots[ci] = base
        slots = tuple(slots)
        self.ranks.append(rank)
        self._slots[rank] = slots
        return slots

    @property
    def num_vars(self) -> int:
        return len(self.var_profile)

    def pair_for(self, var: int) -> tuple:
        if not 1 <= var <= self.num_vars:
            raise KeyError(f"variable {var} not in map")
        return self.var_profile[var - 1], self.var_committee[var - 1]

    def var_for(self, rank: int, committee: int) -> int:
        slots = self._slots.get(rank)
        if slots is None:
            raise KeyError(f"profile rank {rank} not encoded")
        var = slots[self._cindex[committee]]
        if var == 0:
            raise KeyError(
                f"committee {committee_to_str(committee)} not allowed at rank {rank}"
            )
        return var

    def slots_for(self, rank: int):
        return self._slots.get(rank)

    def committees_for(self, rank: int) -> list:
        slots = self._slots.get(rank)
        if slots is None:
            raise KeyError(f"profile rank {rank} not encoded")
        return [self.committees[ci] for ci, v in enumerate(slots) if v]


# --- allowed committees ------------------------------------------------------


def _allowed_committee_mask(
    profile, committees: Sequence[int], cfg: EncodeConfig
) -> int:
    params = cfg.params
    mode = cfg.proportionality_mode
    mask = (1 << len(committees)) - 1
    party = is_party_list(profile)

    if mode == "droop-singleton" or party:
        counts = party_counts(profile)
        if mode == "hare-singleton":
            if party:
                required = 0
                for ballot, count in counts.items():
                    if ballot.bit_count() == 1 and count * params.k >= params.n:
                        required |= ballot
                if required:
                    for ci, c in enumerate(committees):
                        if c & required != required:
                            mask &= ~(1 << ci)
        elif mode == "droop-singleton":
            required = 0
            for ballot, count in counts.items():
                if ballot.bit_count() == 1 and count * (params.k + 1) > params.n:
                    required |= ballot
            if required:
                for ci, c in enumerate(committees):
                    if c & required != required:
                        mask &= ~(1 << ci)
        elif mode == "jr-party-lists":
            if party:
                for ballot, count in counts.items():
                    if count * params.k >= params.n:
                        for ci, c in enumerate(committees):
                            if not c & ballot:
                                mask &= ~(1 << ci)

    if cfg.weak_efficiency:
        union = union_mask(profile)
        if union.bit_count() >= params.k:
            for ci, c in enumerate(committees):
                if c & ~union:
                    mask &= ~(1 << ci)
    return mask


def allowed_committees(profile, cfg: EncodeConfig) -> list:
    """Committees still allowed at a profile (lexicographic member order)."""
    if not is_admissible(profile, cfg.params):
        raise ValueError("profile is inadmissible")
    committees = all_committees(cfg.params.m, cfg.params.k)
    mask = _allowed_committee_mask(profile, committees, cfg)
    return [c for ci, c in enumerate(committees) if mask >> ci & 1]


# --- encoding ----------------------------------------------------------------


def _better_pairs(ballot: int, committees: Sequence[int]) -> tuple:
    """Committee index pairs (ci, cj) with (C_j & ballot) a strict superset of
    (C_i & ballot): switching the outcome from C_i to C_j improves a voter
    whose truthful ballot this is."""
    inters = [c & ballot for c in committees]
    out = []
    for ci, ii in enumerate(inters):
        for cj, ij in enumerate(inters):
            if ii != ij and ii & ij == ii:
                out.append((ci, cj))
    return tuple(out)


def encode(cfg: EncodeConfig, cap: int = DEFAULT_PROFILE_CAP):
    """Build the CNF and variable map for the configured instance.

    Returns (Cnf, VarMap).  Raises EmptyAllowedSet if some profile admits no
    committee (trivially unsatisfiable), CapExceeded if the enumeration is
    too large.
    """
    params = cfg.params
    m, n, k = params.m, params.n, params.k
    total = profile_count(m, n)
    if total > cap:
        raise CapExceeded(
            f"enumeration of {total} profiles at m={m}, n={n} exceeds cap {cap}"
        )

    ballots = enumerate_ballots(m)
    nballots = len(ballots)
    committees = all_committees(m, k)
    ncomm = len(committees)
    min_union = k

    varmap = VarMap(params)
    ci_order = cfg.ci_order
    if ci_order:
        varmap.domain_note = "ci:" + "".join(
            set_to_str(1 << c) for c in ci_order
        )
    encoded = bytearray(total)
    allowed_masks = array("q", bytes(8 * total))
    vslots: list = [None] * total

    # pass 1: admissibility, allowed sets, variable layout
    rank = 0
    for profile in itertools.product(ballots, repeat=n):
        if union_mask(profile).bit_count() >= min_union and (
            ci_order is None or is_candidate_interval(profile, ci_order)
        ):
            amask = _allowed_committee_mask(profile, committees, cfg)
            if amask == 0:
                raise EmptyAllowedSet(profile, params)
            encoded[rank] = 1
            allowed_masks[rank] = amask
            vslots[rank] = varmap.add_profile(rank, amask)
        rank += 1

    cnf = Cnf(varmap.num_vars, params=params, config=cfg)
    lits = cnf._lits
    starts = cnf._starts
    clause_group = cnf.clause_group
    lits_extend = lits.extend
    starts_append = starts.append
    group_append = clause_group.append
    group_kind = cnf.group_kind
    group_profile = cnf.group_profile
    group_voter = cnf.group_voter
    group_variant = cnf.group_variant

    # the symmetry assumption goes first so that MUS deletion (descending
    # group order) considers dropping it only once the rest of the core is
    # minimal: cores then keep the wlog step the written proof starts from
    if cfg.symmetry_break:
        sym_rank = profile_rank(profile_from_str("ab,c,d", m), m)
        sym_committee = 0b1101  # acd
        var = varmap.var_for(sym_rank, sym_committee)
        gid = cnf.new_group(KIND_SYMMETRY, sym_rank)
        cnf.add_clause([var], gid)

    better = {b: _better_pairs(b, committees) for b in ballots}
    if cfg.sp_variant == "subset":
        deviations = {b: tuple(proper_nonempty_subsets(b)) for b in ballots}
    else:
        deviations = {b: tuple(b2 for b2 in ballots if b2 != b) for b in ballots}
    strides = [nballots ** (n - 1 - i) for i in range(n)]

    # (ballot, allowed mask at P) -> pairs with C_i allowed at P
    fp_cache: dict = {}

    def filtered_pairs(ballot: int, amask: int) -> tuple:
        key = (ballot, amask)
        pairs = fp_cache.get(key)
        if pairs is None:
            pairs = tuple(
                (ci, cj) for ci, cj in better[ballot] if amask >> ci & 1
            )
            fp_cache[key] = pairs
        return pairs

    # pass 2: clauses
    rank = 0
    for profile in itertools.product(ballots, repeat=n):
        if not encoded[rank]:
            rank += 1
            continue
        slots = vslots[rank]
        amask = allowed_masks[rank]
        avars = [v for v in slots if v]

        gid = len(group_kind)
        group_kind.append(KIND_TOTALITY)
        group_profile.append(rank)
        group_voter.append(-1)
        group_variant.append(-1)
        starts_append(len(lits))
        lits_extend(avars)
        lits.append(0)
        group_append(gid)

        if len(avars) > 1:
            gid = len(group_kind)
            group_kind.append(KIND_UNIQUENESS)
            group_profile.append(rank)
            group_voter.append(-1)
            group_variant.append(-1)
            for x, y in itertools.combinations(avars, 2):
                starts_append(len(lits))
                lits_extend((-x, -y, 0))
                group_append(gid)

        for i in range(n):
            b = profile[i]
            stride = strides[i]
            base = rank - (b - 1) * stride
            pairs = filtered_pairs(b, amask)
            if not pairs:
                continue
            for b2 in deviations[b]:
                r2 = base + (b2 - 1) * stride
                if not encoded[r2]:
                    continue
                slots2 = vslots[r2]
                gid = -1
                for ci, cj in pairs:
                    v2 = slots2[cj]
                    if v2:
                        if gid < 0:
                            gid = len(group_kind)
                            group_kind.append(KIND_SP)
                            group_profile.append(rank)
                            group_voter.append(i)
                            group_variant.append(r2)
                        starts_append(len(lits))
                        lits_extend((-slots[ci], -v2, 0))
                        group_append(gid)
        rank += 1

    return cnf, varmap


# --- DIMACS and manifest ------------------------------------------------------


def emit_dimacs(cnf: Cnf, varmap: Optional[VarMap], dest) -> None:
    """Write standard DIMACS CNF.  With a varmap, each variable gets a
    comment line `c x<id> = f(<profile>) == <committee>`.  Byte-deterministic
    for a given Cnf."""
    close = False
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        f = open(dest, "w")
        close = True
    else:
        f = dest
    try:
        write = f.write
        if varmap is not None:
            params = varmap.params
            ptext_cache: dict = {}
            chunk = []
            for idx in range(varmap.num_vars):
                rank = varmap.var_profile[idx]
                ptext = ptext_cache.get(rank)
                if ptext is None:
                    ptext = profile_to_str(profile_at_rank(rank, params))
                    ptext_cache[rank] = ptext
                ctext = set_to_str(varmap.var_committee[idx])
                chunk.append(f"c x{idx + 1} = f({ptext}) == {ctext}\n")
                if len(chunk) >= 65536:
                    write("".join(chunk))
                    chunk.clear()
            write("".join(chunk))
        write(f"p cnf {cnf.num_vars} {cnf.num_clauses}\n")
        chunk = []
        cur: list = []
        for lit in cnf._lits:
            if lit == 0:
                cur.append("0\n")
                chunk.append(" ".join(cur))
                cur = []
                if len(chunk) >= 65536:
                    write("".join(chunk))
                    chunk.clear()
            else:
                cur.append(str(lit))
        write("".join(chunk))
    finally:
        if close:
            f.close()


def parse_dimacs_comment(line: str):
    """Decode a `c x<id> = f(<profile>) == <committee>` comment line."""
    body = line[1:].strip()
    if not body.startswith("x") or " = f(" not in body:
        return None
    try:
        var_text, rest = body[1:].split(" = f(", 1)
        ptext, ctext = rest.split(") == ", 1)
        return int(var_text), ptext.strip(), ctext.strip()
    except ValueError:
        return None


def write_manifest(cnf: Cnf, varmap: VarMap, cfg: EncodeConfig, path) -> None:
    """Sidecar JSON mapping variable ids to election semantics and clause
    indices to axiom-instance descriptions."""
    params = cfg.params
    ptext_cache: dict = {}

    def ptext(rank: int) -> str:
        t = ptext_cache.get(rank)
        if t is None:
            t = profile_to_str(profile_at_rank(rank, params))
            ptext_cache[rank] = t
        return t

    data: dict = {
        "format": MANIFEST_FORMAT,
        "config": cfg.to_json_dict(),
        "num_vars": cnf.num_vars,
        "num_clauses": cnf.num_clauses,
        "vars": [
            [ptext(varmap.var_profile[i]), set_to_str(varmap.var_committee[i])]
            for i in range(varmap.num_vars)
        ],
    }
    if cnf.num_clauses <= MANIFEST_CLAUSE_LIMIT:
        data["groups"] = [
            {
                "kind": KIND_NAMES[cnf.group_kind[g]],
                "profile": ptext(cnf.group_profile[g])
                if cnf.group_profile[g] >= 0
                else None,
                "voter": cnf.group_voter[g] + 1 if cnf.group_voter[g] >= 0 else None,
                "variant": ptext(cnf.group_variant[g])
                if cnf.group_variant[g] >= 0
                else None,
            }
            for g in range(cnf.num_groups)
        ]
        data["clause_groups"] = list(cnf.clause_group)
    else:
        data["clause_groups_omitted"] = True
    with open(path, "w") as f:
        json.dump(data, f)


def load_manifest(cnf: Cnf, path):
    """Attach manifest data to a parsed CNF: returns (cfg, varmap) and
    restores the clause groups on `cnf` when present."""
    with open(path) as f:
        data = json.load(f)
    if data.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"unsupported manifest format {data.get('format')!r}")
    cfg = EncodeConfig.from_json_dict(data["config"])
    params = cfg.params
    varmap = VarMap(params)
    # group vars by profile, preserving variable order
    pending_rank = None
    pending_mask = 0
    cindex = varmap._cindex
    for ptext, ctext in data["vars"]:
        rank = profile_rank(profile_from_str(ptext, params.m), params.m)
        if rank != pending_rank:
            if pending_rank is not None:
                varmap.add_profile(pending_rank, pending_mask)
            pending_rank = rank
            pending_mask = 0
        from .core import set_from_str

        pending_mask |= 1 << cindex[set_from_str(ctext, params.m)]
    if pending_rank is not None:
        varmap.add_profile(pending_rank, pending_mask)
    if varmap.num_vars != data["num_vars"]:
        raise ValueError("manifest variable map is inconsistent")

    if "groups" in data and "clause_groups" in data:
        cnf.group_kind = bytearray()
        cnf.group_profile = array("i")
        cnf.group_voter = array("b")
        cnf.group_variant = array("i")
        kind_index = {name: i for i, name in enumerate(KIND_NAMES)}
        for g in data["groups"]:
            cnf.new_group(
                kind_index[g["kind"]],
                profile_rank(profile_from_str(g["profile"], params.m), params.m)
                if g["profile"]
                else -1,
                (g["voter"] - 1) if g["voter"] else -1,
                profile_rank(profile_from_str(g["variant"], params.m), params.m)
                if g["variant"]
                else -1,
            )
        cnf.clause_group = array("i", data["clause_groups"])
    cnf.params = params
    cnf.config = cfg
    return cfg, varmap
