"""Minimal unsatisfiable set extraction at axiom-instance granularity.

Deletion-based: every deletable clause group gets a selector variable and is
activated through an assumption; the initial failed-assumption core is then
shrunk by retesting with one group dropped at a time, in descending group-id
order.  Function-totality and uniqueness clauses are hard background by
default (they define what a committee rule *is*, not an axiom under test),
so the resulting core reads as a list of proof ingredients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import profile_at_rank, profile_to_str, set_to_str
from .encoder import (
    KIND_EXTERNAL,
    KIND_NAMES,
    KIND_SP,
    KIND_SYMMETRY,
    KIND_TOTALITY,
    KIND_UNIQUENESS,
    Cnf,
    EncodeConfig,
    VarMap,
    allowed_committees,
)
from .solver import Solver

_KIND_INDEX = {name: i for i, name in enumerate(KIND_NAMES)}


@dataclass
class MusResult:
    """An irreducible unsatisfiable clause-group core."""

    group_ids: tuple  # retained groups, ascending
    clauses_by_group: dict  # group id -> tuple of clause indices
    instances: tuple  # AxiomInstance per retained group, same order
    profiles_mentioned: tuple  # profile ranks referenced by the core
    hard_kinds: tuple  # kind names treated as background
    stats: dict = field(default_factory=dict)

    def to_json_dict(self, params=None) -> dict:
        out = {
            "groups": [
                {
                    "id": gid,
                    "kind": inst.kind,
                    "profile": profile_to_str(profile_at_rank(inst.profile_rank, params))
                    if params is not None and inst.profile_rank >= 0
                    else inst.profile_rank,
                    "voter": inst.voter + 1 if inst.voter >= 0 else None,
                    "variant": profile_to_str(profile_at_rank(inst.variant_rank, params))
                    if params is not None and inst.variant_rank >= 0
                    else (inst.variant_rank if inst.variant_rank >= 0 else None),
                    "clauses": list(self.clauses_by_group[gid]),
                }
                for gid, inst in zip(self.group_ids, self.instances)
            ],
            "profiles_mentioned": [
                profile_to_str(profile_at_rank(r, params)) if params is not None else r
                for r in self.profiles_mentioned
            ],
            "hard_kinds": list(self.hard_kinds),
            "stats": self.stats,
        }
        return out


def _resolve_kinds(cnf: Cnf, deletable_kinds, full_clause: bool):
    if full_clause:
        return None  # sentinel: every clause its own deletable group
    if deletable_kinds is None:
        present = set(cnf.group_kind)
        if KIND_SP in present or KIND_SYMMETRY in present:
            return {KIND_SP, KIND_SYMMETRY}
        return {KIND_EXTERNAL}
    return {_KIND_INDEX[k] if isinstance(k, str) else k for k in deletable_kinds}


def _partition(cnf: Cnf, deletable_kinds, full_clause: bool):
    """Split clause indices into hard ones and a deletable-group mapping.

    Returns (hard clause indices, {group id: [clause indices]}).  In
    full-clause mode the group id is the clause index itself.
    """
    kinds = _resolve_kinds(cnf, deletable_kinds, full_clause)
    hard = []
    groups: dict = {}
    group_of = cnf.clause_group
    group_kind = cnf.group_kind
    if kinds is None:
        for ci in range(cnf.num_clauses):
            groups[ci] = [ci]
        return hard, groups
    for ci in range(cnf.num_clauses):
        gid = group_of[ci]
        if group_kind[gid] in kinds:
            groups.setdefault(gid, []).append(ci)
        else:
            hard.append(ci)
    return hard, groups


def extract_mus(
    cnf: Cnf,
    deletable_kinds: Optional[Sequence] = None,
    full_clause: bool = False,
    **solver_opts,
) -> MusResult:
    """Group-minimal unsatisfiable core of an unsatisfiable formula.

    deletable_kinds: axiom-instance kind names open to deletion (default:
    strategyproofness pairs and the symmetry assumption when present,
    otherwise every clause).  full_clause treats each clause as its own
    group, for diagnostics.  Raises ValueError if the input is satisfiable.
    """
    hard, groups = _partition(cnf, deletable_kinds, full_clause)
    kinds_used = _resolve_kinds(cnf, deletable_kinds, full_clause)
    group_ids = sorted(groups)
    nsel = len(group_ids)
    sel_base = cnf.num_vars  # selector i -> variable sel_base + 1 + i

    solver = Solver(cnf.num_vars + nsel, **solver_opts)
    for ci in hard:
        solver.add_clause(cnf.clause(ci))
    sel_of_group = {}
    for i, gid in enumerate(group_ids):
        sel = sel_base + 1 + i
        sel_of_group[gid] = sel
        for ci in groups[gid]:
            solver.add_clause([-sel] + cnf.clause(ci))

    def run(active: set):
        assumptions = [
            sel_of_group[g] if g in active else -sel_of_group[g]
            for g in group_ids
        ]
        return solver.solve(assumptions)

    all_groups = set(group_ids)
    result = run(all_groups)
    if result.satisfiable:
        raise ValueError("formula is satisfiable; no unsatisfiable core exists")
    sel_to_group = {v: g for g, v in sel_of_group.items()}
    retained = {
        sel_to_group[lit] for lit in result.failed_assumptions if lit > 0
    }
    solves = 1

    for gid in sorted(retained, reverse=True):
        if gid not in retained:
            continue
        trial = retained - {gid}
        result = run(trial)
        solves += 1
        if not result.satisfiable:
            retained = {
                sel_to_group[lit] for lit in result.failed_assumptions if lit > 0
            }

    retained_ids = tuple(sorted(retained))
    instances = tuple(cnf.instance(g) if not full_clause else cnf.instance_for_clause(g)
                      for g in retained_ids)
    profiles = set()
    for inst in instances:
        if inst.profile_rank >= 0:
            profiles.add(inst.profile_rank)
        if inst.variant_rank >= 0:
            profiles.add(inst.variant_rank)
    hard_kind_names = (
        tuple(
            KIND_NAMES[k]
            for k in sorted(set(cnf.group_kind) - kinds_used)
        )
        if kinds_used is not None
        else ()
    )
    return MusResult(
        group_ids=retained_ids,
        clauses_by_group={g: tuple(groups[g]) for g in retained_ids},
        instances=instances,
        profiles_mentioned=tuple(sorted(profiles)),
        hard_kinds=hard_kind_names,
        stats={"solver_calls": solves, "initial_groups": nsel},
    )


def verify_mus(
    cnf: Cnf,
    mus: MusResult,
    deletable_kinds: Optional[Sequence] = None,
    full_clause: bool = False,
) -> tuple:
    """Independent re-verification with fresh solver calls.

    Returns (core_unsat, minimal): the retained clause set together with the
    hard background is unsatisfiable, and dropping any single retained group
    restores satisfiability.
    """
    hard, groups = _partition(cnf, deletable_kinds, full_clause)

    def solve_subset(active) -> bool:
        solver = Solver(cnf.num_vars)
        for ci in hard:
            solver.add_clause(cnf.clause(ci))
        for g in active:
            for ci in groups[g]:
                solver.add_clause(cnf.clause(ci))
        return solver.solve().satisfiable

    core = set(mus.group_ids)
    core_unsat = not solve_subset(core)
    minimal = all(solve_subset(core - {g}) for g in mus.group_ids)
    return core_unsat, minimal


def core_cnf(
    cnf: Cnf,
    mus: MusResult,
    deletable_kinds: Optional[Sequence] = None,
    full_clause: bool = False,
) -> Cnf:
    """New Cnf holding the hard background plus the retained groups only
    (used for idempotence checks and external cross-checks)."""
    hard, groups = _partition(cnf, deletable_kinds, full_clause)
    out = Cnf(cnf.num_vars, params=cnf.params, config=cnf.config)
    remap: dict = {}

    def copy_clause(ci: int):
        gid = cnf.clause_group[ci]
        new_gid = remap.get(gid)
        if new_gid is None:
            new_gid = out.new_group(
                cnf.group_kind[gid],
                cnf.group_profile[gid],
                cnf.group_voter[gid],
                cnf.group_variant[gid],
            )
            remap[gid] = new_gid
        out.add_clause(cnf.clause(ci), new_gid)

    for ci in hard:
        copy_clause(ci)
    for g in mus.group_ids:
        for ci in groups[g]:
            copy_clause(ci)
    return out


# --- rendering ------------------------------------------------------------------


def reencode_group(cnf: Cnf, varmap: VarMap, gid: int) -> list:
    """Re-derive a group's clauses from the election semantics (used to
    round-trip-check MUS reports against the encoder)."""
    cfg: EncodeConfig = cnf.config
    if cfg is None:
        raise ValueError("CNF carries no encoding config")
    params = cfg.params
    kind = cnf.group_kind[gid]
    rank = cnf.group_profile[gid]
    profile = profile_at_rank(rank, params)
    if kind == KIND_TOTALITY:
        return [[varmap.var_for(rank, c) for c in allowed_committees(profile, cfg)]]
    if kind == KIND_UNIQUENESS:
        from itertools import combinations

        avars = [varmap.var_for(rank, c) for c in allowed_committees(profile, cfg)]
        return [[-x, -y] for x, y in combinations(avars, 2)]
    if kind == KIND_SYMMETRY:
        return [[varmap.var_for(rank, 0b1101)]]
    if kind == KIND_SP:
        voter = cnf.group_voter[gid]
        variant_rank = cnf.group_variant[gid]
        variant = profile_at_rank(variant_rank, params)
        ballot = profile[voter]
        out = []
        for c1 in allowed_committees(profile, cfg):
            i1 = c1 & ballot
            for c2 in allowed_committees(variant, cfg):
                i2 = c2 & ballot
                if i1 != i2 and i1 & i2 == i1:
                    out.append(
                        [-varmap.var_for(rank, c1), -varmap.var_for(variant_rank, c2)]
                    )
        return out
    raise ValueError(f"cannot re-encode groups of kind {KIND_NAMES[kind]!r}")


def render_mus(mus: MusResult, cnf: Cnf, varmap: VarMap) -> str:
    """Human-readable MUS report in election vocabulary, ordered by profile
    rank: what each mentioned profile's allowed committees are (and which
    axiom pruned them), then which strategyproofness links the core uses."""
    cfg: EncodeConfig = cnf.config
    if cfg is None:
        raise ValueError("manifest mismatch: CNF carries no encoding config")
    params = cfg.params
    committees = varmap.committees
    lines = []
    lines.append(
        f"minimal unsatisfiable core: {len(mus.group_ids)} axiom instances over "
        f"{len(mus.profiles_mentioned)} profiles "
        f"(background: {', '.join(mus.hard_kinds) or 'none'})"
    )

    base_cfg = EncodeConfig(
        params=params,
        sp_variant=cfg.sp_variant,
        proportionality_mode=cfg.proportionality_mode,
        weak_efficiency=False,
        ci_order=cfg.ci_order,
    )
    sp_by_profile: dict = {}
    sym_by_profile: dict = {}
    for gid, inst in zip(mus.group_ids, mus.instances):
        if inst.kind == KIND_NAMES[KIND_SP]:
            sp_by_profile.setdefault(inst.profile_rank, []).append(inst)
        elif inst.kind == KIND_NAMES[KIND_SYMMETRY]:
            sym_by_profile[inst.profile_rank] = inst

    def fmt_committees(cs) -> str:
        return "{" + ", ".join(set_to_str(c) for c in cs) + "}"

    for rank in mus.profiles_mentioned:
        profile = profile_at_rank(rank, params)
        ptext = profile_to_str(profile)
        after_prop = set(allowed_committees(profile, base_cfg))
        after_all = set(allowed_committees(profile, cfg))
        if len(after_prop) < len(committees):
            axiom = (
                "JR on party lists"
                if cfg.proportionality_mode == "jr-party-lists"
                else "Droop proportionality"
                if cfg.proportionality_mode == "droop-singleton"
                else "proportionality"
            )
            lines.append(
                f"{axiom} at profile ({ptext}) forces "
                f"{fmt_committees(sorted(after_prop))}"
            )
        if after_all < after_prop:
            lines.append(
                f"weak efficiency at profile ({ptext}) leaves "
                f"{fmt_committees(sorted(after_all))}"
            )
        if rank in sym_by_profile:
            lines.append(
                f"symmetry assumption at profile ({ptext}): f({ptext}) = acd"
            )
        for inst in sp_by_profile.get(rank, ()):
            vtext = profile_to_str(profile_at_rank(inst.variant_rank, params))
            lines.append(
                f"strategyproofness links ({ptext}) and ({vtext}) "
                f"for voter {inst.voter + 1}"
            )
    return "\n".join(lines)


def emit_gcnf(
    cnf: Cnf,
    dest,
    deletable_kinds: Optional[Sequence] = None,
    full_clause: bool = False,
) -> None:
    """Grouped-DIMACS (GCNF) export for external MUS extractors: hard
    clauses in group 0, each deletable axiom instance as its own group."""
    hard, groups = _partition(cnf, deletable_kinds, full_clause)
    group_ids = sorted(groups)
    number = {g: i + 1 for i, g in enumerate(group_ids)}
    close = False
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        f = open(dest, "w")
        close = True
    else:
        f = dest
    try:
        f.write(
            f"p gcnf {cnf.num_vars} {cnf.num_clauses} {len(group_ids)}\n"
        )
        for ci in hard:
            f.write("{0} " + " ".join(map(str, cnf.clause(ci))) + " 0\n")
        for g in group_ids:
            tag = "{" + str(number[g]) + "} "
            for ci in groups[g]:
                f.write(tag + " ".join(map(str, cnf.clause(ci))) + " 0\n")
    finally:
        if close:
            f.close()
