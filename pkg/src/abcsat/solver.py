"""Embedded CDCL SAT solver with assumptions, plus DIMACS interoperability.

Conflict-driven clause learning with watched literals, VSIDS branching,
phase saving, optional Luby restarts and learned-clause deletion.  Binary
clauses (the bulk of the committee encodings) live in per-literal
implication arrays instead of the watched-clause store.  Assumptions are
decision-level-zero-style pseudo-decisions taken before real decisions;
failed-assumption analysis yields an unsatisfiable assumption subset.

Everything is deterministic: no randomness, no clock-dependent choices, so
repeated runs return identical results.
"""

from __future__ import annotations

import heapq
from array import array
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .encoder import Cnf, VarMap
from .rules import RuleTable

SATISFIABLE = "satisfiable"
UNSATISFIABLE = "unsatisfiable"
ABORTED = "aborted"

_VAR_DECAY = 0.95
_ACT_LIMIT = 1e100


@dataclass
class SolveResult:
    status: str
    model: Optional[tuple] = None  # index by variable, entry 0 unused
    failed_assumptions: Optional[tuple] = None
    stats: dict = field(default_factory=dict)

    @property
    def satisfiable(self) -> bool:
        return self.status == SATISFIABLE


def _luby(i: int) -> int:
    # Luby restart sequence (0-based): 1 1 2 1 1 2 4 ...
    i += 1
    while True:
        k = i.bit_length()
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1


class Solver:
    """CDCL solver over variables 1..num_vars.

    Literals are external DIMACS integers at the API boundary and bit-packed
    internally (2v for +v, 2v+1 for -v).
    """

    def __init__(
        self,
        num_vars: int,
        use_restarts: bool = True,
        use_deletion: bool = True,
        restart_base: int = 128,
    ):
        self.nvars = num_vars
        self.use_restarts = use_restarts
        self.use_deletion = use_deletion
        self.restart_base = restart_base

        nlits = 2 * num_vars + 2
        self.assigns = bytearray(num_vars + 1)  # 0 undef / 1 true / 2 false
        self.level = array("i", bytes(4 * (num_vars + 1)))
        self.reason_lit = array("i", b"\xff\xff\xff\xff" * (num_vars + 1))
        self.reason_cls = array("i", b"\xff\xff\xff\xff" * (num_vars + 1))
        self.bin_adj = [array("i") for _ in range(nlits)]
        self.watches: list = [[] for _ in range(nlits)]
        self.clauses: list = []  # n-ary clauses (original + learned)
        self.learned: set = set()  # refs of learned n-ary clauses
        self.cla_act: dict = {}
        self.trail: list = []
        self.trail_lim: list = []
        self.qhead = 0
        self.seen = bytearray(num_vars + 1)
        self.activity = array("d", bytes(8 * (num_vars + 1)))
        self.polarity = bytearray(num_vars + 1)  # saved phase, 0 = false
        self.var_inc = 1.0
        self.cla_inc = 1.0
        self.heap: list = []
        for v in range(1, num_vars + 1):
            self.heap.append((0.0, v))
        self.unsat = False  # formula is unsat at level 0
        self.max_learnts = 20000
        self.conflicts = 0
        self.decisions = 0
        self.propagations = 0

    # -- clause ingestion -------------------------------------------------

    def add_clause(self, ext_lits: Sequence[int]) -> bool:
        """Add a clause (external literals).  Returns False if the formula
        became trivially unsatisfiable."""
        if self.unsat:
            return False
        if self.trail_lim:
            self._cancel_until(0)
        lits = []
        seen = set()
        for el in ext_lits:
            v = abs(el)
            if not 1 <= v <= self.nvars:
                raise ValueError(f"literal {el} out of range")
            lit = 2 * v + (el < 0)
            if lit ^ 1 in seen:
                return True  # tautology
            if lit not in seen:
                seen.add(lit)
                lits.append(lit)
        # drop literals already false at level 0, satisfied clause is kept out
        assigns = self.assigns
        kept = []
        for lit in lits:
            a = assigns[lit >> 1]
            if a == 0:
                kept.append(lit)
            elif a == 1 + (lit & 1):
                return True  # satisfied at level 0
        if not kept:
            self.unsat = True
            return False
        if len(kept) == 1:
            if not self._enqueue(kept[0], -1, -1):
                self.unsat = True
                return False
            if self._propagate() is not None:
                self.unsat = True
                return False
            return True
        if len(kept) == 2:
            a, b = kept
            self.bin_adj[a ^ 1].append(b)
            self.bin_adj[b ^ 1].append(a)
            return True
        ref = len(self.clauses)
        self.clauses.append(kept)
        self.watches[kept[0]].append(ref)
        self.watches[kept[1]].append(ref)
        return True

    @classmethod
    def from_cnf(cls, cnf: Cnf, **kwargs) -> "Solver":
        """Bulk-load a Cnf.  Binary clauses go straight to the implication
        arrays; units are queued for level-0 propagation at solve time."""
        solver = cls(cnf.num_vars, **kwargs)
        bin_adj = solver.bin_adj
        clauses = solver.clauses
        watches = solver.watches
        units = []
        lits = cnf._lits
        i = 0
        end = len(lits)
        cur = []
        while i < end:
            lit = lits[i]
            i += 1
            if lit != 0:
                cur.append(2 * lit if lit > 0 else -2 * lit + 1)
                continue
            ln = len(cur)
            if ln == 2:
                a, b = cur
                if a == b ^ 1:
                    cur = []
                    continue
                if a == b:
                    units.append(a)
                else:
                    bin_adj[a ^ 1].append(b)
                    bin_adj[b ^ 1].append(a)
            elif ln == 1:
                units.append(cur[0])
            elif ln == 0:
                solver.unsat = True
            else:
                kept = sorted(set(cur))
                taut = any(
                    kept[j] ^ 1 == kept[j + 1] for j in range(len(kept) - 1)
                )
                if not taut:
                    if len(kept) == 2:
                        a, b = kept
                        bin_adj[a ^ 1].append(b)
                        bin_adj[b ^ 1].append(a)
                    else:
                        ref = len(clauses)
                        clauses.append(kept)
                        watches[kept[0]].append(ref)
                        watches[kept[1]].append(ref)
            cur = []
        for u in units:
            if solver.unsat:
                break
            a = solver.assigns[u >> 1]
            if a == 0:
                solver._enqueue(u, -1, -1)
            elif a == 2 - (u & 1):
                solver.unsat = True
        if not solver.unsat and solver._propagate() is not None:
            solver.unsat = True
        solver.max_learnts = max(20000, min(len(clauses) // 2, 150000))
        return solver

    # -- assignment core ---------------------------------------------------

    def _enqueue(self, lit: int, r_lit: int, r_cls: int) -> bool:
        v = lit >> 1
        a = self.assigns[v]
        if a:
            return a == 1 + (lit & 1)
        self.assigns[v] = 1 + (lit & 1)
        self.level[v] = len(self.trail_lim)
        self.reason_lit[v] = r_lit
        self.reason_cls[v] = r_cls
        self.trail.append(lit)
        return True

    def _propagate(self):
        trail = self.trail
        assigns = self.assigns
        bin_adj = self.bin_adj
        watches = self.watches
        clauses = self.clauses
        level = self.level
        reason_lit = self.reason_lit
        reason_cls = self.reason_cls
        qhead = self.qhead
        dl = len(self.trail_lim)
        confl = None
        nprops = 0
        while qhead < len(trail):
            t = trail[qhead]
            qhead += 1
            nprops += 1
            for q in bin_adj[t]:
                v = q >> 1
                a = assigns[v]
                if a == 0:
                    assigns[v] = 1 + (q & 1)
                    level[v] = dl
                    reason_lit[v] = t ^ 1
                    reason_cls[v] = -1
                    trail.append(q)
                elif a == 2 - (q & 1):
                    confl = (t ^ 1, q)
                    break
            if confl is not None:
                qhead = len(trail)
                break
            f = t ^ 1
            wl = watches[f]
            i = j = 0
            n_wl = len(wl)
            while i < n_wl:
                ref = wl[i]
                i += 1
                cl = clauses[ref]
                if cl is None:
                    continue
                if cl[0] == f:
                    cl[0] = cl[1]
                    cl[1] = f
                w0 = cl[0]
                if assigns[w0 >> 1] == 1 + (w0 & 1):
                    wl[j] = ref
                    j += 1
                    continue
                moved = False
                for idx in range(2, len(cl)):
                    q = cl[idx]
                    if assigns[q >> 1] != 2 - (q & 1):
                        cl[1] = q
                        cl[idx] = f
                        watches[q].append(ref)
                        moved = True
                        break
                if moved:
                    continue
                wl[j] = ref
                j += 1
                v = w0 >> 1
                a = assigns[v]
                if a == 0:
                    assigns[v] = 1 + (w0 & 1)
                    level[v] = dl
                    reason_lit[v] = -1
                    reason_cls[v] = ref
                    trail.append(w0)
                else:
                    confl = cl
                    while i < n_wl:
                        wl[j] = wl[i]
                        j += 1
                        i += 1
                    break
            del wl[j:]
            if confl is not None:
                qhead = len(trail)
                break
        self.qhead = qhead
        self.propagations += nprops
        return confl

    def _cancel_until(self, target: int) -> None:
        if len(self.trail_lim) <= target:
            return
        trail = self.trail
        assigns = self.assigns
        polarity = self.polarity
        activity = self.activity
        bound = self.trail_lim[target]
        rebuild = len(trail) - bound > 8192
        for idx in range(len(trail) - 1, bound - 1, -1):
            lit = trail[idx]
            v = lit >> 1
            polarity[v] = 2 - assigns[v]  # 1 if was true else 0
            assigns[v] = 0
            if not rebuild:
                heapq.heappush(self.heap, (-activity[v], v))
        del trail[bound:]
        del self.trail_lim[target:]
        self.qhead = bound
        if rebuild:
            # bulk backtracks (restarts) rebuild the heap instead of pushing
            # hundreds of thousands of stale entries
            heap = [
                (-activity[u], u)
                for u in range(1, self.nvars + 1)
                if assigns[u] == 0
            ]
            heapq.heapify(heap)
            self.heap = heap

    # -- heuristics ---------------------------------------------------------

    def _bump_var(self, v: int) -> None:
        activity = self.activity
        activity[v] += self.var_inc
        if activity[v] > _ACT_LIMIT:
            for u in range(1, self.nvars + 1):
                activity[u] *= 1e-100
            self.var_inc *= 1e-100
            self.cla_inc = self.cla_inc  # clause activities are independent
            heap = [
                (-activity[u], u)
                for u in range(1, self.nvars + 1)
                if self.assigns[u] == 0
            ]
            heapq.heapify(heap)
            self.heap = heap
        else:
            heapq.heappush(self.heap, (-activity[v], v))

    def _bump_clause(self, ref: int) -> None:
        act = self.cla_act
        if ref in act:
            act[ref] += self.cla_inc
            if act[ref] > _ACT_LIMIT:
                for r in act:
                    act[r] *= 1e-100
                self.cla_inc *= 1e-100

    def _pick_branch_var(self) -> int:
        heap = self.heap
        assigns = self.assigns
        activity = self.activity
        while heap:
            na, v = heapq.heappop(heap)
            if assigns[v] == 0 and -na == activity[v]:
                return v
        for v in range(1, self.nvars + 1):
            if assigns[v] == 0:
                return v
        return 0

    # -- conflict analysis ----------------------------------------------------

    def _analyze(self, confl) -> tuple:
        """1UIP learning.  Returns (learnt clause, backtrack level); the
        asserting literal is learnt[0]."""
        seen = self.seen
        trail = self.trail
        level = self.level
        reason_lit = self.reason_lit
        reason_cls = self.reason_cls
        clauses = self.clauses
        dl = len(self.trail_lim)

        learnt = [0]
        cleanup = []
        path = 0
        p = -1
        idx = len(trail) - 1
        reason = confl
        while True:
            for q in reason:
                if q == p:
                    continue
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    cleanup.append(v)
                    self._bump_var(v)
                    if level[v] >= dl:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            path -= 1
            if path == 0:
                break
            v = p >> 1
            rl = reason_lit[v]
            if rl >= 0:
                reason = (rl,)
            else:
                ref = reason_cls[v]
                self._bump_clause(ref)
                reason = clauses[ref]
        learnt[0] = p ^ 1

        # drop literals implied by the rest of the learnt clause (cheap,
        # one-level self-subsumption check)
        out = [learnt[0]]
        for q in learnt[1:]:
            v = q >> 1
            rl = reason_lit[v]
            rc = reason_cls[v]
            if rl < 0 and rc < 0:
                out.append(q)
            elif rl >= 0:
                u = rl >> 1
                if not seen[u] and level[u] > 0:
                    out.append(q)
            else:
                for x in clauses[rc]:
                    u = x >> 1
                    if u != v and not seen[u] and level[u] > 0:
                        out.append(q)
                        break

        for v in cleanup:
            seen[v] = 0

        if len(out) == 1:
            bt = 0
        else:
            # move a highest-level literal into slot 1
            max_i = 1
            max_lv = level[out[1] >> 1]
            for i in range(2, len(out)):
                lv = level[out[i] >> 1]
                if lv > max_lv:
                    max_lv = lv
                    max_i = i
            out[1], out[max_i] = out[max_i], out[1]
            bt = max_lv

        self.var_inc /= _VAR_DECAY
        self.cla_inc /= 0.999
        return out, bt

    def _analyze_final(self, p: int) -> list:
        """Assumption p is false under the current (assumption-only) trail.
        Returns a sufficient subset of assumption literals (internal)."""
        out = {p}
        if not self.trail_lim:
            return sorted(out)
        seen = self.seen
        trail = self.trail
        level = self.level
        reason_lit = self.reason_lit
        reason_cls = self.reason_cls
        cleanup = []
        v = p >> 1
        seen[v] = 1
        cleanup.append(v)
        for idx in range(len(trail) - 1, self.trail_lim[0] - 1, -1):
            q = trail[idx]
            v = q >> 1
            if not seen[v]:
                continue
            rl = reason_lit[v]
            rc = reason_cls[v]
            if rl < 0 and rc < 0:
                out.add(q)
            elif rl >= 0:
                u = rl >> 1
                if level[u] > 0 and not seen[u]:
                    seen[u] = 1
                    cleanup.append(u)
            else:
                for x in self.clauses[rc]:
                    u = x >> 1
                    if u != v and level[u] > 0 and not seen[u]:
                        seen[u] = 1
                        cleanup.append(u)
        for v in cleanup:
            seen[v] = 0
        return sorted(out)

    # -- learned-clause management ---------------------------------------------

    def _record_learnt(self, out: list) -> None:
        if len(out) == 1:
            if not self._enqueue(out[0], -1, -1):
                self.unsat = True
            return
        if len(out) == 2:
            a, b = out
            self.bin_adj[a ^ 1].append(b)
            self.bin_adj[b ^ 1].append(a)
            self._enqueue(a, b, -1)
            return
        ref = len(self.clauses)
        self.clauses.append(out)
        self.watches[out[0]].append(ref)
        self.watches[out[1]].append(ref)
        self.learned.add(ref)
        self.cla_act[ref] = self.cla_inc
        self._enqueue(out[0], -1, ref)

    def _reduce_db(self) -> None:
        clauses = self.clauses
        reason_cls = self.reason_cls
        assigns = self.assigns
        locked = set()
        for lit in self.trail:
            rc = reason_cls[lit >> 1]
            if rc >= 0:
                locked.add(rc)
        cand = sorted(
            (ref for ref in self.learned if ref not in locked),
            key=lambda r: (self.cla_act.get(r, 0.0), r),
        )
        for ref in cand[: len(cand) // 2]:
            clauses[ref] = None
            self.learned.discard(ref)
            self.cla_act.pop(ref, None)
        self.max_learnts = int(self.max_learnts * 1.25)

    # -- main search --------------------------------------------------------------

    def solve(
        self,
        assumptions: Sequence[int] = (),
        conflict_budget: Optional[int] = None,
    ) -> SolveResult:
        stats_start = self.conflicts
        if self.unsat:
            return SolveResult(UNSATISFIABLE, failed_assumptions=(), stats=self._stats(stats_start))
        self._cancel_until(0)
        assume = []
        for el in assumptions:
            v = abs(el)
            if not 1 <= v <= self.nvars:
                raise ValueError(f"assumption {el} out of range")
            assume.append(2 * v + (el < 0))

        restart_count = 0
        limit = (
            self.restart_base * _luby(restart_count) if self.use_restarts else None
        )
        conflicts_here = 0

        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                conflicts_here += 1
                if not self.trail_lim:
                    self.unsat = True
                    return SolveResult(
                        UNSATISFIABLE,
                        failed_assumptions=(),
                        stats=self._stats(stats_start),
                    )
                if len(self.trail_lim) <= len(assume):
                    # conflict among the assumptions themselves: find the
                    # subset responsible via the asserting clause
                    out, bt = self._analyze(confl)
                    self._cancel_until(min(bt, len(self.trail_lim) - 1))
                    self._record_learnt(out)
                    if self.unsat:
                        return SolveResult(
                            UNSATISFIABLE,
                            failed_assumptions=(),
                            stats=self._stats(stats_start),
                        )
                    continue
                out, bt = self._analyze(confl)
                self._cancel_until(bt)
                self._record_learnt(out)
                if self.unsat:
                    return SolveResult(
                        UNSATISFIABLE,
                        failed_assumptions=(),
                        stats=self._stats(stats_start),
                    )
                if conflict_budget is not None and conflicts_here >= conflict_budget:
                    self._cancel_until(0)
                    return SolveResult(ABORTED, stats=self._stats(stats_start))
                if (
                    self.use_deletion
                    and len(self.learned) >= self.max_learnts
                ):
                    self._reduce_db()
                continue

            if limit is not None and conflicts_here >= limit:
                restart_count += 1
                limit = conflicts_here + self.restart_base * _luby(restart_count)
                self._cancel_until(0)
                continue

            dl = len(self.trail_lim)
            if dl < len(assume):
                p = assume[dl]
                a = self.assigns[p >> 1]
                if a == 1 + (p & 1):
                    self.trail_lim.append(len(self.trail))
                    continue
                if a == 2 - (p & 1):
                    failed = self._analyze_final(p)
                    return SolveResult(
                        UNSATISFIABLE,
                        failed_assumptions=tuple(
                            (l >> 1) if not l & 1 else -(l >> 1) for l in failed
                        ),
                        stats=self._stats(stats_start),
                    )
                self.trail_lim.append(len(self.trail))
                self._enqueue(p, -1, -1)
                continue

            v = self._pick_branch_var()
            if v == 0:
                model = tuple(
                    self.assigns[u] == 1 for u in range(self.nvars + 1)
                )
                self._cancel_until(0)
                return SolveResult(SATISFIABLE, model=model, stats=self._stats(stats_start))
            self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(2 * v + (self.polarity[v] == 0), -1, -1)

    def _stats(self, start: int) -> dict:
        return {
            "conflicts": self.conflicts - start,
            "decisions": self.decisions,
            "propagations": self.propagations,
        }


# --- module-level conveniences -------------------------------------------------


def solve(
    cnf: Cnf,
    assumptions: Sequence[int] = (),
    conflict_budget: Optional[int] = None,
    verify: bool = True,
    **solver_opts,
) -> SolveResult:
    """One-shot solve.  Satisfying models are re-verified with the pure
    clause checker before being returned."""
    solver = Solver.from_cnf(cnf, **solver_opts)
    result = solver.solve(assumptions, conflict_budget=conflict_budget)
    if verify and result.satisfiable:
        if not verify_model(cnf, result.model):
            raise AssertionError("solver returned a non-model (internal bug)")
        for el in assumptions:
            value = result.model[abs(el)]
            if value != (el > 0):
                raise AssertionError("model violates an assumption (internal bug)")
    return result


def verify_model(cnf: Cnf, model: Sequence[bool]) -> bool:
    """True iff the model satisfies every clause.  Independent of any solver
    state; `model` must assign every variable (index by variable id)."""
    if len(model) < cnf.num_vars + 1:
        raise ValueError("partial model")
    sat = False
    for lit in cnf._lits:
        if lit == 0:
            if not sat:
                return False
            sat = False
        elif not sat:
            if model[lit] if lit > 0 else not model[-lit]:
                sat = True
    return True


def parse_dimacs(source) -> Cnf:
    """Parse DIMACS CNF from a path, file object, or string.  Inverse of
    emit_dimacs up to comments; groups are per-clause placeholders."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as f:
            text = f.read()
    num_vars = None
    num_clauses = None
    cnf = None
    cur: list = []
    clauses_seen = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"malformed problem line: {line!r}")
            try:
                num_vars = int(parts[2])
                num_clauses = int(parts[3])
            except ValueError:
                raise ValueError(f"malformed problem line: {line!r}") from None
            cnf = Cnf(num_vars)
            continue
        if cnf is None:
            raise ValueError("clause before problem line")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                if not cur:
                    raise ValueError("empty clause in input")
                cnf.add_clause(cur)
                clauses_seen += 1
                cur = []
            else:
                if abs(lit) > num_vars:
                    raise ValueError(f"literal {lit} out of range")
                cur.append(lit)
    if cnf is None:
        raise ValueError("missing problem line")
    if cur:
        raise ValueError("unterminated clause at end of input")
    if num_clauses is not None and clauses_seen != num_clauses:
        raise ValueError(
            f"header declares {num_clauses} clauses, found {clauses_seen}"
        )
    return cnf


def decode_model(model: Sequence[bool], varmap: VarMap, params) -> RuleTable:
    """Read a satisfying assignment back into an explicit rule table."""
    entries = {}
    var_profile = varmap.var_profile
    var_committee = varmap.var_committee
    for idx in range(varmap.num_vars):
        if model[idx + 1]:
            rank = var_profile[idx]
            if rank in entries:
                raise ValueError(
                    f"model selects several committees at profile rank {rank}"
                )
            entries[rank] = var_committee[idx]
    for rank in varmap.ranks:
        if rank not in entries:
            raise ValueError(f"model selects no committee at profile rank {rank}")
    return RuleTable(params, entries, getattr(varmap, "domain_note", "admissible"))
