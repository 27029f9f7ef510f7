"""Command-line surface: encode, solve, check rules, extract cores, replay
the base-case proof, and run the rule transformers.

Reports are JSON with a stable schema; everything volatile (timestamps,
runtimes) lives under the "meta" key so that reports are otherwise
byte-deterministic.  Exit codes: 0 success / all checks passed, 1 I/O
failure, 2 usage error, 3 a check or verification failed, 10 satisfiable,
20 unsatisfiable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone

from . import __version__
from .axioms import CHECKERS, find_manipulation, run_checks
from .core import (
    ElectionParams,
    profile_from_str,
    profile_rank,
    profile_to_str,
    set_to_str,
)
from .encoder import (
    DEFAULT_PROFILE_CAP,
    EmptyAllowedSet,
    EncodeConfig,
    EncodingError,
    emit_dimacs,
    encode,
    load_manifest,
    write_manifest,
)
from .mus import emit_gcnf, extract_mus, render_mus, verify_mus
from .proofs import (
    droop_reduce,
    load_base_case_script,
    reduce_alternatives,
    reduce_committee_size,
    reduce_voters,
    replay_proof_script,
)
from .rules import RuleTable, build_table, resolve_rule
from .solver import decode_model, parse_dimacs, solve

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_CHECK_FAILED = 3
EXIT_SAT = 10
EXIT_UNSAT = 20

CAP_ENV = "ABCSAT_PROFILE_CAP"

_PROP_ALIASES = {
    "hare": "hare-singleton",
    "hare-singleton": "hare-singleton",
    "jr-party": "jr-party-lists",
    "jr-party-lists": "jr-party-lists",
    "droop": "droop-singleton",
    "droop-singleton": "droop-singleton",
}


def _default_cap() -> int:
    raw = os.environ.get(CAP_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise SystemExit(f"invalid {CAP_ENV}={raw!r}")
    return DEFAULT_PROFILE_CAP


def _meta(started: float) -> dict:
    return {
        "tool": f"abcsat {__version__}",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "runtime_s": round(time.time() - started, 3),
        "profile_cap_env": os.environ.get(CAP_ENV),
    }


def _write_report(path, payload: dict, started: float) -> None:
    if not path:
        return
    payload = dict(payload)
    payload["meta"] = _meta(started)
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")


def _add_encode_flags(sub, required: bool = True):
    sub.add_argument("-m", type=int, required=required, help="number of candidates")
    sub.add_argument("-n", type=int, required=required, help="number of voters")
    sub.add_argument("-k", type=int, required=required, help="committee size")
    sub.add_argument(
        "--prop",
        default="hare",
        choices=sorted(_PROP_ALIASES),
        help="proportionality axiom folded into the allowed committees",
    )
    sub.add_argument(
        "--sp",
        default="subset",
        choices=["subset", "superset"],
        help="deviations to guard against: ballot subsets only, or arbitrary",
    )
    sub.add_argument("--weak-eff", action="store_true", help="prune committees with unapproved members")
    sub.add_argument(
        "--symmetry-break",
        action="store_true",
        help="pin f(ab,c,d) = acd (base-case shape only)",
    )
    sub.add_argument("--ci-order", help="restrict to candidate-interval profiles under this ordering, e.g. abcd")
    sub.add_argument("--cap", type=int, default=None, help="refuse enumerations beyond this many profiles")


def _cfg_from_args(args) -> EncodeConfig:
    params = ElectionParams(args.m, args.n, args.k)
    ci = None
    if args.ci_order:
        from .core import CANDIDATE_LETTERS

        ci = tuple(CANDIDATE_LETTERS.index(ch) for ch in args.ci_order.strip())
    return EncodeConfig(
        params=params,
        sp_variant=args.sp,
        proportionality_mode=_PROP_ALIASES[args.prop],
        weak_efficiency=args.weak_eff,
        symmetry_break=args.symmetry_break,
        ci_order=ci,
    )


def _cap_from_args(args) -> int:
    return args.cap if args.cap is not None else _default_cap()


# --- subcommands -----------------------------------------------------------------


def cmd_encode(args) -> int:
    started = time.time()
    cfg = _cfg_from_args(args)
    cnf, varmap = encode(cfg, cap=_cap_from_args(args))
    emit_dimacs(cnf, varmap, args.output)
    manifest_path = args.manifest
    if manifest_path is None and not args.no_manifest:
        manifest_path = args.output + ".manifest.json"
    if manifest_path:
        write_manifest(cnf, varmap, cfg, manifest_path)
    print(
        f"encoded m={cfg.params.m} n={cfg.params.n} k={cfg.params.k}: "
        f"{cnf.num_vars} variables, {cnf.num_clauses} clauses -> {args.output}"
    )
    if manifest_path:
        print(f"manifest -> {manifest_path}")
    _write_report(
        args.report,
        {
            "config": cfg.to_json_dict(),
            "num_vars": cnf.num_vars,
            "num_clauses": cnf.num_clauses,
            "output": args.output,
            "manifest": manifest_path,
        },
        started,
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    started = time.time()
    cfg = varmap = None
    if args.cnf:
        cnf = parse_dimacs(args.cnf)
        manifest = args.manifest
        if manifest is None:
            candidate = args.cnf + ".manifest.json"
            if os.path.exists(candidate):
                manifest = candidate
        if manifest:
            cfg, varmap = load_manifest(cnf, manifest)
    else:
        if args.m is None or args.n is None or args.k is None:
            print("solve: need a CNF file or -m/-n/-k", file=sys.stderr)
            return EXIT_USAGE
        cfg = _cfg_from_args(args)
        try:
            cnf, varmap = encode(cfg, cap=_cap_from_args(args))
        except EmptyAllowedSet as exc:
            print(f"UNSAT (trivially: {exc})")
            return EXIT_UNSAT

    result = solve(
        cnf,
        conflict_budget=args.conflict_budget,
        use_restarts=not args.no_restarts,
        use_deletion=not args.no_deletion,
    )
    payload: dict = {
        "status": result.status,
        "stats": result.stats,
        "num_vars": cnf.num_vars,
        "num_clauses": cnf.num_clauses,
    }
    if cfg is not None:
        payload["config"] = cfg.to_json_dict()
    if result.status == "aborted":
        print(f"ABORTED after {result.stats['conflicts']} conflicts")
        _write_report(args.report, payload, started)
        return EXIT_CHECK_FAILED
    if result.satisfiable:
        print(f"SAT ({result.stats['conflicts']} conflicts)")
        if varmap is not None:
            table = decode_model(result.model, varmap, cfg.params)
            if args.output:
                table.save(args.output)
                print(f"rule table -> {args.output}")
            payload["table_entries"] = len(table)
        _write_report(args.report, payload, started)
        return EXIT_SAT
    print(f"UNSAT ({result.stats['conflicts']} conflicts)")
    _write_report(args.report, payload, started)
    return EXIT_UNSAT


def _load_rule_table(spec: str, args, cap: int, threads: int):
    if spec.startswith("table:"):
        table = RuleTable.load(spec[len("table:"):])
        return table
    if args.m is None or args.n is None or args.k is None:
        raise ValueError(f"rule {spec!r} needs -m/-n/-k")
    params = ElectionParams(args.m, args.n, args.k)
    return build_table(spec, params, cap=cap, threads=threads)


def cmd_check_rule(args) -> int:
    started = time.time()
    axioms = [a.strip() for a in args.axioms.split(",") if a.strip()]
    for a in axioms:
        if a not in CHECKERS:
            print(f"unknown axiom {a!r}; known: {', '.join(sorted(CHECKERS))}",
                  file=sys.stderr)
            return EXIT_USAGE
    if args.profile:
        # point query: evaluate the rule at one profile only
        if args.m is None:
            print("--profile needs -m/-n/-k", file=sys.stderr)
            return EXIT_USAGE
        params = ElectionParams(args.m, args.n, args.k)
        profile = profile_from_str(args.profile, params.m)
        verdicts = []
        if args.rule.startswith("table:"):
            source = RuleTable.load(args.rule[len("table:"):])
        else:
            source = resolve_rule(args.rule)
        for name in axioms:
            if name.endswith("-sp"):
                witness = find_manipulation(
                    source, profile, name[:-3],
                    params if not isinstance(source, RuleTable) else None,
                )
                verdict = {"axiom": name, "passed": witness is None}
                if witness is not None:
                    verdict["witness"] = witness.to_json_dict()
                verdicts.append(verdict)
            else:
                if isinstance(source, RuleTable):
                    committee = source.committee_for(profile)
                else:
                    committee = source(profile, params)
                single = RuleTable(
                    params, {profile_rank(profile, params.m): committee}
                )
                verdicts.append(CHECKERS[name](single).to_json_dict())
    else:
        table = _load_rule_table(args.rule, args, _default_cap(), args.threads)
        verdicts = [
            v.to_json_dict()
            for v in run_checks(table, axioms, collect_all=args.collect_all)
        ]
    all_passed = all(v["passed"] for v in verdicts)
    for v in verdicts:
        status = "pass" if v["passed"] else "FAIL"
        line = f"{v['axiom']}: {status}"
        if not v["passed"] and "witness" in v:
            line += f"  witness: {json.dumps(v['witness'], sort_keys=True)}"
        print(line)
    _write_report(
        args.report, {"rule": args.rule, "verdicts": verdicts}, started
    )
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


def cmd_extract_mus(args) -> int:
    started = time.time()
    varmap = None
    if args.cnf:
        cnf = parse_dimacs(args.cnf)
        manifest = args.manifest
        if manifest is None:
            candidate = args.cnf + ".manifest.json"
            if os.path.exists(candidate):
                manifest = candidate
        if manifest:
            _, varmap = load_manifest(cnf, manifest)
    else:
        if args.m is None:
            print("extract-mus: need a CNF file or -m/-n/-k", file=sys.stderr)
            return EXIT_USAGE
        cfg = _cfg_from_args(args)
        cnf, varmap = encode(cfg, cap=_cap_from_args(args))
    try:
        mus = extract_mus(cnf, full_clause=args.full_clause)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK_FAILED
    if cnf.config is not None and varmap is not None and not args.full_clause:
        print(render_mus(mus, cnf, varmap))
    else:
        print(
            f"core: {len(mus.group_ids)} groups, clauses "
            f"{sorted(ci for cs in mus.clauses_by_group.values() for ci in cs)}"
        )
    verified = (True, True)
    if not args.no_verify:
        verified = verify_mus(cnf, mus, full_clause=args.full_clause)
        print(f"re-verified: core unsat = {verified[0]}, group-minimal = {verified[1]}")
    if args.gcnf:
        emit_gcnf(cnf, args.gcnf, full_clause=args.full_clause)
        print(f"gcnf -> {args.gcnf}")
    _write_report(
        args.report,
        {
            "mus": mus.to_json_dict(cnf.params),
            "verified_unsat": verified[0],
            "verified_minimal": verified[1],
        },
        started,
    )
    return EXIT_OK if all(verified) else EXIT_CHECK_FAILED


def cmd_replay_proof(args) -> int:
    started = time.time()
    if args.script:
        with open(args.script) as f:
            script = json.load(f)
    else:
        script = load_base_case_script()
    report = replay_proof_script(script)
    for o in report.outcomes:
        mark = "ok" if o.verified else "FAILED"
        claim = o.to_json_dict()["claim"]
        print(
            f"{o.step.label:>14s}  ({profile_to_str(o.step.profile)})  "
            f"{json.dumps(claim)}  {mark}"
        )
    verified = report.verified
    print(f"{sum(o.verified for o in report.outcomes)}/{len(report.outcomes)} "
          f"steps verified; proof {'holds' if verified else 'FAILED'}")
    _write_report(args.report, report.to_json_dict(), started)
    return EXIT_OK if verified else EXIT_CHECK_FAILED


def cmd_reduce(args) -> int:
    started = time.time()
    table = RuleTable.load(args.input)
    if args.what == "voters":
        if args.q is None:
            print("reduce voters needs --q", file=sys.stderr)
            return EXIT_USAGE
        out = reduce_voters(table, args.q)
        default_check = ["proportionality", "subset-sp"]
    elif args.what == "alternatives":
        out = reduce_alternatives(table)
        default_check = ["weak-efficiency", "proportionality", "subset-sp"]
    elif args.what == "committee":
        out = reduce_committee_size(table)
        default_check = ["proportionality", "subset-sp"]
    elif args.what == "droop":
        if not args.fixed:
            print("reduce droop needs --fixed ballots", file=sys.stderr)
            return EXIT_USAGE
        fixed = profile_from_str(args.fixed, table.params.m)
        out = droop_reduce(table, fixed)
        default_check = ["proportionality", "subset-sp"]
    else:  # pragma: no cover - argparse restricts choices
        return EXIT_USAGE
    if args.output:
        out.save(args.output)
    names = (
        [a for a in args.check.split(",") if a]
        if args.check
        else default_check
    )
    verdicts = [v.to_json_dict() for v in run_checks(out, names)]
    p = out.params
    print(
        f"reduced table: m={p.m} n={p.n} k={p.k}, {len(out)} profiles"
        + (f" -> {args.output}" if args.output else "")
    )
    for v in verdicts:
        print(f"  inherited {v['axiom']}: {'pass' if v['passed'] else 'FAIL'}")
    _write_report(
        args.report,
        {
            "params": {"m": p.m, "n": p.n, "k": p.k},
            "entries": len(out),
            "output": args.output,
            "verdicts": verdicts,
        },
        started,
    )
    return EXIT_OK if all(v["passed"] for v in verdicts) else EXIT_CHECK_FAILED


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcsat",
        description=(
            "Approval-based committee rules, their axioms, and SAT-based "
            "impossibility machinery"
        ),
    )
    parser.add_argument("--version", action="version", version=f"abcsat {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    enc = subs.add_parser("encode", help="write a DIMACS encoding + manifest")
    _add_encode_flags(enc)
    enc.add_argument("-o", "--output", required=True, help="DIMACS output path")
    enc.add_argument("--manifest", help="manifest path (default: <output>.manifest.json)")
    enc.add_argument("--no-manifest", action="store_true")
    enc.add_argument("--threads", type=int, default=1, help="worker count (reserved; encoding is deterministic single-pass)")
    enc.add_argument("--report", help="JSON report path")
    enc.set_defaults(func=cmd_encode)

    slv = subs.add_parser("solve", help="decide an encoding; decode the rule table when satisfiable")
    slv.add_argument("cnf", nargs="?", help="DIMACS file (otherwise encode inline from flags)")
    _add_encode_flags(slv, required=False)
    slv.add_argument("--manifest", help="manifest for decoding a DIMACS input")
    slv.add_argument("-o", "--output", help="rule-table JSON output on SAT")
    slv.add_argument("--conflict-budget", type=int, help="abort after this many conflicts")
    slv.add_argument("--no-restarts", action="store_true")
    slv.add_argument("--no-deletion", action="store_true")
    slv.add_argument("--report", help="JSON report path")
    slv.set_defaults(func=cmd_solve)

    chk = subs.add_parser("check-rule", help="run axiom checkers against av, pav, or a stored table")
    chk.add_argument("rule", help="av, pav, or table:<path>")
    chk.add_argument("-m", type=int)
    chk.add_argument("-n", type=int)
    chk.add_argument("-k", type=int)
    chk.add_argument("--axioms", required=True, help="comma-separated axiom names")
    chk.add_argument("--profile", help="check a single profile, e.g. ab,c,d")
    chk.add_argument("--collect-all", action="store_true", help="collect every violation instead of the first")
    chk.add_argument("--threads", type=int, default=1)
    chk.add_argument("--report", help="JSON report path")
    chk.set_defaults(func=cmd_check_rule)

    mus = subs.add_parser("extract-mus", help="extract and verify a minimal unsatisfiable core")
    mus.add_argument("cnf", nargs="?", help="DIMACS file (otherwise encode inline from flags)")
    _add_encode_flags(mus, required=False)
    mus.add_argument("--manifest", help="manifest for rendering a DIMACS input")
    mus.add_argument("--full-clause", action="store_true", help="clause-level groups (diagnostics)")
    mus.add_argument("--no-verify", action="store_true")
    mus.add_argument("--gcnf", help="grouped-DIMACS export path")
    mus.add_argument("--report", help="JSON report path")
    mus.set_defaults(func=cmd_extract_mus)

    rp = subs.add_parser("replay-proof", help="replay the base-case deduction chain")
    rp.add_argument("--script", help="proof-script JSON (default: built-in base case)")
    rp.add_argument("--report", help="JSON report path")
    rp.set_defaults(func=cmd_replay_proof)

    red = subs.add_parser("reduce", help="run a rule transformer on a stored table")
    red.add_argument("what", choices=["voters", "alternatives", "committee", "droop"])
    red.add_argument("--in", dest="input", required=True, help="input rule-table JSON")
    red.add_argument("--out", dest="output", help="output rule-table JSON")
    red.add_argument("--q", type=int, help="copy factor for voters reduction")
    red.add_argument("--fixed", help="fixed ballots for droop reduction, e.g. c,c")
    red.add_argument("--check", help="comma-separated axioms to verify on the output")
    red.add_argument("--report", help="JSON report path")
    red.set_defaults(func=cmd_reduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EncodingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
