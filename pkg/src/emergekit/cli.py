"""Config-driven command line.

``emergekit synthesize -c FILE`` runs the declared emergence task — the
combinator pipeline, the least-squares oracle, or both — and writes a
machine-readable report (plus a map CSV and companion figures when an output
path is given).  ``emergekit verify -c FILE --report PRIOR`` re-verifies the
map table of an earlier report with fresh fields and a fresh seed.

Exit codes: 0 verified, 2 refuted / infeasible / closure-only, 1 usage or
config errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, STRATEGIES, load_config
from .emergence import (
    EmergenceWitness,
    MissingHypothesis,
    NonAffineStructure,
    VerificationReport,
    emerge_composition,
    emerge_monomial,
    emerge_multivariate,
    emerge_scaled,
    emerge_sum,
    map_agreement,
    oracle_solve,
    verify_table,
)
from .operators import NotRightInvertible
from .parameters import (
    ConstraintViolation,
    SpaceMismatchError,
    VanishingResult,
    make_param,
)
from .report import (
    ENGINE_VERSION,
    parse_report,
    render_report,
    write_map_csv,
)
from .theories import (
    CompositionStructure,
    MonomialStructure,
    PolynomialStructure,
    ScaledStructure,
    ScalingStructure,
    SumStructure,
    Theory,
    identity_coeff,
)

__all__ = ["main", "synthesize_witness"]

_SEVERITY = {
    "verified": 0,
    "emergent_only_in_closure": 1,
    "infeasible": 2,
    "refuted": 3,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="emergekit", description="strong-emergence synthesis engine")
    sub = p.add_subparsers(dest="command")
    for name, helptext in (
        ("synthesize", "synthesize and verify a parameter map"),
        ("verify", "re-verify the map table of a prior report"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", "-c", required=True, help="experiment file")
        sp.add_argument("--seed", type=int, default=None, help="override run seed")
        sp.add_argument("--samples", type=int, default=None, help="override sample count")
        sp.add_argument("--tol", type=float, default=None, help="override tolerance")
        sp.add_argument("--out", default=None, help="report output path")
        sp.add_argument(
            "--strategy",
            choices=STRATEGIES,
            default=None,
            help="override the configured strategy",
        )
        sp.add_argument(
            "--no-figures",
            action="store_true",
            help="skip rendering companion figures next to --out",
        )
        if name == "verify":
            sp.add_argument("--report", required=True, help="prior report file")
    return p


# --- combinator dispatch ----------------------------------------------------

def synthesize_witness(
    target: Theory,
    ambient: Theory,
    samples: int,
    seed: int,
    tol: float | None,
) -> EmergenceWitness:
    """Pick the combinator matching the ambient theory's structure.

    Composite ambients recurse: a sum (or composition) first synthesizes the
    three constituent witnesses its combinator consumes.
    """
    s = ambient.structure
    if isinstance(s, ScalingStructure):
        w = emerge_monomial(
            target, identity_coeff, s.psi0, 1, ambient.space, samples, seed, tol
        )
        return replace(w, ambient_theory=ambient)
    if isinstance(s, MonomialStructure):
        w = emerge_monomial(
            target, s.coeff, s.psi, s.power, ambient.space, samples, seed, tol
        )
        return replace(w, ambient_theory=ambient)
    if isinstance(s, PolynomialStructure):
        w = emerge_multivariate(target, s.poly, samples, seed, tol)
        return replace(w, ambient_theory=ambient)
    if isinstance(s, SumStructure):
        w_f = synthesize_witness(target, s.left, samples, seed, tol)
        w_g = synthesize_witness(target, s.right, samples, seed, tol)
        w_h = synthesize_witness(s.left, s.right, samples, seed, tol)
        w = emerge_sum(w_f, w_g, w_h, samples, seed, tol)
        return replace(w, ambient_theory=ambient)
    if isinstance(s, CompositionStructure):
        w_f = synthesize_witness(target, s.left, samples, seed, tol)
        w_g = synthesize_witness(target, s.right, samples, seed, tol)
        w_h = synthesize_witness(s.left, s.right, samples, seed, tol)
        w = emerge_composition(w_f, w_g, w_h, samples, seed, tol)
        return replace(w, ambient_theory=ambient)
    if isinstance(s, ScaledStructure):
        w = synthesize_witness(target, s.base, samples, seed, tol)
        out = emerge_scaled(w, s.factor, samples, seed, tol)
        return replace(out, ambient_theory=ambient)
    raise MissingHypothesis(
        f"no combinator dispatch for ambient structure {type(s).__name__}"
    )


# --- report assembly --------------------------------------------------------

def _pairs(components) -> list:
    return [[z.real, z.imag] for z in (complex(c) for c in components)]


def _report_dict(rep: VerificationReport) -> dict:
    return {
        "samples": rep.samples,
        "seed": rep.seed,
        "tolerance": rep.tolerance,
        "max_action_residual": rep.max_action_residual,
        "max_operator_residual": rep.max_operator_residual,
        "verdict": rep.verdict,
        "worst_eps": None if rep.worst_eps is None else _pairs(rep.worst_eps),
        "reason": rep.reason,
        "self_adjoint_link": rep.self_adjoint_link,
    }


def _table_from_rows(rows) -> list[dict]:
    return [
        {
            "eps": _pairs(r.eps),
            "image": None if r.image is None else _pairs(r.image),
            "action_residual": r.action_residual,
            "operator_residual": r.operator_residual,
        }
        for r in rows
    ]


def _witness_section(w: EmergenceWitness) -> dict:
    out = _report_dict(w.report)
    out["provenance"] = list(w.map.provenance)
    if w.collapsed is not None:
        collapsed = _report_dict(w.collapsed.report)
        collapsed["ambient"] = w.collapsed.ambient_theory.id
        collapsed["provenance"] = list(w.collapsed.map.provenance)
        out["collapsed"] = collapsed
    else:
        out["collapsed"] = None
    return out


def _emit(args, body: dict, timing: dict) -> None:
    text = render_report(body, timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        table = body.get("map_table") or []
        if table:
            write_map_csv(args.out + ".map.csv", table)
            if not args.no_figures:
                from .figures import map_figure, residual_figure

                comb = body.get("combinator") or {}
                tolerance = comb.get("tolerance") or body["run"]["tolerance"]
                residual_figure(args.out + ".residuals.png", table, tolerance)
                map_figure(args.out + ".map.png", table)
    else:
        print(text)


def _verdict_line(body: dict) -> str:
    verdict = body["verdict"]
    bits = [f"verdict: {verdict}"]
    comb = body.get("combinator")
    if comb and comb.get("max_action_residual") is not None:
        bits.append(
            f"action<= {comb['max_action_residual']:.3e}"
            f" operator<= {comb['max_operator_residual']:.3e}"
        )
    oracle = body.get("oracle")
    if oracle and oracle.get("max_residual") is not None:
        bits.append(f"oracle<= {oracle['max_residual']:.3e}")
    reasons = []
    if comb and comb.get("reason"):
        reasons.append(comb["reason"])
    if body.get("reason"):
        reasons.append(body["reason"])
    if reasons:
        bits.append("; ".join(reasons))
    return "  ".join(bits)


def _exit_code(verdict: str) -> int:
    return 0 if verdict == "verified" else 2


def _overall(*verdicts: str | None) -> str:
    present = [v for v in verdicts if v is not None]
    return max(present, key=lambda v: _SEVERITY.get(v, 3))


_SYNTH_ERRORS = (MissingHypothesis, NotRightInvertible, SpaceMismatchError)


def cmd_synthesize(cfg: ExperimentConfig, args) -> int:
    t0 = time.perf_counter()
    samples = args.samples if args.samples is not None else cfg.run.samples
    seed = args.seed if args.seed is not None else cfg.run.seed
    tol = args.tol if args.tol is not None else cfg.run.tol
    strategy = args.strategy if args.strategy is not None else cfg.task.strategy
    target = cfg.theories[cfg.task.target]
    ambient = cfg.theories[cfg.task.ambient]

    body: dict = {
        "engine_version": ENGINE_VERSION,
        "config_digest": cfg.digest,
        "command": "synthesize",
        "strategy": strategy,
        "task": {"target": cfg.task.target, "ambient": cfg.task.ambient},
        "run": {"samples": samples, "seed": seed, "tolerance": tol},
    }
    comb_verdict = None
    oracle_verdict = None
    witness = None
    oracle = None
    table: list[dict] = []

    if strategy in ("combinator", "both"):
        try:
            witness = synthesize_witness(target, ambient, samples, seed, tol)
            body["combinator"] = _witness_section(witness)
            comb_verdict = witness.report.verdict
            table = _table_from_rows(witness.samples_table)
        except _SYNTH_ERRORS as e:
            body["combinator"] = {
                "verdict": "infeasible",
                "reason": str(e),
                "collapsed": None,
            }
            comb_verdict = "infeasible"
    else:
        body["combinator"] = None

    if strategy in ("oracle", "both"):
        try:
            oracle = oracle_solve(
                target, ambient, samples=samples, seed=seed,
                tol=tol if tol is not None else 1e-9,
            )
            body["oracle"] = {
                "verdict": oracle.verdict,
                "full_rank": oracle.full_rank,
                "rank": oracle.rank,
                "n_slots": oracle.n_slots,
                "max_residual": oracle.max_residual,
                "flagged_slots": list(oracle.flagged),
                "solutions": [
                    {
                        "eps": _pairs(r.eps),
                        "solution": _pairs(r.solution),
                        "residual": r.residual,
                        "below_tau": list(r.below_tau),
                    }
                    for r in oracle.rows
                ],
            }
            oracle_verdict = oracle.verdict
            if strategy == "oracle":
                table = [
                    {
                        "eps": _pairs(r.eps),
                        "image": _pairs(r.solution),
                        "action_residual": None,
                        "operator_residual": r.residual,
                    }
                    for r in oracle.rows
                ]
        except NonAffineStructure as e:
            body["oracle"] = {"verdict": "unavailable", "reason": str(e)}
            if strategy == "oracle":
                oracle_verdict = "infeasible"
                body["reason"] = str(e)
    else:
        body["oracle"] = None

    agreement = None
    if (
        witness is not None
        and oracle is not None
        and comb_verdict == "verified"
        and oracle_verdict == "verified"
        and oracle.full_rank
    ):
        agreement = map_agreement(witness.map, oracle.map, samples=20, seed=seed)
    body["agreement"] = agreement
    body["verdict"] = _overall(comb_verdict, oracle_verdict)
    body["map_table"] = table

    timing = {"wall_seconds": time.perf_counter() - t0}
    _emit(args, body, timing)
    print(_verdict_line(body))
    return _exit_code(body["verdict"])


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    t0 = time.perf_counter()
    try:
        with open(args.report, "r", encoding="utf-8") as fh:
            doc = parse_report(fh.read())
    except (OSError, ValueError) as e:
        print(f"error: cannot read report {args.report!r}: {e}", file=sys.stderr)
        return 1
    prior = doc.get("body", {})
    if prior.get("config_digest") != cfg.digest:
        print(
            "error: report was produced from a different config "
            f"(digest {prior.get('config_digest')!r} != {cfg.digest!r})",
            file=sys.stderr,
        )
        return 1
    rows = [r for r in prior.get("map_table", []) if r.get("image")]
    if not rows:
        print("error: the prior report has an empty map table", file=sys.stderr)
        return 1

    samples = args.samples if args.samples is not None else cfg.run.samples
    # independent re-verification defaults to a fresh seed
    seed = args.seed if args.seed is not None else cfg.run.seed + 1
    tol = args.tol if args.tol is not None else cfg.run.tol
    target = cfg.theories[cfg.task.target]
    ambient = cfg.theories[cfg.task.ambient]

    body: dict = {
        "engine_version": ENGINE_VERSION,
        "config_digest": cfg.digest,
        "command": "verify",
        "strategy": cfg.task.strategy,
        "task": {"target": cfg.task.target, "ambient": cfg.task.ambient},
        "run": {"samples": samples, "seed": seed, "tolerance": tol},
        "prior": {
            "verdict": prior.get("verdict"),
            "entries": len(rows),
        },
    }
    try:
        pairs = [
            (
                make_param(
                    target.space, tuple(complex(re, im) for re, im in r["eps"])
                ),
                make_param(
                    ambient.space, tuple(complex(re, im) for re, im in r["image"])
                ),
            )
            for r in rows
        ]
    except (VanishingResult, ConstraintViolation, ValueError) as e:
        body["verdict"] = "infeasible"
        body["reason"] = f"map table entry violates the parameter constraints: {e}"
        body["combinator"] = None
        body["oracle"] = None
        body["map_table"] = []
        _emit(args, body, {"wall_seconds": time.perf_counter() - t0})
        print(_verdict_line(body))
        return 2

    report, sample_rows = verify_table(target, ambient, pairs, samples, seed, tol)
    body["combinator"] = _report_dict(report)
    body["combinator"]["provenance"] = ["table lookup re-verification"]
    body["combinator"]["collapsed"] = None
    body["oracle"] = None
    body["agreement"] = None
    body["verdict"] = report.verdict
    body["map_table"] = _table_from_rows(sample_rows)

    _emit(args, body, {"wall_seconds": time.perf_counter() - t0})
    print(_verdict_line(body))
    return _exit_code(report.verdict)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    if args.command is None:
        print("usage error: a command is required (synthesize | verify)", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: cannot read config {args.config!r}: {e}", file=sys.stderr)
        return 1
    if args.command == "synthesize":
        return cmd_synthesize(cfg, args)
    return cmd_verify(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
