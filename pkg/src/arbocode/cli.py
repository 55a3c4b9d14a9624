"""Command-line front end: ``arbocode <command> file.gog [options]``.

Every command writes one JSON document with sorted keys. Exit codes: 0 on
success, 1 when the input fails to parse or validate, 2 when a computation
cannot be carried out.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

from . import __version__
from .acyl import acylindricity, verify_witness
from .bass_serre import ball_counts, length_invariants
from .collapse import (CollapseError, check_window, collapse_cusps, sample_windows,
                       star_shape, DOCUMENTED_CLAIMS)
from .gog import GOGError, TruncationError, load_gog, validate
from .markov import (CodingError, build_gf_coding, build_return_coding,
                     check_return_identities, chain_entropy_rate, entropy_hP,
                     gf_identities, hypothesis_checklist, verdict)
from .ps import ExponentError, cusp_rate_table, exponent_lower_bounds, solve_ps
from .shift import TransitionError, build_subshift, subshift_json

COMMANDS = ("validate", "ball", "code", "acyl", "measure", "markov", "diagnose", "collapse")
COMPUTE_ERRORS = (ExponentError, CodingError, CollapseError, TruncationError,
                  TransitionError, OverflowError, ValueError, RuntimeError)


@dataclass
class RunConfig:
    command: str
    input: str
    radius: int = 12
    level: int = 6
    order: int | None = None          # default: the automaton's k_min
    coding: str | None = None         # markov: "gf" or "return"
    seed: int = 0
    out: str | None = None
    precision: str = "exact"          # "exact" or "float"
    samples: int = 100
    window: int = 30


def threads() -> int:
    """Worker cap from ``ARBOCODE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ARBOCODE_THREADS", "1")))
    except ValueError:
        return 1


# JSON plumbing

def to_plain(x, precision="exact"):
    """Recursively convert to JSON-safe values; rationals become ``"p/q"``
    strings in exact mode and floats otherwise."""
    if isinstance(x, dict):
        return {str(k): to_plain(v, precision) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_plain(v, precision) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, Fraction):
        if precision == "exact":
            return str(x)
        x = float(x)
    if isinstance(x, int):
        return x
    if hasattr(x, "item"):                  # numpy scalars
        return to_plain(x.item(), precision)
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else "-inf" if x < 0 else "nan"
    return x


def dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _checklist(g, ps=None):
    try:
        return hypothesis_checklist(g, ps)
    except (TruncationError, ValueError, OverflowError) as exc:
        return {"unavailable": str(exc)}


def _ps_or_none(g):
    try:
        return solve_ps(g)
    except ExponentError:
        return None


# commands

def cmd_validate(g, cfg):
    rep = validate(g)
    return rep, (0 if rep["valid"] else 1), None


def cmd_ball(g, cfg):
    spec = build_subshift(g, 1)
    rep = {"growth": length_invariants(g, spec, cfg.radius).to_json()}
    return rep, 0, None


def cmd_code(g, cfg):
    k, source = cfg.order, "requested"
    if k is None:
        # rays make the certified order a statement about the truncation only
        acyl = acylindricity(g, witness=False)
        k, source = (acyl.k_min, "k_min") if acyl.k_min and not g.rays else (1, "default")
    spec = build_subshift(g, k)
    return {"order": k, "order_source": source, "subshift": subshift_json(g, spec)}, 0, None


def cmd_acyl(g, cfg):
    rep = acylindricity(g)
    out = rep.to_json(g.quotient)
    if rep.witness is not None:
        R = _check_radius(g, min(2 * rep.bound_used, cfg.radius))
        out["witness_check"] = verify_witness(g, rep.witness, R)
        out["witness_check"]["radius"] = R
    return out, 0, None


def _check_radius(g, R, cap=20000):
    """Largest radius up to ``R`` whose ball stays below ``cap`` vertices."""
    counts = ball_counts(g, R)
    while R > 1 and counts[R] > cap:
        R -= 1
    return R


def cmd_measure(g, cfg):
    bounds = [exponent_lower_bounds(g, r.id) for r in sorted(g.rays, key=lambda r: r.id)]
    infinite = any(b["infinite_exponent"] for b in bounds)
    try:
        ps = solve_ps(g)
    except ExponentError as exc:
        if not infinite:
            raise
        return {"density": None, "reason": str(exc), "exponent_bounds": bounds,
                "infinite_critical_exponent": True}, 0, None
    rates = {str(r.id): cusp_rate_table(g, r.id, ps.delta) for r in g.rays}
    return {"density": ps.to_json(), "cusp_rates": rates, "exponent_bounds": bounds,
            "infinite_critical_exponent": infinite}, 0, ps


def _gf_ok(g):
    Q = g.quotient
    return all(Q.vertex_group(v).order == 1 for v in Q.core_vertices) and all(
        r.explicit for r in g.rays)


def cmd_markov(g, cfg):
    ps = solve_ps(g)
    kind = cfg.coding or ("gf" if _gf_ok(g) else "return")
    if kind == "gf":
        gf = build_gf_coding(g, ps, cfg.level)
        ids = gf_identities(gf)
        h, tail = entropy_hP(gf)
        rows = gf.full_rows()
        out = {"coding": "gf", "level": cfg.level,
               "alphabet": [gf.letter_name(a) for a in gf.alphabet],
               "nu": gf.nu,
               "transitions": [[a, b, gf.pi[(a, b)]] for a in range(len(gf.alphabet))
                               for b in gf.succ[a]],
               "entropy_partition": h, "entropy_partition_tail": tail,
               "entropy_rate": chain_entropy_rate(gf.nu, gf.succ, gf.pi, rows),
               "identities": ids}
    elif kind == "return":
        rc = build_return_coding(g, ps, cfg.radius)
        ids = check_return_identities(rc)
        rows = list(range(len(rc.S)))
        out = {"coding": "return", "radius": cfg.radius,
               "alphabet": [rc.word_json(a) for a in rows], "nu": rc.nu,
               "transitions": [[a, b, rc.pi[(a, b)]] for a in rows for b in rc.succ[a]],
               "entropy_rate": chain_entropy_rate(rc.nu, rc.succ, rc.pi, rows),
               "identities": ids}
    else:
        raise CodingError(f"unknown coding '{kind}'")
    return out, 0, ps


def diagnose(g, level=6, radius=12):
    """Verdict from the best available coding of ``g``."""
    ps = _ps_or_none(g)
    order1 = build_subshift(g, 1)
    L = length_invariants(g, order1, min(radius, 4)).L_exact
    source = "order1"
    spec = order1
    if ps is not None and _gf_ok(g):
        spec = build_gf_coding(g, ps, level).spec()
        source = "gf"
    v = verdict(g, spec, ps, L)
    return v, source, ps


def cmd_diagnose(g, cfg):
    v, source, ps = diagnose(g, cfg.level, cfg.radius)
    out = v.to_json()
    out["coding"] = source
    return out, 0, ps


def cmd_collapse(g, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cs = collapse_cusps(g)
        again = collapse_cusps(cs.graph)
    out = {"collapsed": cs.to_json(), "collapsed_gog": cs.text(),
           "idempotent": again.graph == cs.graph,
           "star": star_shape(cs), "documented_claims": DOCUMENTED_CLAIMS}
    if g.rays:
        wins = sample_windows(g, cfg.samples, cfg.window, cfg.seed)
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            per = list(pool.map(lambda w: check_window(cs, w), wins))
        out["suspension"] = {
            "windows": len(per), "window_length": cfg.window,
            "commute_pass": sum(r["commute_pass"] for r in per),
            "commute_fail": sum(r["commute_fail"] for r in per),
            "compact_segments": all(r["compact_segments"] for r in per),
            "tau_sum_matches": all(r["tau_sum_matches"] for r in per),
            "excursion_time_is_twice_depth": all(
                t == 2 * d for r in per for d, t in r["excursions"])}
    return out, 0, None


HANDLERS = {"validate": cmd_validate, "ball": cmd_ball, "code": cmd_code, "acyl": cmd_acyl,
            "measure": cmd_measure, "markov": cmd_markov, "diagnose": cmd_diagnose,
            "collapse": cmd_collapse}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; returns the exit code and the JSON text."""
    doc = {"tool": "arbocode", "version": __version__, "config": asdict(cfg)}
    try:
        g = load_gog(cfg.input)
    except GOGError as exc:
        doc["error"] = {"kind": exc.kind, "message": exc.msg, "line": exc.line, "col": exc.col}
        return 1, dump(to_plain(doc))
    except OSError as exc:
        doc["error"] = {"kind": "io", "message": str(exc)}
        return 1, dump(to_plain(doc))
    try:
        rep, code, ps = HANDLERS[cfg.command](g, cfg)
    except COMPUTE_ERRORS as exc:
        doc["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        doc["hypotheses"] = _checklist(g)
        return 2, dump(to_plain(doc, cfg.precision))
    doc["report"] = rep
    doc["hypotheses"] = _checklist(g, ps)
    return code, dump(to_plain(doc, cfg.precision))


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arbocode", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"arbocode {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("input", help="graph of groups in .gog format")
    p.add_argument("--radius", type=int, default=12)
    p.add_argument("--level", type=int, default=6)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--coding", choices=("gf", "return"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=("exact", "float"), default="exact")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    return p


def main(argv=None) -> int:
    a = parser().parse_args(argv)
    cfg = RunConfig(a.command, a.input, a.radius, a.level, a.order, a.coding, a.seed,
                    a.out, a.precision, a.samples, a.window)
    code, text = run(cfg)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
