"""Command-line entry point: ``wce-nuclear analyze`` and ``wce-nuclear condexp``."""

import argparse
import logging
import math
import sys
from pathlib import Path

from .asymptotic import BUILTIN_FAMILIES, family_decay_slope, family_stats
from .condexp import averaging_residuals
from .config import AnalysisConfig, load_config
from .criteria import (
    Status,
    TailStatement,
    compactness_verdict,
    consistency_check,
    nonatomic_condition,
    nuclearity_verdict,
)
from .errors import ConfigError, WCEError
from .operators import Exponents, Regime, atom_stats, cell_atoms, factor_norms, nuclear_bound
from .oracle import block_norm, operator_norm, pietsch_identity_check, trace_norm_hilbert
from .report import RENDERERS, build_report, render_csv, render_json

logger = logging.getLogger(__name__)

DEFAULT_FAMILY_TERMS = 10_000

EXIT_CODES = {
    Status.NUCLEAR: 0,
    Status.COMPACT: 0,
    Status.ZERO: 0,
    Status.NOT_NUCLEAR: 1,
    Status.NOT_COMPACT: 1,
    Status.INCONCLUSIVE: 2,
}
EXIT_INPUT_ERROR = 3
EXIT_INTERNAL_ERROR = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wce-nuclear",
        description="Nuclearity and compactness of weighted conditional expectation operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="evaluate the nuclearity and compactness criteria")
    source = analyze.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="analysis config (JSON)")
    source.add_argument("--example", choices=sorted(BUILTIN_FAMILIES), help="built-in atom family")
    analyze.add_argument("--p", type=float)
    analyze.add_argument("--q", type=float)
    analyze.add_argument("--terms", type=int)
    analyze.add_argument("--oracle", action="store_true", help="compare against the brute-force oracles")
    analyze.add_argument("--report", type=Path, help="write a machine-readable report here")
    analyze.add_argument("--format", choices=sorted(RENDERERS), default="table")
    analyze.add_argument("--log-level", choices=["debug", "info", "warning", "error"])

    condexp = sub.add_parser("condexp", help="print the conditional expectation of f per block")
    condexp.add_argument("--config", type=Path, required=True)
    condexp.add_argument("--log-level", choices=["debug", "info", "warning", "error"])
    return parser


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.WARNING))


def _apply_overrides(cfg: AnalysisConfig, args: argparse.Namespace) -> dict:
    overrides = {}
    for name in ("p", "q", "terms"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
            overrides[name] = value
    if args.oracle:
        cfg.oracle = True
        overrides["oracle"] = True
    if cfg.p is None or cfg.q is None:
        missing = "p" if cfg.p is None else "q"
        raise ConfigError(f"analysis.{missing} is required (config or --{missing})")
    if cfg.terms is not None and cfg.terms < 1:
        raise ConfigError("analysis.terms must be >= 1")
    return overrides


def _oracle_section(cfg: AnalysisConfig, exps: Exponents, stats) -> dict:
    u, w, alg, space = cfg.u, cfg.w, cfg.algebra, cfg.space
    if not nonatomic_condition(alg):
        return {"skipped": "operator lives on a non-atomic panel"}

    # block norms are compared on the analyzed blocks only; the norm and
    # trace checks below always cover the whole space
    by_index = {s.block_index: s.term for s in stats}
    worst = 0.0
    for block in alg.blocks:
        if block.index not in by_index:
            continue
        term = by_index[block.index]
        norm = block_norm(u, w, block, exps, space)
        scale = max(abs(term), abs(norm))
        if scale:
            worst = max(worst, abs(norm - term) / scale)

    bracket = operator_norm(
        u, w, alg, exps, space,
        restarts=cfg.ascent_restarts, seed=cfg.ascent_seed, max_iter=cfg.ascent_max_iter,
    )
    section = {
        "blocks_checked": len(by_index),
        "blocks_total": len(alg),
        "block_norm_residual": worst,
        "norm_formula": bracket.formula_value,
        "norm_ascent": bracket.ascent_value,
        "norm_relative_gap": bracket.relative_gap,
    }

    hilbert = Exponents.of(2, 2)
    trace = trace_norm_hilbert(u, w, alg, space)
    bound = nuclear_bound(u, w, alg, hilbert, space)
    section["hilbert_trace_norm"] = trace
    section["hilbert_nuclear_bound"] = bound
    section["hilbert_residual"] = abs(trace - bound) / bound if bound else abs(trace)

    if exps.p > 1 and exps.regime is not Regime.EQUAL and bracket.formula_value > 0:
        section["test_function_residual"] = pietsch_identity_check(u, w, alg, exps, space)
    else:
        section["test_function_residual"] = None
    return section


def _analyze_finite(cfg: AnalysisConfig, exps: Exponents):
    if not cfg.is_finite_space:
        raise ConfigError("space is required")
    space, alg = cfg.space, cfg.algebra
    stats = atom_stats(cfg.u, cfg.w, alg, exps, space)
    complete = cfg.terms is None or cfg.terms >= len(stats)
    if complete:
        tail_bound, tail = 0.0, TailStatement.FINITE_ATOMS
    else:
        stats = stats[: cfg.terms]
        tail_bound, tail = cfg.tail_bound, cfg.compact_tail
        logger.info("truncated to %d of %d blocks", cfg.terms, len(alg))

    nonatomic_ok = nonatomic_condition(alg)
    nuclear = nuclearity_verdict(stats, exps, nonatomic_ok, tail_bound=tail_bound)
    compact = compactness_verdict(stats, exps, nonatomic_ok, tail=tail, cells=cell_atoms(alg, space))
    factors = factor_norms(cfg.u, cfg.w, alg, exps, space)[: len(stats)]
    extras = {
        "factors": factors,
        "bound": math.fsum(f.product for f in factors),
        "oracle": _oracle_section(cfg, exps, stats) if cfg.oracle else None,
    }
    return stats, nuclear, compact, extras


def _analyze_family(name: str, cfg: AnalysisConfig, exps: Exponents):
    family = BUILTIN_FAMILIES[name]()
    terms = cfg.terms or DEFAULT_FAMILY_TERMS
    stats = family_stats(family, exps, terms)
    tail_bound = family.tail_bound(terms, exps) if family.tail_bound else cfg.tail_bound
    if exps.regime is not Regime.EQUAL and tail_bound is not None and math.isfinite(tail_bound):
        logger.info("%s: certified tail bound %.3g after %d terms", family.name, tail_bound, terms)
    slope = family_decay_slope(family, stats) if exps.regime is not Regime.EQUAL else None
    nuclear = nuclearity_verdict(stats, exps, True, tail_bound=tail_bound, decay_slope=slope)
    compact = compactness_verdict(stats, exps, True, tail=cfg.compact_tail)
    if cfg.oracle:
        logger.warning("the oracle needs a finite space; skipped for %s", family.name)
    return stats, nuclear, compact, {"factors": None, "bound": None, "oracle": None}


def run_analyze(args: argparse.Namespace) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
        source = str(args.config)
    else:
        cfg = AnalysisConfig()
        source = f"example:{args.example}"
    if args.log_level is None:
        _setup_logging(cfg.log_level)

    overrides = _apply_overrides(cfg, args)
    exps = Exponents.of(cfg.p, cfg.q)

    if args.example is not None:
        stats, nuclear, compact, extras = _analyze_family(args.example, cfg, exps)
    else:
        stats, nuclear, compact, extras = _analyze_finite(cfg, exps)

    consistent = consistency_check(nuclear, compact)
    report = build_report(
        source,
        exps,
        stats,
        nuclear,
        compact,
        consistent,
        overrides=overrides,
        factors=extras["factors"],
        bound=extras["bound"],
        oracle=extras["oracle"],
        family=args.example is not None,
    )

    sys.stdout.write(RENDERERS[args.format](report))
    if args.report is not None:
        document = render_csv(report) if args.format == "csv" else render_json(report)
        args.report.write_text(document)
        logger.info("report written to %s", args.report)

    if not consistent:
        logger.error("nuclear operator reported as not compact")
        return EXIT_INTERNAL_ERROR
    return EXIT_CODES[nuclear.status]


def run_condexp(config_path: Path) -> int:
    cfg = load_config(config_path)
    if not cfg.is_finite_space:
        raise ConfigError("space is required")
    if cfg.f is None:
        raise ConfigError("weights.f is required for condexp")
    rows = averaging_residuals(cfg.f, cfg.algebra, cfg.space)
    lines = [f"{'block':>8}  {'mass':>16}  {'E(f)':>20}  {'residual':>12}"]
    for row in rows:
        lines.append(f"{row.block_index:>8}  {row.mass:>16.10g}  {row.value:>20.15g}  {row.residual:>12.3g}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level or "warning")
    try:
        if args.command == "condexp":
            return run_condexp(args.config)
        return run_analyze(args)
    except WCEError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
