"""``survey-recon run|certify|oracle|table --config <path> [--workers k] [--out <dir>]``.

Exit codes: 0 success or certified, 1 not certified (or oracle mismatch),
2 input error, 3 enumeration budget refusal.
"""
from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .config import ConfigError, RunConfig, config_hash, load_config
from .core import BudgetExceeded, DegreeDistribution, LevelSpec, decimal_string, format_rational, potts_channel
from .engine import ModelSpec, Schedule, run
from .oracle import (
    TreeInstance,
    brute_force_residual,
    depth_monotonicity_check,
    residual_of_tree,
)
from .potts_certify import (
    ContractionProblem,
    certify_contraction,
    end_to_end_certify,
    ks_bound,
    mp_bound,
)

EXIT_OK, EXIT_NOT_CERTIFIED, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

DEFAULT_TABLE_ROWS = (
    ((2, Fraction(1)),),
    ((3, Fraction(1)),),
    ((2, Fraction(1, 2)), (3, Fraction(1, 2))),
)


def build_model(config: RunConfig) -> ModelSpec:
    m = config.model
    if m.symmetric:
        return ModelSpec.potts(m.q, m.lam, m.degree_distribution())
    ch = potts_channel(m.q, m.lam)
    return ModelSpec(m.q, LevelSpec.single(m.degree_distribution(), ch.matrix), symmetric=False, lam=ch.lam)


def build_schedule(config: RunConfig, base_dir: Path | None = None) -> Schedule:
    s = config.schedule
    plan = tuple((e.start, e.build(config.model.q, config.model.symmetric, base_dir)) for e in s.skeletons)
    kw = {} if s.tuple_budget is None else {"tuple_budget": s.tuple_budget}
    return Schedule(s.iterations, plan, s.rounding, s.support_cap, **kw)


def _header(digest: str) -> str:
    return f"config-sha256 {digest}"


def _write(out: Path, name: str, body: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(body, encoding="utf-8")
    return path


def cmd_run(config: RunConfig, digest: str, out: Path, workers: int = 1, base_dir: Path | None = None) -> int:
    result = run(build_model(config), build_schedule(config, base_dir), workers=workers)
    path = _write(out, "trace.csv", result.trace.to_csv(_header(digest)))
    final = result.trace.final
    print(f"iterations {result.iterations}  support {final.support}  x_bound {decimal_string(final.x_bound)}")
    for w in result.trace.warnings:
        print(f"warning: {w}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_certify(config: RunConfig, digest: str, out: Path, workers: int = 1, base_dir: Path | None = None) -> int:
    m, c = config.model, config.certify
    if c.x_hat is not None:
        problem = ContractionProblem(m.q, m.lam, m.degree_distribution(), c.x_hat)
        cert = certify_contraction(problem, c.m)
    else:
        cert, result = end_to_end_certify(
            build_model(config), build_schedule(config, base_dir), c.m, workers=workers, stop_early=c.stop_early
        )
        _write(out, "trace.csv", result.trace.to_csv(_header(digest)))
        print(f"engine stopped after {result.iterations} iterations")
    path = _write(out, "certificate.txt", f"# {_header(digest)}\n" + cert.report())
    print(f"{cert.status}: C = {decimal_string(cert.factor)}  (x_hat {decimal_string(cert.problem.x_hat)})")
    print(f"wrote {path}")
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def cmd_oracle(config: RunConfig, digest: str, out: Path, workers: int = 1, base_dir: Path | None = None) -> int:
    m, o = config.model, config.oracle
    if len(m.degree) != 1 or m.degree_tail:
        raise ConfigError("the oracle needs a fixed degree (one atom, no tail)")
    d = m.degree[0][0]
    psi = potts_channel(m.q, m.lam).matrix
    trees = [TreeInstance.complete(m.q, d, depth, psi) for depth in range(1, o.depth + 1)]
    lines = [f"# {_header(digest)}", f"q={m.q} lambda={format_rational(m.lam)} degree={d}"]
    ok = True
    for tree in trees:
        rec = residual_of_tree(tree)
        brute = brute_force_residual(tree, o.budget)
        verdict = "MATCH" if rec.same_as(brute) else "MISMATCH"
        ok &= verdict == "MATCH"
        lines.append(f"depth {tree.depth}: leaves {tree.n_leaves} support {len(rec)} {verdict}")
    seq = depth_monotonicity_check(trees, 0, 1, o.budget)
    mono = all(b <= a for a, b in zip(seq, seq[1:]))
    lines.append("monotonicity " + " ".join(format_rational(v) for v in seq) + (" non-increasing" if mono else " INCREASING"))
    lines.append(f"# residual distribution at depth {trees[-1].depth}: weight | vector")
    for vec, w in residual_of_tree(trees[-1]).support:
        lines.append(f"{format_rational(w)} | " + " ".join(format_rational(x) for x in vec))
    path = _write(out, "oracle.txt", "\n".join(lines) + "\n")
    print("\n".join(lines[1 : 2 + len(trees) + 1]))
    print(f"wrote {path}")
    return EXIT_OK if ok and mono else EXIT_NOT_CERTIFIED


def _degree_label(dist: DegreeDistribution) -> str:
    d = dist.mean
    return str(d.numerator) if d.denominator == 1 else decimal_string(d)


def cmd_table(config: RunConfig, digest: str, out: Path, workers: int = 1, base_dir: Path | None = None) -> int:
    t = config.table
    rows = t.rows or DEFAULT_TABLE_ROWS
    header = f"{'d':>5} | {'KS':>9} | {'MP':>9} | {'this work':>12}"
    lines = [f"# {_header(digest)}", f"q = {t.q}", header, "-" * len(header)]
    audit = []
    for i, atoms in enumerate(rows):
        dist = DegreeDistribution(atoms)
        ks, mp = ks_bound(dist), mp_bound(t.q, dist)
        ours = "-"
        if t.certified:
            lam, x_hat = t.certified[i]
            cert = certify_contraction(ContractionProblem(t.q, lam, dist, x_hat), config.certify.m)
            ours = decimal_string(lam) if cert.certified else "not cert."
            audit.append(f"d={_degree_label(dist)} lambda={format_rational(lam)} x_hat={format_rational(x_hat)} C={decimal_string(cert.factor)}")
        lines.append(f"{_degree_label(dist):>5} | {ks.truncated():>9} | {mp.truncated():>9} | {ours:>12}")
        for name, enc in (("KS", ks), ("MP", mp)):
            exact = " exact" if enc.exact else ""
            audit.append(f"d={_degree_label(dist)} {name} in [{format_rational(enc.lo)}, {format_rational(enc.hi)}]{exact}")
    lines.append("")
    lines += audit
    path = _write(out, "table.txt", "\n".join(lines) + "\n")
    print("\n".join(lines[1 : 4 + len(rows)]))
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "oracle": cmd_oracle, "table": cmd_table}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survey-recon",
        description="Exact survey-propagation bounds and non-reconstruction certificates for tree MRFs.",
        epilog="exit codes: 0 ok/certified, 1 not certified or oracle mismatch, 2 input error, 3 budget refusal",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--workers", type=int, default=1, help="processes for skeleton decompositions")
    parser.add_argument("--out", help="output directory (default: [output] dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        config, text = load_config(args.config)
        base_dir = Path(args.config).resolve().parent
        out = Path(args.out) if args.out else Path(config.output.dir)
        return COMMANDS[args.command](config, config_hash(text), out, args.workers, base_dir)
    except BudgetExceeded as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
