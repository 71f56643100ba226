"""Command-line pipeline: simulate, fit, score, pvalue, verify.

Exit codes: 0 success, 1 invalid input, 2 fit did not converge,
3 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .em import TABLE4_STARTS, DegenerateFitError, FitConfig, fit
from .panel import (
    Panel,
    PanelFormatError,
    format_float,
    read_panel_csv,
    read_params,
    write_panel_csv,
    write_params,
)
from .posterior import TABLE3_PRIOR, equivalence_probabilities
from .qvalue import build_table
from .sim import Sigma2Law, SimScenario, simulate
from .stats import EquivalenceSpec, EstimateSummary, equivalence_p_value
from . import verify

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_VERIFY_FAILED = 3

SCORE_CHUNK = 8192
PVALUE_WARNING = "# warning: equivalence P-values are not a valid evidence measure for equivalence"

log = logging.getLogger("eqpost")


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parse_starts(text: str):
    starts = []
    for chunk in text.split(";"):
        if chunk.strip():
            starts.append(tuple(float(v) for v in chunk.split(",")))
    return tuple(starts)


def score_panel(panel: Panel, prior, epsilon: float, threads: int = 1) -> np.ndarray:
    """Posterior equivalence probabilities, computed in fixed-size gene chunks.

    Chunk boundaries do not depend on ``threads``, so the result is identical
    for any thread count.
    """
    bounds = list(range(0, len(panel), SCORE_CHUNK)) + [len(panel)]
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def work(sl):
        return equivalence_probabilities(panel.y[sl], panel.sigma2[sl], prior, epsilon)

    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, slices))
    else:
        parts = [work(sl) for sl in slices]
    return np.concatenate(parts)


def cmd_fit(args) -> int:
    panel = read_panel_csv(args.input, min_rows=3)
    config = FitConfig(
        screening_iters=args.screening_iters,
        screening_tol=args.tol_screen,
        final_tol=args.tol_final,
        max_iters=args.max_iters,
        tau2_upper=args.tau2_upper,
        starts=_parse_starts(args.starts) if args.starts else TABLE4_STARTS,
    )
    result = fit(panel, config)
    write_params(
        args.output,
        result.prior,
        {
            "loglik": result.log_likelihood,
            "iterations": result.iterations,
            "converged": result.converged,
            "start": ",".join(format_float(x) for x in result.start_used),
            "n_genes": len(panel),
        },
    )
    if not result.converged:
        print(f"fit did not converge within {config.max_iters} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_score(args) -> int:
    panel = read_panel_csv(args.input)
    prior, _ = read_params(args.params)
    spec = EquivalenceSpec(args.epsilon)
    p = score_panel(panel, prior, spec.epsilon, args.threads)
    table = build_table(list(zip(panel.ids, p.tolist())))
    _emit(table.to_csv(), args.output)
    return EXIT_OK


def cmd_pvalue(args) -> int:
    panel = read_panel_csv(args.input)
    spec = EquivalenceSpec(args.epsilon)
    buf = io.StringIO()
    buf.write(PVALUE_WARNING + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gene_id", "mean_log_ratio", "se", "p_value"])
    for gid, y, s2 in zip(panel.ids, panel.y, panel.sigma2):
        se = math.sqrt(s2)
        p = equivalence_p_value(EstimateSummary(float(y), se), spec)
        w.writerow([gid, format_float(y), format_float(se), format_float(p)])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = EquivalenceSpec(args.epsilon, args.ell if args.ell is not None else 0.5 * args.epsilon)
    verdicts, details = verify.run_suite(spec, args.seed, args.n_lemma, args.n_theorem)
    sim = simulate(SimScenario(args.panel_size, TABLE3_PRIOR, Sigma2Law.parse(args.sigma2), args.seed, spec.epsilon))
    figure4 = verify.figure4_csv(sim.panel, TABLE3_PRIOR, spec)
    verify.write_outputs(args.outdir, verdicts, details, figure4, TABLE3_PRIOR, EquivalenceSpec(spec.epsilon))
    failed = [k for k, v in verdicts.items() if not v]
    for k, v in verdicts.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def cmd_simulate(args) -> int:
    prior = TABLE3_PRIOR if args.params is None else read_params(args.params)[0]
    scn = SimScenario(args.m, prior, Sigma2Law.parse(args.sigma2), args.seed, args.epsilon)
    sim = simulate(scn)
    write_panel_csv(sim.panel, args.output)
    if args.truth:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gene_id", "theta", "equivalent", "component"])
        for gid, th, eq, comp in zip(sim.panel.ids, sim.theta, sim.equivalent, sim.component):
            w.writerow([gid, format_float(th), int(eq), int(comp) + 1])
        Path(args.truth).write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqpost",
        description="Rank genes by posterior probability of equivalence and estimate q-values.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate the mixture prior from a panel")
    p.add_argument("input", help="panel CSV: gene_id,mean_log_ratio,variance[,spot_type]")
    p.add_argument("-o", "--output", required=True, help="parameter file to write")
    p.add_argument("--starts", help="initial weights, e.g. '0.33,0.33,0.33;0.8,0.1,0.1'")
    p.add_argument("--screening-iters", type=int, default=50)
    p.add_argument("--tol-screen", type=float, default=1e-5)
    p.add_argument("--tol-final", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tau2-upper", type=float, default=None, help="upper bound for tau2 (default: max variance)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="posterior equivalence probabilities and q-values")
    p.add_argument("input")
    p.add_argument("--params", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pvalue", help="equivalence P-values (for comparison only)")
    p.add_argument("input")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_pvalue)

    p = sub.add_parser("verify", help="run the numerical checks and write figure data")
    p.add_argument("--outdir", default="verify_out")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--ell", type=float, default=None, help="observation window (default epsilon/2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-lemma", type=int, default=1000)
    p.add_argument("--n-theorem", type=int, default=200)
    p.add_argument("--panel-size", type=int, default=5000, help="simulated genes for figure4.csv")
    p.add_argument("--sigma2", default="uniform:0.001,0.3", help="variance law for figure4.csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="simulate a panel with known truth")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--params", help="prior parameter file (default: built-in prior)")
    p.add_argument("--sigma2", default="uniform:0.01,0.1",
                   help="constant:V | uniform:LO,HI | empirical:V1,V2,...")
    p.add_argument("-o", "--output", required=True, help="panel CSV to write")
    p.add_argument("--truth", help="truth CSV to write")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK
    except (PanelFormatError, DegenerateFitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
