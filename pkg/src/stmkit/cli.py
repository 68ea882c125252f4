"""Command line entry point: ``stmkit {generate,estimate,evaluate,sweep}``.

Every subcommand accepts ``--config`` pointing at a JSON document with optional
sections ``synth``, ``estimator`` and ``sweep`` plus top-level ``seed``,
``threads`` and ``out``. Flags given on the command line win over the file.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .estimator import EstimationError, STMConfig, run_stm
from .evaluation import aligned_l1_loss, results_to_csv, sweep_rate, sweep_sparsity
from .model import CorpusCounts, ModelError, TopicMatrix
from .simplex_qp import QpError
from .synthgen import SynthConfig, make_dataset

logger = logging.getLogger("stmkit")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    synth: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    seed: int = None
    threads: int = None
    out: str = None

    @classmethod
    def load(cls, path):
        if path is None:
            return cls()
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ModelError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**doc)

    def synth_config(self) -> SynthConfig:
        params = dict(self.synth)
        if self.seed is not None:
            params.setdefault("seed", self.seed)
        return _build(SynthConfig, params, "synth")

    def stm_config(self) -> STMConfig:
        return _build(STMConfig, self.estimator, "estimator")


def _build(cls, params, section):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise ModelError(f"unknown keys in '{section}': {sorted(unknown)}")
    return cls(**params)


def _override(section: dict, args, mapping):
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            section[key] = value


SYNTH_FLAGS = {"p": "p", "n": "n", "K": "K", "N": "N", "anchors_per_topic": "anchors_per_topic",
               "xi": "xi", "alpha": "dirichlet_alpha", "eta": "eta", "seed": "seed",
               "extra_zero_words": "extra_zero_words"}
STM_FLAGS = {"c0": "c0", "tol": "tol", "max_iter": "max_iter", "force_lambda": "force_lambda",
             "t_min": "t_min", "t_max": "t_max", "strict": "strict"}


def _add_synth_flags(sp):
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--K", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--anchors-per-topic", type=int)
    sp.add_argument("--xi", type=float)
    sp.add_argument("--alpha", type=float, help="symmetric Dirichlet parameter for W")
    sp.add_argument("--eta", type=float, help="sparsity proportion in [0, 1)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--extra-zero-words", type=int)


def _add_stm_flags(sp):
    sp.add_argument("--c0", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--force-lambda", type=float)
    sp.add_argument("--t-min", type=int)
    sp.add_argument("--t-max", type=int)
    sp.add_argument("--strict", action="store_true", default=None,
                    help="fail with exit code 2 if any row QP does not converge")


def build_parser():
    parser = _Parser(prog="stmkit", description="Sparse topic model estimation with known anchor words.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate a corpus from a planted-anchor topic model")
    g.add_argument("--config")
    g.add_argument("--out")
    g.add_argument("--threads", type=int)
    _add_synth_flags(g)

    e = sub.add_parser("estimate", help="estimate A from counts and an anchor partition")
    e.add_argument("--config")
    e.add_argument("--counts", required=True)
    e.add_argument("--anchors", required=True)
    e.add_argument("--out")
    e.add_argument("--threads", type=int)
    _add_stm_flags(e)

    v = sub.add_parser("evaluate", help="permutation-aligned l1 loss between two topic matrices")
    v.add_argument("--a-hat", required=True)
    v.add_argument("--a-ref", required=True)
    v.add_argument("--out")

    s = sub.add_parser("sweep", help="sparsity or rate sweep, written as CSV")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--kind", choices=["sparsity", "rate"])
    s.add_argument("--etas", type=float, nargs="+")
    s.add_argument("--factors", type=float, nargs="+", help="multipliers on n for a rate sweep")
    s.add_argument("--reps", type=int)
    s.add_argument("--threads", type=int)
    _add_synth_flags(s)
    _add_stm_flags(s)
    return parser


def _cmd_generate(args, rc: RunConfig):
    _override(rc.synth, args, SYNTH_FLAGS)
    cfg = rc.synth_config()
    out = Path(args.out or rc.out or ".")
    data = make_dataset(cfg)
    io.write_matrix(out / "counts.tsv", data.corpus.counts)
    io.write_matrix(out / "A_true.tsv", data.A.entries)
    io.write_matrix(out / "W_true.tsv", data.W.entries)
    io.write_anchors(out / "anchors.txt", data.anchors)
    io.write_json(out / "config.json", {"synth": cfg.to_dict()})
    logger.info("wrote p=%d n=%d corpus to %s", data.corpus.p, data.corpus.n, out)


def _cmd_estimate(args, rc: RunConfig):
    _override(rc.estimator, args, STM_FLAGS)
    cfg = rc.stm_config()
    counts = CorpusCounts(io.read_matrix(args.counts))
    anchors = io.read_anchors(args.anchors)
    report = run_stm(counts, anchors, cfg)
    out = Path(args.out or rc.out or ".")
    io.write_matrix(out / "A_hat.tsv", report.A_hat.entries)
    io.write_matrix(out / "B_hat.tsv", report.B_hat)
    io.write_json(out / "report.json", report.to_json())
    logger.info("lambda=%.4g, %d thresholded words", report.lambda_used, report.thresholded.size)


def _cmd_evaluate(args, rc: RunConfig):
    A_hat = TopicMatrix(io.read_matrix(args.a_hat).astype(float))
    A_ref = TopicMatrix(io.read_matrix(args.a_ref).astype(float))
    loss, perm = aligned_l1_loss(A_hat, A_ref)
    result = {"aligned_l1_per_topic": loss, "permutation": [int(k) for k in perm]}
    if args.out:
        io.write_json(args.out, result)
    print(json.dumps(result))


def _cmd_sweep(args, rc: RunConfig):
    _override(rc.synth, args, SYNTH_FLAGS)
    _override(rc.estimator, args, STM_FLAGS)
    _override(rc.sweep, args, {"kind": "kind", "etas": "etas", "factors": "nN_factors", "reps": "reps"})
    synth, stm = rc.synth_config(), rc.stm_config()
    sweep = dict(rc.sweep)
    unknown = set(sweep) - {"kind", "etas", "nN_factors", "reps"}
    if unknown:
        raise ModelError(f"unknown keys in 'sweep': {sorted(unknown)}")
    kind = sweep.get("kind", "sparsity")
    reps = int(sweep.get("reps", 10))
    threads = args.threads if args.threads is not None else rc.threads
    summary = {"kind": kind, "reps": reps, "synth": synth.to_dict()}
    if kind == "sparsity":
        results = sweep_sparsity(synth, sweep.get("etas", [0.0, 0.3, 0.6, 0.9]), reps, stm, threads)
    else:
        results, slope = sweep_rate(synth, sweep.get("nN_factors", [1, 4, 16]), reps, stm, threads)
        summary["loglog_slope"] = slope
    summary["failed"] = [r.failed for r in results]
    summary["violations"] = [r.violations for r in results]
    out = Path(args.out or rc.out or "sweep.csv")
    if out.suffix != ".csv":
        out = out / "results.csv"
    io.atomic_write_text(out, results_to_csv(results))
    io.write_json(out.with_suffix(".summary.json"), summary)
    logger.info("wrote %d grid points to %s", len(results), out)


COMMANDS = {"generate": _cmd_generate, "estimate": _cmd_estimate,
            "evaluate": _cmd_evaluate, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig.load(getattr(args, "config", None))
        COMMANDS[args.command](args, rc)
    except (EstimationError, QpError, np.linalg.LinAlgError) as exc:
        print(f"stmkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ModelError, OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"stmkit: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
