"""Command-line front end: ``clalign align`` and ``clalign bench``.

Exit codes: 0 success, 1 I/O or file-format error, 2 degenerate alignment
under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .bench import BenchSpec, parse_snr, run_bench, write_csv
from .mrc import MRCFormatError, read_mrc, write_mrc
from .register import AlignParams, align_volumes, params_dict
from .symmetry import parse_symmetry
from .volume import apply_transform

logger = logging.getLogger("clalign")

THREADS_ENV = "CLALIGN_THREADS"
EXIT_OK, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2


@dataclass
class RunConfig:
    vol1_path: str
    vol2_path: str
    out_aligned: str | None = None
    out_params: str | None = None
    params: AlignParams = field(default_factory=AlignParams)
    strict: bool = False
    omit_timings: bool = False
    verbosity: int = 0

    def __post_init__(self):
        if not self.vol1_path or not self.vol2_path:
            raise ValueError("both input paths are required")


def resolve_threads(requested: int) -> int:
    """``$CLALIGN_THREADS`` wins over the command-line value when set."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        return max(1, value)
    return max(1, requested)


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def alignment_record(result, params: AlignParams, omit_timings: bool = False) -> dict:
    T = result.transform
    rec = {
        "rotation": _floats(T.rotation),
        "translation": _floats(T.translation),
        "reflected": bool(T.reflected),
        "correlation": float(result.correlation),
        "branch_scores": {"direct": float(result.branch_scores[0]),
                          "reflected": float(result.branch_scores[1])},
        "refined": bool(result.refined),
        "timings": None if omit_timings else {k: float(v) for k, v in result.timings.items()},
        "seed": params.seed,
        # thread count is an execution detail and never changes the result
        "params": {k: v for k, v in params_dict(params).items() if k != "threads"},
        "warnings": list(result.warnings),
    }
    if result.unrefined is not None:
        rec["unrefined"] = {"rotation": _floats(result.unrefined.rotation),
                            "translation": _floats(result.unrefined.translation),
                            "correlation": float(result.unrefined_correlation)}
    return rec


def cmd_align(cfg: RunConfig) -> int:
    try:
        v1, voxel = read_mrc(cfg.vol1_path)
        v2, _ = read_mrc(cfg.vol2_path)
    except MRCFormatError as exc:
        logger.error("format error: %s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("cannot read input: %s", exc)
        return EXIT_IO
    if v1.shape != v2.shape:
        logger.error("input volumes differ in size: %s vs %s", v1.shape, v2.shape)
        return EXIT_IO
    p = cfg.params
    if p.n_ds > v1.shape[0]:
        logger.info("downsample size %d exceeds input size %d; using %d", p.n_ds, v1.shape[0],
                    v1.shape[0])
        p.n_ds = v1.shape[0]
    result = align_volumes(v1, v2, p)
    rec = alignment_record(result, p, cfg.omit_timings)
    try:
        if cfg.out_params:
            with open(cfg.out_params, "w") as fh:
                json.dump(rec, fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            json.dump(rec, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
        if cfg.out_aligned:
            write_mrc(cfg.out_aligned, apply_transform(v2, result.transform.inverse()), voxel)
    except OSError as exc:
        logger.error("cannot write output: %s", exc)
        return EXIT_IO
    if result.warnings and cfg.strict:
        logger.error("degenerate alignment: %s", "; ".join(result.warnings))
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_bench(spec: BenchSpec, params: AlignParams, out: str | None, threads: int = 1,
              strict: bool = False) -> int:
    try:
        rows = run_bench(spec, params, threads)
    except MRCFormatError as exc:
        logger.error("format error: %s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("cannot read input: %s", exc)
        return EXIT_IO
    try:
        write_csv(out if out else sys.stdout, rows)
    except OSError as exc:
        logger.error("cannot write output: %s", exc)
        return EXIT_IO
    if strict and any(np.isnan(r["e1_deg"]) for r in rows):
        return EXIT_DEGENERATE
    return EXIT_OK


def _add_align_options(ap):
    ap.add_argument("--downsample", type=int, default=64, metavar="N",
                    help="edge length used for the orientation search (default 64)")
    ap.add_argument("--n-projs", type=int, default=30, help="projections per volume (default 30)")
    ap.add_argument("--no-refine", action="store_true", help="skip BFGS refinement")
    ap.add_argument("--max-shift-frac", type=float, default=0.15,
                    help="1D shift search range as a fraction of n (default 0.15)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1,
                    help=f"worker threads; ${THREADS_ENV} overrides")
    ap.add_argument("--strict", action="store_true",
                    help="exit with status 2 when the alignment is degenerate")
    ap.add_argument("--omit-timings", action="store_true",
                    help="leave wall-clock timings out of the outputs (byte-stable results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clalign", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    al = sub.add_parser("align", help="align --vol2 onto --vol1")
    al.add_argument("--vol1", required=True, help="reference map (MRC)")
    al.add_argument("--vol2", required=True, help="map to align (MRC)")
    al.add_argument("--out-aligned", help="write the aligned copy of vol2 here (MRC)")
    al.add_argument("--out-params", help="write the parameter record here (JSON; default stdout)")
    _add_align_options(al)

    be = sub.add_parser("bench", help="synthetic alignment benchmark")
    src = be.add_mutually_exclusive_group(required=True)
    src.add_argument("--phantom", action="store_true", help="use random Gaussian-blob phantoms")
    src.add_argument("--vol", help="use this map (MRC) for every trial")
    be.add_argument("--n", type=int, default=64, help="phantom edge length (default 64)")
    be.add_argument("--sym", default="C1", help="symmetry of the phantom (C1, Cn, Dn, T, O, I)")
    be.add_argument("--snr", default="clean",
                    help="comma-separated SNR list, e.g. clean,1,1/8 (default clean)")
    be.add_argument("--shift-frac", type=float, default=0.10,
                    help="maximum translation as a fraction of n (default 0.10)")
    be.add_argument("--reflect", choices=("none", "all", "random"), default="none",
                    help="mirror the second volume of each pair")
    be.add_argument("--trials", type=int, default=10)
    be.add_argument("--parallel-trials", action="store_true",
                    help="run trials in --threads worker processes")
    be.add_argument("--out", help="CSV output path (default stdout)")
    _add_align_options(be)
    return parser


def _params(args, threads) -> AlignParams:
    return AlignParams(n_ds=args.downsample, n_projs=args.n_projs,
                       max_shift_frac=args.max_shift_frac, refine=not args.no_refine,
                       seed=args.seed, threads=threads)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[
        min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = resolve_threads(args.threads)
        params = _params(args, threads)
        if args.command == "align":
            cfg = RunConfig(args.vol1, args.vol2, args.out_aligned, args.out_params, params,
                            args.strict, args.omit_timings, args.verbose)
        else:
            parse_symmetry(args.sym)
            spec = BenchSpec(n=args.n, volume_path=args.vol, symmetry=args.sym,
                             snrs=tuple(parse_snr(s) for s in args.snr.split(",")),
                             shift_frac=args.shift_frac, reflect=args.reflect,
                             trials=args.trials, seed=args.seed, refine=not args.no_refine,
                             parallel_trials=args.parallel_trials,
                             omit_timings=args.omit_timings)
    except ValueError as exc:
        parser.error(str(exc))
    if args.command == "align":
        return cmd_align(cfg)
    return cmd_bench(spec, params, args.out, threads, args.strict)


if __name__ == "__main__":
    sys.exit(main())
