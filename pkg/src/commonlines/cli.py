"""Command-line entry point: ``commonlines <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage or IO error,
3 malformed input data.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import formats
from .formats import FORMAT_VERSION, FormatError
from .kernels import MalformedDatum, oracle_datum
from .projection import (
    DEFAULT_N_R,
    DEFAULT_N_THETA,
    DEFAULT_R_MAX,
    default_phantom,
    detect_common_lines,
    simulate_slices,
)
from .spectral import KINDS, assemble, eigendecompose, reconstruct
from .sphere import sample_uniform
from .verify import SUITES, Tolerances, run_suite

logger = logging.getLogger("commonlines")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_MALFORMED = 3


class UsageError(Exception):
    pass


def _add_common(p):
    p.add_argument("--threads", type=int, default=None, help="parallelism hint (recorded, not enforced)")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _add_tolerances(p):
    defaults = Tolerances()
    for name in Tolerances.names():
        p.add_argument(
            "--tol-" + name.replace("_", "-"),
            dest="tol_" + name,
            type=float,
            default=getattr(defaults, name),
            help=f"override tolerance '{name}' (default {getattr(defaults, name)})",
        )


def build_parser():
    parser = argparse.ArgumentParser(prog="commonlines", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle-datum", help="sample directions and write their exact common lines")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-datum", required=True)
    p.add_argument("--out-truth", required=True)
    _add_common(p)

    p = sub.add_parser("simulate", help="project a phantom, add noise, detect common lines")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--snr", type=float, default=0.0, help="signal-to-noise ratio; 0 means no noise")
    p.add_argument("--n-theta", type=int, default=DEFAULT_N_THETA)
    p.add_argument("--n-r", type=int, default=DEFAULT_N_R)
    p.add_argument("--r-max", type=float, default=DEFAULT_R_MAX)
    p.add_argument("--phantom", default=None, help="phantom JSON; default is a random phantom from --seed")
    p.add_argument("--out-slices", required=True)
    p.add_argument("--out-datum", required=True)
    p.add_argument("--out-truth", default=None)
    p.add_argument("--out-report", default=None, help="detection summary JSON")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="recover orientations from a datum")
    p.add_argument("--datum", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-spectrum", required=True)
    _add_common(p)

    p = sub.add_parser("verify", help="run a theory verification suite")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--n", type=int, default=None, help="node count for clusters/isometry suites")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-verdict", required=True)
    _add_tolerances(p)
    _add_common(p)

    p = sub.add_parser("spectrum", help="dump the spectrum of an assembled operator as CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--datum", help="datum JSON (common operator only)")
    src.add_argument("--truth", help="truth JSON; any operator kind")
    src.add_argument("--n", type=int, help="sample n directions from --seed; any operator kind")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--kind", choices=KINDS, default="common")
    p.add_argument("--out-spectrum", required=True)
    _add_common(p)
    return parser


def resolved_config(args):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "log_level"}
    for k, v in config.items():
        if isinstance(v, float) and not math.isfinite(v):
            config[k] = str(v)
    config["format_version"] = FORMAT_VERSION
    return config


def _require_parent(*paths):
    for p in paths:
        if p is not None and not Path(p).resolve().parent.is_dir():
            raise UsageError(f"output directory for {p} does not exist")


def _require_input(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} file not found: {path}")


def cmd_oracle_datum(args):
    if args.n < 4:
        raise UsageError("--n must be at least 4")
    _require_parent(args.out_datum, args.out_truth)
    config = resolved_config(args)
    ds = sample_uniform(args.n, args.seed)
    datum = oracle_datum(ds)
    formats.write_datum(args.out_datum, datum, config)
    formats.write_truth(args.out_truth, ds, config)
    logger.info("wrote %d pairs for %d nodes", datum.n_pairs, ds.n)
    return EXIT_OK


def cmd_simulate(args):
    if args.n < 4:
        raise UsageError("--n must be at least 4")
    if args.snr < 0:
        raise UsageError("--snr must be non-negative (0 disables noise)")
    if args.n_theta % 2 or args.n_theta < 4:
        raise UsageError("--n-theta must be an even number of at least 4")
    if args.n_r < 4:
        raise UsageError("--n-r must be at least 4")
    _require_parent(args.out_slices, args.out_datum, args.out_truth, args.out_report)
    if args.phantom is not None:
        _require_input(args.phantom, "phantom")
        phantom = formats.read_phantom(args.phantom)
    else:
        phantom = default_phantom(args.seed)
    config = resolved_config(args)

    ds = sample_uniform(args.n, args.seed)
    slices = simulate_slices(phantom, ds, args.n_theta, args.n_r, args.r_max, snr=args.snr or None, seed=args.seed)
    datum, result = detect_common_lines(slices)
    result.attach_truth(ds)
    datum.metadata["snr"] = args.snr

    formats.write_bytes_atomic(args.out_slices, formats.slices_to_bytes(slices))
    formats.write_text_atomic(
        formats.sidecar_path(args.out_slices), formats.dumps(formats.slices_sidecar(slices, config))
    )
    formats.write_datum(args.out_datum, datum, config)
    if args.out_truth:
        formats.write_truth(args.out_truth, ds, config)
    if args.out_report:
        doc = {
            "format_version": FORMAT_VERSION,
            "detection": result.summary(),
            "pairs": [
                {"i": int(i), "j": int(j), "alpha": float(a), "beta": float(b), "score": float(s), "error": float(e)}
                for (i, j), a, b, s, e in zip(result.pairs, result.alpha, result.beta, result.scores, result.errors)
            ],
            "phantom": formats.phantom_to_doc(phantom),
            "config": config,
        }
        formats.write_text_atomic(args.out_report, formats.dumps(doc))
    if result.flagged:
        logger.warning("%d degenerate pairs excluded: %s", len(result.flagged), result.flagged)
    return EXIT_OK


def cmd_reconstruct(args):
    _require_input(args.datum, "datum")
    if args.truth:
        _require_input(args.truth, "truth")
    _require_parent(args.out_report, args.out_spectrum)
    datum = formats.read_datum(args.datum)
    truth = formats.read_truth(args.truth) if args.truth else None
    if truth is not None and truth.n != datum.n:
        raise UsageError(f"truth has {truth.n} nodes but the datum has {datum.n}")
    spec, model, report = reconstruct(datum, truth)
    extra = {"provenance": datum.provenance, "excluded_pairs": [list(p) for p in datum.excluded]}
    formats.write_report(args.out_report, report, resolved_config(args), extra)
    formats.write_spectrum(args.out_spectrum, spec.eigenvalues)
    if report.warning:
        print(f"warning: {report.warning}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    _require_parent(args.out_verdict)
    tol = Tolerances(**{name: getattr(args, "tol_" + name) for name in Tolerances.names()})
    params = {"seed": args.seed}
    if args.n is not None:
        if args.suite not in ("clusters", "isometry"):
            raise UsageError(f"--n does not apply to suite {args.suite}")
        params["n"] = args.n
    checks = run_suite(args.suite, tol, **params)
    doc = formats.verdict_doc(args.suite, checks, resolved_config(args))
    formats.write_text_atomic(args.out_verdict, formats.dumps(doc))
    for c in checks:
        logger.info("%s %s", "PASS" if c["passed"] else "FAIL", c["name"])
    if not doc["passed"]:
        failed = [c["name"] for c in checks if not c["passed"]]
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_spectrum(args):
    _require_parent(args.out_spectrum)
    if args.datum:
        _require_input(args.datum, "datum")
        if args.kind != "common":
            raise UsageError("a datum only determines the common operator; pass --truth or --n for other kinds")
        source = formats.read_datum(args.datum)
    elif args.truth:
        _require_input(args.truth, "truth")
        source = formats.read_truth(args.truth)
    else:
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        source = sample_uniform(args.n, args.seed)
    spec = eigendecompose(assemble(source, args.kind))
    formats.write_spectrum(args.out_spectrum, spec.eigenvalues)
    return EXIT_OK


COMMANDS = {
    "oracle-datum": cmd_oracle_datum,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MalformedDatum as exc:
        pair = f" (pair {exc.pair[0]}, {exc.pair[1]})" if exc.pair else ""
        print(f"malformed datum{pair}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (FormatError, KeyError, ValueError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
