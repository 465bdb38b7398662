"""``hauslip`` command line: torus | shift | expansive | verify.

Exit codes: 0 when the verdict is true, 2 when it is false, 1 on any error
(with an error JSON object on stdout).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import HausLipError, InputError

EXIT_OK, EXIT_ERROR, EXIT_FALSE = 0, 1, 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which would read as a false verdict
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hauslip", description="Certify HD * log+ Lip against topological entropy.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, input_flag, input_help):
        sp.add_argument(input_flag, dest="input", required=True, help=input_help)
        sp.add_argument("--epsilon", type=float, default=0.1, help="target slack above the entropy")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="write the certificate here instead of stdout")
        sp.add_argument("--csv", help="optional CSV export (pair distances, counts or tables)")
        sp.add_argument("--threads", type=int, help="cap BLAS / OpenMP worker threads")
        sp.add_argument("--precision", type=int, help="working precision in bits "
                        "(default from HAUSLIP_PRECISION, else 256)")

    t = sub.add_parser("torus", help="integer matrix acting on the torus")
    common(t, "--matrix", "JSON array of integer rows, or {matrix, jordan_override}")
    t.add_argument("--eta", type=float, help="fix eta instead of choosing it from epsilon")
    t.add_argument("--samples", type=int, default=2000)
    t.add_argument("--pairs", type=int, default=10_000)
    t.add_argument("--triples", type=int, default=10_000)
    t.add_argument("--levels", type=int, default=8, help="box-dimension scale levels")

    s = sub.add_parser("shift", help="full shift or subshift of finite type")
    common(s, "--subshift", "JSON {r, kind, transitions}")
    s.add_argument("--n-max", dest="n_max", type=int, default=15)
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--pairs", type=int, default=5000)
    s.add_argument("--triples", type=int, default=5000)

    e = sub.add_parser("expansive", help="positively expansive map on a finite sample")
    common(e, "--system", "JSON {kind, subshift?, c, cap, sample, alpha?, n}")

    v = sub.add_parser("verify", help="recompute a certificate's analytic block, resample the rest")
    v.add_argument("--cert", dest="input", required=True)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--slope-tol", dest="slope_tol", type=float, default=0.05)
    v.add_argument("--out")
    v.add_argument("--threads", type=int)
    return p


def _config(args):
    from .pipelines import RunConfig

    fields = RunConfig.__dataclass_fields__
    kw = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    return RunConfig(**kw)


def _emit(obj: dict, path: str | None) -> None:
    from .pipelines import dumps

    text = dumps(obj)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", None) is not None:
            if args.threads < 1:
                raise InputError("--threads must be positive")
            for var in THREAD_VARS:
                os.environ[var] = str(args.threads)
        from . import pipelines

        cfg = _config(args)
        if args.command == "verify":
            result, verdict = pipelines.run_verify(cfg, slope_tol=args.slope_tol)
        else:
            runner = {"torus": pipelines.run_torus, "shift": pipelines.run_shift,
                      "expansive": pipelines.run_expansive}[args.command]
            result, verdict = runner(cfg)
        result["metadata"] = pipelines.metadata()
        _emit(result, getattr(args, "out", None))
        return EXIT_OK if verdict else EXIT_FALSE
    except HausLipError as exc:
        sys.stdout.write(json.dumps(exc.to_json(), sort_keys=True) + "\n")
        return EXIT_ERROR
    except (KeyError, TypeError, ValueError, OSError) as exc:
        err = {"error": "input_error", "message": f"{type(exc).__name__}: {exc}"}
        sys.stdout.write(json.dumps(err, sort_keys=True) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
