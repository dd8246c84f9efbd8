"""``mmx`` command line: generate | run | check | report.

Exit codes: 0 success, 1 invalid configuration, 2 non-finite iterate (the
failing trace is still written), 3 a ``check`` failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .harness import ConfigError, format_report, load_spec, report, run_experiment
from .problems import generate_quadratic

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CHECK = 3

log = logging.getLogger("smgda")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmx", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a random quadratic instance as JSON")
    g.add_argument("--m", type=int, default=50)
    g.add_argument("--n", type=int, default=50)
    g.add_argument("--L", type=float, default=5.0)
    g.add_argument("--mu-y", type=float, default=0.0,
                   help="0 gives the ball-constrained (merely concave) variant")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output JSON path")

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int)
    r.add_argument("--record-every", type=int)
    r.add_argument("--tol", type=float)

    c = sub.add_parser("check", help="run the invariant and oracle checks")
    c.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="compare run directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="write the per-iteration table as CSV")
    return ap


def _cmd_generate(a) -> int:
    if a.m < 1 or a.n < 1 or a.L <= 0 or a.mu_y < 0:
        log.error("need m, n >= 1, L > 0 and mu_y >= 0")
        return EXIT_CONFIG
    inst = generate_quadratic(a.m, a.n, a.L, a.mu_y, seed=a.seed)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    inst.save(a.out)
    print(f"wrote {a.out} ({inst.variant}, F* = {inst.F_star:.10g})")
    return EXIT_OK


def _cmd_run(a) -> int:
    if a.jobs < 1:
        log.error("--jobs must be >= 1")
        return EXIT_CONFIG
    overrides = {"seed": a.seed, "record_every": a.record_every, "tol": a.tol,
                 "output_dir": a.out}
    try:
        spec = load_spec(a.config, overrides)
        summary, failures = run_experiment(spec, jobs=a.jobs)
    except (ConfigError, FileNotFoundError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    for path in failures:
        log.error("non-finite iterate, trace flushed to %s", path)
    print(f"wrote {spec.output_dir}/summary.json")
    return EXIT_NUMERICAL if failures else EXIT_OK


def _cmd_check(a) -> int:
    from .checks import run_checks

    results = run_checks(a.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK


def _cmd_report(a) -> int:
    missing = [d for d in a.dirs if not Path(d).is_dir()]
    if missing:
        log.error("not a directory: %s", ", ".join(missing))
        return EXIT_CONFIG
    final = report(a.dirs, a.out)
    print(format_report(final))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    a = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"generate": _cmd_generate, "run": _cmd_run, "check": _cmd_check,
               "report": _cmd_report}[a.cmd]
    return handler(a)


if __name__ == "__main__":
    sys.exit(main())
