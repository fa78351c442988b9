"""Command line entry point: ``npplab {gen,solve,run,summarize}``.

Exit codes: 0 success, 2 bad input or config, 3 work cap exceeded,
4 internal assertion, 5 I/O failure.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from . import rng as _rng
from .core import DISTS, dumps_instance, loads_instances
from .errors import CapExceeded, ConfigError
from .instances import sample_instance
from .solvers import get_solver

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_INTERNAL, EXIT_IO = 0, 2, 3, 4, 5


class _InputError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= _rng.MASK64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="npplab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="sample instances to a JSONL file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dist", choices=DISTS, default="gaussian")
    g.add_argument("--scale-bits", type=int, default=64)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--out", required=True, help="output JSONL path")

    s = sub.add_parser("solve", help="solve every instance in a JSONL file")
    s.add_argument("instances")
    s.add_argument("--solver", default="bf")

    r = sub.add_parser("run", help="run an experiment config or replay a manifest")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=_u64, default=None)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", required=True, help="output directory")

    m = sub.add_parser("summarize", help="recompute summary.json from a run directory")
    m.add_argument("--out", required=True, help="run directory")
    return ap


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc.strerror}") from None


def _cmd_gen(a) -> int:
    if a.n < 1 or a.count < 0 or a.scale_bits < 16:
        raise _InputError("need n >= 1, count >= 0, scale-bits >= 16")
    lines = [
        dumps_instance(sample_instance(a.n, a.dist, a.scale_bits, _rng.derive_seed(a.seed, i)))
        for i in range(a.count)
    ]
    Path(a.out).write_text("".join(l + "\n" for l in lines))
    return EXIT_OK


def _cmd_solve(a) -> int:
    text = _read_text(a.instances)
    try:
        gs = loads_instances(text)
        solve = get_solver(a.solver)
    except ValueError as exc:
        raise _InputError(str(exc)) from None
    for g in gs:
        print(json.dumps(solve(g).to_json()))
    return EXIT_OK


def _cmd_run(a) -> int:
    if a.workers < 1:
        raise _InputError("--workers must be >= 1")
    try:
        raw = json.loads(_read_text(a.config))
    except json.JSONDecodeError as exc:
        raise _InputError(f"{a.config}: invalid JSON ({exc})") from None
    experiments.run(raw, a.out, workers=a.workers, seed=a.seed)
    return EXIT_OK


def _cmd_summarize(a) -> int:
    out = Path(a.out)
    try:
        summary = experiments.summarize_dir(out)
    except (KeyError, ValueError) as exc:
        raise _InputError(f"malformed run directory: {exc}") from None
    (out / "summary.json").write_text(experiments.dump_json(summary))
    return EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "solve": _cmd_solve, "run": _cmd_run, "summarize": _cmd_summarize}


def main(argv=None) -> int:
    try:
        a = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return _COMMANDS[a.cmd](a)
    except (_InputError, ConfigError) as exc:
        print(f"npplab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapExceeded as exc:
        print(f"npplab: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except OSError as exc:
        print(f"npplab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        print(f"npplab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
