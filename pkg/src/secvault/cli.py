"""Command-line front end: ``secvault encode|retrieve|resilience|simulate``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import resilience, sim
from .codec import CodeParams, Mode, encode_archive, retrieve
from .errors import (
    ArchiveExistsError,
    ConstructionError,
    CorruptShareError,
    InsufficientSamplesError,
    UnrecoverableError,
)
from .placement import Placement
from .store import open_archive, write_archive

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNRECOVERABLE = 3
EXIT_IO = 4
EXIT_SAMPLES = 5

DEFAULTS = {
    "n": 6,
    "k": 3,
    "width": 8,
    "systematic": False,
    "mode": "basic",
    "placement": "colocated",
    "gamma": 1,
    "gammas": None,
    "p": None,
    "p_grid": "0.01:0.2:0.01",
    "pmf": None,
    "trials": 100000,
    "seed": 0,
    "out": None,
    "root": None,
}


class UsageError(Exception):
    pass


def _add_code_flags(p):
    p.add_argument("--n", type=int, help="code length (default 6)")
    p.add_argument("--k", type=int, help="code dimension (default 3)")
    p.add_argument("--width", type=int, help="field width w of GF(2^w) (default 8)")
    p.add_argument("--systematic", action="store_const", const=True, help="use a systematic code")
    p.add_argument("--config", help="JSON file with defaults for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secvault", description="Sparsity-exploiting erasure coding of versioned data.")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode versions of a file into an archive")
    _add_code_flags(enc)
    enc.add_argument("inputs", nargs="+", help="version files, oldest first, all of equal length")
    enc.add_argument("--id", required=True, help="archive id (directory name under the root)")
    enc.add_argument("--root", help="archive root (default $SECVAULT_ROOT or ./archives)")
    enc.add_argument("--mode", choices=[m.value for m in Mode])
    enc.add_argument("--placement", choices=[p.value for p in Placement])

    ret = sub.add_parser("retrieve", help="rebuild one version from an archive")
    ret.add_argument("--id", required=True)
    ret.add_argument("--root")
    ret.add_argument("--version", type=int, required=True, help="version index l (1-based)")
    ret.add_argument("--failed", default="", help="comma-separated failed node ids")
    ret.add_argument("--out", help="output file (default: stdout)")
    ret.add_argument("--config")

    res = sub.add_parser("resilience", help="loss probabilities, census counts and retention as CSV")
    _add_code_flags(res)
    res.add_argument("--gamma", type=int, help="delta sparsity for the per-object rows (default 1)")
    res.add_argument("--gammas", help="comma-separated delta sparsities of versions 2..L for retention")
    res.add_argument("--p", type=float, help="single failure probability (overrides --p-grid)")
    res.add_argument("--p-grid", dest="p_grid", help="start:stop:step or comma list (default 0.01:0.2:0.01)")
    res.add_argument("--out", help="CSV path (default: stdout)")

    sm = sub.add_parser("simulate", help="I/O experiments as CSV")
    _add_code_flags(sm)
    what = sm.add_mutually_exclusive_group(required=True)
    what.add_argument("--mu", action="store_true", help="Monte-Carlo average reads across p")
    what.add_argument("--expected-io", dest="expected_io", action="store_true", help="expected reads under sparsity PMFs")
    what.add_argument("--scenario-l5", dest="scenario_l5", action="store_true", help="the five-version (20,10) example")
    sm.add_argument("--gamma", type=int)
    sm.add_argument("--p", type=float)
    sm.add_argument("--p-grid", dest="p_grid")
    sm.add_argument("--pmf", action="append", help="exp:<alpha>, poisson:<lambda> or table:<file>; repeatable")
    sm.add_argument("--trials", type=int)
    sm.add_argument("--seed", type=int)
    sm.add_argument("--out")
    return parser


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from the defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    if args.root is None:
        args.root = os.environ.get("SECVAULT_ROOT", "archives")
    return args


def parse_grid(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad p grid {text!r}; use start:stop:step or a comma list") from None


def _params(args) -> CodeParams:
    if args.width < 8 and getattr(args, "command", "") == "encode":
        raise UsageError("encode needs --width >= 8 so every byte is a field symbol")
    try:
        return CodeParams.cauchy(args.n, args.k, bool(args.systematic), args.width)
    except ConstructionError as e:
        raise UsageError(str(e)) from None


def _emit(rows, header, comments, out):
    if out:
        resilience.write_csv(rows, out, header, comments)
    else:
        resilience.write_csv(rows, sys.stdout, header, comments)


# -- subcommands ------------------------------------------------------------


def pack_bytes(blobs: list[bytes], k: int) -> list[np.ndarray]:
    """One byte per symbol, zero padded to a multiple of ``k`` and split into ``k`` blocks."""
    size = len(blobs[0])
    if any(len(b) != size for b in blobs):
        raise UsageError("all version files must have the same length: " + ", ".join(str(len(b)) for b in blobs))
    m = max(1, -(-size // k))
    out = []
    for b in blobs:
        arr = np.zeros(k * m, dtype=np.int64)
        arr[:size] = np.frombuffer(b, dtype=np.uint8)
        out.append(arr.reshape(k, m))
    return out


def unpack_bytes(x: np.ndarray, size: int) -> bytes:
    return np.asarray(x).reshape(-1)[:size].astype(np.uint8).tobytes()


def cmd_encode(args) -> int:
    params = _params(args)
    blobs = [Path(p).read_bytes() for p in args.inputs]
    versions = pack_bytes(blobs, params.k)
    archive = encode_archive(versions, params, args.mode)
    write_archive(archive, args.root, args.id, args.placement, extra={"payload_bytes": len(blobs[0])})
    for rec, name in zip(archive.records, archive.pattern):
        print(f"record {rec.index}: stores {name} gamma={rec.gamma} as {rec.stored_as.value}")
    print(f"pattern: {{{', '.join(archive.pattern)}}}")
    return EXIT_OK


def cmd_retrieve(args) -> int:
    try:
        failed = [int(v) for v in args.failed.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --failed list {args.failed!r}") from None
    oa = open_archive(args.root, args.id)
    if not 1 <= args.version <= oa.archive.L:
        raise UsageError(f"version {args.version} not in 1..{oa.archive.L}")
    if any(not 0 <= f < oa.placement.node_count for f in failed):
        raise UsageError(f"failed node ids must lie in 0..{oa.placement.node_count - 1}")
    x, report = retrieve(oa.archive, args.version, failed, oa.placement, oa.reader, oa.shape)
    data = unpack_bytes(x, int(oa.manifest.extra.get("payload_bytes", x.size)))
    log = sys.stderr if not args.out else sys.stdout
    for step in report.steps:
        print(f"record {step.record}: {step.reads} reads ({step.path}) shares={list(step.shares)}", file=log)
    print(f"restart at record {report.restart}; total reads {report.total}", file=log)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def _gammas(args, k):
    if args.gammas is None:
        return [args.gamma]
    try:
        g = [int(v) for v in str(args.gammas).split(",") if v.strip()] if not isinstance(args.gammas, list) else args.gammas
    except ValueError:
        raise UsageError(f"bad --gammas list {args.gammas!r}") from None
    if any(not 0 <= v <= k for v in g):
        raise UsageError(f"delta sparsities must lie in 0..{k}")
    return g


def _p_values(args):
    grid = [args.p] if args.p is not None else parse_grid(args.p_grid)
    if any(not 0 <= p <= 1 for p in grid):
        raise UsageError("failure probabilities must lie in [0, 1]")
    return grid


def cmd_resilience(args) -> int:
    params = _params(args)
    if not 1 <= args.gamma <= params.k:
        raise UsageError(f"--gamma must lie in 1..{params.k}")
    rows = resilience.resilience_rows(params, args.gamma, _p_values(args), _gammas(args, params.k))
    comments = [f"secvault resilience n={params.n} k={params.k} w={params.field.width} gamma={args.gamma}"]
    _emit(rows, ("p", "variant", "placement", "metric", "value"), comments, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    header = ("experiment", "params", "seed", "sweep", "sweep_value", "metric", "value")
    seed = args.seed
    if args.scenario_l5:
        result = sim.scenario_l5(seed=seed)
        tag = f"n={result.n};k={result.k};gammas={'/'.join(map(str, result.gammas))}"
        rows = [("scenario_l5", tag, seed, "version", l, f"{code}_{mode}_{metric}" if mode else f"{code}_{metric}", v)
                for code, mode, l, metric, v in result.rows()]
        rows.append(("scenario_l5", tag, seed, "", "", "saving_pct_l5", result.saving_percent()))
        comments = [f"seed={seed}",
                    "saving_pct_l5 is the computed reduction against the non-differential total (42 vs 50)"]
    else:
        params = _params(args)
        tag = f"n={params.n};k={params.k};w={params.field.width};{'sys' if params.systematic else 'nonsys'}"
        if args.mu:
            if not 1 <= args.gamma or 2 * args.gamma >= params.k:
                raise UsageError(f"--mu needs 1 <= gamma and 2*gamma < k (k={params.k})")
            if args.trials < 1:
                raise UsageError("--trials must be >= 1")
            got = sim.mu_rows(params, args.gamma, _p_values(args), args.trials, seed)
            experiment = "mu"
            tag += f";gamma={args.gamma};trials={args.trials}"
        else:
            specs = args.pmf or [f"{fam}:{v:g}" for fam in ("exp", "poisson") for v in sim.DEFAULT_GRID]
            try:
                pmfs = [sim.SparsityPmf.parse(s, params.k) for s in specs]
            except (ValueError, OSError) as e:
                raise UsageError(f"bad --pmf: {e}") from None
            got = sim.expected_io_rows(params, pmfs)
            experiment = "expected_io"
        rows = [(experiment, tag, seed) + tuple(r) for r in got]
        comments = [f"seed={seed}"]
    _emit(rows, header, comments, args.out)
    return EXIT_OK


COMMANDS = {"encode": cmd_encode, "retrieve": cmd_retrieve, "resilience": cmd_resilience, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolve(args)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"secvault: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except UnrecoverableError as e:
        blocking = f" (blocking object: record {e.record})" if e.record is not None else ""
        print(f"secvault: unrecoverable: {e}{blocking}", file=sys.stderr)
        return EXIT_UNRECOVERABLE
    except InsufficientSamplesError as e:
        print(f"secvault: {e}", file=sys.stderr)
        return EXIT_SAMPLES
    except (ArchiveExistsError, CorruptShareError, OSError) as e:
        print(f"secvault: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
