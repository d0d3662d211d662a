"""Command-line front end.

    brinkfourier [--config PATH] [--out DIR] [--seed N] [--threads N] COMMAND

Commands: ``simulate``, ``derive-check``, ``sweep``, ``mms``.  Exit codes:
0 ok, 1 check failure, 2 positivity abort, 3 solver failure, 4 I/O error,
64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import csvio
from . import diagnostics as dg
from . import envara
from . import evolution as ev
from . import experiments as ex
from .config import ConfigError, RunConfig, load_config, parse_config

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_POSITIVITY = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_USAGE = 64

CAUSE_EXIT = {"completed": EXIT_OK, "positivity-abort": EXIT_POSITIVITY,
              "solver-failure": EXIT_SOLVER}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="seed for randomized sampling")
    common.add_argument("--threads", type=int, help="worker threads for sweeps (default 1)")

    ap = _Parser(prog="brinkfourier", parents=[common],
                 description="Brinkman-Fourier ideal-gas simulations and checks")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="run one simulation")
    dc = sub.add_parser("derive-check", parents=[common], help="thermodynamic identity suite")
    dc.add_argument("--self-test-negative", action="store_true",
                    help="add a corrupted model the suite must reject")
    sw = sub.add_parser("sweep", parents=[common], help="limit sweep over one parameter")
    sw.add_argument("--axis", required=True, choices=ex.AXES)
    sw.add_argument("--values", required=True, type=float, nargs="+",
                    help="strictly decreasing; mesh values are 1/n")
    sw.add_argument("--norm", default="L2", choices=ex.NORMS)
    mm = sub.add_parser("mms", parents=[common], help="manufactured-solution verification")
    mm.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    mm.add_argument("--kind", default="static", choices=sorted(ex.MMS_KINDS))
    return ap


# -- helpers -----------------------------------------------------------------
def _load(args) -> RunConfig:
    path = getattr(args, "config", None)
    cfg = parse_config("") if path is None else load_config(path)
    return cfg


def _out_dir(args, cfg: RunConfig) -> str:
    out = getattr(args, "out", None) or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out!r} is not writable")
    return out


def _print_table(columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    def fmt(v):
        if isinstance(v, bool):
            return "pass" if v else "FAIL"
        return f"{v:.4g}" if isinstance(v, float) else csvio.format_value(v)

    cells = [[fmt(v) for v in r] for r in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    for r in cells:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)))


class CSVSnapshots:
    """Sink writing ``snap_<step>.csv`` files with cell centers and fields."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.written: list[int] = []

    def on_record(self, rec) -> None:
        pass

    def on_snapshot(self, step: int, state: ev.State) -> None:
        if step in self.written:
            return
        g = state.grid
        axes = ["x", "y"][: g.dim]
        cols = axes + ["rho", "theta"] + [f"u_{a}" for a in axes]
        data = [c.ravel() for c in g.coords()] + [state.rho.ravel(), state.theta.ravel()]
        data += [uc.ravel() for uc in state.u]
        rows = np.column_stack(data).tolist()
        csvio.write_table(os.path.join(self.out_dir, f"snap_{step}.csv"), cols, rows)
        self.written.append(step)


def _run_summary_items(r: ev.RunSummary, cfg: RunConfig, code: int, threads: int):
    recs = r.records
    r0 = recs[0]
    incs = [(b.entropy - a.entropy) / abs(b.entropy) if b.entropy else 0.0
            for a, b in zip(recs, recs[1:])]
    return [
        ("cause", r.cause),
        ("exit_code", code),
        ("steps", r.steps),
        ("t_final", r.t_final),
        ("dt", r.dt),
        ("dt_halvings", r.dt_halvings),
        ("abort_step", r.abort_step),
        ("abort_cell", r.abort_cell),
        ("message", r.message),
        ("picard_warnings", r.picard_warnings),
        ("mass_drift", max(abs(q.mass - r0.mass) for q in recs) / abs(r0.mass)),
        ("energy_residual_max", max(abs(q.energy_residual) for q in recs)),
        ("brinkman_residual_max", max(q.brinkman_residual for q in recs)),
        ("sigma_min", min(q.sigma_min for q in recs)),
        ("entropy_min_increment", min(incs) if incs else 0.0),
        ("theta_min", min(q.theta_min for q in recs)),
        ("initial", cfg.initial_label),
        ("dim", cfg.grid.dim),
        ("n", cfg.grid.n),
        ("seed", cfg.seed),
        ("threads", threads),
        ("diagnostics_columns", " ".join(dg.DiagnosticsRecord.columns())),
    ]


# -- commands ----------------------------------------------------------------
def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    snaps = CSVSnapshots(out)
    every = cfg.snapshot_every
    initial = cfg.scenario().initial_state()
    snaps.on_snapshot(0, initial)
    r = ev.run(initial, cfg.time, cfg.params, sinks=[snaps], snapshot_every=every)
    snaps.on_snapshot(r.steps, r.final_state)
    csvio.write_table(os.path.join(out, "diagnostics.csv"), dg.DiagnosticsRecord.columns(),
                      [q.as_row() for q in r.records])
    code = CAUSE_EXIT[r.cause]
    csvio.write_key_values(os.path.join(out, "summary.csv"),
                           _run_summary_items(r, cfg, code, getattr(args, "threads", 1)))
    print(f"{r.cause}: {r.steps} steps to t={r.t_final:.6g}" + (f" ({r.message})" if r.message else ""))
    return code


def cmd_derive_check(args, cfg: RunConfig) -> int:
    p = envara.cst.ModelParams.ideal()
    models = [envara.ideal_gas_model(p), envara.ideal_gas_model(p, analytic=False),
              envara.van_der_waals_model(p), envara.polytropic_model(p)]
    if getattr(args, "self_test_negative", False):
        models.append(envara.corrupted_model(p))
    rows = envara.identity_suite(models, p, seed=cfg.seed)
    _print_table(envara.IdentityCheck.columns(), [r.as_row() for r in rows])
    if getattr(args, "out", None):
        out = _out_dir(args, cfg)
        csvio.write_table(os.path.join(out, "derive_check.csv"), envara.IdentityCheck.columns(),
                          [r.as_row() for r in rows])
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} identities passed")
    return EXIT_OK if not failed else EXIT_CHECK


def cmd_sweep(args, cfg: RunConfig) -> int:
    try:
        spec = ex.SweepSpec(args.axis, tuple(args.values), cfg.scenario(), args.norm)
    except ValueError as exc:
        raise UsageError(f"sweep: {exc}") from None
    out = _out_dir(args, cfg)
    res = ex.run_sweep(spec, threads=getattr(args, "threads", 1))
    table, summary = ex.write_sweep(res, out)
    _print_table(ex.SweepRow.columns(), [r.as_row() for r in res.rows])
    print(f"wrote {table} and {summary}")
    return EXIT_OK if res.all_ok else EXIT_CHECK


def cmd_mms(args, cfg: RunConfig) -> int:
    res = sorted(set(args.resolutions))
    if len(res) < 2 or res != list(args.resolutions):
        raise UsageError("mms: resolutions must be at least two increasing sizes")
    if min(res) < 3:
        raise UsageError("mms: resolutions must be >= 3")
    rows = ex.run_mms(res, args.kind, cfg.params, cfg.time.t_end or 1.0,
                      threads=getattr(args, "threads", 1))
    _print_table(ex.MMSRow.columns(), [r.as_row() for r in rows])
    if getattr(args, "out", None) or getattr(args, "config", None):
        out = _out_dir(args, cfg)
        csvio.write_table(os.path.join(out, f"mms_{args.kind}.csv"), ex.MMSRow.columns(),
                          [r.as_row() for r in rows])
    return EXIT_OK if ex.mms_passed(rows, args.kind) else EXIT_CHECK


COMMANDS = {"simulate": cmd_simulate, "derive-check": cmd_derive_check,
            "sweep": cmd_sweep, "mms": cmd_mms}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        threads = getattr(args, "threads", 1)
        if threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = _load(args)
        if getattr(args, "seed", None) is not None:
            if not 0 <= args.seed < 2**64:
                raise UsageError("--seed must lie in [0, 2**64)")
            cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
