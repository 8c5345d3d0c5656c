"""Command line runner: bosepair SUBCOMMAND --config PATH [--out DIR] [--seed INT] [--verbose]."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import checks as C
from . import error_norms as E
from . import fock as F
from . import grid as G
from . import hartree as H
from . import kernels as K
from . import pair_kernel as P
from . import reduction as R
from .config import RunConfig
from .errors import BosepairError, VerificationError

log = logging.getLogger("bosepair")

SUBCOMMANDS = ("hartree", "pairk", "diagnose", "errors", "oracle", "endtoend", "calibrate")
STAGES = {"hartree": 1, "pairk": 2, "diagnose": 3, "errors": 4, "endtoend": 5}
DRIFT_TOL = 1e-8
ENV_OUT = "BOSEPAIR_OUT"


def csv_columns():
    schema = json.loads(resources.files("bosepair").joinpath("data/run_csv_schema.json").read_text())
    return [c["name"] for c in schema["columns"]]


@dataclass
class RunReport:
    config: RunConfig
    command: str
    columns: dict = field(default_factory=dict)  # name -> per-node array (NaN = not computed)
    summary: dict = field(default_factory=dict)
    constants_doc: dict | None = None
    status: str = "ok"


def _constants(cfg):
    if cfg.constants:
        return E.load_constants(cfg.constants)
    return E.load_constants()


def run_pipeline(cfg: RunConfig, command="endtoend", report=None):
    """hartree -> picard -> diagnostics -> error norms -> (oracle end-to-end check).

    Stops after the stage named by command.  A partially filled report is
    kept in the report argument if a stage raises.
    """
    t_start = time.perf_counter()
    stage = STAGES[command]
    rep = report if report is not None else RunReport(cfg, command)
    rep.config, rep.command = cfg, command
    grid, v = G.build_domain(cfg.grid["dim"], int(cfg.grid["M"]), float(cfg.grid["L"]),
                             G.PotentialSpec(**cfg.potential))
    phi0 = H.initial_datum(grid, cfg.initial)
    dt = float(cfg.time["dt"])
    tr = H.hartree_evolve(grid, phi0, v, dt, cfg.n_steps)
    cols = rep.columns
    cols["t"] = tr.t
    cols["mass"] = tr.mass
    cols["energy"] = tr.energy
    rep.summary["hartree"] = {
        "steps": cfg.n_steps,
        "mass_drift": float(np.max(np.abs(tr.mass - tr.mass[0]))),
        "energy_drift": float(np.max(np.abs(tr.energy - tr.energy[0]))),
    }
    if stage >= 2:
        gm = P.build_g_m(grid, tr.phi, v)
        pair = P.picard_solve(grid, tr.t, gm, tol=float(cfg.picard["tol"]),
                              max_iter=int(cfg.picard["max_iter"]))
        hist = np.asarray(pair.history)
        ratios = hist[1:] / np.where(hist[:-1] > 0, hist[:-1], 1.0)
        cols["k_norm"] = K.hs_norm(pair.k, grid.weight)
        rep.summary["picard"] = {
            "converged": pair.converged,
            "iterations": pair.iterations,
            "history": [float(x) for x in hist],
            "max_ratio": float(np.max(ratios)) if len(ratios) else None,
            "sup_k_norm": float(np.max(cols["k_norm"])),
            "sup_m_norm": float(np.max(K.hs_norm(gm.m, grid.weight))),
        }
        if not pair.converged:
            rep.status = "picard_not_converged"
    if stage >= 3:
        diag = R.diagnostics(grid, tr.phi, v, pair, gm)
        cols.update(chi0=diag.chi0, chi1=diag.chi1, trace_d_imag=diag.trace_d_imag,
                    residual=diag.residual, astar_norm=diag.astar_norm)
        rep.summary["diagnostics"] = {
            "max_residual": float(np.max(diag.residual)),
            "max_astar_norm": float(np.max(diag.astar_norm)),
            "max_trace_d_imag": float(np.max(np.abs(diag.trace_d_imag))),
            "trace_imag_ok": diag.trace_imag_ok(),
        }
    if stage >= 4:
        consts, doc = _constants(cfg)
        rep.constants_doc = doc
        f, g = E.error_series(grid, pair, tr.phi, v, consts)
        cols.update(f=f, g=g, bound=E.error_bound(tr.t, f, g, cfg.N))
        rep.summary["errors"] = {"N": cfg.N, "final_bound": float(cols["bound"][-1]),
                                 "int_f": float(np.trapezoid(f, tr.t)), "int_g": float(np.trapezoid(g, tr.t))}
    if stage >= 5 and cfg.oracle["enabled"]:
        o = cfg.oracle
        e2e = C.end_to_end_check(grid, v, tr, pair, gm, diag, f, g, N=cfg.N, n_max=int(o["n_max"]),
                                 headroom=int(o["headroom"]), stride=int(o["stride"]))
        lhs = np.full(len(tr.t), np.nan)
        lhs[e2e.nodes] = e2e.lhs
        cols["lhs_if_oracle"] = lhs
        s = e2e.summary()
        s.pop("runtime_s")
        s["passed"] = e2e.passed()
        rep.summary["endtoend"] = s
        if not s["passed"]:
            rep.status = "endtoend_failed"
    rep.summary["wall_time_s"] = time.perf_counter() - t_start
    return rep


def run_oracle(cfg: RunConfig, report=None):
    """Identity suite, calibrated error norms and the vacuum vector identity."""
    t_start = time.perf_counter()
    rep = report if report is not None else RunReport(cfg, "oracle")
    n_max = int(cfg.oracle["n_max"])
    algebra = F.verify_algebra(M_f=2, n_max=max(4, min(n_max, 6)), seed=cfg.seed)
    consts, doc = _constants(cfg)
    rep.constants_doc = doc
    errs = C.error_oracle_check(seeds=[cfg.seed + s for s in C.CHECK_SEEDS], constants=consts)
    vec = C.vector_identity_check(seed=cfg.seed, N=cfg.N)
    rep.summary["oracle"] = {"algebra": algebra, "error_norms": errs, "vector_identity": vec}
    ok = all(r["passed"] for r in algebra) and vec["deviation"] < 1e-10
    ok = ok and all(max(r["g_dev"], r["f_dev"]) < 1e-6 for r in errs)
    rep.status = "ok" if ok else "oracle_failed"
    rep.summary["wall_time_s"] = time.perf_counter() - t_start
    return rep


def run_calibrate(cfg: RunConfig, report=None):
    """Refit the error-norm constants; fail on drift from the stored set."""
    t_start = time.perf_counter()
    rep = report if report is not None else RunReport(cfg, "calibrate")
    entries = C.calibrate()
    stored, _ = _constants(cfg)
    drift = C.constants_drift(entries, stored)
    rep.constants_doc = C.constants_document(entries)
    rep.summary["calibrate"] = {"max_drift": drift, "tolerance": DRIFT_TOL}
    rep.summary["wall_time_s"] = time.perf_counter() - t_start
    if drift > DRIFT_TOL:
        rep.status = "calibration_drift"
        raise VerificationError(f"calibrated constants drift {drift:.3e} from stored values (tol {DRIFT_TOL})")
    return rep


# ------------------------------------------------------------------ output


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def emit_outputs(report: RunReport, out_dir):
    """Write run.csv, summary.json, constants.calib and config.echo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = csv_columns()
    cols = report.columns
    nrows = len(cols["t"]) if "t" in cols else 0
    with open(out / "run.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(names)
        for j in range(nrows):
            wr.writerow([_fmt(cols[n][j]) if n in cols else "" for n in names])
    summary = {"command": report.command, "status": report.status, "seed": report.config.seed, **report.summary}
    if report.constants_doc is not None:
        summary["constants"] = {c["name"]: c["value"] for c in report.constants_doc["constants"]}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    if report.constants_doc is not None:
        text = json.dumps(report.constants_doc, indent=2, sort_keys=True) + "\n"
        calib = {"sha256": hashlib.sha256(text.encode()).hexdigest(),
                 "source": report.config.constants or "packaged data/error_constants.json",
                 "document": report.constants_doc}
        (out / "constants.calib").write_text(json.dumps(calib, indent=2, sort_keys=True) + "\n")
    (out / "config.echo").write_text(report.config.dump())
    return out


# ------------------------------------------------------------------ entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="bosepair", description="Hartree + pair-kernel pipeline and Fock-space checks")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--out", help=f"output directory (overrides ${ENV_OUT} and the config)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report = None
    out_dir = None
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = cfg.resolve_output(args.out, os.environ.get(ENV_OUT))
        cfg.output_dir = str(out_dir)
        if args.command == "endtoend" and not cfg.oracle["enabled"]:
            cfg.oracle["enabled"] = True
            cfg.validate()
        report = RunReport(cfg, args.command)
        if args.command == "oracle":
            run_oracle(cfg, report)
        elif args.command == "calibrate":
            run_calibrate(cfg, report)
        else:
            run_pipeline(cfg, args.command, report)
    except BosepairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if report is not None:
            report.status = f"error: {exc}"
            emit_outputs(report, out_dir)
        return 2
    emit_outputs(report, out_dir)
    log.info("wrote %s", out_dir)
    if report.status != "ok":
        print(f"status: {report.status}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
