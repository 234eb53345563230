"""Command line entry points: run, reduced, crossval, sweep, validate.

Every command reads one JSON configuration, writes its artifacts under
the output directory, and encodes success in the exit status: 0 only if
no error was raised and no envelope margin came out negative, so CI can
consume runs without parsing logs.  Failures are mirrored as a
machine-readable failure.json.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import diagnostics as diag
from . import reduced_system
from .errors import ConfigInvalid, SwarmPDEError
from .solver_core import run
from .spatial_grid import field_to_binary, field_to_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _json_dump(data, path) -> None:
    Path(path).write_text(
        json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n",
        encoding="utf-8",
    )


def _write_failure(out_dir: Path, kind: str, messages) -> dict:
    payload = {"status": "error", "kind": kind, "messages": list(messages)}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _json_dump(payload, out_dir / "failure.json")
    except OSError:
        pass
    print(json.dumps(payload, sort_keys=True))
    return payload


def _report_hash(report) -> str:
    canonical = json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _manifest(cfg, record, report, tstar_crossed, wall_time) -> dict:
    margins = {
        name: (None if m.skipped else m.margin)
        for name, m in diag.envelope_report(record).items()
    }
    constants = dict(record.constants)
    constants["K0"] = record.K0
    return {
        "config_hash": config_mod.config_hash(cfg),
        "hypothesis_report_hash": _report_hash(report) if report is not None else None,
        "constants": constants,
        "margins": margins,
        "tstar_crossed": bool(tstar_crossed),
        "theta_activations": int(record.theta_activations),
        "wall_time": wall_time,
    }


def _negative_margins(record) -> list:
    bad = []
    for name, m in diag.envelope_report(record).items():
        if not m.skipped and m.margin < 0.0:
            bad.append(f"{name}: margin {m.margin:.3e} at t={m.t_at_min:g}")
    return bad


def _write_snapshots(result, cfg, out_dir: Path) -> None:
    stride = cfg.output.snapshot_stride
    sgrid = result.setup.sgrid
    for idx, s in enumerate(result.samples):
        if idx % stride and idx != len(result.samples) - 1:
            continue
        tag = f"{idx:05d}"
        field_to_csv(s.lambda_rec, sgrid, out_dir / f"biomass_{tag}.csv")
        field_to_binary(s.lambda_rec, sgrid, out_dir / f"biomass_{tag}.bin")
        field_to_csv(s.v, sgrid, out_dir / f"swimmer_{tag}.csv")
        field_to_binary(s.v, sgrid, out_dir / f"swimmer_{tag}.bin")


def cmd_run(cfg, out_dir: Path) -> int:
    t0 = time.monotonic()
    setup, report = config_mod.build_run_setup(cfg)
    result = run(setup)
    wall = time.monotonic() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    record = result.record
    record.to_csv(out_dir / "diagnostics.csv")
    _json_dump(
        _manifest(cfg, record, report, result.tstar_crossed, wall),
        out_dir / "manifest.json",
    )
    _json_dump(record.summary_dict(), out_dir / "summary.json")
    if cfg.output.write_snapshots:
        _write_snapshots(result, cfg, out_dir)
    bad = _negative_margins(record)
    if bad:
        _write_failure(out_dir, "envelope_violation", bad)
        return EXIT_FAIL
    return EXIT_OK


def cmd_reduced(cfg, out_dir: Path) -> int:
    setup, _ = config_mod.build_run_setup(cfg, check_hypotheses=False)
    rspec = reduced_system.reduced_from_model(
        setup.spec, mu_const=cfg.model.mu, m0=cfg.model.m0, tau=cfg.model.tau
    )
    lam0 = setup.agegrid.alpha * np.tensordot(
        setup.agegrid.lam[: setup.agegrid.I], setup.u0, axes=(0, 0)
    )
    result = reduced_system.run_reduced(
        rspec, setup.sgrid, lam0, setup.v0, setup.T, setup.sample_dt,
        fixed_dt=setup.fixed_dt,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "reduced.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,l2_Lambda,l2_v,max_Lambda,max_v\n")
        vol = setup.sgrid.cell_volume
        for s in result.samples:
            l2l = math.sqrt(float(np.sum(s.lam**2)) * vol)
            l2v = math.sqrt(float(np.sum(s.v**2)) * vol)
            fh.write(f"{s.t:.17g},{l2l:.17g},{l2v:.17g},"
                     f"{float(s.lam.max()):.17g},{float(s.v.max()):.17g}\n")
    field_to_csv(result.samples[-1].lam, setup.sgrid, out_dir / "biomass_final.csv")
    field_to_csv(result.samples[-1].v, setup.sgrid, out_dir / "swimmer_final.csv")
    return EXIT_OK


def cmd_crossval(cfg, out_dir: Path) -> int:
    setups = []
    for alpha in (cfg.alpha, cfg.alpha / 2.0):
        level_cfg = dataclasses.replace(cfg, alpha=alpha)
        setup, _ = config_mod.build_run_setup(level_cfg, check_hypotheses=False)
        setups.append(setup)
    rspec = reduced_system.reduced_from_model(
        setups[0].spec, mu_const=cfg.model.mu, m0=cfg.model.m0, tau=cfg.model.tau
    )
    result = reduced_system.cross_validate_setups(setups, rspec)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = result.to_dict()
    payload["tolerance"] = cfg.crossval_tolerance
    payload["passed"] = bool(
        result.rel_l2_Lambda <= cfg.crossval_tolerance
        and result.rel_l2_v <= cfg.crossval_tolerance
    )
    _json_dump(payload, out_dir / "crossval.json")
    return EXIT_OK if payload["passed"] else EXIT_FAIL


def cmd_sweep(cfg, out_dir: Path, levels: int) -> int:
    plan = config_mod.build_sweep_plan(cfg, levels=levels)
    runs = []
    for alpha in plan.alphas:
        level_cfg = config_mod.config_for_level(cfg, plan, alpha)
        setup, _ = config_mod.build_run_setup(level_cfg, check_hypotheses=False)
        result = run(setup)
        residual = 0.0
        catalogue = diag.make_test_functions(
            setup.T, setup.agegrid.a_max, setup.sgrid,
            k_max=cfg.diagnostics.test_k_max,
        )
        for phi in catalogue:
            residual = max(residual, diag.weak_residual(
                result.samples, phi, setup.spec, setup.agegrid, setup.sgrid
            ).residual)
        runs.append((alpha, setup, result, residual))

    fine_cells = runs[-1][1].sgrid.cells
    vol_fine = runs[-1][1].sgrid.cell_volume

    def prolong(values, cells):
        out = values
        for ax, (c_from, c_to) in enumerate(zip(cells, fine_cells)):
            factor, rem = divmod(c_to, c_from)
            if rem:
                raise ConfigInvalid(["sweep: level meshes do not nest"])
            out = np.repeat(out, factor, axis=ax)
        return out

    diffs = []
    times = np.asarray([s.t for s in runs[0][2].samples])
    for (a1, s1, r1, _), (a2, s2, r2, _) in zip(runs, runs[1:]):
        dl = np.zeros(times.size)
        dv = np.zeros(times.size)
        for k, (f1, f2) in enumerate(zip(r1.samples, r2.samples)):
            p1 = prolong(f1.lambda_rec, s1.sgrid.cells)
            p2 = prolong(f2.lambda_rec, s2.sgrid.cells)
            dl[k] = float(np.sum((p1 - p2) ** 2)) * vol_fine
            q1 = prolong(f1.v, s1.sgrid.cells)
            q2 = prolong(f2.v, s2.sgrid.cells)
            dv[k] = float(np.sum((q1 - q2) ** 2)) * vol_fine
        diffs.append((
            math.sqrt(float(np.trapezoid(dl, times))),
            math.sqrt(float(np.trapezoid(dv, times))),
        ))

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("level,alpha,cells,diff_Lambda,diff_v,residual\n")
        for k, (alpha, setup, _, residual) in enumerate(runs):
            d_l, d_v = diffs[k] if k < len(diffs) else (math.nan, math.nan)
            cells = "x".join(str(c) for c in setup.sgrid.cells)
            fh.write(f"{k},{alpha:.17g},{cells},{d_l:.17g},{d_v:.17g},{residual:.17g}\n")

    ratios_l = [b[0] / a[0] if a[0] > 0 else math.nan for a, b in zip(diffs, diffs[1:])]
    ratios_v = [b[1] / a[1] if a[1] > 0 else math.nan for a, b in zip(diffs, diffs[1:])]
    residuals = [r[3] for r in runs]
    res_orders = [
        math.log2(a / b) if a > 0 and b > 0 else math.nan
        for a, b in zip(residuals, residuals[1:])
    ]
    payload = {
        "alphas": list(plan.alphas),
        "diff_Lambda": [d[0] for d in diffs],
        "diff_v": [d[1] for d in diffs],
        "cauchy_ratios_Lambda": ratios_l,
        "cauchy_ratios_v": ratios_v,
        "residuals": residuals,
        "residual_orders": res_orders,
    }
    _json_dump(payload, out_dir / "sweep.json")
    return EXIT_OK


def cmd_validate(cfg, out_dir: Path) -> int:
    spec = config_mod.build_model_spec(cfg)
    report = config_mod.validate_hypotheses(
        spec, R_max=1.0 / cfg.alpha, A_max=cfg.a_max, n_samples=256
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _json_dump(report.to_dict(), out_dir / "hypotheses.json")
    print(json.dumps({"passed": report.all_passed, **report.to_dict()["passed"]},
                     sort_keys=True))
    return EXIT_OK if report.all_passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swarmpde",
        description="age-structured swarmer/swimmer colony simulator",
    )
    parser.add_argument("command",
                        choices=["run", "reduced", "crossval", "sweep", "validate"])
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--levels", type=int, default=3,
                        help="number of refinement levels (sweep)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    out_dir = Path(args.out) if args.out else None
    if out_dir is None:
        # best-effort output location for failure artifacts when the
        # configuration itself does not validate
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if isinstance(raw, dict):
                hint = raw.get("output", {}).get("dir")
                if isinstance(hint, str) and hint:
                    out_dir = Path(hint)
        except (OSError, json.JSONDecodeError):
            pass
    try:
        cfg = config_mod.parse_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if out_dir is None:
            out_dir = Path(cfg.output.dir)
        if args.command == "run":
            return cmd_run(cfg, out_dir)
        if args.command == "reduced":
            return cmd_reduced(cfg, out_dir)
        if args.command == "crossval":
            return cmd_crossval(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.levels)
        return cmd_validate(cfg, out_dir)
    except ConfigInvalid as exc:
        _write_failure(out_dir or Path("."), "config_invalid", exc.messages)
        return EXIT_CONFIG
    except SwarmPDEError as exc:
        _write_failure(out_dir or Path("."), type(exc).__name__, [str(exc)])
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
