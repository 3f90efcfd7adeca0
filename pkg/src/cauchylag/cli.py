"""Command line entry point.

``cauchylag run CONFIG``            simulate and write diagnostics / snapshots
``cauchylag check-weights CONFIG``  report class properties of the weights
``cauchylag radius CONFIG``         cubic radius bound from estimator constants
``cauchylag oracle CONFIG --t T``   reference trajectories of the grid labels
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft
from threadpoolctl import threadpool_limits

from .config import ConfigError, SimulationConfig, load_config
from .oracle import preset_trajectories
from .presets import make_preset_fields
from .snapshot import write_snapshot
from .stepper import RunFailure, SimState, StepReport, run_until
from .weights import RadiusError, check_class_properties, denjoy_carleman, radius_from_cubic

__all__ = ["main", "run", "csv_header", "format_row", "make_preset", "oracle_trajectories"]

log = logging.getLogger("cauchylag")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def csv_header(S: int) -> str:
    base = "step,time,dt,radius_est,cauchy_res,jacobian_res,boundary_res,energy,energy_drift"
    return base + "".join(f",coeff_norm_{s}" for s in range(1, S + 1))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_row(rep: StepReport) -> str:
    vals = [
        str(rep.step),
        _fmt(rep.time),
        _fmt(rep.dt_taken),
        _fmt(rep.radius_estimate),
        _fmt(rep.cauchy),
        _fmt(rep.jacobian),
        _fmt(rep.boundary),
        _fmt(rep.energy),
        _fmt(rep.energy_drift),
    ]
    vals += [_fmt(n) for n in rep.coefficient_norms]
    return ",".join(vals)


def make_preset(cfg: SimulationConfig):
    """``(v0, omega0)`` for the configured preset."""
    return make_preset_fields(cfg.preset, cfg.grid(), cfg.preset_params)


def oracle_trajectories(cfg: SimulationConfig, labels, t: float) -> np.ndarray:
    return preset_trajectories(cfg.preset, cfg.lengths, labels, t, cfg.preset_params)


@contextlib.contextmanager
def _workers(n: int):
    with threadpool_limits(limits=n), sfft.set_workers(n):
        yield


def run(cfg: SimulationConfig) -> int:
    out_dir = cfg.output_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        diag_path = os.path.join(out_dir, cfg.diagnostics_file)
        fh = open(diag_path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        log.error("cannot open output: %s", exc)
        return EXIT_IO

    code = EXIT_OK
    with fh:
        fh.write(csv_header(cfg.taylor_order) + "\n")
        fh.flush()
        try:
            if cfg.constants is not None:
                rep = radius_from_cubic(cfg.constants)
                with open(os.path.join(out_dir, "radius_report.json"), "w", encoding="utf-8") as rf:
                    json.dump(dataclasses.asdict(rep), rf, indent=2)
                    rf.write("\n")
        except RadiusError as exc:
            log.error("radius estimate failed: %s", exc)
            code = EXIT_NUMERIC
        except OSError as exc:
            log.error("cannot write radius report: %s", exc)
            return EXIT_IO

        v0, _ = make_preset(cfg)
        state = SimState.initial(v0)

        def snapshot(st: SimState) -> None:
            write_snapshot(os.path.join(out_dir, f"velocity_{st.step_index:06d}.clgf"), st.velocity)

        def on_step(rep: StepReport) -> None:
            fh.write(format_row(rep) + "\n")
            fh.flush()

        def on_state(st: SimState) -> None:
            if cfg.snapshot_every and st.step_index % cfg.snapshot_every == 0:
                snapshot(st)

        try:
            if cfg.snapshot_every:
                snapshot(state)
            with _workers(cfg.workers):
                run_until(
                    state,
                    cfg.t_end,
                    cfg.taylor_order,
                    cfg.cfl_fraction,
                    cfg.weights(),
                    dt_max=cfg.dt_max,
                    gamma=cfg.holder_gamma,
                    residual_tol=cfg.residual_tol,
                    on_step=on_step,
                    on_state=on_state,
                )
        except RunFailure as exc:
            log.error("run stopped: %s", exc)
            if isinstance(exc.__cause__, OSError):
                return EXIT_IO
            return EXIT_NUMERIC
        except OSError as exc:
            log.error("I/O failure: %s", exc)
            return EXIT_IO
    return code


def _cmd_check_weights(cfg: SimulationConfig) -> int:
    W = cfg.weights()
    rep = check_class_properties(W)
    dc = denjoy_carleman(W)
    out = {
        "kind": W.kind.value,
        "kmax": W.kmax,
        **dataclasses.asdict(rep),
        "denjoy_carleman": {"partial_sum": dc.partial_sum, "full_partial_sum": dc.full_partial_sum, "verdict": dc.verdict.value},
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_radius(cfg: SimulationConfig) -> int:
    if cfg.constants is None:
        log.error("estimator.constants are required for the radius command")
        return EXIT_CONFIG
    try:
        rep = radius_from_cubic(cfg.constants)
    except RadiusError as exc:
        log.error("radius estimate failed: %s", exc)
        return EXIT_NUMERIC
    print(json.dumps(dataclasses.asdict(rep), indent=2))
    return EXIT_OK


def _cmd_oracle(cfg: SimulationConfig, t: float) -> int:
    grid = cfg.grid()
    labels = np.moveaxis(grid.positions(), 0, -1).reshape(-1, 3)
    try:
        X = oracle_trajectories(cfg, labels, t)
    except (ValueError, RuntimeError) as exc:
        log.error("oracle failed: %s", exc)
        return EXIT_NUMERIC
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "oracle_positions.csv")
        np.savetxt(path, np.hstack([labels, X]), delimiter=",", fmt="%.17g", header="a_x,a_y,a_z,X_x,X_y,X_z", comments="")
    except OSError as exc:
        log.error("cannot write oracle output: %s", exc)
        return EXIT_IO
    print(path)
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cauchylag", description="Lagrangian time-Taylor Euler solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "check-weights", "radius", "oracle"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--out", help="override output.dir")
        sp.add_argument("--workers", type=int, help="override the thread count")
        if name == "oracle":
            sp.add_argument("--t", type=float, required=True, help="integration time")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    overrides = {}
    if args.out:
        overrides["output_dir"] = args.out
    if args.workers is not None:
        if args.workers < 1:
            log.error("config error: --workers must be >= 1")
            return EXIT_CONFIG
        overrides["workers"] = args.workers
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    if args.command == "run":
        return run(cfg)
    if args.command == "check-weights":
        return _cmd_check_weights(cfg)
    if args.command == "radius":
        return _cmd_radius(cfg)
    return _cmd_oracle(cfg, args.t)


if __name__ == "__main__":
    sys.exit(main())
