"""Command line entry point: run campaigns, serve sessions, validate math.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import harness
from .config import ExperimentConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="migfilter",
                description="Mode-insertion-gradient action filter toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    run.add_argument("--config", help="config file (bundled name or path)")
    run.add_argument("--system", choices=cfgmod.SYSTEMS)
    run.add_argument("--user", help="user preset (noise, low_skill, skilled)")
    run.add_argument("--mode", choices=cfgmod.MODES)
    run.add_argument("--trials", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--out", help="output directory for CSV artifacts")

    serve = sub.add_parser("serve", help="start the live session server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--record-dir", default=None,
                       help="write per-trial CSVs here")

    sub.add_parser("validate", help="run the numerical oracle suite")
    return p


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            bundled = cfgmod.bundled_config_path(args.config)
            if bundled.exists():
                path = bundled
            else:
                raise FileNotFoundError(f"config not found: {args.config}")
        cfg = cfgmod.load(path)
    else:
        cfg = ExperimentConfig()
    overrides = {k: getattr(args, k) for k in
                 ("system", "user", "mode", "trials", "duration", "seed", "jobs")
                 if getattr(args, k, None) is not None}
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = resolve_config(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = harness.monte_carlo(cfg, out_dir=cfg.out_dir)
    except Exception as exc:  # campaign machinery failure, not trial physics
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    s = result.summary()
    print(f"system={cfg.system} user={cfg.user} mode={cfg.mode} "
          f"trials={cfg.trials} seed={cfg.seed}")
    print(f"success rate      : {s['success_rate'] * 100:.1f}%")
    print(f"mean PRA          : {s['mean_pra'] * 100:.1f}%")
    print(f"mean balance time : {s['mean_balance_time']:.2f} s")
    print(f"mean RMS error    : {s['mean_rms_error']:.3f}")
    if cfg.system == "slip":
        print(f"fall rate         : {s['fall_rate'] * 100:.1f}%")
        print(f"mean fwd speed    : {s['mean_forward_speed']:.3f}")
    print(f"artifacts in      : {cfg.out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import service

    try:
        service.serve(host=args.host, port=args.port, record_dir=args.record_dir)
    except OSError as exc:  # direct bind failure
        print(f"serve failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SystemExit as exc:  # uvicorn signals startup failure this way
        if exc.code not in (0, None):
            print("serve failed to start (port busy?)", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate(_args) -> int:
    checks = validation_checks()
    failed = 0
    for name, fn in checks:
        try:
            detail = fn()
            print(f"PASS {name}: {detail}")
        except AssertionError as exc:
            failed += 1
            print(f"FAIL {name}: {exc}")
    if failed:
        print(f"{failed}/{len(checks)} checks failed")
        return EXIT_VALIDATION
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


def validation_checks():
    """Fast numerical oracles: gradient, insertion, and energy checks."""
    from . import engine, mig
    from .dynamics import FLIGHT, cart_pendulum, cart_pendulum_energy, slip, step
    from .objective import QuadraticObjective, adjoint_backward, total_cost

    cart = cart_pendulum()
    hopper = slip()
    cart_obj = QuadraticObjective(Q=np.diag([100.0, 10.0, 2.0, 4.0]),
                                  R=np.zeros((1, 1)), x_d=np.zeros(4),
                                  angle_indices=(0,))
    slip_obj = QuadraticObjective(Q=np.diag([0.0, 0.0, 60.0, 2.0, 0.0]),
                                  R=np.zeros((2, 2)),
                                  x_d=np.array([0, 0, 1.25, 0, 0.0]))

    def adjoint_check():
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(10):
            x0 = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-2, 2),
                           rng.uniform(-1, 1), rng.uniform(-2, 2)])
            smooth = QuadraticObjective(Q=cart_obj.Q, R=cart_obj.R, x_d=np.zeros(4))
            traj = engine.rollout(cart, x0, np.zeros((500, 1)), 1e-3)
            rho0 = adjoint_backward(smooth, cart, traj).costates[0]
            eps = 1e-6
            fd = np.zeros(4)
            for i in range(4):
                dx = np.zeros(4)
                dx[i] = eps
                fd[i] = (total_cost(smooth, engine.rollout(cart, x0 + dx, np.zeros((500, 1)), 1e-3))
                         - total_cost(smooth, engine.rollout(cart, x0 - dx, np.zeros((500, 1)), 1e-3))) / (2 * eps)
            worst = max(worst, float(np.linalg.norm(fd - rho0) / np.linalg.norm(rho0)))
        assert worst < 1e-3, f"adjoint gradient relative error {worst:.2e}"
        return f"worst relative error {worst:.2e}"

    def mig_fd_check():
        rng = np.random.default_rng(1)
        cfg = mig.FilterConfig(t_s=0.01, horizon=0.5)
        worst = 0.0
        for _ in range(20):
            x0 = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-2, 2),
                           rng.uniform(-1, 1), rng.uniform(-2, 2)])
            u = rng.uniform(-2, 2, 1)
            nom = mig.nominal_with_costates(x0, cfg, cart, cart_obj)
            val = mig.mig_integral(x0, u, cfg, cart, cart_obj, nominal=nom)
            u2 = mig.build_u2(u, cfg.t_s, cfg.horizon, cfg.dt)
            Jp = total_cost(cart_obj, engine.rollout(cart, x0, u2, cfg.dt))
            Jm = total_cost(cart_obj, engine.rollout(cart, x0, -u2, cfg.dt))
            dJ = 0.5 * (Jp - Jm)
            worst = max(worst, abs(dJ - val) / max(abs(val), abs(dJ), 1e-12))
        assert worst < 1e-2, f"insertion-gradient FD error {worst:.2e}"
        return f"worst relative error {worst:.2e}"

    def energy_check():
        x = np.array([3.0, 0.1, 0.0, 0.0])
        e0 = cart_pendulum_energy(x)
        scale = abs(e0) + 9.81
        worst = 0.0
        for _ in range(3000):
            x, _, _ = step(cart, x, np.zeros(1), 0.01)
            worst = max(worst, abs(cart_pendulum_energy(x) - e0) / scale)
        assert worst < 1e-6, f"cart energy drift {worst:.2e}"
        return f"drift {worst:.2e} over 30 s"

    def slip_mig_zero_check():
        cfg = mig.FilterConfig(t_s=0.01, horizon=1.4)
        val = mig.mig_integral(np.array([0, 0, 1.05, 0, 0.0]), np.zeros(2),
                               cfg, hopper, slip_obj, mode=FLIGHT)
        assert abs(val) <= 1e-12, f"null action integral {val:.2e}"
        return f"null-action integral {val:.1e}"

    return [
        ("adjoint gradient (cart)", adjoint_check),
        ("insertion gradient FD (cart)", mig_fd_check),
        ("energy conservation (cart)", energy_check),
        ("null action identity (slip)", slip_mig_zero_check),
    ]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command == "run":
        return cmd_run(args)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "validate":
        return cmd_validate(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
