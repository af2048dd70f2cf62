"""Command-line entry point.

    gelkit simulate  --n 10000 --cutoff 100 --tmax 3 --grid 0:3:0.05 --out traj.csv
    gelkit reference --model flory --k 2 --tmax 3 --dt 0.01
    gelkit compare   --preset fig1 --t 2.0
    gelkit figure    --preset fig2 --replicas 20 --seed 7 --out fig2.csv
    gelkit selftest

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import reference as ref
from .errors import ConfigError
from .harness import (DEFAULT_GRID, figure_csv, figure_svg, get_preset,
                      giant_particle_report, run_preset)
from .kernel import KernelSpec
from .simulate import (CutoffMode, SimConfig, ensemble_csv, event_log_csv, run,
                       run_ensemble, trajectory_csv)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma-separated list of times."""
    try:
        if ":" in text:
            start, stop, stp = (float(x) for x in text.split(":"))
            if not stp > 0:
                raise ConfigError("grid step must be positive")
            n = int(math.floor((stop - start) / stp + 1e-9))
            return tuple(round(start + k * stp, 10) for k in range(n + 1))
        return tuple(sorted(float(x) for x in text.split(",") if x.strip()))
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None


def _kernel_from_args(args) -> KernelSpec | None:
    if args.kernel is None:
        return None
    d = {"family": args.kernel}
    if args.alpha is not None:
        d["alpha"] = args.alpha
    return KernelSpec.from_dict(d)


def _add_common(p, *, preset=False):
    if preset:
        p.add_argument("--preset", help="fig1 .. fig5")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="start:stop:step or t1,t2,...")
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gelkit", description="Marcus-Lushnikov gelation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the stochastic process")
    _add_common(p)
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--kernel", choices=["multiplicative", "symmetric_alpha", "aldous"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--cutoff", type=float, help="absolute cutoff a")
    cut.add_argument("--cutoff-frac", type=float, help="cutoff as fraction gamma of the mass")
    p.add_argument("--tmax", type=float)
    p.add_argument("--observables", help="comma-separated, e.g. count_at_mass(2),moment(2)")
    p.add_argument("--ensemble-out", help="also write per-time means and SEs here")
    p.add_argument("--event-log", help="write the event log of replica 0 here")
    p.add_argument("--dump-config", action="store_true",
                   help="print the canonical config and exit")

    p = sub.add_parser("reference", help="tabulate reference solutions")
    p.add_argument("--model", choices=["flory", "smoluchowski"], default="flory")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--tmax", type=float, default=3.0)
    p.add_argument("--dt", type=float, default=0.01, help="output spacing / ODE step")
    p.add_argument("--ode", action="store_true", help="solve the truncated ODE system")
    p.add_argument("--kernel", choices=["multiplicative", "symmetric_alpha", "aldous"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--kmax", type=int, default=300)
    p.add_argument("--moments", action="store_true", help="emit t,mass,gel_mass instead")
    p.add_argument("--out")

    p = sub.add_parser("compare", help="Monte Carlo vs reference report")
    _add_common(p, preset=True)
    p.add_argument("--t", help="comma-separated report times")
    p.add_argument("--giant", action="store_true",
                   help="largest-particle report without cutoff instead of a preset")
    p.add_argument("--n", type=int, default=10**4)

    p = sub.add_parser("figure", help="data (or SVG) for a preset figure")
    _add_common(p, preset=True)
    p.add_argument("--format", choices=["csv", "svg"], default="csv")

    p = sub.add_parser("selftest", help="quick internal consistency checks")
    p.add_argument("--seed", type=int, default=7)
    return parser


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config_from_args(args) -> SimConfig:
    if args.config:
        try:
            base = SimConfig.from_json(Path(args.config).read_text()).to_dict()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        base = {"kernel": {"family": "multiplicative"}, "t_max": 3.0,
                "obs_grid": list(DEFAULT_GRID)}
    kernel = _kernel_from_args(args)
    if kernel is not None:
        base["kernel"] = kernel.to_dict()
    if args.n is not None:
        base["n"] = args.n
        base["initial"] = "monodisperse"
    if args.cutoff is not None:
        base["cutoff"] = CutoffMode("absolute", args.cutoff).to_dict()
    if args.cutoff_frac is not None:
        base["cutoff"] = CutoffMode("fraction", args.cutoff_frac).to_dict()
    if args.tmax is not None:
        base["t_max"] = args.tmax
        if not args.config and args.grid is None:
            base["obs_grid"] = [t for t in DEFAULT_GRID if t <= args.tmax]
    if args.grid is not None:
        base["obs_grid"] = list(parse_grid(args.grid))
    if args.seed is not None:
        base["seed"] = args.seed
    if args.replicas is not None:
        base["replicas"] = args.replicas
    if args.observables:
        base["observables"] = [o for o in _split_obs(args.observables)]
    return SimConfig.from_dict(base)


def _split_obs(text: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    if args.dump_config:
        _emit(config.to_json(), args.out)
        return EXIT_OK
    result = run_ensemble(config)
    _emit(trajectory_csv(result.trajectories, config.observables), args.out)
    if args.ensemble_out:
        Path(args.ensemble_out).write_text(ensemble_csv(result))
    if args.event_log:
        Path(args.event_log).write_text(event_log_csv(run(config, 0, record_events=True)))
    return EXIT_OK


def cmd_reference(args) -> int:
    if args.k < 1 or not args.tmax > 0 or not args.dt > 0:
        raise ConfigError("need k >= 1, tmax > 0 and dt > 0")
    lines = []
    if args.ode:
        kernel = _kernel_from_args(args) or KernelSpec.multiplicative()
        step = min(args.dt, 1e-3)
        sol = ref.ode_solve(args.model, kernel, args.kmax, args.tmax, step,
                            save_every=args.dt)
        if args.moments:
            lines.append("t,mass,gel_mass")
            lines += [f"{float(t)!r},{float(m)!r},{float(g)!r}"
                      for t, m, g in zip(sol.times, sol.mass, sol.lost_mass)]
        else:
            if args.k > args.kmax:
                raise ConfigError("k exceeds kmax")
            lines.append("t,k,c")
            lines += [f"{float(t)!r},{args.k},{float(c)!r}"
                      for t, c in zip(sol.times, sol.c[:, args.k - 1])]
    else:
        n = int(math.floor(args.tmax / args.dt + 1e-9))
        ts = [round(i * args.dt, 10) for i in range(n + 1)]
        f = ref.flory_c if args.model == "flory" else ref.smoluchowski_c
        mass = ref.flory_mass if args.model == "flory" else ref.smoluchowski_mass
        if args.moments:
            lines.append("t,mass,gel_mass")
            lines += [f"{t!r},{mass(t)!r},{1.0 - mass(t)!r}" for t in ts]
        else:
            lines.append("t,k,c")
            lines += [f"{t!r},{args.k},{f(t, args.k)!r}" for t in ts]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    replicas = args.replicas or 20
    seed = 0 if args.seed is None else args.seed
    times = parse_grid(args.t) if args.t else None
    if args.giant:
        report = giant_particle_report(args.n, replicas, times or (1.5, 2.0, 3.0), seed)
        _emit(report.format() + "\n", args.out)
        return EXIT_OK
    if not args.preset:
        raise ConfigError("compare needs --preset (or --giant)")
    grid = parse_grid(args.grid) if args.grid else DEFAULT_GRID
    report, _ = run_preset(args.preset, replicas, seed, grid, report_times=times)
    if args.out:
        Path(args.out).write_text(report.to_csv())
    print(report.format())
    return EXIT_OK


def cmd_figure(args) -> int:
    if not args.preset:
        raise ConfigError("figure needs --preset")
    preset = get_preset(args.preset)
    replicas = args.replicas or 20
    seed = 0 if args.seed is None else args.seed
    grid = parse_grid(args.grid) if args.grid else DEFAULT_GRID
    _, result = run_preset(preset, replicas, seed, grid)
    if args.format == "svg":
        text = figure_svg(result, title=f"{preset.name}: n = {preset.n}, a = {preset.a:g}")
    else:
        text = figure_csv(result)
    _emit(text, args.out)
    return EXIT_OK


def selftest(seed: int = 7) -> list[tuple[str, bool, str]]:
    """Fast checks (a few seconds); fig5 and the large ensembles are excluded."""
    checks = []

    def check(name, ok, detail):
        checks.append((name, bool(ok), detail))

    ts = ref.t_star(2.0)
    check("t_star(2)", abs(ts - 0.40638) < 1e-5, f"{ts:.6f}")
    m05 = ref.series_mass("flory", 0.5, 400)
    check("flory mass t=0.5", abs(m05 - 1) < 1e-6, f"{m05:.9f}")
    m2 = ref.series_mass("flory", 2.0, 400)
    check("flory mass t=2", abs(m2 - ts / 2) < 1e-4, f"{m2:.6f}")
    t1 = [round(ref.T1(g), 3) for g in (0.5, 0.8)] + [round(ref.T1(0.33), 2)]
    check("T1 table", t1 == [1.386, 2.012, 1.21], str(t1))
    sol = ref.ode_solve("flory", KernelSpec.multiplicative(), 300, 1.0, 1e-3, save_every=0.5)
    err = float(np.max(np.abs(sol.at(1.0)[:10] - ref.flory_c(1.0, np.arange(1, 11)))))
    check("flory ODE vs explicit", err < 1e-4, f"{err:.2e}")
    cfg = SimConfig(KernelSpec.multiplicative(), 2000, 2.0, (0.5, 2.0), seed=seed,
                    replicas=4, observables=("count_at_mass(2)", "mass_fraction_largest"))
    res = run_ensemble(cfg, workers=1)
    c2 = res.mean["count_at_mass(2)"][0]
    check("MC count_at_mass(2) t=0.5", abs(c2 - ref.flory_c(0.5, 2)) < 0.01, f"{c2:.4f}")
    g = res.mean["mass_fraction_largest"][1]
    check("MC giant fraction t=2", abs(g - (1 - ts / 2)) < 0.1, f"{g:.4f}")
    again = run_ensemble(cfg, workers=1)
    check("determinism", ensemble_csv(res) == ensemble_csv(again), "")
    return checks


def cmd_selftest(args) -> int:
    ok = True
    for name, passed, detail in selftest(args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "simulate": cmd_simulate,
    "reference": cmd_reference,
    "compare": cmd_compare,
    "figure": cmd_figure,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"gelkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        print(f"gelkit: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
