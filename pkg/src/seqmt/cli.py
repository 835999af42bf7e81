"""Command-line front end.

Commands::

    seqmt step-values --J 500 --alpha 0.05 --gamma1 0.1
    seqmt run --config run.json --trace
    seqmt simulate --config scenario.json --reps 2000 --out results/
    seqmt compare --config scenario.json --out results/

Exit codes: 0 success, 1 invalid input, 2 runtime failure or guard trip.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .critical_values import CriticalLadder, RejectiveLadder, StandardizedLadder, format_ladder_table
from .fixed_baseline import calibrate_fixed_N, match_both_rates
from .procedures import ArraySource, Mode, ProcedureConfig, SourceExhausted, decisions_to_csv, run_procedure
from .simulation import (
    EquicorrelatedSource,
    ErrorSpec,
    ScenarioConfig,
    build_procedure,
    format_report,
    monte_carlo,
    report_rows_csv,
    savings,
)
from .statistics import (
    GaussianLLRStatistic,
    PrecomputedStatistic,
    SimpleLLR,
    SimpleLLRStatistic,
    TGlrStatistic,
)
from .step_values import (
    stepdown_fdp_values,
    stepdown_kfwe_values,
    stepup_fdp_values,
    stepup_kfwe_values,
)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    pass


# output helpers -------------------------------------------------------------


def _emit(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _echo(args, resolved: dict) -> None:
    text = json.dumps(resolved, indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.out:
        _emit(args, "config.json", text)
    else:
        sys.stderr.write("# resolved config\n" + text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _load(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


# step-values ----------------------------------------------------------------


def cmd_step_values(args) -> int:
    cfg = _load(args.config)
    J = args.J if args.J is not None else cfg.get("J")
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha", 0.05)
    gamma1 = args.gamma1 if args.gamma1 is not None else cfg.get("gamma1")
    k1 = args.k1 if args.k1 is not None else cfg.get("k1")
    if J is None:
        raise ConfigError("J is required")
    if (gamma1 is None) == (k1 is None):
        raise ConfigError("give exactly one of gamma1 (FDP) or k1 (k-FWER)")
    if gamma1 is not None:
        down = stepdown_fdp_values(alpha, None, gamma1, None, J=J).alphas
        up = stepup_fdp_values(alpha, None, gamma1, None, J=J).alphas
    else:
        down = stepdown_kfwe_values(alpha, None, k1, None, J).alphas
        up = stepup_kfwe_values(alpha, None, k1, None, J=J).alphas
    _echo(args, dict(command="step-values", J=J, alpha=alpha, gamma1=gamma1, k1=k1))
    lines = ["j\tstepdown\tstepup"] + [f"{j + 1}\t{d:.10g}\t{u:.10g}" for j, (d, u) in enumerate(zip(down, up))]
    _emit(args, "step_values.tsv", "\n".join(lines) + "\n")
    return EXIT_OK


# run ------------------------------------------------------------------------

_RUN_DEFAULTS = dict(mode="stepdown", rejective=False, horizon=None, max_stage_guard=1_000_000, tie_seed=0)


def _statistic(spec: dict):
    kind = spec.get("kind", "precomputed")
    if kind == "precomputed":
        return PrecomputedStatistic()
    if kind == "gaussian":
        return GaussianLLRStatistic(spec.get("sigma", 1.0), spec.get("theta0", 0.0), spec.get("theta1", 1.0))
    if kind == "tglr":
        return TGlrStatistic(spec["delta"])
    if kind == "simple":
        h = {float(k): v for k, v in spec["h"].items()}
        g = {float(k): v for k, v in spec["g"].items()}
        return SimpleLLRStatistic(SimpleLLR(h, g))
    raise ConfigError(f"unknown statistic kind {kind!r}")


def cmd_run(args) -> int:
    cfg = _load(args.config)
    proc = {**_RUN_DEFAULTS, **cfg.get("procedure", {})}
    if args.seed is not None:
        proc["tie_seed"] = args.seed
    stat_spec = cfg.get("statistic", {"kind": "precomputed"})
    mode = Mode(proc["mode"])
    if "streams" in cfg:
        streams = cfg["streams"]
        if not streams:
            raise ConfigError("stream list is empty")
        source = ArraySource(streams)
        J = source.J
        scenario = None
    elif "scenario" in cfg:
        scenario = _scenario(cfg, args)
        J = scenario.J
        source = EquicorrelatedSource(
            scenario.theta, scenario.sigma, scenario.correlation, np.random.default_rng(scenario.seed)
        )
    else:
        raise ConfigError("run config needs 'streams' (recorded data) or 'scenario' (simulated data)")

    if "ladder" in cfg:
        lad = cfg["ladder"]
        if proc["rejective"]:
            ladder = StandardizedLadder(None, lad["B"])
        else:
            if "A" not in lad:
                raise ConfigError("non-rejective procedures need ladder.A")
            ladder = StandardizedLadder.common(CriticalLadder(lad["A"], lad["B"]))
        stat = _statistic(stat_spec)
    elif scenario is not None:
        built, stat = build_procedure(scenario, mode, proc["rejective"], proc["horizon"])
        ladder = built.ladder
    else:
        raise ConfigError("recorded streams need an explicit 'ladder'")
    if proc["rejective"] and proc["horizon"] is None:
        raise ConfigError("rejective procedures need procedure.horizon")
    config = ProcedureConfig(
        mode, ladder, rejective=proc["rejective"], horizon=proc["horizon"],
        max_stage_guard=int(proc["max_stage_guard"]), tie_seed=proc["tie_seed"], trace=args.trace,
    )
    resolved = dict(command="run", procedure=proc, statistic=stat_spec, J=J)
    if scenario is not None:
        resolved["scenario"] = scenario.to_dict()
    else:
        resolved["streams"] = cfg["streams"]
        resolved["ladder"] = cfg["ladder"]
    _echo(args, resolved)
    state = run_procedure(source, stat, config, J)
    if args.trace:
        sys.stderr.write(format_ladder_table(ladder_for_table(ladder)))
        for t in state.trace:
            sys.stderr.write(json.dumps(t) + "\n")
    _emit(args, "decisions.csv", decisions_to_csv([(0, state)]))
    if state.status == "guard":
        sys.stderr.write(f"guard tripped at n={state.n} with {len(state.active)} active streams\n")
        return EXIT_RUNTIME
    return EXIT_OK


def ladder_for_table(ladder: StandardizedLadder):
    if ladder.a is None:
        return RejectiveLadder(ladder.b)
    return CriticalLadder(ladder.a, ladder.b)


# simulate / compare ---------------------------------------------------------


def _scenario(cfg: dict, args) -> ScenarioConfig:
    sc = dict(cfg.get("scenario", {}))
    if args.seed is not None:
        sc["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        sc["reps"] = args.reps
    sc["error"] = ErrorSpec(**sc.get("error", {}))
    try:
        return ScenarioConfig(**sc)
    except TypeError as exc:
        raise ConfigError(f"bad scenario: {exc}") from exc


_DEFAULT_PROCS = [dict(mode="stepdown"), dict(mode="stepup")]


def _procedures(cfg, scenario):
    out = []
    for p in cfg.get("procedures", _DEFAULT_PROCS):
        p = dict(dict(rejective=False, horizon=None, max_stage_guard=100_000), **p)
        if p["rejective"] and p["horizon"] is None:
            raise ConfigError("rejective procedures need a horizon")
        config, stat = build_procedure(scenario, p["mode"], p["rejective"], p["horizon"], int(p["max_stage_guard"]))
        name = p.get("name") or (("Seq_D" if Mode(p["mode"]) is Mode.STEPDOWN else "Seq_U") + ("_rej" if p["rejective"] else ""))
        out.append((name, p, config, stat))
    return out


def _simulate(cfg, args):
    scenario = _scenario(cfg, args)
    procs = _procedures(cfg, scenario)
    reports = [monte_carlo(scenario, c, s, name=n, workers=args.threads) for n, _, c, s in procs]
    return scenario, procs, reports


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    scenario, procs, reports = _simulate(cfg, args)
    _echo(args, dict(command="simulate", scenario=scenario.to_dict(), procedures=[p for _, p, _, _ in procs]))
    rows = [r.row() for r in reports]
    _emit(args, "report.csv", report_rows_csv(rows))
    _emit(args, "report.txt", format_report(rows))
    return _guard_status(reports)


def _guard_status(reports) -> int:
    trips = sum(r.guard_trips for r in reports)
    if trips:
        sys.stderr.write(f"{trips} replicate(s) tripped the stage guard\n")
        return EXIT_RUNTIME
    return EXIT_OK


_BASELINE_DEFAULTS = dict(enabled=True, reps=2000, seed=2024, N_range=[1, 500], prime=None)


def cmd_compare(args) -> int:
    cfg = _load(args.config)
    base = {**_BASELINE_DEFAULTS, **cfg.get("baseline", {})}
    scenario, procs, reports = _simulate(cfg, args)
    _echo(args, dict(command="compare", scenario=scenario.to_dict(), procedures=[p for _, p, _, _ in procs], baseline=base))
    rows = [r.row() for r in reports]
    if base["enabled"]:
        best = min(reports, key=lambda r: r.E_N)
        target = best.typeII
        fixed = {}
        for _, _, config, _ in procs:
            kind = config.mode.value
            if kind in fixed:
                continue
            alphas = scenario.error.step_values(scenario.J, kind).alphas
            fixed[kind] = calibrate_fixed_N(scenario, kind, alphas, target, reps=base["reps"], seed=base["seed"], N_range=tuple(base["N_range"]))
        for row, (_, _, config, _) in zip(rows, procs):
            row["savings"] = savings(row["E_N"], fixed[config.mode.value].N)
        rows += [f.row(scenario.name) for f in fixed.values()]
        if base["prime"]:
            pr = base["prime"]
            for rep, (_, _, config, _) in zip(reports, procs):
                cal = match_both_rates(
                    scenario, config.mode.value, (rep.typeI, rep.typeII), pr["alpha_grid"], tuple(pr["N_range"]),
                    reps=base["reps"], seed=base["seed"],
                )
                row = cal.row(scenario.name)
                row["procedure"] += f" (alpha={cal.nominal_alpha:g})"
                rows.append(row)
    _emit(args, "report.csv", report_rows_csv(rows))
    _emit(args, "report.txt", format_report(rows))
    return _guard_status(reports)


# entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for simulation")
    common.add_argument("--trace", action="store_true", help="print per-stage trace to stderr")
    common.add_argument("--out", help="output directory (default: standard output)")

    p = argparse.ArgumentParser(prog="seqmt", description="Sequential stepdown and stepup multiple testing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sv = sub.add_parser("step-values", parents=[common], help="tabulate stepdown and stepup step values")
    sv.add_argument("--J", type=int)
    sv.add_argument("--alpha", type=float)
    sv.add_argument("--gamma1", type=float)
    sv.add_argument("--k1", type=int)
    sv.set_defaults(func=cmd_step_values)
    sub.add_parser("run", parents=[common], help="run one ensemble and print its decision log").set_defaults(func=cmd_run)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo operating characteristics").set_defaults(func=cmd_simulate)
    sub.add_parser("compare", parents=[common], help="sequential vs fixed-sample comparison").set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.threads < 1:
        sys.stderr.write("error: --threads must be >= 1\n")
        return EXIT_INVALID
    try:
        return args.func(args)
    except (SourceExhausted, RuntimeError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        sys.stderr.write(f"error: {msg}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
