"""Command-line front end.

Every subcommand resolves its settings into the config's ``run`` block and
records the result in ``run.json``; feeding that file back with ``--config``
reproduces the data files byte for byte.
"""
from __future__ import annotations

import argparse
import json
import math
import secrets
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments, meanfield, microsim, plots
from .bifurcation import NoHopfError, find_hopf_k, slope_to_c
from .gain import ConfigError, ModelConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

DEFAULT_CONFIG = {
    "n_agents": 1000,
    "gain": {"kind": "linear", "slope": -2.0, "intercept": 3.0},
    "delay": None,
    "horizon": 100.0,
    "sample_dt": 0.1,
}
DEFAULT_DELAY = {"n": 2, "k": 1.0}

# per-subcommand run settings: key -> (type, default)
RUN_KEYS = {
    "simulate": {"m0": (float, 0.5), "replica": (int, 0), "burn_in": (float, 0.0)},
    "meanfield": {"m0": (float, 0.3), "dt": (float, None)},
    "bifurcate": {"reduced": (bool, False)},
    "sweep": {
        "parameter": (str, "k"),
        "values": (list, [0.9, 1.5]),
        "statistic": (str, "cycle_amplitude"),
        "mode": (str, "macro"),
        "replicas": (int, 1),
        "m0": (float, 0.3),
        "threshold": (float, None),
        "transient_fraction": (float, 0.5),
        "burn_in": (float, 0.0),
        "eps": (float, 0.1),
    },
    "absorption": {"n_list": (list, [8, 16, 32, 64]), "replicas": (int, 100), "t_max": (float, 1e4), "m0": (float, 0.5)},
    "chaos": {"h": (int, 2), "replicas": (int, 1000), "m0": (float, 0.5), "init": (str, "bernoulli")},
}

FLAG_TO_KEY = {
    "m0": "m0",
    "burn_in": "burn_in",
    "replicas": "replicas",
    "values": "values",
    "mode": "mode",
    "statistic": "statistic",
    "parameter": "parameter",
    "t_max": "t_max",
    "n_list": "n_list",
}


class OutputError(Exception):
    pass


# ------------------------------------------------------------- parsing

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(data: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    path, text = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = data
    for i, key in enumerate(keys[:-1]):
        nxt = node.get(key)
        if nxt is None:
            nxt = dict(DEFAULT_DELAY) if (i == 0 and key == "delay") else {}
            node[key] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(".".join(keys[: i + 1]), "not an object")
        node = nxt
    node[keys[-1]] = _parse_value(text)


def _check_run(command: str, run: dict) -> dict:
    spec = RUN_KEYS[command]
    extra = sorted(set(run) - set(spec))
    if extra:
        raise ConfigError(f"run.{extra[0]}", f"unknown key for {command}")
    resolved = {}
    for key, (typ, default) in spec.items():
        v = run.get(key, default)
        if v is not None:
            if typ is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if typ is float and not isinstance(v, float) or typ is int and (isinstance(v, bool) or not isinstance(v, int)) \
                    or typ is not float and typ is not int and not isinstance(v, typ):
                raise ConfigError(f"run.{key}", f"expected {typ.__name__}")
        resolved[key] = v
    return resolved


def _csv_list(text: str) -> list:
    return [_parse_value(t.strip()) for t in text.split(",") if t.strip()]


def build_config(args, command: str) -> ModelConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
    else:
        data = json.loads(json.dumps(DEFAULT_CONFIG))
    data.pop("meta", None)
    # a recorded run block only applies to the command that produced it
    run = data.get("run") or {}
    if not isinstance(run, dict):
        raise ConfigError("run", "expected an object")
    if run.get("command", command) != command:
        run = {}
    run.pop("command", None)
    data["run"] = run
    for assignment in args.set or []:
        _apply_override(data, assignment)
    for flag, key in FLAG_TO_KEY.items():
        v = getattr(args, flag, None)
        if v is not None:
            data["run"][key] = _csv_list(v) if key in ("values", "n_list") else v
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data:
        data["seed"] = secrets.randbits(63)
    run = _check_run(command, data["run"])
    run["command"] = command
    data["run"] = run
    return ModelConfig.from_dict(data)


# ------------------------------------------------------------- output

class Output:
    def __init__(self, path, force: bool, plot: bool):
        self.path = None if path is None else Path(path)
        self.plot = plot
        self.files = []
        if self.path is not None:
            if self.path.exists() and not self.path.is_dir():
                raise OutputError(f"--out: {self.path} is not a directory")
            if self.path.exists() and any(self.path.iterdir()) and not force:
                raise OutputError(f"--out: {self.path} is not empty (use --force)")
            self.path.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        if self.path is None:
            return
        (self.path / name).write_text(text)
        self.files.append(name)

    def svg(self, name: str, text_fn):
        if self.plot:
            self.write(name, text_fn())


def _git_commit() -> str | None:
    try:
        res = subprocess.run(
            ["git", "rev-parse", "HEAD"], cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return res.stdout.strip() or None if res.returncode == 0 else None


def _emit(rows: list, fmt: str, table: str | None = None):
    if fmt == "json":
        print(json.dumps(rows, indent=2))
        return
    if fmt == "table" and table is not None:
        print(table)
        return
    if not rows:
        return
    cols = list(rows[0])
    if fmt == "csv":
        print(",".join(cols))
        for r in rows:
            print(",".join(_cell(r[c]) for c in cols))
        return
    cells = [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


# ------------------------------------------------------------ commands

def cmd_simulate(cfg: ModelConfig, out: Output, jobs: int):
    r = cfg.run
    if cfg.delay is None:
        log = microsim.simulate_no_delay(cfg, r["m0"], r["replica"])
    else:
        log = microsim.simulate_delay(cfg, r["m0"], r["replica"], burn_in=r["burn_in"])
    out.write("trajectory.csv", log.to_csv())
    out.write("trajectory.json", log.sidecar_json())
    out.svg("m_vs_t.svg", lambda: plots.line_plot([("m", log.t, log.m)], "magnetization", "t", "m"))
    if log.gamma_n is not None:
        out.svg("phase.svg", lambda: plots.line_plot(
            [("", log.m, log.gamma_n)], "phase projection", "m", f"gamma_{cfg.delay.n}"))
    summary = {"jumps": log.jumps, "proposed": log.proposed, "acceptance_ratio": log.acceptance_ratio,
               "final_m": float(log.m[-1]), "absorbed": log.absorbed, "absorption_time": log.absorption_time}
    return [summary], None, summary


def cmd_meanfield(cfg: ModelConfig, out: Output, jobs: int):
    r = cfg.run
    if cfg.delay is None:
        path = meanfield.solve(cfg.gain, r["m0"], cfg.horizon, dt=r["dt"])
        eq = meanfield.equilibria_no_delay(cfg.gain)
        eq_rows = [{"m": float(s), "class": c, "lead": float(v)} for s, c, v in eq.points]
    else:
        path = meanfield.solve(cfg.gain, r["m0"], cfg.horizon, dt=r["dt"], n=cfg.delay.n, k=cfg.delay.k)
        eq = meanfield.equilibria_delay(cfg.gain, cfg.delay.n, cfg.delay.k)
        eq_rows = [{"m": float(s[0]), "class": c, "lead": float(v)} for s, c, v in eq.points]
    out.write("path.csv", path.to_csv())
    out.svg("m_vs_t.svg", lambda: plots.line_plot([("m", path.times, path.m)], "mean-field magnetization", "t", "m"))
    if cfg.delay is not None:
        out.svg("phase.svg", lambda: plots.line_plot(
            [("", path.m, path.gamma[:, -1])], "phase projection", "m", f"gamma_{cfg.delay.n}"))
    summary = {"equilibria": eq_rows, "degenerate": eq.degenerate, "final_m": float(path.m[-1])}
    if path.m.size >= 200:
        cm = meanfield.cycle_metrics(path)
        summary.update(amplitude=cm.amplitude, period=cm.period, oscillating=cm.oscillating)
    return eq_rows, None, summary


def cmd_bifurcate(cfg: ModelConfig, out: Output, jobs: int):
    if cfg.delay is None:
        raise ConfigError("delay", "bifurcate needs a delay block (delay.n)")
    cfg.gain.require_smooth_at_half()
    c = slope_to_c(cfg.gain.derivative_at_half())
    if c >= 0:
        raise ConfigError("gain", "a Hopf point at x* needs phi decreasing at 1/2")
    rep = find_hopf_k(c, cfg.delay.n, reduced=cfg.run["reduced"])
    out.write("hopf.json", json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    rows = [{"j": j, "D_j": float(v)} for j, v in enumerate(rep.D, start=1)]
    summary = {"k_star": rep.k_star, "omega": rep.omega, "ch1": rep.ch1_ok, "ch2": rep.ch2_ok}
    return rows, rep.table(), summary


def _fmt_k(k: float) -> str:
    return format(k, ".10g")


def cmd_sweep(cfg: ModelConfig, out: Output, jobs: int):
    r = cfg.run
    values = sorted(float(v) for v in r["values"])
    amplitude_vs_k = r["parameter"] == "k" and r["statistic"] == "cycle_amplitude"
    if amplitude_vs_k and (r["mode"] == "macro" or r["replicas"] == 1):
        sw = experiments.k_sweep_bifurcation(
            cfg, values, mode=r["mode"], m0=r["m0"], transient_fraction=r["transient_fraction"],
            threshold=r["threshold"], burn_in=r["burn_in"], jobs=jobs, keep_paths=True,
        )
        out.write("sweep.csv", sw.to_csv())
        for k, (t, m) in zip(sw.k, sw.paths):
            buf = ["t,m\n"] + [f"{format(a, '.17g')},{format(b, '.17g')}\n" for a, b in zip(t, m)]
            out.write(f"trajectory_k{_fmt_k(k)}.csv", "".join(buf))
        out.svg("bifurcation.svg", lambda: plots.line_plot(
            [("amplitude", sw.k, sw.amplitude)], "cycle amplitude", "k", "amplitude", markers=True))
        out.svg("m_vs_t.svg", lambda: plots.line_plot(
            [(f"k={_fmt_k(k)}", t, m) for k, (t, m) in zip(sw.k, sw.paths)], "magnetization", "t", "m"))
        rows = [{"k": k, "amplitude": a, "period": p, "oscillating": o}
                for k, a, p, o in zip(sw.k, sw.amplitude, sw.period, sw.oscillating)]
        summary = {"onset": sw.onset, "bracket": None if sw.bracket is None else list(sw.bracket),
                   "k_star": sw.k_star, "contains_k_star": sw.contains_k_star}
        return rows, None, summary
    try:
        spec = experiments.SweepSpec(cfg, r["parameter"], values, r["replicas"], cfg.horizon, r["statistic"])
    except ValueError as exc:
        raise ConfigError("run.parameter" if "sweep" in str(exc) else "run.statistic", str(exc)) from exc
    res = experiments.run_sweep(spec, jobs=jobs)
    out.write("sweep.csv", res.to_csv())
    out.write("sweep.json", res.sidecar_json())
    out.svg("bifurcation.svg", lambda: plots.line_plot(
        [(r["statistic"], res.values, res.column("mean"))], r["statistic"], r["parameter"], "mean", markers=True))
    rows = [dict({r["parameter"]: v}, **s) for v, s in zip(res.values, res.summaries)]
    return rows, None, {"rows": rows}


def cmd_absorption(cfg: ModelConfig, out: Output, jobs: int):
    r = cfg.run
    a = experiments.absorption_scaling(cfg.gain, r["n_list"], r["replicas"], r["t_max"], r["m0"], cfg.seed, jobs)
    out.write("absorption.csv", a.result.to_csv())
    out.write("absorption.json", a.result.sidecar_json())
    out.svg("m_vs_t.svg", lambda: plots.line_plot(
        [("log mean tau", a.result.values, np.log(a.result.column("mean")))], "absorption time", "N", "log tau",
        markers=True))
    rows = [dict({"N": v}, **s) for v, s in zip(a.result.values, a.result.summaries)]
    summary = {"exp_slope": a.exp_slope, "exp_rss": a.exp_rss, "power_slope": a.power_slope,
               "power_rss": a.power_rss, "preferred": a.preferred, "all_censored": a.all_censored}
    return rows, None, summary


def cmd_chaos(cfg: ModelConfig, out: Output, jobs: int):
    r = cfg.run
    s = experiments.chaos_correlation(cfg, r["h"], cfg.horizon, r["replicas"], r["m0"], r["init"], jobs)
    out.write("pair_cov.csv", "pair,cov\n" + "".join(f"{i},{format(v, '.17g')}\n" for i, v in enumerate(s.pair_covs)))
    summary = {"N": s.N, "times": list(s.times), "tagged_cov": list(s.tagged_cov), "pair_cov_median": s.pair_cov_median,
               "pair_cov_se": s.pair_cov_se, "tv_distance": s.tv_distance, "replicas": s.replicas}
    out.write("chaos.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [{k: v for k, v in summary.items() if not isinstance(v, list)}], None, summary


COMMANDS = {
    "simulate": cmd_simulate,
    "meanfield": cmd_meanfield,
    "bifurcate": cmd_bifurcate,
    "sweep": cmd_sweep,
    "absorption": cmd_absorption,
    "chaos": cmd_chaos,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contrarian", description="Contrarian opinion dynamics with delayed group pressure.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file (a previous run.json works)")
        s.add_argument("--out", help="output directory (must be empty unless --force)")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-path override, repeatable")
        s.add_argument("--seed", type=int, help="random seed (drawn and recorded if omitted)")
        s.add_argument("--plot", action="store_true", help="also write SVG plots")
        s.add_argument("--force", action="store_true", help="allow a non-empty output directory")
        s.add_argument("--jobs", type=int, default=None, help="worker processes (default: logical cores)")
        s.add_argument("--format", choices=("table", "csv", "json"), default="table", help="stdout format")
        keys = RUN_KEYS[name]
        if "m0" in keys:
            s.add_argument("--m0", type=float)
        if "burn_in" in keys:
            s.add_argument("--burn-in", dest="burn_in", type=float)
        if "replicas" in keys:
            s.add_argument("--replicas", type=int)
        if name == "sweep":
            s.add_argument("--values", help="comma-separated values of the swept parameter")
            s.add_argument("--mode", choices=("macro", "micro"))
            s.add_argument("--statistic", choices=experiments.STATISTICS)
            s.add_argument("--parameter", choices=experiments.SWEEPABLE)
        if name == "absorption":
            s.add_argument("--t-max", dest="t_max", type=float)
            s.add_argument("--n-list", dest="n_list", help="comma-separated system sizes")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args, args.command)
        out = Output(args.out, args.force, args.plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = args.jobs if args.jobs is not None else experiments.default_jobs()
    try:
        rows, table, summary = COMMANDS[args.command](cfg, out, max(1, jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (meanfield.IntegrationError, NoHopfError, ValueError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    record = cfg.to_dict()
    record["meta"] = {
        "version": __version__,
        "git": _git_commit(),
        "config_hash": cfg.config_hash(),
        "files": sorted(out.files),
        "result": _jsonable(summary),
    }
    out.write("run.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    _emit(_jsonable(rows), args.format, table)
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


if __name__ == "__main__":
    sys.exit(main())
