"""Regenerate tests/fixtures: pilot-run thresholds and golden CSVs.

Each pilot uses its own seed, distinct from the seeds the tests use, so
thresholds are measured on data the assertions never see.

    python3 tools/make_fixtures.py [--skip-pilots]
"""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from golden_cases import CASES, COMPETITIVE, FIXTURES, GOLDEN  # noqa: E402

from contrarian import experiments  # noqa: E402
from contrarian.gain import DelaySpec, GainFunction, ModelConfig  # noqa: E402

FORMAT_VERSION = 1


def pilot_micro_hopf(seed=101):
    amps = {}
    for k in (0.9, 1.5):
        cfg = ModelConfig(10_000, COMPETITIVE, DelaySpec(2, k), horizon=300.0, seed=seed)
        sw = experiments.k_sweep_bifurcation(cfg, [k], mode="micro", m0=0.3)
        amps[str(k)] = sw.amplitude[0]
    return {
        "seed": seed, "N": 10_000, "n": 2, "horizon": 300.0, "m0": 0.3,
        "amplitude": amps,
        # geometric midpoint between the two regimes
        "threshold": math.sqrt(amps["0.9"] * amps["1.5"]),
    }


def pilot_kurtz(seed=103):
    out = {"seed": seed, "T": 10.0, "replicas": 100, "N": [100, 1000, 10_000]}
    for name, gain, m0 in (("constant", GainFunction.constant(1.0), 0.5), ("competitive", COMPETITIVE, 0.1)):
        cfg = ModelConfig(100, gain, seed=seed)
        res = experiments.kurtz_error(cfg, m0, 10.0, out["N"], 100)
        out[name] = {"m0": m0, "median": res.column("median").tolist()}
    cfg = ModelConfig(100, COMPETITIVE, seed=seed)
    out["single_replica_1e4"] = experiments.kurtz_error(cfg, 0.1, 10.0, [10_000], 1).raw[0][0]
    return out


def pilot_cooperative(seed=104):
    cfg = ModelConfig(100, GainFunction.linear(2.0, 1.0), seed=seed)
    occ = experiments.occupation_study(cfg, 0.25, (0.0, 0.15), 100.0, 1000)
    entry = np.array([o.entry_time for o in occ if o.entered])
    return {
        "seed": seed, "N": 100, "m0": 0.25, "eps": 0.15, "T": 100.0, "replicas": 1000,
        "entered": len(entry) / len(occ),
        "entry_time_q99": float(np.quantile(entry, 0.99)),
    }


def pilot_absorption(seed=105):
    voter = experiments.absorption_scaling(GainFunction.constant(1.0), [8, 16, 32, 64], 1000, 1e5, seed=seed)
    comp = experiments.absorption_scaling(COMPETITIVE, [10, 20, 30, 40], 200, 1e5, seed=seed)
    n60 = experiments.absorption_scaling(COMPETITIVE, [60], 1000, 1e4, seed=seed)
    coop = experiments.absorption_scaling(GainFunction.linear(2.0, 1.0), [25, 50, 100, 200], 200, 1e4, m0=0.25, seed=seed)
    return {
        "seed": seed,
        "voter": {"mean": voter.result.column("mean").tolist(), "power_slope": voter.power_slope,
                  "preferred": voter.preferred},
        "competitive": {"mean": comp.result.column("mean").tolist(), "exp_slope": comp.exp_slope,
                        "preferred": comp.preferred},
        "competitive_N60_censor_rate": n60.result.summaries[0]["censor_rate"],
        "cooperative": {"N": [25, 50, 100, 200], "mean": coop.result.column("mean").tolist(),
                        "power_slope": coop.power_slope},
    }


def pilot_chaos(seed=106):
    out = {"seed": seed, "T": 5.0, "h": 2, "replicas": 10_000, "N": [20, 60, 200]}
    med, tv = [], []
    for N in out["N"]:
        s = experiments.chaos_correlation(ModelConfig(N, COMPETITIVE, seed=seed), 2, 5.0, 10_000)
        med.append(s.pair_cov_median)
        tv.append(s.tv_distance)
    out["pair_cov_median"] = med
    out["tv_distance"] = tv
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--skip-pilots", action="store_true")
    args = ap.parse_args()
    GOLDEN.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, (fn, seed) in CASES.items():
        (GOLDEN / f"{name}.csv").write_text(fn(seed))
        manifest[name] = {"seed": seed, "file": f"golden/{name}.csv"}
    (FIXTURES / "golden.json").write_text(json.dumps({"version": FORMAT_VERSION, "cases": manifest}, indent=2) + "\n")
    if args.skip_pilots:
        return
    pilots = {"version": FORMAT_VERSION}
    for name, fn in (("micro_hopf", pilot_micro_hopf), ("kurtz", pilot_kurtz), ("cooperative", pilot_cooperative),
                     ("absorption", pilot_absorption), ("chaos", pilot_chaos)):
        pilots[name] = fn()
        print(name, json.dumps(pilots[name]), flush=True)
    (FIXTURES / "pilots.json").write_text(json.dumps(pilots, indent=2) + "\n")


if __name__ == "__main__":
    main()
