"""Acceptance criteria 1-11, one test each.

Every test records a ``PASS``/``FAIL`` line with the measured numbers; the
lines are printed in the terminal summary (see conftest.py) and also when the
module is run as a script:

    python3 tests/test_acceptance.py
"""
import json
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

sys.path.insert(0, str(Path(__file__).parent))

from golden_cases import CASES, FIXTURES  # noqa: E402
from reference_forms import GENERAL_N2_LADDER, LINEAR_LADDERS, general_n2_poly, linear_poly  # noqa: E402

from contrarian import bifurcation as bf  # noqa: E402
from contrarian import experiments as ex  # noqa: E402
from contrarian import meanfield, microsim  # noqa: E402
from contrarian.gain import DelaySpec, GainFunction, ModelConfig  # noqa: E402

COMPETITIVE = GainFunction.linear(-2.0, 3.0)
COOPERATIVE = GainFunction.linear(2.0, 1.0)
VOTER = GainFunction.constant(1.0)
TANH_GAIN = GainFunction.tanh(0.5, 4.0, 3.0)
PILOTS = json.loads((FIXTURES / "pilots.json").read_text())
JOBS = ex.default_jobs()

RESULTS = {}


def record(number: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def _points(seed=7):
    rng = np.random.default_rng(seed)
    return list(zip(rng.uniform(0.2, 8, 20), rng.uniform(0.1, 5, 20)))


def test_criterion_01_char_poly_fidelity():
    worst = 0.0
    for a, k in _points():
        for n in (2, 3, 4, 5):
            got = bf.char_poly_linear(a, k, n).coeffs[::-1]
            ref = linear_poly(n, a, k)
            worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
        got = bf.char_poly_general(-a / 4, k, 2).coeffs[::-1]
        ref = general_n2_poly(-a / 4, k)
        worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    record(1, worst < 1e-12, f"max coefficient relative error {worst:.2e} (< 1e-12)")


def test_criterion_02_liu_ladders():
    worst = 0.0
    for a, k in _points():
        for (n, j), form in LINEAR_LADDERS.items():
            D = bf.liu_determinants(bf.char_poly_linear(a, k, n))
            worst = max(worst, abs(D[j - 1] - form(a, k)) / abs(form(a, k)))
        c = -a / 4
        D = bf.liu_determinants(bf.char_poly_general(c, k, 2), dps=40)
        for j, form in GENERAL_N2_LADDER.items():
            worst = max(worst, abs(D[j - 1] - form(c, k)) / abs(form(c, k)))
    n_forms = len(LINEAR_LADDERS) + len(GENERAL_N2_LADDER)
    record(2, worst < 1e-8, f"{n_forms} closed forms x 20 points, max relative error {worst:.2e} (< 1e-8)")


def test_criterion_03_critical_k():
    worst = 0.0
    for a in (0.5, 2.0, 7.0):
        for n in (2, 3, 4, 5):
            ref = bf.closed_form_kstar(n, a)
            for reduced in (False, True):
                k = bf.find_hopf_k(-a / 4, n, reduced=reduced).k_star
                worst = max(worst, abs(k - ref) / ref)
    for c in (-0.1, -0.5, -2.0):
        for n in range(1, 7):
            ref = bf.imaginary_crossing_oracle(c, n)[0]
            worst = max(worst, abs(bf.find_hopf_k(c, n).k_star - ref) / ref)
    gen = [bf.find_hopf_k(c, 2) for c in (-0.1, -0.5, -2.0)]
    gen_err = max(abs(r.k_star - 2.25 * abs(r.c)) / (2.25 * abs(r.c)) for r in gen)
    has_printed = all(r.printed_kstar is not None and abs(r.printed_kstar / r.c + 2.21457) < 1e-4 for r in gen)
    ok = worst < 1e-8 and gen_err < 1e-8 and has_printed
    record(3, ok, f"max relative error {worst:.2e}; general n=2 vs 9|c|/4 {gen_err:.2e}; printed value carried: {has_printed}")


def test_criterion_04_eigen_crossing():
    checks = {}
    for n in (2, 3, 5):
        rep = bf.find_hopf_k(-0.5, n)
        checks[n] = bf.eigen_crossing_check(-0.5, n, rep.k_star, delta=1e-3 * rep.k_star) and rep.transversality < 0
    record(4, all(checks.values()), f"one transversal pair crossing at k* for n=2,3,5: {checks}")


def _macro_pair(gain, n=2):
    c = bf.slope_to_c(gain.derivative_at_half())
    k_star = bf.find_hopf_k(c, n).k_star
    below = meanfield.solve(gain, 0.45, 500.0, n=n, k=0.9 * k_star)
    above = meanfield.solve(gain, 0.45, 500.0, n=n, k=1.1 * k_star)
    cb, ca = meanfield.cycle_metrics(below), meanfield.cycle_metrics(above)
    ok = cb.oscillating and cb.amplitude > 0.01 and not ca.oscillating and abs(above.m[-1] - 0.5) < 1e-3
    return ok, f"k*={k_star:.6g} amp(0.9k*)={cb.amplitude:.3g} |m(500)-1/2| at 1.1k*={abs(above.m[-1] - 0.5):.1e}"


def test_criterion_05_macro_hopf():
    ok_lin, d_lin = _macro_pair(COMPETITIVE)
    ok_tanh, d_tanh = _macro_pair(TANH_GAIN)
    record(5, ok_lin and ok_tanh, f"linear: {d_lin}; tanh: {d_tanh}")


def test_criterion_06_micro_hopf():
    pilot = PILOTS["micro_hopf"]
    seed = 202
    assert seed != pilot["seed"]
    amps = {}
    for k in (0.9, 1.5):
        cfg = ModelConfig(10_000, COMPETITIVE, DelaySpec(2, k), horizon=pilot["horizon"], seed=seed)
        sw = ex.k_sweep_bifurcation(cfg, [k], mode="micro", m0=pilot["m0"], threshold=pilot["threshold"])
        amps[k] = sw.amplitude[0]
    thr = pilot["threshold"]
    ok = amps[0.9] > thr and amps[1.5] <= thr
    record(6, ok, f"smoothed amplitude k=0.9: {amps[0.9]:.3f}, k=1.5: {amps[1.5]:.3f}, fixture threshold {thr:.3f}")


def test_criterion_07_kurtz():
    cfg = ModelConfig(100, COMPETITIVE, seed=207)
    res = ex.kurtz_error(cfg, 0.1, 10.0, [100, 1000, 10_000], 100, jobs=JOBS)
    med = res.column("median")
    ok = bool(med[0] > med[1] > med[2] and med[2] < 0.05)
    record(7, ok, "median sup-error over 100 replicas: " + ", ".join(f"{v:.4f}" for v in med) + " (last < 0.05)")


def test_criterion_08_metastability():
    voter = ex.absorption_scaling(VOTER, [8, 16, 32, 64], 1000, 1e5, seed=208, jobs=JOBS)
    ok_a = voter.preferred == "power" and 0.7 <= voter.power_slope <= 1.3 and not any(voter.all_censored)
    comp = ex.absorption_scaling(COMPETITIVE, [10, 20, 30, 40], 200, 1e5, seed=208, jobs=JOBS)
    n60 = ex.absorption_scaling(COMPETITIVE, [60], 1000, 1e4, seed=209, jobs=JOBS)
    censor60 = n60.result.summaries[0]["censor_rate"]
    ok_b = comp.preferred == "exponential" and censor60 >= 0.99
    pilot = PILOTS["cooperative"]
    cfg = ModelConfig(100, COOPERATIVE, seed=210)
    occ = ex.occupation_study(cfg, 0.25, (0.0, 0.15), pilot["T"], 1000, t_watch=pilot["entry_time_q99"], jobs=JOBS)
    frac_c = float(np.mean([o.absorbed and o.final_m == 0.0 and o.max_after < 0.15 for o in occ]))
    ok_c = frac_c >= 0.95
    detail = (f"(a) voter power slope {voter.power_slope:.3f}, preferred {voter.preferred}; "
              f"(b) competitive preferred {comp.preferred} (exp slope {comp.exp_slope:.3f}), "
              f"N=60 censoring {censor60:.3f} (>= 0.99); "
              f"(c) cooperative absorbed below 0.15 after t={pilot['entry_time_q99']:.3f}: {frac_c:.3f} (>= 0.95)")
    record(8, ok_a and ok_b and ok_c, detail)


def _final_m(item):
    kind, r = item
    if kind == "delay":
        cfg = ModelConfig(50, COMPETITIVE, DelaySpec(0, 1e3), horizon=5.0, sample_dt=5.0, seed=211)
        return float(microsim.simulate_delay(cfg, 0.3, r).m[-1])
    cfg = ModelConfig(50, COMPETITIVE, horizon=5.0, sample_dt=5.0, seed=212)
    if kind == "plain":
        return float(microsim.simulate_no_delay(cfg, 0.3, r).m[-1])
    sigma0 = np.array([1] * 15 + [0] * 35)
    return float(microsim.simulate_agents(cfg, sigma0, 10_000 + r).m[-1])


def test_criterion_09_exactness():
    R = 2000
    delay = ex.parallel_map(_final_m, [("delay", r) for r in range(R)], JOBS)
    plain = ex.parallel_map(_final_m, [("plain", r) for r in range(R)], JOBS)
    agents = ex.parallel_map(_final_m, [("agents", r) for r in range(R)], JOBS)
    ks_delay = ks_2samp(delay, plain).statistic
    ks_agents = ks_2samp(agents, plain).statistic
    ok = ks_delay < 0.05 and ks_agents < 0.05
    record(9, ok, f"KS(delay k=1e3 n=0, no delay) = {ks_delay:.4f}; KS(agents, aggregate) = {ks_agents:.4f} (< 0.05)")


def test_criterion_10_chaos():
    med = []
    for N in (20, 60, 200):
        s = ex.chaos_correlation(ModelConfig(N, COMPETITIVE, seed=213), 2, 5.0, 10_000, jobs=JOBS)
        med.append(s.pair_cov_median)
    ok = med[0] > med[1] > med[2]
    record(10, ok, "pair covariance median N=20,60,200: " + ", ".join(f"{v:.5f}" for v in med))


def test_criterion_11_determinism():
    manifest = json.loads((FIXTURES / "golden.json").read_text())["cases"]
    same = {name: fn(seed).encode() == (FIXTURES / manifest[name]["file"]).read_bytes()
            for name, (fn, seed) in CASES.items()}
    record(11, all(same.values()), f"{sum(same.values())}/{len(same)} golden CSVs byte-identical")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
