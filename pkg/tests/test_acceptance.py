"""Acceptance suite: fourteen end-to-end checks at their stated tolerances.

Each test prints one ``criterion N: PASS`` or ``criterion N: FAIL`` line
(visible in ``pytest -v`` output) and then asserts. Run this file directly
to execute only the acceptance checks.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest

from corrsim import _rng
from corrsim.bounds import (best_certified_bound, brute_force_col, hyp_lower_bound, scaling_experiment,
                            verify_sigma_cor)
from corrsim.measures import check_hypercontractive, disj_hc_gap, disj_hc_gap_norms, max_correlation
from corrsim.protocols import (agreement_from_collision, birthday_collision, collision_from_agreement,
                               disj_agreement, eval_agreement, eval_collision, optimize_agreement, perf_agreement,
                               symmetrize, uniformity_pvalue)
from corrsim.smp import (eq_inner_product, equality_protocol, equality_round_rates, gapip_eval, gapip_recount,
                         influence_sets, reduce_randomness, run_gapip, run_smp, simulate_with_collision,
                         toy_pseudo_protocol)
from corrsim.sources import ceil_log2, make_standard, parse_source_name, tensor

SWEEP = ["perf", "priv", "disj", "bsc(0.1)", "bsc(0.25)", "bsc(0.4)", "sigma(2,0)", "sigma(2,1)"]


@pytest.fixture
def verdict(capsys):
    def report(number: int, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def test_criterion_01_correlation_table(verdict):
    start = time.perf_counter()
    expected = {"perf": 1.0, "priv": 0.0, "bsc(0.1)": 0.8, "bsc(0.25)": 0.5, "bsc(0.4)": 0.2, "disj": 0.5}
    errs = {k: abs(max_correlation(parse_source_name(k)) - v) for k, v in expected.items()}
    elapsed = time.perf_counter() - start
    verdict(1, max(errs.values()) <= 1e-9 and elapsed < 1, f"max error {max(errs.values()):.1e}, {elapsed:.2f}s")


def test_criterion_02_tensorisation(verdict):
    start = time.perf_counter()
    names = ["perf", "priv", "disj", "bsc(0.2)", "sigma(4,0)"]
    worst = 0.0
    for a, b in itertools.permutations(names, 2):
        sa, sb = parse_source_name(a), parse_source_name(b)
        worst = max(worst, abs(max_correlation(tensor(sa, sb)) - max(max_correlation(sa), max_correlation(sb))))
    elapsed = time.perf_counter() - start
    verdict(2, worst <= 1e-6 and elapsed < 5, f"20 ordered pairs, worst gap {worst:.1e}, {elapsed:.2f}s")


def test_criterion_03_disj_construction(verdict):
    disj = make_standard("disj")
    ok = True
    for ell in range(1, 6):
        p = 6.0**-ell
        ev = eval_agreement(disj, disj_agreement(p))
        ok &= abs(ev.cost.value - 2 / 3**ell) <= 1e-12 and abs(ev.success.value - p) <= 1e-12
        ok &= ev.cost.value < 6 * p ** math.log(3, 6)
    verdict(3, ok, "ell = 1..5")


def test_criterion_04_disj_hypercontractivity(verdict):
    start = time.perf_counter()
    grid = np.round(np.arange(0, 1001) * 0.01, 2)
    a, b = np.meshgrid(grid, grid)
    gap = disj_hc_gap(a, b)
    diff = float(np.max(np.abs(gap - disj_hc_gap_norms(a, b))))
    perf = check_hypercontractive(make_standard("perf"), 3, 1.5, grid=50)
    elapsed = time.perf_counter() - start
    ok = gap.min() >= 0 and diff <= 1e-10 and not perf.holds and perf.witness is not None and elapsed < 30
    verdict(4, ok, f"min gap {gap.min():.2e}, route difference {diff:.1e}, perf witness {perf.witness}")


def test_criterion_05_hyp_floor(verdict):
    disj = make_standard("disj")
    ok = abs(hyp_lower_bound(1.5, 3, 1) - 2.0) <= 1e-9
    worst = math.inf
    for k in range(1, 11):
        z = 2.0**-k
        floor = hyp_lower_bound(1.5, 3, z)
        candidates = [disj_agreement(z)] + [optimize_agreement(disj, ell, z, seed=k) for ell in (1, 2, 3)]
        for pr in candidates:
            ev = eval_agreement(disj, pr)
            if ev.success.value >= z * (1 - 1e-9):
                worst = min(worst, ev.cost.value - floor)
    verdict(5, ok and worst >= -1e-9, f"smallest cost minus floor {worst:.3e}")


@pytest.mark.slow
def test_criterion_06_equality(verdict):
    ok = True
    lines = []
    for name in ("disj", "bsc(0.2)", "bsc(0.4)"):
        s = parse_source_name(name)
        pr = equality_protocol(s, 8)
        w = pr.info["witness"]
        for x, y in ((91, 91), (91, 164)):
            succ = run_smp(s, pr, x, y, 10_000, seed=6)
            err_high = 1 - succ.one_sided_low
            ok &= err_high <= 1 / 3
            lines.append(f"{name}[{x},{y}] err<={err_high:.4f}")
        same = equality_round_rates(s, pr, 91, 91, 2_000, seed=6)
        diff = equality_round_rates(s, pr, 91, 164, 2_000, seed=6)
        ok &= same.ci_low <= w.gamma <= same.ci_high and diff.ci_low <= w.gamma_prime <= diff.ci_high
    verdict(6, ok, "; ".join(lines))


@pytest.mark.slow
def test_criterion_07_conversions(verdict):
    perf = make_standard("perf")
    ok = True
    notes = []
    for n in (16, 64):
        ag = perf_agreement(1 / n)
        pr = collision_from_agreement(ag, n)
        ev = eval_collision(perf, pr, "mc", 100_000, seed=n)
        cost = eval_agreement(perf, ag).cost.value
        ok &= ev.min_prob_low >= 1 / (2 * n) and pr.max_out <= 3 * n * cost + 17
        notes.append(f"n={n}: min low {ev.min_prob_low:.4f}, max_out {pr.max_out}")
    ext = agreement_from_collision(make_standard("priv"), birthday_collision(16, 4))
    ok &= ext.cost.value <= 2 * 4 / 16 + 1e-12
    notes.append(f"extracted cost {ext.cost.value:.4f}")
    verdict(7, ok, "; ".join(notes))


def test_criterion_08_symmetrisation(verdict):
    s_param = 1 / 8
    disj = make_standard("disj")
    pr = symmetrize(disj, 16, s_param)
    ev = eval_collision(disj, pr, "mc", 20_000, seed=8)
    pval = uniformity_pvalue(ev.pick_counts)
    ok = pval > 0.01 and ev.empty_rate.one_sided_high <= s_param
    verdict(8, ok, f"chi-square p={pval:.3f}, empty rate <= {ev.empty_rate.one_sided_high:.4f}")


@pytest.mark.slow
def test_criterion_09_simulation(verdict):
    n = 8
    disj = make_standard("disj")
    base = reduce_randomness(eq_inner_product(n, 3), 1 << (ceil_log2(n) + 6), seed=0)
    ok = base.R == ceil_log2(n) + 6
    pr = simulate_with_collision(disj, base, 1 / 3, votes=1)
    d = pr.info["cost_decomposition"]
    ok &= pr.bits_alice == d["max_out"] * (base.R + base.bits_alice)
    ok &= pr.bits_bob == d["max_out"] * (base.R + base.bits_bob)
    voted = simulate_with_collision(disj, base, 1 / 3, votes=3)
    ok &= voted.bits_alice == 3 * voted.info["max_out"] * (base.R + base.bits_alice)
    errs = []
    for x, y in ((91, 91), (91, 164)):
        succ = run_smp(disj, pr, x, y, 10_000, seed=9)
        errs.append(1 - succ.one_sided_low)
    ok &= max(errs) <= 1 / 3
    verdict(9, ok, f"R={base.R}, max_out={d['max_out']}, error upper bounds {errs[0]:.4f}, {errs[1]:.4f}")


def test_criterion_10_scaling(verdict):
    start = time.perf_counter()
    ns = [8, 16, 32, 64, 128, 256, 512]
    res = {k: scaling_experiment(make_standard(k), ns, seed=10) for k in ("perf", "priv", "disj")}
    elapsed = time.perf_counter() - start
    ok = abs(res["perf"].fitted_exponent) <= 0.1 and res["perf"].r_squared >= 0.9
    ok &= abs(res["priv"].fitted_exponent - 0.5) <= 0.05 and res["priv"].r_squared >= 0.9
    ok &= 0.20 <= res["disj"].fitted_exponent <= 0.45 and elapsed < 120
    detail = ", ".join(f"{k} {r.fitted_exponent:.3f} (r2 {r.r_squared:.3f})" for k, r in res.items())
    verdict(10, ok, detail)


def test_criterion_11_sigma_correlation(verdict):
    reps = [verify_sigma_cor(m, b) for m in (4, 6, 8, 10) for b in (0, 1)]
    verdict(11, all(r.measured <= 2 ** (1 - r.m / 2) + 1e-9 for r in reps),
            ", ".join(f"m={r.m},b={r.b}: {r.measured:.4f}" for r in reps))


def test_criterion_12_oracle(verdict):
    ok = brute_force_col(make_standard("perf"), 2, 0.5, 1, 1).best_size == 1
    checked = 0
    for name in SWEEP:
        s = parse_source_name(name)
        for n in (2, 3):
            res = brute_force_col(s, n, 1 / n, 1, n)
            ok &= res.best_size >= math.ceil(n * best_certified_bound(s, 1 / n) / 2 - 1e-9)
            ok &= eval_collision(s, res.best_protocol, "exact").min_prob >= 1 / n - 1e-12
            checked += 1
    verdict(12, ok, f"{checked} oracle runs")


def test_criterion_13_gapip(verdict):
    rng = _rng.generator(13, "acceptance")
    x = rng.integers(0, 256, size=(10_000, 9), dtype=np.uint64)
    y = rng.integers(0, 256, size=(10_000, 9), dtype=np.uint64)
    match = np.array_equal(gapip_eval(x, y), [gapip_recount(a, b) for a, b in zip(x, y)])
    rep = run_gapip(27, 8, 1000, seed=13)
    verdict(13, match and rep.ci_high >= 2 / 3, f"recount match {match}, naive success {rep.value:.3f}")


def test_criterion_14_influence_sets(verdict):
    ok = True
    expected = {"verbatim": [True, False, False, False], "constant": [False] * 4, "parity": [False] * 4}
    for kind, mask in expected.items():
        rep = influence_sets(make_standard("disj"), toy_pseudo_protocol(kind, 4), 500, seed=14)
        ok &= bool(np.all(rep.l_a == mask) and np.all(rep.l_b == mask))
    verdict(14, ok, "verbatim -> {0}, constant -> {}, parity -> {}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
