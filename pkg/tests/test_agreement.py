import math

import numpy as np
import pytest

from corrsim.bounds import best_certified_bound
from corrsim.protocols import (AgreementProtocol, agreement_from_dict, best_agreement, constant_agreement,
                               disj_agreement, eval_agreement, lift_agreement, optimize_agreement,
                               perf_agreement)
from corrsim.sources import make_standard, parse_source_name, tensor, tensor_power


def exact_by_dense_power(s, pr):
    """Oracle: evaluate through the dense tensor-power matrix instead of the support table."""
    big = tensor_power(s, pr.ell) if pr.ell else None
    f, g = pr.tables()
    if big is None:
        return float(f[0] + g[0]), float(f[0] * g[0])
    mu, nu = big.probs.sum(axis=1), big.probs.sum(axis=0)
    return float(mu @ f + nu @ g), float(f @ big.probs @ g)


def test_trivial_protocol_every_source():
    for name in ("perf", "priv", "disj", "bsc(0.3)"):
        s = parse_source_name(name)
        ev = eval_agreement(s, constant_agreement(1.0))
        assert ev.cost.value == 2 and ev.success.value == 1


@pytest.mark.parametrize("ell", [1, 2, 3, 4, 5])
def test_disj_construction_closed_form(ell):
    s = make_standard("disj")
    pr = disj_agreement(6.0**-ell)
    assert pr.ell == ell
    ev = eval_agreement(s, pr)
    assert abs(ev.cost.value - 2 / 3**ell) < 1e-12
    assert abs(ev.success.value - 6.0**-ell) < 1e-12
    if ell <= 3:
        cost, succ = exact_by_dense_power(s, pr)
        assert abs(cost - ev.cost.value) < 1e-12 and abs(succ - ev.success.value) < 1e-12


def test_disj_edge_and_perf_examples():
    pr = disj_agreement(0.99)
    assert pr.ell == 0
    ev = eval_agreement(make_standard("disj"), pr)
    assert ev.cost.value == 2 and ev.success.value == 1
    perf = make_standard("perf")
    for p, ell, succ, cost in [(1 / 8, 3, 1 / 8, 1 / 4), (1.0, 0, 1.0, 2.0), (1 / 5, 2, 1 / 4, 1 / 2)]:
        pr = perf_agreement(p)
        ev = eval_agreement(perf, pr)
        assert pr.ell == ell
        assert ev.success.value == pytest.approx(succ, abs=1e-12)
        assert ev.cost.value == pytest.approx(cost, abs=1e-12)


def test_perf_indicator_ell2():
    pr = AgreementProtocol(2, 2, 2, [1, 0, 0, 0], [1, 0, 0, 0])
    ev = eval_agreement(make_standard("perf"), pr)
    assert ev.success.value == pytest.approx(0.25) and ev.cost.value == pytest.approx(0.5)


def test_mc_matches_exact():
    s = make_standard("bsc", p=0.2)
    pr = optimize_agreement(s, 2, 0.1)
    ex = eval_agreement(s, pr)
    mc = eval_agreement(s, pr, "mc", 200_000, seed=9)
    assert mc.cost.ci_low <= ex.cost.value <= mc.cost.ci_high
    assert mc.success.ci_low <= ex.success.value <= mc.success.ci_high
    with pytest.raises(ValueError):
        eval_agreement(s, pr, "mc", 10)


def test_optimizer_examples():
    ev = eval_agreement(make_standard("perf"), optimize_agreement(make_standard("perf"), 1, 0.5))
    assert ev.success.value >= 0.5 - 1e-9 and ev.cost.value <= 1 + 1e-9
    priv = make_standard("priv")
    for p in (0.05, 0.2, 0.6):
        ev = eval_agreement(priv, optimize_agreement(priv, 1, p))
        assert ev.success.value >= p * (1 - 1e-9)
        assert ev.cost.value >= 2 * math.sqrt(p) - 1e-9
    disj = make_standard("disj")
    ev = eval_agreement(disj, optimize_agreement(disj, 2, 1 / 36))
    assert ev.success.value >= 1 / 36 * (1 - 1e-9) and ev.cost.value <= 2 / 9 + 1e-9


def test_best_agreement_is_sound_everywhere():
    for name in ("perf", "priv", "disj", "bsc(0.1)", "bsc(0.3)"):
        s = parse_source_name(name)
        for z in (0.5, 0.1, 1 / 36, 0.004):
            ev = eval_agreement(s, best_agreement(s, z))
            assert ev.success.value >= z * (1 - 1e-9)
            assert ev.cost.value >= best_certified_bound(s, z) - 1e-9


def test_lift_keeps_statistics():
    rho, sigma = make_standard("disj"), make_standard("bsc", p=0.3)
    pr = disj_agreement(1 / 36)
    base = eval_agreement(rho, pr)
    lifted = eval_agreement(tensor(rho, sigma), lift_agreement(pr, rho, sigma))
    assert abs(base.cost.value - lifted.cost.value) < 1e-12
    assert abs(base.success.value - lifted.success.value) < 1e-12


def test_serialisation_roundtrip():
    s = make_standard("bsc", p=0.2)
    for pr in (optimize_agreement(s, 2, 0.1), disj_agreement(1 / 36), perf_agreement(1 / 8),
               constant_agreement(0.3)):
        back = agreement_from_dict(pr.to_dict())
        src = make_standard("disj") if "disj" in pr.label else s
        a, b = eval_agreement(src, pr), eval_agreement(src, back)
        assert a.cost.value == b.cost.value and a.success.value == b.success.value


def test_table_validation():
    with pytest.raises(ValueError):
        AgreementProtocol(1, 2, 2, [0.5, 1.5], [0, 0])
    with pytest.raises(ValueError):
        AgreementProtocol(1, 2, 2, [0.5], [0, 0])
    with pytest.raises(ValueError):
        eval_agreement(make_standard("sigma", m=2, b=0), constant_agreement(0.5))
    assert np.all(np.asarray(AgreementProtocol(1, 2, 2, [0, 1], [1, 0]).f) <= 1)
