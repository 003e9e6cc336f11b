import itertools

import numpy as np
import pytest

from corrsim.errors import CapacityError
from corrsim.measures import (apply_channel, check_hoelder, check_hypercontractive, cond_entropy,
                              cond_mutual_info, correlation_bound_gap, disj_hc_gap, disj_hc_gap_norms, entropy,
                              entropy_given_event, entropy_on_event, lp_norm, max_correlation, mutual_info)
from corrsim.sources import BipartiteSource, make_standard, marginals, parse_source_name, tensor


def cor_by_markov_eigs(s: BipartiteSource) -> float:
    """Independent route: Cor^2 is the second eigenvalue of the two-step kernel U -> V -> U."""
    mu, nu = marginals(s)
    rows, cols = mu > 0, nu > 0
    p = s.probs[np.ix_(rows, cols)]
    k = (p / mu[rows, None]) @ (p.T / nu[cols, None])
    eig = np.sort(np.real(np.linalg.eigvals(k)))[::-1]
    return float(np.sqrt(max(eig[1], 0.0))) if len(eig) > 1 else 0.0


STANDARD = {
    "perf": 1.0, "priv": 0.0, "disj": 0.5,
    "bsc(0.1)": 0.8, "bsc(0.25)": 0.5, "bsc(0.4)": 0.2,
}


@pytest.mark.parametrize("name,value", STANDARD.items())
def test_cor_standard_values(name, value):
    s = parse_source_name(name)
    assert abs(max_correlation(s) - value) <= 1e-9
    assert abs(cor_by_markov_eigs(s) - value) <= 1e-7


def test_cor_matches_eigen_oracle_on_random_sources():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.random((4, 3)) ** 3
        s = BipartiteSource(p / p.sum())
        assert abs(max_correlation(s) - cor_by_markov_eigs(s)) < 1e-7


def test_cor_degenerate_and_zero_rows():
    assert max_correlation(BipartiteSource(np.array([[0.3, 0.7]]))) == 0.0
    # a zero row is dropped rather than producing a division by zero
    s = BipartiteSource(np.array([[0.5, 0.0], [0.0, 0.0], [0.0, 0.5]]))
    assert abs(max_correlation(s) - 1.0) < 1e-12


def test_correlation_bound_gap_examples():
    d = make_standard("disj")
    assert abs(correlation_bound_gap(d, [1, 1], [1, 1])) < 1e-12
    assert abs(correlation_bound_gap(d, [1, 0], [1, 0]) - 2 / 9) < 1e-12
    rng = np.random.default_rng(1)
    priv = make_standard("priv")
    for _ in range(100):
        assert correlation_bound_gap(priv, rng.random(2), rng.random(2)) >= -1e-12


def test_lp_norm_and_channel_examples():
    mu = np.array([0.5, 0.5])
    assert lp_norm([1, 1], mu, 3) == pytest.approx(1)
    assert lp_norm([2, 0], mu, 2) == pytest.approx(np.sqrt(2))
    assert lp_norm([3, -1], mu, 1) == pytest.approx(2)
    assert lp_norm([3, -1], mu, np.inf) == 3
    assert lp_norm([3, 9], [1.0, 0.0], np.inf) == 3
    d = make_standard("disj")
    assert np.allclose(apply_channel(d, [0.3, 0.3]), [0.3, 0.3])
    assert np.allclose(apply_channel(make_standard("perf"), [0.2, 0.9]), [0.2, 0.9])
    f = np.array([0.7, 0.1])
    assert np.allclose(apply_channel(d, f), [(f[0] + f[1]) / 2, f[0]])


def test_hypercontractivity_checks():
    assert check_hypercontractive(make_standard("disj"), 3, 1.5, grid=200).holds
    rep = check_hypercontractive(make_standard("perf"), 3, 1.5, grid=20)
    assert not rep.holds and rep.worst_gap < 0
    rep = check_hypercontractive(make_standard("perf"), 3, 1.5, random=200, seed=4)
    assert not rep.holds
    for name in ("bsc(0.2)", "disj", "perf"):
        assert check_hypercontractive(parse_source_name(name), 2, 2, grid=30).holds
    with pytest.raises(CapacityError):
        check_hypercontractive(make_standard("sigma", m=3, b=0), 3, 1.5, grid=50)
    with pytest.raises(ValueError):
        check_hypercontractive(make_standard("disj"), 3, 1.5, random=10)


def test_disj_hc_gap_closed_form():
    assert disj_hc_gap(2.0, 2.0) == 0
    assert disj_hc_gap(1.0, 0.0) == pytest.approx(1 / 36, abs=1e-15)
    assert disj_hc_gap(4.0, 1.0) == pytest.approx(13 / 36, abs=1e-15)
    a, b = np.meshgrid(np.linspace(0, 3, 31), np.linspace(0, 3, 31))
    assert np.max(np.abs(disj_hc_gap(a, b) - disj_hc_gap_norms(a, b))) < 1e-12


def test_hoelder():
    d = make_standard("disj")
    assert abs(check_hoelder(d, 2, 2, [1, 1], [1, 1])) < 1e-12
    assert check_hoelder(d, 1.5, 1.5, [1, 0], [1, 0]) >= 0
    rng = np.random.default_rng(2)
    for _ in range(200):
        assert check_hoelder(d, 2, 2, rng.normal(size=2), rng.normal(size=2)) >= -1e-12


def test_entropy_examples():
    assert entropy(np.full(4, 0.25)) == pytest.approx(2)
    assert mutual_info(np.outer([0.3, 0.7], [0.6, 0.4])) == pytest.approx(0, abs=1e-12)
    assert mutual_info(make_standard("perf").probs) == pytest.approx(1)
    assert cond_entropy(make_standard("perf").probs) == pytest.approx(0, abs=1e-12)
    assert entropy_given_event(8, 1.0) == pytest.approx(3)
    assert entropy_given_event(8, 0.5) == pytest.approx(2)
    dist = np.full(8, 1 / 8)
    assert entropy_on_event(dist, np.arange(8) < 4) == pytest.approx(2)
    assert entropy_on_event(np.full(4, 0.25), np.arange(4) == 0) == 0


def test_chain_rule_on_random_joints():
    rng = np.random.default_rng(3)
    for _ in range(20):
        j = rng.random((2, 3, 2))
        j /= j.sum()
        h = entropy
        # H(A B C) = H(A) + H(B | A) + H(C | A B)
        lhs = h(j)
        rhs = (h(j.sum(axis=(1, 2))) + cond_entropy(j, (1,), (0,)) + cond_entropy(j, (2,), (0, 1)))
        assert abs(lhs - rhs) < 1e-10
        # I(A ; B C) = I(A ; C) + I(A ; B | C)
        lhs = mutual_info(j, (0,), (1, 2))
        rhs = mutual_info(j, (0,), (2,)) + cond_mutual_info(j, (0,), (1,), (2,))
        assert abs(lhs - rhs) < 1e-10


def test_tensorization_small():
    names = ["perf", "priv", "disj", "bsc(0.2)"]
    for a, b in itertools.permutations(names, 2):
        sa, sb = parse_source_name(a), parse_source_name(b)
        assert abs(max_correlation(tensor(sa, sb)) - max(max_correlation(sa), max_correlation(sb))) <= 1e-6
