"""Lower-bound formulas, consistency checks and exhaustive oracles.

Certificates are data: each one records which formula produced it and, for
hypercontractive bounds, the search report that backs the inequality. Only
the disjointness source carries an analytic hypercontractivity certificate
(its closed-form gap); any other hypercontractive certificate rests on a
numeric search and is labelled as such.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CapacityError, InfeasibleError
from .measures import HcReport, check_hypercontractive, max_correlation
from .protocols.agreement import (_power_matrix, best_agreement, eval_agreement, lift_agreement,
                                  optimize_agreement)
from .protocols.collision import (BirthdayCollision, CollisionProtocol, TableCollision, amplify_collision,
                                  collision_from_agreement, eval_collision)
from .sources import BipartiteSource, is_product, make_standard, tensor, tuple_marginals

ORACLE_BUDGET = 10**8
FIT_MIN_POINTS = 5
FIT_R2_FLOOR = 0.9


@dataclass
class BoundCertificate:
    kind: str
    params: dict
    value: float
    applies_to: str
    report: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


def hyp_params(p: float, q: float) -> tuple[float, float]:
    """``(q', c)`` with ``1/q + 1/q' = 1`` and ``1/c = 1/p + 1/q'``."""
    if not 1 <= p <= q:
        raise ValueError("need 1 <= p <= q")
    inv_qp = 1.0 - 1.0 / q
    q_prime = math.inf if inv_qp == 0 else 1.0 / inv_qp
    c = 1.0 / (1.0 / p + inv_qp)
    return q_prime, c


def hyp_lower_bound(p: float, q: float, z: float) -> float:
    """``(p^(1/p) q'^(1/q') z)^c / c``; the ``q'`` factor tends to 1 as ``q -> 1``."""
    if not 0 <= z <= 1:
        raise ValueError("z must lie in [0, 1]")
    q_prime, c = hyp_params(p, q)
    qp_term = 1.0 if math.isinf(q_prime) else q_prime ** (1.0 / q_prime)
    return (p ** (1.0 / p) * qp_term * z) ** c / c


def cor_lower_bound(z: float, cor: float) -> float:
    """``sqrt(max(0, z - cor))``, zero once ``z <= cor``.

    The variance argument behind it also yields the stronger ``2 sqrt(z - cor)``;
    the unscaled form is kept so reported floors stay conservative.
    """
    if not 0 <= cor <= 1:
        raise ValueError("cor must lie in [0, 1]")
    return math.sqrt(max(0.0, z - cor))


def _is(s: BipartiteSource, name: str) -> bool:
    ref = make_standard(name)
    return s.shape == ref.shape and np.allclose(s.probs, ref.probs, atol=1e-12)


def hypercontractive_certificate(s: BipartiteSource, q: float, p: float, z: float,
                                 grid: int | None = 200, random: int | None = None,
                                 seed: int | None = None) -> BoundCertificate | None:
    """Bound on agreement cost at success ``z`` backed by a passing hypercontractivity search.

    Returns ``None`` when the search finds a violation.
    """
    report: HcReport = check_hypercontractive(s, q, p, grid=None if random else grid,
                                              random=random, seed=seed)
    if not report.holds:
        return None
    analytic = _is(s, "disj") and (p, q) == (1.5, 3.0)
    q_prime, c = hyp_params(p, q)
    return BoundCertificate("hypercontractive", {"p": p, "q": q, "q_prime": q_prime, "c": c,
                                                 "analytic": analytic},
                            hyp_lower_bound(p, q, z), f"agr[{s.label}]({z:g})", report.to_dict())


def correlation_certificate(s: BipartiteSource, z: float) -> BoundCertificate:
    cor = max_correlation(s)
    return BoundCertificate("correlation", {"cor": cor}, cor_lower_bound(z, cor), f"agr[{s.label}]({z:g})")


_DISJ_HC_CACHE: dict = {}


def certified_lower_bounds(s: BipartiteSource, z: float) -> list[BoundCertificate]:
    """Every certificate this module can issue for the agreement cost of ``s`` at success ``z``.

    Always includes the correlation bound; adds the hypercontractive bound
    with ``(q, p) = (3, 3/2)`` for the disjointness source.
    """
    certs = [correlation_certificate(s, z)]
    if _is(s, "disj"):
        if "report" not in _DISJ_HC_CACHE:
            _DISJ_HC_CACHE["report"] = check_hypercontractive(s, 3.0, 1.5, grid=200).to_dict()
        q_prime, c = hyp_params(1.5, 3.0)
        certs.append(BoundCertificate("hypercontractive", {"p": 1.5, "q": 3.0, "q_prime": q_prime, "c": c,
                                                           "analytic": True},
                                      hyp_lower_bound(1.5, 3.0, z), f"agr[{s.label}]({z:g})",
                                      _DISJ_HC_CACHE["report"]))
    return certs


def best_certified_bound(s: BipartiteSource, z: float) -> float:
    return max(c.value for c in certified_lower_bounds(s, z))


@dataclass
class SigmaCorReport:
    m: int
    b: int
    measured: float
    bound: float
    ok: bool


def verify_sigma_cor(m: int, b: int) -> SigmaCorReport:
    if not 2 <= m <= 11:
        raise CapacityError("sigma dense SVD (m)", m, 11)
    measured = max_correlation(make_standard("sigma", m=m, b=b))
    bound = 2.0 ** (1 - m / 2)
    return SigmaCorReport(m, b, measured, bound, measured <= bound + 1e-9)


@dataclass
class ShiftReport:
    z: float
    cor_sigma: float
    shifted_z: float
    achieved_cost: float
    bounds: dict
    ok: bool
    informative: bool


def verify_cor_to_agr_shift(rho: BipartiteSource, sigma: BipartiteSource, z: float,
                            ell: int = 1, seed: int = 0) -> ShiftReport:
    """Compare the best cost found on ``rho ⊗ sigma`` at success ``z`` with bounds for ``rho`` at ``z - Cor(sigma)``.

    Candidates: the optimiser on the product source at ``ell`` and the best
    ``rho`` protocol lifted to the product source.
    """
    cor_s = max_correlation(sigma)
    shifted = z - cor_s
    prod = tensor(rho, sigma)
    costs = []
    lifted = lift_agreement(best_agreement(rho, z), rho, sigma)
    ev = eval_agreement(prod, lifted)
    if ev.success.value >= z - 1e-12:
        costs.append(ev.cost.value)
    opt = optimize_agreement(prod, ell, z, seed=seed, max_starts=64)
    ev = eval_agreement(prod, opt)
    if ev.success.value >= z * (1 - 1e-9):
        costs.append(ev.cost.value)
    achieved = min(costs)
    if shifted <= 0:
        return ShiftReport(z, cor_s, shifted, achieved, {}, True, False)
    bounds = {c.kind: c.value for c in certified_lower_bounds(rho, shifted)}
    ok = all(achieved >= v - 1e-9 for v in bounds.values())
    return ShiftReport(z, cor_s, shifted, achieved, bounds, ok, True)


def _colex_subsets(n: int, k_max: int) -> list[tuple]:
    """Subsets of ``range(n)`` with at most ``k_max`` elements, by size then colex order."""
    out = []
    for size in range(k_max + 1):
        combos = list(itertools.combinations(range(n), size))
        combos.sort(key=lambda c: tuple(reversed(c)))
        out.extend(combos)
    return out


@dataclass
class OracleResult:
    best_size: int
    best_protocol: TableCollision
    searched: int


def brute_force_col(s: BipartiteSource, n: int, p: float, ell: int = 1, k_max: int = 1,
                    budget: float = ORACLE_BUDGET) -> OracleResult:
    """Smallest output cap ``k <= k_max`` admitting deterministic maps with every ``Pr[i in A and B] >= p``.

    Maps are enumerated over tuples of positive marginal weight; each Alice
    map is checked against all Bob maps at once. Ties go to the first map
    found (subsets in colex order, first tuple most significant).
    """
    joint = _power_matrix(s, ell)
    mu, nu = tuple_marginals(s, ell)
    us, vs = np.flatnonzero(mu > 0), np.flatnonzero(nu > 0)
    sub = joint[np.ix_(us, vs)]
    subsets_all = _colex_subsets(n, k_max)
    space = float(len(subsets_all)) ** len(us) * float(len(subsets_all)) ** len(vs)
    if space > budget:
        raise CapacityError("oracle search space", space, budget)
    searched = 0
    for k in range(k_max + 1):
        subsets = [c for c in subsets_all if len(c) <= k]
        ind = np.zeros((len(subsets), n))
        for j, c in enumerate(subsets):
            ind[j, list(c)] = 1.0
        for a_choice in itertools.product(range(len(subsets)), repeat=len(us)):
            a_mat = ind[list(a_choice)]
            weight = sub.T @ a_mat
            acc = np.zeros((1, n))
            for v in range(len(vs)):
                acc = (acc[:, None, :] + ind[None, :, :] * weight[v][None, None, :]).reshape(-1, n)
            searched += acc.shape[0]
            ok = np.flatnonzero(np.all(acc >= p - 1e-12, axis=1))
            if ok.size == 0:
                continue
            b_choice = np.unravel_index(int(ok[0]), (len(subsets),) * len(vs)) if len(vs) else ()
            a_tab = np.zeros((s.u_size ** ell, n), dtype=bool)
            b_tab = np.zeros((s.v_size ** ell, n), dtype=bool)
            for row, j in zip(us, a_choice):
                a_tab[row, list(subsets[j])] = True
            for row, j in zip(vs, b_choice):
                b_tab[row, list(subsets[int(j)])] = True
            return OracleResult(k, TableCollision(ell, a_tab, b_tab, max_out=k, label=f"oracle(n={n},k={k})"),
                                searched)
    raise InfeasibleError(f"no deterministic protocol with outputs of size <= {k_max}")


@dataclass
class ScalingResult:
    source: str
    rows: list
    fitted_exponent: float
    r_squared: float
    reliable: bool
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def loglog_fit(xs, ys) -> tuple[float, float]:
    """OLS slope and ``r^2`` of ``log y`` on ``log x``.

    When ``log y`` is constant the slope is 0 and the fit is exact, so ``r^2``
    is reported as 1.
    """
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    if ss_tot <= 1e-24:
        return float(slope), 1.0 if ss_res <= 1e-24 else 0.0
    return float(slope), 1.0 - ss_res / ss_tot


def scaling_protocol(s: BipartiteSource, n: int) -> CollisionProtocol:
    """Collision protocol at ``p = 1/n``: birthday for product sources, else the agreement route.

    The agreement route gives each coordinate probability above ``1/(2n)``;
    three repetitions lift it to at least ``1/n``.
    """
    if is_product(s):
        return BirthdayCollision(n, math.isqrt(n - 1) + 1)
    ag = best_agreement(s, 1.0 / n)
    return amplify_collision(collision_from_agreement(ag, n, s=s), 3)


def scaling_experiment(s: BipartiteSource, n_values, seed: int, mc_trials: int = 0) -> ScalingResult:
    """Output caps of constructed protocols at ``p = 1/n`` and their log-log growth exponent."""
    n_values = sorted(int(n) for n in n_values)
    if len(n_values) < 2:
        raise ValueError("need at least two sizes")
    cor = max_correlation(s)
    rows = []
    for n in n_values:
        p = 1.0 / n
        pr = scaling_protocol(s, n)
        ev = eval_collision(s, pr, "exact")
        row = {"n": n, "p": p, "achieved_max_out": pr.max_out,
               "hyp_floor": n * hyp_lower_bound(1.5, 3.0, p) / 2 if _is(s, "disj") else float("nan"),
               "cor_floor": n * cor_lower_bound(p, cor) / 2,
               "min_per_i": ev.min_prob}
        if mc_trials:
            row["min_per_i_mc"] = eval_collision(s, pr, "mc", mc_trials, seed).min_prob
        rows.append(row)
    slope, r2 = loglog_fit(n_values, [r["achieved_max_out"] for r in rows])
    reliable = r2 >= FIT_R2_FLOOR and len(n_values) >= FIT_MIN_POINTS
    return ScalingResult(s.label, rows, slope, r2, reliable, seed)


CSV_COLUMNS = ("n", "p", "achieved_max_out", "hyp_floor", "cor_floor")
FIXED_ELL_NOTE = "upper bound: protocols use a fixed number of samples, so col may be smaller"


def write_scaling_csv(result: ScalingResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in result.rows:
            w.writerow(row)
