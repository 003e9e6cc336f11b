"""Collision protocols: each player outputs a subset of ``[n]`` (0-based here).

A protocol exposes ``alice_sets(view)`` and ``bob_sets(view)``, which turn a
batch of player views into boolean membership matrices of shape
``(trials, n)``. Each protocol reads tape registers and private coins at
indices ``0 .. span-1`` relative to its view, which is how repetitions are
kept independent: copy ``j`` runs on ``view.shifted(j * span)``.

Where a closed form is available, ``exact_stats(source)`` returns the per
coordinate probabilities ``(Pr[i in A], Pr[i in B], Pr[i in A and B])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import _rng
from .._parallel import chunk_ranges, ordered_map
from ..errors import CapacityError, DegenerateSourceError, InfeasibleError, InvariantViolation
from ..estimates import Z_ONE_SIDED, EstimateReport, wilson_interval
from ..sources import DENSE_BUDGET, BipartiteSource, is_degenerate, tuple_marginals
from ..tape import PlayerView, SharedTape
from .agreement import (AgreementProtocol, agreement_from_dict, best_agreement, closed_form_cost,
                        constant_agreement, eval_agreement, project_tuples)

AMPLIFY_BASE = 1.0 / math.e + 0.5
CHUNK_CELLS = 1 << 21


class CollisionProtocol:
    n: int
    max_out: int
    ell: int
    span: int
    label: str = ""

    def alice_sets(self, view: PlayerView) -> np.ndarray:
        raise NotImplementedError

    def bob_sets(self, view: PlayerView) -> np.ndarray:
        raise NotImplementedError

    def exact_stats(self, s: BipartiteSource):
        raise NotImplementedError(f"{type(self).__name__} has no exact evaluation")

    def coordinate_agreement(self, i: int) -> AgreementProtocol | None:
        """Agreement protocol ``(1{i in A}, 1{i in B})`` when it has a finite description."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, max_out={self.max_out}, label={self.label!r})"


class TableCollision(CollisionProtocol):
    """Deterministic maps on ``ell``-tuples, stored as boolean tables."""

    def __init__(self, ell: int, a_table, b_table, max_out: int | None = None, label: str = ""):
        a = np.asarray(a_table, dtype=bool)
        b = np.asarray(b_table, dtype=bool)
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
            raise ValueError("tables must be (|U|^ell, n) and (|V|^ell, n)")
        self.ell = ell
        self.n = a.shape[1]
        self.a_table, self.b_table = a, b
        seen = int(max(a.sum(axis=1).max(initial=0), b.sum(axis=1).max(initial=0)))
        self.max_out = seen if max_out is None else max_out
        if seen > self.max_out:
            raise InvariantViolation(f"table output size {seen} exceeds max_out {self.max_out}")
        self.span = 1
        self.label = label or f"table(ell={ell},n={self.n})"

    @classmethod
    def from_subsets(cls, ell: int, n: int, a_sets, b_sets, **kw):
        a = np.zeros((len(a_sets), n), dtype=bool)
        b = np.zeros((len(b_sets), n), dtype=bool)
        for row, items in enumerate(a_sets):
            a[row, list(items)] = True
        for row, items in enumerate(b_sets):
            b[row, list(items)] = True
        return cls(ell, a, b, **kw)

    def _check(self, s: BipartiteSource):
        if self.a_table.shape[0] != s.u_size ** self.ell or self.b_table.shape[0] != s.v_size ** self.ell:
            raise ValueError("table sizes do not match the source alphabet")

    def alice_sets(self, view):
        return self.a_table[view.read(0, block=self.ell)]

    def bob_sets(self, view):
        return self.b_table[view.read(0, block=self.ell)]

    def exact_stats(self, s):
        self._check(s)
        from .agreement import _power_matrix

        joint = _power_matrix(s, self.ell)
        mu, nu = tuple_marginals(s, self.ell)
        a = mu @ self.a_table
        b = nu @ self.b_table
        c = np.einsum("ui,uv,vi->i", self.a_table.astype(float), joint, self.b_table.astype(float))
        return a, b, c

    def coordinate_agreement(self, i):
        su = round(self.a_table.shape[0] ** (1 / self.ell)) if self.ell else 1
        sv = round(self.b_table.shape[0] ** (1 / self.ell)) if self.ell else 1
        return AgreementProtocol(self.ell, su, sv, self.a_table[:, i].astype(float),
                                 self.b_table[:, i].astype(float), f"{self.label}[{i}]")

    def to_dict(self):
        return {"kind": "collision", "ell": self.ell, "n": self.n, "max_out": self.max_out,
                "label": self.label,
                "tables": {"A": [np.flatnonzero(r).tolist() for r in self.a_table],
                           "B": [np.flatnonzero(r).tolist() for r in self.b_table]}}


def _k_smallest_mask(u: np.ndarray, k: int) -> np.ndarray:
    n = u.shape[-1]
    out = np.zeros(u.shape, dtype=bool)
    if k >= n:
        out[:] = True
    elif k > 0:
        idx = np.argpartition(u, k - 1, axis=-1)[..., :k]
        np.put_along_axis(out, idx, True, axis=-1)
    return out


class BirthdayCollision(CollisionProtocol):
    """Each player independently outputs a uniform ``k``-subset of ``[n]``."""

    def __init__(self, n: int, k: int):
        if not 1 <= k <= n:
            raise ValueError("need 1 <= k <= n")
        self.n, self.k = n, k
        self.ell = 0
        self.max_out = k
        self.span = n
        self.label = f"birthday(n={n},k={k})"

    def alice_sets(self, view):
        return _k_smallest_mask(view.coins(np.arange(self.n)), self.k)

    def bob_sets(self, view):
        return _k_smallest_mask(view.coins(np.arange(self.n)), self.k)

    def exact_stats(self, s):
        r = np.full(self.n, self.k / self.n)
        return r, r.copy(), r * r

    def coordinate_agreement(self, i):
        return constant_agreement(self.k / self.n)

    def to_dict(self):
        return {"kind": "collision", "construction": {"name": "birthday", "n": self.n, "k": self.k}}


def birthday_collision(n: int, k: int, s: BipartiteSource | None = None) -> BirthdayCollision:
    """Birthday protocol; private coins stand in for coins emulated from ``s`` samples."""
    if s is not None and is_degenerate(s):
        raise DegenerateSourceError("birthday protocol needs private coins, which a degenerate source cannot emulate")
    return BirthdayCollision(n, k)


class AgreementCollision(CollisionProtocol):
    """``n`` parallel copies of an agreement protocol with output truncation.

    Coordinate ``i`` reads the ``ell``-block at register ``i``; the player
    includes ``i`` with probability ``f`` of that block and outputs the empty
    set whenever more than ``T = ceil(3 n K) + 16`` coordinates were included.
    """

    def __init__(self, ag: AgreementProtocol, n: int, cost_bound: float):
        self.ag = ag
        self.n = n
        self.cost_bound = cost_bound
        self.threshold = math.ceil(3 * n * cost_bound) + 16
        self.max_out = self.threshold
        self.ell = ag.ell * n
        self.span = n
        self.label = f"from_agreement({ag.label},n={n})"

    def _sets(self, view, fn):
        idx = np.arange(self.n)
        vals = fn(view.read(idx, block=self.ag.ell))
        member = vals >= 1.0
        rows, cols = np.nonzero((vals > 0.0) & (vals < 1.0))
        if rows.size:
            # coins only where the outcome is actually random
            member[rows, cols] = view.coins_at(rows, cols) < vals[rows, cols]
        member[member.sum(axis=1) > self.threshold] = False
        return member

    def alice_sets(self, view):
        return self._sets(view, self.ag.f_values)

    def bob_sets(self, view):
        return self._sets(view, self.ag.g_values)

    def exact_stats(self, s):
        ev = eval_agreement(s, self.ag)
        q11 = ev.success.value
        qa, qb = ev.expect_f, ev.expect_g
        t, others = self.threshold, self.n - 1
        if others <= t - 1:
            ok_a = ok_b = ok_ab = 1.0
        else:
            ok_a = float(stats.binom.cdf(t - 1, others, qa))
            ok_b = float(stats.binom.cdf(t - 1, others, qb))
            ok_ab = _joint_count_cdf(others, t - 1, q11, qa - q11, qb - q11)
        n = self.n
        return np.full(n, qa * ok_a), np.full(n, qb * ok_b), np.full(n, q11 * ok_ab)

    def to_dict(self):
        return {"kind": "collision", "construction": {"name": "from_agreement",
                "agreement": self.ag.to_dict(), "n": self.n, "K": self.cost_bound}}


def _joint_count_cdf(trials: int, cap: int, q11: float, q10: float, q01: float) -> float:
    """``Pr[C_A <= cap and C_B <= cap]`` for counts of ``trials`` i.i.d. two-bit outcomes."""
    q00 = max(0.0, 1.0 - q11 - q10 - q01)
    dp = np.zeros((cap + 1, cap + 1))
    dp[0, 0] = 1.0
    for _ in range(trials):
        nxt = q00 * dp
        nxt[1:, :] += q10 * dp[:-1, :]
        nxt[:, 1:] += q01 * dp[:, :-1]
        nxt[1:, 1:] += q11 * dp[:-1, :-1]
        dp = nxt
    return float(dp.sum())


def collision_from_agreement(ag: AgreementProtocol, n: int, cost_bound: float | None = None,
                             s: BipartiteSource | None = None) -> AgreementCollision:
    """Lift an agreement protocol to a collision protocol on ``[n]``.

    ``cost_bound`` must exceed the protocol's cost. By default it is the
    exact cost on ``s`` plus ``1e-12``; without ``s`` the closed-form cost of
    a named construction is used.
    """
    if cost_bound is None:
        if s is not None:
            cost = eval_agreement(s, ag).cost.value
        else:
            cost = closed_form_cost(ag)
            if cost is None:
                raise ValueError("pass cost_bound or the source to compute it")
        cost_bound = cost + 1e-12
    return AgreementCollision(ag, n, cost_bound)


class AmplifiedCollision(CollisionProtocol):
    """Union of ``m`` independent repetitions."""

    def __init__(self, base: CollisionProtocol, m: int):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.base, self.m = base, m
        self.n = base.n
        self.max_out = m * base.max_out
        self.ell = m * base.ell
        self.span = m * base.span
        self.label = f"amplify({base.label},m={m})"

    def _sets(self, view, side):
        out = None
        for j in range(self.m):
            part = getattr(self.base, side)(view.shifted(j * self.base.span))
            out = part if out is None else (out | part)
        return out

    def alice_sets(self, view):
        return self._sets(view, "alice_sets")

    def bob_sets(self, view):
        return self._sets(view, "bob_sets")

    def exact_stats(self, s):
        a, b, c = self.base.exact_stats(s)
        m = self.m
        a2 = 1 - (1 - a) ** m
        b2 = 1 - (1 - b) ** m
        c2 = 1 - (1 - a) ** m - (1 - b) ** m + np.clip(1 - a - b + c, 0, 1) ** m
        return a2, b2, c2

    def to_dict(self):
        return {"kind": "collision", "construction": {"name": "amplify", "base": self.base.to_dict(), "m": self.m}}


def amplify_collision(pr: CollisionProtocol, m: int) -> CollisionProtocol:
    return pr if m == 1 else AmplifiedCollision(pr, m)


class ScaledCollision(CollisionProtocol):
    """``m`` independent copies on disjoint blocks of ``[m n]``."""

    def __init__(self, base: CollisionProtocol, m: int):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.base, self.m = base, m
        self.n = m * base.n
        self.max_out = m * base.max_out
        self.ell = m * base.ell
        self.span = m * base.span
        self.label = f"scale({base.label},m={m})"

    def _sets(self, view, side):
        parts = [getattr(self.base, side)(view.shifted(j * self.base.span)) for j in range(self.m)]
        return np.concatenate(parts, axis=1)

    def alice_sets(self, view):
        return self._sets(view, "alice_sets")

    def bob_sets(self, view):
        return self._sets(view, "bob_sets")

    def exact_stats(self, s):
        return tuple(np.tile(x, self.m) for x in self.base.exact_stats(s))

    def coordinate_agreement(self, i):
        return self.base.coordinate_agreement(i % self.base.n)

    def to_dict(self):
        return {"kind": "collision", "construction": {"name": "scale_domain", "base": self.base.to_dict(), "m": self.m}}


def scale_domain(pr: CollisionProtocol, m: int) -> CollisionProtocol:
    return pr if m == 1 else ScaledCollision(pr, m)


class _ProjectedView:
    """View of a product-source tape that only reveals the first factor."""

    def __init__(self, view, big: int, inner: int):
        self.view, self.big, self.inner = view, big, inner

    @property
    def trials(self):
        return self.view.trials

    def shifted(self, offset):
        return _ProjectedView(self.view.shifted(offset), self.big, self.inner)

    def coins(self, idx, stream=0):
        return self.view.coins(idx, stream)

    def coins_at(self, rows, idx, stream=0):
        return self.view.coins_at(rows, idx, stream)

    def read(self, idx, block=1, per_trial=False):
        return project_tuples(self.view.read(idx, block, per_trial), block, self.big, self.inner)


class LiftedCollision(CollisionProtocol):
    """A protocol for ``rho`` run on ``rho ⊗ sigma`` by ignoring the ``sigma`` halves."""

    def __init__(self, base: CollisionProtocol, rho: BipartiteSource, sigma: BipartiteSource):
        self.base, self.rho, self.sigma = base, rho, sigma
        self.n, self.max_out, self.ell, self.span = base.n, base.max_out, base.ell, base.span
        self.label = f"lift({base.label})"

    def alice_sets(self, view):
        return self.base.alice_sets(_ProjectedView(view, self.rho.u_size * self.sigma.u_size, self.sigma.u_size))

    def bob_sets(self, view):
        return self.base.bob_sets(_ProjectedView(view, self.rho.v_size * self.sigma.v_size, self.sigma.v_size))

    def exact_stats(self, s):
        return self.base.exact_stats(self.rho)

    def to_dict(self):
        raise NotImplementedError("lifted protocols are not serialisable; serialise the base protocol")


def lift_collision(pr: CollisionProtocol, rho: BipartiteSource, sigma: BipartiteSource) -> CollisionProtocol:
    """Run ``pr`` on ``rho ⊗ sigma`` reading only the ``rho`` part of each sample.

    Table protocols are re-tabulated over the product alphabet, so their exact
    statistics are recomputed on the product source rather than inherited.
    """
    if isinstance(pr, TableCollision):
        ell = pr.ell
        big_u, big_v = rho.u_size * sigma.u_size, rho.v_size * sigma.v_size
        size = float(big_u ** ell + big_v ** ell) * pr.n
        if size > DENSE_BUDGET:
            raise CapacityError("lifted collision tables", size, DENSE_BUDGET)
        a = pr.a_table[project_tuples(np.arange(big_u ** ell), ell, big_u, sigma.u_size)]
        b = pr.b_table[project_tuples(np.arange(big_v ** ell), ell, big_v, sigma.v_size)]
        return TableCollision(ell, a, b, pr.max_out, f"lift({pr.label})")
    return LiftedCollision(pr, rho, sigma)


def symmetrize(s: BipartiteSource, n: int, s_param: float, ag: AgreementProtocol | None = None) -> CollisionProtocol:
    """Coordinate-symmetric protocol whose intersection is empty with probability ``<= s_param``.

    Uses ``ceil(log s / log(1/e + 1/2))`` repetitions of the agreement-based
    protocol at success ``1/n``.
    """
    if not 0 < s_param < 1:
        raise ValueError("s_param must lie in (0, 1)")
    reps = max(1, math.ceil(math.log(s_param) / math.log(AMPLIFY_BASE)))
    if ag is None:
        ag = best_agreement(s, 1.0 / n)
    base = collision_from_agreement(ag, n, s=s)
    return amplify_collision(base, reps)


def symmetrize_repetitions(s_param: float) -> int:
    return max(1, math.ceil(math.log(s_param) / math.log(AMPLIFY_BASE)))


def pick_uniform(mask: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Uniform element of each row's True set (``-1`` for empty rows), driven by uniforms ``u``."""
    counts = mask.sum(axis=1)
    k = np.minimum((u * counts).astype(np.int64), np.maximum(counts - 1, 0))
    csum = np.cumsum(mask, axis=1)
    idx = np.argmax(csum > k[:, None], axis=1)
    return np.where(counts > 0, idx, -1)


@dataclass
class CollisionEval:
    per_i: list
    min_prob: float
    min_prob_low: float
    max_out_seen: int
    alice_rate: np.ndarray
    bob_rate: np.ndarray
    empty_rate: EstimateReport | None
    pick_counts: np.ndarray | None
    mode: str
    trials: int
    seed: int | None

    @property
    def both_rate(self) -> np.ndarray:
        return np.array([r.value for r in self.per_i])

    def to_dict(self) -> dict:
        return {"mode": self.mode, "trials": self.trials, "seed": self.seed,
                "min_prob": self.min_prob, "min_prob_low": self.min_prob_low,
                "max_out_seen": self.max_out_seen,
                "per_i": [r.to_dict() for r in self.per_i],
                "empty_rate": None if self.empty_rate is None else self.empty_rate.to_dict()}


def eval_collision(s: BipartiteSource, pr: CollisionProtocol, mode: str = "mc", trials: int = 100_000,
                   seed: int | None = None, chunk: int | None = None) -> CollisionEval:
    """Per-coordinate collision probabilities, exactly or by simulation.

    Monte Carlo results depend only on ``(seed, trials)``: trial ``t`` always
    uses the tape key derived from ``(seed, t)`` whatever the chunking.
    """
    if mode == "exact":
        a, b, c = pr.exact_stats(s)
        per = [EstimateReport.exact(x) for x in c]
        return CollisionEval(per, float(c.min()), float(c.min()), pr.max_out, a, b, None, None,
                             "exact", 0, None)
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    if seed is None:
        raise ValueError("Monte Carlo evaluation needs an explicit seed")
    if chunk is None:
        chunk = max(1, CHUNK_CELLS // max(1, pr.n))
    n = pr.n

    def run(rng):
        start, size = rng
        tape = SharedTape.from_seed(s, seed, size, start)
        a = pr.alice_sets(tape.alice())
        b = pr.bob_sets(tape.bob())
        seen = int(max(a.sum(axis=1).max(initial=0), b.sum(axis=1).max(initial=0)))
        if seen > pr.max_out:
            raise InvariantViolation(f"output size {seen} exceeds max_out {pr.max_out}")
        both = a & b
        picks = pick_uniform(both, _rng.counter_uniforms(tape.keys ^ np.uint64(0xA5A5A5A5), 0))
        pick_counts = np.bincount(picks[picks >= 0], minlength=n)
        return (a.sum(axis=0), b.sum(axis=0), both.sum(axis=0), int((picks < 0).sum()), seen, pick_counts)

    parts = ordered_map(run, chunk_ranges(trials, chunk))
    a_cnt = sum(p[0] for p in parts)
    b_cnt = sum(p[1] for p in parts)
    c_cnt = sum(p[2] for p in parts)
    empty = sum(p[3] for p in parts)
    seen = max(p[4] for p in parts)
    picks = sum(p[5] for p in parts)
    per = [EstimateReport.from_successes(float(x), trials, seed) for x in c_cnt]
    j = int(np.argmin(c_cnt))
    return CollisionEval(per, per[j].value, per[j].one_sided_low, seen, a_cnt / trials, b_cnt / trials,
                         EstimateReport.from_successes(float(empty), trials, seed), picks,
                         "monte_carlo", trials, seed)


def uniformity_pvalue(pick_counts) -> float:
    """Chi-square goodness-of-fit p-value of picked elements against uniform on ``[n]``."""
    counts = np.asarray(pick_counts, dtype=float)
    if counts.sum() == 0:
        return 1.0
    return float(stats.chisquare(counts).pvalue)


@dataclass
class AgreementExtraction:
    i_star: int
    cost: EstimateReport
    success: EstimateReport
    protocol: AgreementProtocol | None


def agreement_from_collision(s: BipartiteSource, pr: CollisionProtocol, mode: str = "exact",
                             p: float | None = None, trials: int = 100_000,
                             seed: int | None = None) -> AgreementExtraction:
    """Pick the coordinate with the cheapest membership indicators among those with success ``>= p``.

    ``p`` defaults to the protocol's own minimum per-coordinate probability.
    """
    ev = eval_collision(s, pr, mode, trials, seed)
    succ = ev.both_rate
    cost = ev.alice_rate + ev.bob_rate
    floor = succ.min() if p is None else p
    ok = np.flatnonzero(succ >= floor - 1e-15)
    if ok.size == 0:
        j = int(np.argmax(succ))
        raise InfeasibleError(f"no coordinate reaches success {floor:g}", (j, float(succ[j])))
    i_star = int(ok[np.argmin(cost[ok])])
    if mode == "exact":
        cost_rep = EstimateReport.exact(cost[i_star])
    else:
        la, ha = wilson_interval(ev.alice_rate[i_star] * trials, trials)
        lb, hb = wilson_interval(ev.bob_rate[i_star] * trials, trials)
        la1, ha1 = wilson_interval(ev.alice_rate[i_star] * trials, trials, Z_ONE_SIDED)
        lb1, hb1 = wilson_interval(ev.bob_rate[i_star] * trials, trials, Z_ONE_SIDED)
        cost_rep = EstimateReport(float(cost[i_star]), la + lb, ha + hb, trials, seed,
                                  "monte_carlo", la1 + lb1, ha1 + hb1)
    return AgreementExtraction(i_star, cost_rep, ev.per_i[i_star], pr.coordinate_agreement(i_star))


def collision_from_dict(obj: dict) -> CollisionProtocol:
    if obj.get("kind") != "collision":
        raise ValueError("not a collision protocol")
    if "tables" in obj:
        t = obj["tables"]
        return TableCollision.from_subsets(int(obj["ell"]), int(obj["n"]), t["A"], t["B"],
                                           max_out=obj.get("max_out"), label=obj.get("label", ""))
    c = obj["construction"]
    name = c.get("name")
    if name == "birthday":
        return BirthdayCollision(int(c["n"]), int(c["k"]))
    if name == "from_agreement":
        return AgreementCollision(agreement_from_dict(c["agreement"]), int(c["n"]), float(c["K"]))
    if name == "amplify":
        return AmplifiedCollision(collision_from_dict(c["base"]), int(c["m"]))
    if name == "scale_domain":
        return ScaledCollision(collision_from_dict(c["base"]), int(c["m"]))
    raise ValueError(f"unknown collision construction {name!r}")


def protocol_from_dict(obj: dict):
    """Decode either protocol kind from its JSON form."""
    kind = obj.get("kind")
    if kind == "agreement":
        return agreement_from_dict(obj)
    if kind == "collision":
        return collision_from_dict(obj)
    raise ValueError(f"unknown protocol kind {kind!r}")


__all__ = [
    "AgreementExtraction", "AmplifiedCollision", "AgreementCollision", "BirthdayCollision",
    "CollisionEval", "CollisionProtocol", "LiftedCollision", "ScaledCollision", "TableCollision",
    "agreement_from_collision", "amplify_collision", "birthday_collision", "collision_from_agreement",
    "collision_from_dict", "eval_collision", "lift_collision", "pick_uniform", "protocol_from_dict",
    "scale_domain", "symmetrize", "symmetrize_repetitions", "uniformity_pvalue",
]
