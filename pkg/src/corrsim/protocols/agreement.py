"""Agreement protocols ``(ell, f, g)`` and their constructions.

Player functions act on ``ell``-tuple indices (see :mod:`corrsim.sources` for
the digit order). ``table`` protocols store ``f`` and ``g`` as arrays of
length ``|U|**ell`` and ``|V|**ell``; ``callable`` protocols evaluate a rule
on index arrays, so they work for any ``ell``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import _rng
from ..errors import CapacityError, InfeasibleError
from ..estimates import EstimateReport
from ..sources import (DENSE_BUDGET, BipartiteSource, block_table, is_product, make_standard,
                       tuple_marginals)

EXACT_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class AgreementProtocol:
    ell: int
    u_size: int
    v_size: int
    f: np.ndarray | Callable = field(repr=False)
    g: np.ndarray | Callable = field(repr=False)
    label: str = ""
    construction: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("ell must be non-negative")
        for name, size in (("f", self.u_size ** self.ell), ("g", self.v_size ** self.ell)):
            fn = getattr(self, name)
            if callable(fn):
                continue
            _check_table_budget(size)
            arr = np.array(fn, dtype=np.float64)
            if arr.shape != (size,):
                raise ValueError(f"{name} table has shape {arr.shape}, expected ({size},)")
            if np.any(arr < -1e-15) or np.any(arr > 1 + 1e-15):
                raise ValueError(f"{name} values must lie in [0, 1]")
            arr = np.clip(arr, 0.0, 1.0)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def representation(self) -> str:
        return "callable" if callable(self.f) or callable(self.g) else "table"

    def f_values(self, idx) -> np.ndarray:
        return self.f(np.asarray(idx)) if callable(self.f) else self.f[idx]

    def g_values(self, idx) -> np.ndarray:
        return self.g(np.asarray(idx)) if callable(self.g) else self.g[idx]

    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense tables (materialising callables when within budget)."""
        fu = self.f_values(np.arange(_check_table_budget(self.u_size ** self.ell)))
        gv = self.g_values(np.arange(_check_table_budget(self.v_size ** self.ell)))
        return np.asarray(fu, np.float64), np.asarray(gv, np.float64)

    def to_dict(self) -> dict:
        out = {"kind": "agreement", "ell": self.ell, "u_size": self.u_size,
               "v_size": self.v_size, "label": self.label}
        if self.construction is not None:
            out["construction"] = self.construction
        else:
            f, g = self.tables()
            out["tables"] = {"f": f.tolist(), "g": g.tolist()}
        return out


def _check_table_budget(size: int) -> int:
    if size > DENSE_BUDGET:
        raise CapacityError("agreement table", size, DENSE_BUDGET)
    return size


def constant_agreement(a: float, b: float | None = None, u_size: int = 2, v_size: int = 2) -> AgreementProtocol:
    """``ell = 0`` protocol with constant outputs ``a`` and ``b`` (default ``b = a``)."""
    b = a if b is None else b
    return AgreementProtocol(0, u_size, v_size, np.array([a]), np.array([b]), f"const({a:g},{b:g})",
                             {"name": "constant", "a": a, "b": b, "u_size": u_size, "v_size": v_size})


def _ell_for_base(p: float, base: int) -> int:
    """Largest ``k`` with ``base**k * p <= 1`` (exact integer search, no log rounding)."""
    k = 0
    while base ** (k + 1) * p <= 1.0:
        k += 1
    return k


def disj_agreement(p: float) -> AgreementProtocol:
    """Protocol for the disjointness source with success ``6**-ell >= p``.

    ``f`` fires when every coordinate equals 1; ``g`` outputs ``2**-ell`` when
    every coordinate equals 0.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    ell = _ell_for_base(p, 6)
    ones = 2**ell - 1
    weight = 2.0**-ell

    def f(idx):
        return (idx == ones).astype(np.float64)

    def g(idx):
        return np.where(idx == 0, weight, 0.0)

    return AgreementProtocol(ell, 2, 2, f, g, f"disj_agreement(ell={ell})",
                             {"name": "disj_agreement", "p": p})


def perf_agreement(p: float) -> AgreementProtocol:
    """``ell = floor(log2(1/p))`` perfect bits; both players fire on the all-zero tuple."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    ell = _ell_for_base(p, 2)

    def ind(idx):
        return (idx == 0).astype(np.float64)

    return AgreementProtocol(ell, 2, 2, ind, ind, f"perf_agreement(ell={ell})",
                             {"name": "perf_agreement", "p": p})


@dataclass(frozen=True)
class AgreementEval:
    cost: EstimateReport
    success: EstimateReport
    expect_f: float
    expect_g: float


def closed_form_cost(pr: AgreementProtocol) -> float | None:
    """Cost of a named construction on its intended source, or ``None`` for other protocols."""
    c = pr.construction or {}
    name = c.get("name")
    if name == "disj_agreement":
        return 2.0 * 3.0**-pr.ell
    if name == "perf_agreement":
        return 2.0 * 2.0**-pr.ell
    if name == "constant":
        return float(c["a"] + c["b"])
    return None


def eval_agreement(s: BipartiteSource, pr: AgreementProtocol, mode: str = "exact",
                   trials: int = 100_000, seed: int | None = None) -> AgreementEval:
    """Cost ``E f + E g`` and success ``E[f g]`` under the ``ell``-fold power of ``s``."""
    if (s.u_size, s.v_size) != (pr.u_size, pr.v_size):
        raise ValueError("protocol alphabet does not match the source")
    if mode == "exact":
        n_terms = np.count_nonzero(s.probs) ** pr.ell
        if n_terms > EXACT_BUDGET:
            raise CapacityError("exact agreement evaluation (use mode='mc')", n_terms, EXACT_BUDGET)
        table = block_table(s, pr.ell)
        fu = pr.f_values(table.u)
        gv = pr.g_values(table.v)
        ef = float(table.weights @ fu)
        eg = float(table.weights @ gv)
        efg = float(table.weights @ (fu * gv))
        return AgreementEval(EstimateReport.exact(ef + eg), EstimateReport.exact(efg), ef, eg)
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    if seed is None:
        raise ValueError("Monte Carlo evaluation needs an explicit seed")
    u, v = sample_tuples(s, pr.ell, trials, _rng.generator(seed, "eval_agreement"))
    fu, gv = pr.f_values(u), pr.g_values(v)
    return AgreementEval(EstimateReport.from_samples(fu + gv, seed),
                         EstimateReport.from_samples(fu * gv, seed),
                         float(fu.mean()), float(gv.mean()))


def sample_tuples(s: BipartiteSource, ell: int, count: int, rng: np.random.Generator):
    """``count`` draws of ``ell``-tuples as tuple indices, one coordinate at a time."""
    table = block_table(s, 1)
    u = np.zeros(count, dtype=np.int64)
    v = np.zeros(count, dtype=np.int64)
    for _ in range(ell):
        pos = table.lookup(rng.random(count))
        u = u * s.u_size + table.u[pos]
        v = v * s.v_size + table.v[pos]
    return u, v


def project_tuples(idx, ell: int, big: int, inner: int) -> np.ndarray:
    """Map ``ell``-tuples over a product alphabet ``small x inner`` to their first factors."""
    idx = np.asarray(idx, dtype=np.int64)
    small = big // inner
    out = np.zeros_like(idx)
    for j in range(ell):
        digit = (idx // big ** (ell - 1 - j)) % big
        out = out * small + digit // inner
    return out


def lift_agreement(pr: AgreementProtocol, rho: BipartiteSource, sigma: BipartiteSource) -> AgreementProtocol:
    """Run ``pr`` (built for ``rho``) on ``rho ⊗ sigma``, ignoring the ``sigma`` halves."""
    su, sv = sigma.u_size, sigma.v_size
    big_u, big_v = rho.u_size * su, rho.v_size * sv
    ell = pr.ell

    def f(idx):
        return pr.f_values(project_tuples(idx, ell, big_u, su))

    def g(idx):
        return pr.g_values(project_tuples(idx, ell, big_v, sv))

    return AgreementProtocol(ell, big_u, big_v, f, g, f"lift({pr.label})")


def _power_matrix(s: BipartiteSource, ell: int) -> np.ndarray:
    size = float(s.u_size ** ell) * s.v_size ** ell
    if size > DENSE_BUDGET:
        raise CapacityError(f"joint table of the {ell}-fold power", size, DENSE_BUDGET)
    out = np.ones((1, 1))
    for _ in range(ell):
        out = np.kron(out, s.probs)
    return out


def _balanced_response(mu: np.ndarray, w: np.ndarray, other_cost: float, p: float):
    """Best ``f`` plus rescaling ``lam`` of the fixed side.

    Minimises ``lam * other_cost + E_mu f`` subject to ``sum f w >= p / lam``,
    ``0 <= f <= 1`` and ``lam <= 1``. ``w`` is the success contribution of each
    tuple at ``lam = 1``. Returns ``(cost, f, lam)`` or ``None`` if infeasible.
    """
    pos = np.flatnonzero(w > 1e-15 * max(float(w.max()), 1e-300))
    total = float(w[pos].sum())
    if total < p * (1 - 1e-12):
        return None
    order = pos[np.argsort(mu[pos] / w[pos], kind="stable")]
    slopes = mu[order] / w[order]
    cum_w = np.concatenate(([0.0], np.cumsum(w[order])))
    cum_c = np.concatenate(([0.0], np.cumsum(mu[order])))

    def h(r):
        k = min(int(np.searchsorted(cum_w, r, side="left")), len(order))
        k = max(k, 1)
        return cum_c[k - 1] + slopes[k - 1] * (r - cum_w[k - 1])

    lo = min(p, total)
    candidates = {lo, total}
    for k in range(len(order)):
        a, b = max(cum_w[k], lo), cum_w[k + 1]
        if b < lo:
            continue
        candidates.add(a)
        candidates.add(min(b, total))
        if slopes[k] > 0 and other_cost > 0:
            r = math.sqrt(p * other_cost / slopes[k])
            if a <= r <= b:
                candidates.add(r)
    best = None
    for r in candidates:
        r = min(max(r, lo), total)
        cost = p * other_cost / r + h(r)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, r)
    cost, r = best
    f = np.zeros_like(mu)
    need = r
    for j in order:
        if need <= 0:
            break
        take = min(1.0, need / w[j])
        f[j] = take
        need -= take * w[j]
    return cost, f, p / r


def optimize_agreement(s: BipartiteSource, ell: int, p: float, iters: int = 50,
                       seed: int = 0, random_starts: int = 8, max_starts: int = 256) -> AgreementProtocol:
    """Alternating search over table protocols at fixed ``ell``.

    Each half-step fixes one player's function up to scale and solves the
    other side exactly: a fractional knapsack in ``f`` combined with the best
    rescaling of ``g``. The cost is non-increasing along a run; several
    deterministic and seeded random starts are tried and the cheapest
    feasible protocol is returned.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    joint = _power_matrix(s, ell)
    mu, nu = tuple_marginals(s, ell)
    nu_sz, nv_sz = joint.shape
    if joint.sum() < p * (1 - 1e-12):
        raise InfeasibleError(f"max achievable success {joint.sum():.6g} < p", joint.sum())
    rng = _rng.generator(seed, "optimize_agreement", ell)

    starts: list[tuple[str, np.ndarray]] = [("g", np.ones(nv_sz)), ("f", np.ones(nu_sz))]
    for side, size in (("g", nv_sz), ("f", nu_sz)):
        idx = np.arange(size)
        if size > max_starts:
            idx = np.sort(rng.choice(size, max_starts, replace=False))
        for j in idx:
            e = np.zeros(size)
            e[j] = 1.0
            starts.append((side, e))
    for _ in range(random_starts):
        starts.append(("g", rng.random(nv_sz)))

    best = None
    for side, vec in starts:
        if side == "g":
            f, g = None, vec
        else:
            f, g = vec, None
        cost = np.inf
        for _ in range(iters):
            if g is not None:
                res = _balanced_response(mu, joint @ g, float(nu @ g), p)
                if res is None:
                    break
                new_cost, f, lam = res
                g = g * lam
            res = _balanced_response(nu, f @ joint, float(mu @ f), p)
            if res is None:
                break
            new_cost, g, lam = res
            f = f * lam
            if new_cost >= cost - 1e-14:
                cost = min(cost, new_cost)
                break
            cost = new_cost
        if f is None or g is None or not np.isfinite(cost):
            continue
        success = float(f @ joint @ g)
        total = float(mu @ f + nu @ g)
        if success >= p * (1 - 1e-9) and (best is None or total < best[0]):
            best = (total, f.copy(), g.copy())
    if best is None:
        raise InfeasibleError("no feasible start found")
    _, f, g = best
    return AgreementProtocol(ell, s.u_size, s.v_size, np.clip(f, 0, 1), np.clip(g, 0, 1),
                             f"optimized(ell={ell},p={p:g})")


def _same(s: BipartiteSource, name: str) -> bool:
    ref = make_standard(name)
    return s.shape == ref.shape and np.allclose(s.probs, ref.probs, atol=1e-12)


def best_agreement(s: BipartiteSource, p: float, max_ell: int | None = None, seed: int = 0) -> AgreementProtocol:
    """Cheapest available agreement protocol at success ``>= p``.

    Named constructions are used for the perfect and disjointness sources (the
    latter falls back to the constant ``sqrt(p)`` protocol when that is
    cheaper) and the constant protocol for product sources. Other sources get
    the optimiser at every ``ell`` whose joint table fits, plus the constant
    fallback.
    """
    if _same(s, "perf"):
        return perf_agreement(p)
    const = constant_agreement(math.sqrt(p), u_size=s.u_size, v_size=s.v_size)
    if _same(s, "disj"):
        named = disj_agreement(p)
        return named if 2 * 3.0**-named.ell <= 2 * math.sqrt(p) else const
    if is_product(s):
        return const
    best, best_cost = const, 2 * math.sqrt(p)
    ell = 1
    while (s.u_size * s.v_size) ** ell <= 4096 and (max_ell is None or ell <= max_ell):
        cand = optimize_agreement(s, ell, p, seed=seed)
        cost = eval_agreement(s, cand).cost.value
        if cost < best_cost:
            best, best_cost = cand, cost
        ell += 1
    return best


def agreement_from_dict(obj: dict) -> AgreementProtocol:
    if obj.get("kind") != "agreement":
        raise ValueError("not an agreement protocol")
    if "construction" in obj:
        c = obj["construction"]
        name = c.get("name")
        if name == "disj_agreement":
            return disj_agreement(float(c["p"]))
        if name == "perf_agreement":
            return perf_agreement(float(c["p"]))
        if name == "constant":
            return constant_agreement(float(c["a"]), float(c["b"]), int(c["u_size"]), int(c["v_size"]))
        raise ValueError(f"unknown agreement construction {name!r}")
    t = obj["tables"]
    return AgreementProtocol(int(obj["ell"]), int(obj["u_size"]), int(obj["v_size"]),
                             np.asarray(t["f"]), np.asarray(t["g"]), obj.get("label", ""))
