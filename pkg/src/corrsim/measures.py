"""Quality-of-correlation measures for bipartite sources.

Maximum correlation is the second singular value of the normalised joint
matrix. The remaining helpers cover weighted L_p norms, the conditional
expectation channel ``T``, hypercontractivity searches, generalised Hölder
gaps and base-2 entropy quantities over explicit joint tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import CapacityError, NumericalError
from .sources import BipartiteSource, is_degenerate, make_standard, marginals

HC_TOL = 1e-10
GRID_BUDGET = 2_000_000


def correlation_matrix(s: BipartiteSource) -> np.ndarray:
    """``rho(u, v) / sqrt(rho_U(u) rho_V(v))`` over the marginal supports."""
    mu, nu = marginals(s)
    rows, cols = np.flatnonzero(mu > 0), np.flatnonzero(nu > 0)
    sub = s.probs[np.ix_(rows, cols)]
    # scale by each root separately: the outer product of tiny marginals underflows
    return sub / np.sqrt(mu[rows])[:, None] / np.sqrt(nu[cols])[None, :]


@dataclass(frozen=True)
class CorrelationInfo:
    value: float
    degenerate: bool
    singular_values: np.ndarray = field(repr=False)


def max_correlation_info(s: BipartiteSource) -> CorrelationInfo:
    if is_degenerate(s):
        return CorrelationInfo(0.0, True, np.ones(1))
    a = correlation_matrix(s)
    try:
        sv = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    residual = abs(sv[0] - 1.0)
    if residual > 1e-9:
        raise NumericalError("top singular value of correlation matrix is not 1", residual)
    value = float(np.clip(sv[1], 0.0, 1.0)) if sv.size > 1 else 0.0
    return CorrelationInfo(value, False, sv)


def max_correlation(s: BipartiteSource) -> float:
    """Maximum correlation in ``[0, 1]``; ``0`` for degenerate sources."""
    return max_correlation_info(s).value


def correlation_bound_gap(s: BipartiteSource, f, g) -> float:
    """``E f E g + Cor sqrt(Var f Var g) - E[f g]``; never negative up to rounding."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    mu, nu = marginals(s)
    ef, eg = mu @ f, nu @ g
    var_f = max(0.0, mu @ (f * f) - ef * ef)
    var_g = max(0.0, nu @ (g * g) - eg * eg)
    efg = f @ s.probs @ g
    return float(ef * eg + max_correlation(s) * np.sqrt(var_f * var_g) - efg)


def lp_norm(f, mu, p: float):
    """``(E_mu |f|^p)^(1/p)``; ``p = inf`` gives the max over the support of ``mu``.

    ``f`` may carry leading batch axes; the last axis is indexed by the domain.
    """
    a = np.abs(np.asarray(f))
    mu = np.asarray(mu, dtype=np.float64)
    if np.isinf(p):
        out = np.where(mu > 0, a, 0.0).max(axis=-1)
    else:
        if p < 1:
            raise ValueError("p must be >= 1")
        out = (a**p @ mu) ** (1.0 / p)
    return float(out) if np.ndim(out) == 0 else out


def apply_channel(s: BipartiteSource, f) -> np.ndarray:
    """``(T f)(v) = sum_u rho(u, v) / rho_V(v) f(u)``; entries with ``rho_V(v) = 0`` are 0."""
    _, nu = marginals(s)
    num = np.asarray(f) @ s.probs
    out = np.zeros_like(num)
    on = nu > 0
    out[..., on] = num[..., on] / nu[on]
    return out


@dataclass
class HcReport:
    holds: bool
    worst_gap: float
    witness: np.ndarray
    candidates: int
    q: float
    p: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "worst_gap": self.worst_gap,
                "witness": self.witness.tolist(), "candidates": self.candidates,
                "q": self.q, "p": self.p}


def _hc_gaps(s: BipartiteSource, q: float, p: float, fs: np.ndarray) -> np.ndarray:
    mu, nu = marginals(s)
    norm_p = np.atleast_1d(lp_norm(fs, mu, p))
    keep = norm_p > 0
    fs = fs[keep] / norm_p[keep, None]
    norm_q = np.atleast_1d(lp_norm(apply_channel(s, fs), nu, q))
    gaps = np.full(len(keep), np.inf)
    gaps[keep] = 1.0 - norm_q
    return gaps


def _indicator_candidates(k: int) -> np.ndarray:
    if k > 16:
        return np.eye(k)
    masks = np.arange(1, 1 << k)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(np.float64)


def check_hypercontractive(s: BipartiteSource, q: float, p: float, grid: int | None = None,
                           random: int | None = None, seed: int | None = None,
                           batch: int = 65536) -> HcReport:
    """Search nonnegative ``f`` with ``||f||_p = 1`` for ``||T f||_q > 1``.

    ``grid=N`` enumerates every ``f`` with entries in ``{0, 1/N, ..., 1}``;
    ``random=K`` draws ``K`` functions with i.i.d. exponential entries (needs
    ``seed``). Indicator functions of every nonempty subset are always tried.
    The result is evidence, not a proof.
    """
    if not 1 <= p <= q:
        raise ValueError("need 1 <= p <= q")
    if (grid is None) == (random is None):
        raise ValueError("choose exactly one of grid or random")
    k = s.u_size
    best_gap, best_f, count = np.inf, None, 0

    def consider(fs):
        nonlocal best_gap, best_f, count
        gaps = _hc_gaps(s, q, p, fs)
        count += len(fs)
        j = int(np.argmin(gaps))
        if gaps[j] < best_gap:
            best_gap, best_f = float(gaps[j]), fs[j].copy()

    consider(_indicator_candidates(k))
    if grid is not None:
        total = (grid + 1) ** k
        if total > GRID_BUDGET:
            raise CapacityError("hypercontractivity grid", total, GRID_BUDGET)
        levels = np.arange(grid + 1) / grid
        idx = np.arange(total)
        pts = np.stack([levels[(idx // (grid + 1) ** (k - 1 - j)) % (grid + 1)] for j in range(k)], axis=1)
        for start in range(0, total, batch):
            consider(pts[start:start + batch])
    else:
        if seed is None:
            raise ValueError("random search needs an explicit seed")
        rng = _rng.generator(seed, "hc-search")
        done = 0
        while done < random:
            take = min(batch, random - done)
            consider(rng.exponential(size=(take, k)))
            done += take
    mu, _ = marginals(s)
    witness = best_f / lp_norm(best_f, mu, p)
    return HcReport(best_gap >= -HC_TOL, best_gap, witness, count, q, p)


def disj_hc_gap(alpha, beta):
    """Closed form of ``||f||_{3/2}^3 - ||T f||_3^3`` on the disjointness source, ``f = (alpha, beta)``."""
    ra, rb = np.sqrt(alpha), np.sqrt(beta)
    return (ra - rb) ** 4 * (alpha + 4 * ra * rb + beta) / 36.0


def disj_hc_gap_norms(alpha, beta):
    """Same quantity evaluated through the weighted norms and the channel (vectorised)."""
    s = make_standard("disj")
    mu, nu = marginals(s)
    f = np.stack(np.broadcast_arrays(np.asarray(alpha, np.float64), np.asarray(beta, np.float64)), axis=-1)
    return lp_norm(f, mu, 1.5) ** 3 - lp_norm(apply_channel(s, f), nu, 3.0) ** 3


def check_hoelder(s: BipartiteSource, p: float, q_prime: float, f, g) -> float:
    """``||f||_p ||g||_{q'} - |E[f g]|``."""
    mu, nu = marginals(s)
    efg = np.asarray(f) @ s.probs @ np.asarray(g)
    return float(lp_norm(f, mu, p) * lp_norm(g, nu, q_prime) - abs(efg))


def entropy(dist) -> float:
    """Shannon entropy in bits of an array of probabilities (any shape)."""
    p = np.asarray(dist, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def marginal_entropy(joint, axes) -> float:
    """Entropy of the marginal of ``joint`` on ``axes``."""
    joint = np.asarray(joint, dtype=np.float64)
    axes = tuple(axes)
    if not axes:
        return 0.0
    drop = tuple(a for a in range(joint.ndim) if a not in axes)
    return entropy(joint.sum(axis=drop))


def cond_entropy(joint, target=(0,), given=(1,)) -> float:
    """``H(target | given)``; default ``H(X | Y)`` for a 2-D joint table."""
    both = tuple(sorted(set(target) | set(given)))
    return marginal_entropy(joint, both) - marginal_entropy(joint, given)


def mutual_info(joint, a=(0,), b=(1,)) -> float:
    """``I(a ; b) = H(a) + H(b) - H(a b)``."""
    both = tuple(sorted(set(a) | set(b)))
    return marginal_entropy(joint, a) + marginal_entropy(joint, b) - marginal_entropy(joint, both)


def cond_mutual_info(joint, a, b, c) -> float:
    """``I(a ; b | c) = H(a c) + H(b c) - H(a b c) - H(c)``."""
    def h(*groups):
        return marginal_entropy(joint, tuple(sorted(set(itertools.chain(*groups)))))
    return h(a, c) + h(b, c) - h(a, b, c) - h(c)


def entropy_given_event(domain_size: int, event_prob: float) -> float:
    """Lower bound ``log|X| - log(1/Pr[P])`` on ``H(X | P)`` for uniform ``X``."""
    if not 0 < event_prob <= 1:
        raise ValueError("event_prob must lie in (0, 1]")
    return float(np.log2(domain_size) + np.log2(event_prob))


def entropy_on_event(dist, event) -> float:
    """``H(X | X in event)`` for an explicit distribution and boolean event mask."""
    dist = np.asarray(dist, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    mass = dist[event].sum()
    if mass <= 0:
        raise ValueError("event has zero probability")
    return entropy(dist[event] / mass)
