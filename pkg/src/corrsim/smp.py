"""Simultaneous-message protocols over a shared source.

Alice and Bob each map (input, their half of the tape) to a message; the
referee maps the two messages (plus its own private coins) to an answer.
Answers are small integers, with ``BOTTOM = -1`` for "outside the promise".
A ``pseudo`` protocol's referee additionally receives both players' halves
of the shared randomness.

Inputs are passed either as one value used in every trial or, with
``batched=True``, as an array whose leading axis indexes trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _rng
from ._parallel import chunk_ranges, ordered_map
from .errors import CapacityError, DegenerateSourceError, InvariantViolation, PromiseError
from .estimates import EstimateReport
from .protocols.collision import CollisionProtocol, pick_uniform, symmetrize
from .sources import (BipartiteSource, ceil_log2, is_product, make_standard, marginals, parity_of_and,
                      sample_sigma)
from .tape import PlayerView, SharedTape

BOTTOM = -1
REFEREE_COINS = 16
WITNESS_EXHAUSTIVE_MAX = 12


@dataclass
class Message:
    """Per-trial message payload plus its length in bits (scalar or per trial)."""

    payload: object
    bits: int | np.ndarray


@dataclass
class SmpProtocol:
    name: str
    alice: Callable
    bob: Callable
    referee: Callable
    bits_alice: int
    bits_bob: int
    sample_count: int
    problem: Callable | None = None
    pseudo: bool = False
    info: dict = field(default_factory=dict)

    @property
    def cost(self) -> int:
        return self.bits_alice + self.bits_bob

    def accounting(self) -> dict:
        return {"bits_alice": self.bits_alice, "bits_bob": self.bits_bob, "rho_samples": self.sample_count}


def _select(x, batched: bool, start: int, size: int):
    if batched:
        return np.asarray(x)[start:start + size]
    x = np.asarray(x)
    return np.broadcast_to(x, (size,) + x.shape)


def _check_bits(msg: Message, declared: int, who: str):
    seen = int(np.max(msg.bits)) if np.size(msg.bits) else 0
    if seen > declared:
        raise InvariantViolation(f"{who} sent {seen} bits, declared cost {declared}")


def smp_answers(s: BipartiteSource, pr: SmpProtocol, x, y, trials: int, seed: int,
                batched: bool = False, chunk: int = 2048) -> np.ndarray:
    """Referee outputs for ``trials`` independent runs; deterministic given ``seed``."""

    def run(rng):
        start, size = rng
        tape = SharedTape.from_seed(s, seed, size, start)
        va, vb = tape.alice(), tape.bob()
        xa, yb = _select(x, batched, start, size), _select(y, batched, start, size)
        ma, mb = pr.alice(xa, va), pr.bob(yb, vb)
        _check_bits(ma, pr.bits_alice, "Alice")
        _check_bits(mb, pr.bits_bob, "Bob")
        with np.errstate(over="ignore"):
            ref_keys = _rng.mix64(tape.keys ^ np.uint64(0x7E7E7E7E7E7E7E7E))
        coins = _rng.counter_uniforms(ref_keys[:, None], np.arange(REFEREE_COINS, dtype=np.uint64)[None, :])
        if pr.pseudo:
            return np.asarray(pr.referee(ma, mb, coins, va, vb))
        return np.asarray(pr.referee(ma, mb, coins))

    return np.concatenate(ordered_map(run, chunk_ranges(trials, chunk)))


def run_smp(s: BipartiteSource, pr: SmpProtocol, x, y, trials: int, seed: int,
            expected=None, batched: bool = False, chunk: int = 2048) -> EstimateReport:
    """Monte Carlo success probability on the given inputs.

    ``expected`` defaults to ``pr.problem(x, y)``; inputs whose expected answer
    is ``BOTTOM`` violate the promise and raise :class:`PromiseError`.
    """
    if expected is None:
        if pr.problem is None:
            raise ValueError("protocol has no problem definition; pass expected")
        expected = pr.problem(np.asarray(x), np.asarray(y))
    expected = np.asarray(expected)
    if np.any(expected == BOTTOM):
        raise PromiseError("input outside the promise of the problem")
    answers = smp_answers(s, pr, x, y, trials, seed, batched, chunk)
    if batched:
        expected = expected[:trials]
    correct = answers == expected
    return EstimateReport.from_successes(float(correct.sum()), trials, seed)


# equality

@dataclass(frozen=True)
class WitnessSets:
    lambda_a: tuple
    lambda_b: tuple
    gamma: float
    gamma_prime: float

    @property
    def delta(self) -> float:
        return abs(self.gamma - self.gamma_prime)


def _mask_members(mask: int, size: int) -> tuple:
    return tuple(i for i in range(size) if mask >> i & 1)


def find_witness_sets(s: BipartiteSource) -> WitnessSets:
    """Sets ``La, Lb`` maximising ``|Pr[u in La, v in Lb] - Pr[u in La] Pr[v in Lb]|``.

    Exhaustive for alphabets up to 12 symbols (masks scanned from the largest
    down, first maximum kept); otherwise alternating best responses started
    from sign patterns of the second singular vectors.
    """
    if is_product(s):
        raise DegenerateSourceError("product source: no witness sets exist")
    mu, nu = marginals(s)
    ku, kv = s.u_size, s.v_size
    if max(ku, kv) <= WITNESS_EXHAUSTIVE_MAX:
        def bits(k):
            masks = np.arange((1 << k) - 1, 0, -1)
            return masks, ((masks[:, None] >> np.arange(k)) & 1).astype(np.float64)

        ma, ia = bits(ku)
        mb, ib = bits(kv)
        gamma = ia @ s.probs @ ib.T
        gprime = np.outer(ia @ mu, ib @ nu)
        delta = np.abs(gamma - gprime)
        flat = int(np.argmax(delta >= delta.max() - 1e-15))
        ja, jb = divmod(flat, len(mb))
        la, lb = _mask_members(int(ma[ja]), ku), _mask_members(int(mb[jb]), kv)
    else:
        la, lb = _greedy_witness(s, mu, nu)
    g = float(s.probs[np.ix_(la, lb)].sum())
    gp = float(mu[list(la)].sum() * nu[list(lb)].sum())
    return WitnessSets(la, lb, g, gp)


def _greedy_witness(s, mu, nu):
    from .measures import correlation_matrix

    cols = np.flatnonzero(nu > 0)
    _, _, vt = np.linalg.svd(correlation_matrix(s))
    best = (-1.0, None, None)
    d = s.probs - np.outer(mu, nu)
    for sign in (1.0, -1.0):
        lb = cols[sign * vt[1] > 0]
        for _ in range(20):
            col = d[:, lb].sum(axis=1)
            la = np.flatnonzero(sign * col > 0)
            row = d[la, :].sum(axis=0)
            new_lb = np.flatnonzero(sign * row > 0)
            if np.array_equal(new_lb, lb):
                break
            lb = new_lb
        if len(la) and len(lb):
            val = abs(d[np.ix_(la, lb)].sum())
            if val > best[0]:
                best = (val, tuple(int(i) for i in la), tuple(int(i) for i in lb))
    return best[1], best[2]


def equality_repetitions(delta: float, error_target: float) -> int:
    return math.ceil(4.0 * math.log(1.0 / error_target) / delta**2)


def equality_problem(x, y):
    return (np.asarray(x) == np.asarray(y)).astype(np.int64)


def equality_protocol(s: BipartiteSource, n: int, error_target: float = 1 / 3) -> SmpProtocol:
    """Equality on ``n``-bit inputs using ``2**n`` lazily generated registers.

    Round ``r`` for input ``x`` reads register ``x * t + r``. Alice sends the
    bits ``1{u in La}``, Bob ``1{v in Lb}``; the referee counts rounds where
    both are 1 and compares with ``t (gamma + gamma') / 2`` (ties answer
    "equal"). Answers: 1 for equal, 0 for different.
    """
    if not 1 <= n <= 30:
        raise ValueError("n must lie in 1..30")
    w = find_witness_sets(s)
    t = equality_repetitions(w.delta, error_target)
    in_a = np.zeros(s.u_size, dtype=bool)
    in_a[list(w.lambda_a)] = True
    in_b = np.zeros(s.v_size, dtype=bool)
    in_b[list(w.lambda_b)] = True
    rounds = np.arange(t, dtype=np.int64)
    threshold = t * (w.gamma + w.gamma_prime) / 2.0
    high = w.gamma > w.gamma_prime

    def player(table):
        def send(x, view: PlayerView):
            x = np.asarray(x, dtype=np.int64)
            if np.any((x < 0) | (x >> n != 0)):
                raise ValueError(f"inputs must be {n}-bit integers")
            sym = view.read(x[:, None] * t + rounds[None, :], per_trial=True)
            return Message(table[sym], t)
        return send

    def referee(ma, mb, coins):
        count = (ma.payload & mb.payload).sum(axis=1)
        eq = count >= threshold if high else count <= threshold
        return eq.astype(np.int64)

    info = {"witness": w, "t": t, "threshold": threshold, "registers": (1 << n) * t}
    return SmpProtocol(f"equality(n={n})", player(in_a), player(in_b), referee, t, t, (1 << n) * t,
                       equality_problem, False, info)


def equality_round_rates(s: BipartiteSource, pr: SmpProtocol, x, y, trials: int, seed: int) -> EstimateReport:
    """Fraction of rounds with both witness bits set, pooled over trials."""
    tape = SharedTape.from_seed(s, seed, trials)
    ma = pr.alice(np.full(trials, x), tape.alice())
    mb = pr.bob(np.full(trials, y), tape.bob())
    hits = (ma.payload & mb.payload).astype(np.float64)
    return EstimateReport.from_successes(float(hits.sum()), hits.size, seed)


# GAPIP

@dataclass
class GapipInstance:
    n: int
    m: int
    x: np.ndarray
    y: np.ndarray
    truth: int


def gapip_eval(x, y) -> np.ndarray | int:
    """1 if at least 2n/3 blockwise inner products are 1, 0 if at least 2n/3 are 0, else BOTTOM.

    Blocks are integers holding ``m``-bit vectors; the last axis indexes blocks.
    """
    x, y = np.asarray(x, dtype=np.uint64), np.asarray(y, dtype=np.uint64)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    n = x.shape[-1]
    ones = parity_of_and(x, y).sum(axis=-1, dtype=np.int64)
    zeros = n - ones
    out = np.where(3 * zeros >= 2 * n, 0, np.where(3 * ones >= 2 * n, 1, BOTTOM))
    return int(out) if out.ndim == 0 else out


def gapip_recount(x, y) -> int:
    """Scalar reference evaluation with Python integers."""
    n = len(x)
    ones = sum(bin(int(a) & int(b)).count("1") % 2 for a, b in zip(x, y))
    zeros = n - ones
    if 3 * zeros >= 2 * n:
        return 0
    if 3 * ones >= 2 * n:
        return 1
    return BOTTOM


def sample_gapip_batch(n: int, m: int, b, count: int, rng: np.random.Generator):
    """``count`` promise instances with answer ``b`` (scalar or per-instance array)."""
    if not 2 <= m <= 63:
        raise ValueError("m must lie in 2..63")
    b = np.broadcast_to(np.asarray(b, dtype=np.int64), (count,))
    size = math.ceil(2 * n / 3)
    x = rng.integers(0, 1 << m, size=(count, n), dtype=np.uint64)
    y = rng.integers(0, 1 << m, size=(count, n), dtype=np.uint64)
    keys = rng.random((count, n))
    chosen = np.argsort(keys, axis=1)[:, :size]
    for bit in (0, 1):
        rows = np.flatnonzero(b == bit)
        if rows.size == 0:
            continue
        xs, ys = sample_sigma(m, bit, rows.size * size, rng)
        r = np.repeat(rows, size)
        c = chosen[rows].ravel()
        x[r, c] = xs
        y[r, c] = ys
    return x, y


def sample_gapip_instance(n: int, m: int, b: int, seed: int) -> GapipInstance:
    rng = _rng.generator(seed, "gapip_instance")
    while True:
        x, y = sample_gapip_batch(n, m, b, 1, rng)
        truth = gapip_eval(x[0], y[0])
        if truth != BOTTOM:
            return GapipInstance(n, m, x[0], y[0], int(truth))


def _perf_index(view: PlayerView, r_bits: int) -> np.ndarray:
    if r_bits == 0:
        return np.zeros(view.trials, dtype=np.int64)
    bits = view.read(np.arange(r_bits)).astype(np.int64)
    return (bits << np.arange(r_bits)).sum(axis=1)


def gapip_naive_protocol(n: int, m: int) -> SmpProtocol:
    """Both players send their block at a common index drawn from perfect shared bits.

    Run it over the perfect source. The index uses ``ceil(log2 n)`` bits when
    ``n`` is a power of two and 6 extra bits otherwise (``i = (r n) >> R``).
    """
    r_bits = ceil_log2(n) + (0 if n & (n - 1) == 0 else 6)
    if r_bits > 62:
        raise CapacityError("public index bits", r_bits, 62)

    def index(view):
        return (_perf_index(view, r_bits) * n) >> r_bits

    def alice(x, view):
        i = index(view)
        return Message(np.asarray(x)[np.arange(len(i)), i], m)

    def bob(y, view):
        i = index(view)
        return Message(np.asarray(y)[np.arange(len(i)), i], m)

    def referee(ma, mb, coins):
        return parity_of_and(ma.payload, mb.payload).astype(np.int64)

    return SmpProtocol(f"gapip_naive(n={n},m={m})", alice, bob, referee, m, m, r_bits, gapip_eval,
                       False, {"R": r_bits})


def run_gapip(n: int, m: int, trials: int, seed: int, b: int | None = None) -> EstimateReport:
    """Success of the naive protocol over fresh promise instances, one per trial.

    ``b=None`` draws the answer of each instance uniformly.
    """
    rng = _rng.generator(seed, "gapip_batch")
    xs, ys, truth = [], [], []
    need = trials
    while need > 0:
        bits = rng.integers(0, 2, size=need) if b is None else b
        x, y = sample_gapip_batch(n, m, bits, need, rng)
        t = np.atleast_1d(gapip_eval(x, y))
        keep = t != BOTTOM
        xs.append(x[keep])
        ys.append(y[keep])
        truth.append(t[keep])
        need -= int(keep.sum())
    x, y, truth = np.concatenate(xs), np.concatenate(ys), np.concatenate(truth)
    return run_smp(PERFECT, gapip_naive_protocol(n, m), x, y, trials, seed, expected=truth, batched=True)


# perfect-randomness base protocols and their simulation

@dataclass
class PublicCoinProtocol:
    """Protocol using ``R`` perfect public bits, given as pure maps.

    ``alice(x, r)`` takes inputs of shape ``(T, ...)`` and public strings
    ``r`` of shape ``(T, K)`` and returns integer messages of shape ``(T, K)``.
    """

    name: str
    R: int
    alice: Callable
    bob: Callable
    referee: Callable
    bits_alice: int
    bits_bob: int
    problem: Callable
    default_answer: int = 0
    info: dict = field(default_factory=dict)


def eq_inner_product(n: int, k: int = 3) -> PublicCoinProtocol:
    """Equality via ``k`` random GF(2) inner products; one-sided error ``2**-k``."""
    r_bits = n * k
    if r_bits > 64:
        raise CapacityError("public random bits", r_bits, 64)
    mask = np.uint64((1 << n) - 1)

    def hash_(x, r):
        x = np.asarray(x, dtype=np.uint64)[:, None]
        r = np.asarray(r, dtype=np.uint64)
        out = np.zeros(r.shape, dtype=np.uint64)
        for j in range(k):
            rj = (r >> np.uint64(j * n)) & mask
            out |= parity_of_and(x, rj).astype(np.uint64) << np.uint64(j)
        return out

    def referee(a, b):
        return (np.asarray(a) == np.asarray(b)).astype(np.int64)

    return PublicCoinProtocol(f"eq_ip(n={n},k={k})", r_bits, hash_, hash_, referee, k, k,
                              equality_problem, 0, {"n": n, "k": k})


def reduce_randomness(base: PublicCoinProtocol, table_size: int, seed: int) -> PublicCoinProtocol:
    """Replace the ``R`` public bits by an index into ``table_size`` pre-drawn strings.

    The new protocol uses ``ceil(log2 T)`` bits; index ``r`` selects string
    ``r mod T`` (exactly uniform when ``T`` is a power of two).
    """
    if table_size < 1:
        raise ValueError("table_size must be >= 1")
    rng = _rng.generator(seed, "reduce_randomness")
    if base.R >= 64:
        table = rng.integers(0, 2**64, size=table_size, dtype=np.uint64, endpoint=False)
    else:
        table = rng.integers(0, 1 << base.R, size=table_size, dtype=np.uint64)
    r_bits = ceil_log2(table_size)

    def pick(r):
        return table[np.asarray(r, dtype=np.int64) % table_size]

    def alice(x, r):
        return base.alice(x, pick(r))

    def bob(y, r):
        return base.bob(y, pick(r))

    info = dict(base.info, table_size=table_size, base=base.name)
    return PublicCoinProtocol(f"reduced({base.name},T={table_size})", r_bits, alice, bob, base.referee,
                              base.bits_alice, base.bits_bob, base.problem, base.default_answer, info)


def as_smp(base: PublicCoinProtocol) -> SmpProtocol:
    """Run a public-coin protocol over the perfect source (one register per public bit)."""
    if base.R > 62:
        raise CapacityError("public random bits for direct execution", base.R, 62)

    def alice(x, view):
        r = _perf_index(view, base.R)[:, None]
        return Message(base.alice(x, r)[:, 0], base.bits_alice)

    def bob(y, view):
        r = _perf_index(view, base.R)[:, None]
        return Message(base.bob(y, r)[:, 0], base.bits_bob)

    def referee(ma, mb, coins):
        return base.referee(ma.payload, mb.payload)

    return SmpProtocol(f"perf[{base.name}]", alice, bob, referee, base.bits_alice, base.bits_bob,
                       base.R, base.problem, False, {"base": base.name})


def simulation_failure_param(eps: float) -> float:
    return (1 - 2 * eps) / (4 - 4 * eps)


def simulate_with_collision(s: BipartiteSource, base: PublicCoinProtocol, eps: float,
                            votes: int = 3, col: CollisionProtocol | None = None) -> SmpProtocol:
    """Run ``base`` over ``s`` by agreeing on a public string through a collision protocol.

    Each player computes a set of candidate strings with the symmetrised
    collision protocol on ``[2**R]`` and sends every candidate together with
    its base message. The referee picks a uniform common candidate and runs
    the base referee on it, or returns ``base.default_answer`` if there is
    none. ``votes`` independent copies are combined by majority.

    Per-player cost is ``votes * max_out * (R + base bits)``.
    """
    if not 0 <= eps < 0.5:
        raise ValueError("eps must lie in [0, 1/2)")
    if base.R > 20:
        raise CapacityError("simulated public randomness domain 2**R", 2.0**base.R, 2.0**20)
    if votes < 1 or votes % 2 == 0:
        raise ValueError("votes must be a positive odd number")
    n_dom = 1 << base.R
    s_param = simulation_failure_param(eps)
    if col is None:
        col = symmetrize(s, n_dom, s_param)
    strings = np.arange(n_dom, dtype=np.int64)[None, :]
    per_a = col.max_out * (base.R + base.bits_alice)
    per_b = col.max_out * (base.R + base.bits_bob)

    def player(sets_fn, fn, width):
        def send(x, view):
            masks, msgs, sizes = [], [], []
            for j in range(votes):
                mask = sets_fn(view.shifted(j * col.span))
                masks.append(mask)
                msgs.append(fn(x, np.broadcast_to(strings, (len(mask), n_dom))))
                sizes.append(mask.sum(axis=1))
            bits = sum(sizes) * width
            return Message((np.stack(masks, 1), np.stack(msgs, 1)), bits)
        return send

    def referee(ma, mb, coins):
        mask_a, msg_a = ma.payload
        mask_b, msg_b = mb.payload
        results = []
        for j in range(votes):
            pick = pick_uniform(mask_a[:, j] & mask_b[:, j], coins[:, j])
            safe = np.maximum(pick, 0)
            rows = np.arange(len(pick))
            ans = base.referee(msg_a[rows, j, safe], msg_b[rows, j, safe])
            results.append(np.where(pick >= 0, ans, base.default_answer))
        return _majority(np.stack(results, 1))

    info = {"collision": col.label, "max_out": col.max_out, "R": base.R, "votes": votes,
            "s_param": s_param, "base": base.name,
            "cost_decomposition": {"votes": votes, "max_out": col.max_out, "R": base.R,
                                   "base_bits_alice": base.bits_alice, "base_bits_bob": base.bits_bob}}
    return SmpProtocol(f"simulated[{base.name}]", player(col.alice_sets, base.alice, base.R + base.bits_alice),
                       player(col.bob_sets, base.bob, base.R + base.bits_bob), referee,
                       votes * per_a, votes * per_b, votes * col.ell, base.problem, False, info)


def _majority(res: np.ndarray) -> np.ndarray:
    """Most frequent answer per row; ties go to the smallest answer."""
    lo = int(res.min())
    shifted = res - lo
    counts = np.apply_along_axis(np.bincount, 1, shifted, minlength=int(shifted.max()) + 1)
    return counts.argmax(axis=1) + lo


# influence sets

def binary_entropy(p) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h, nan=0.0)


def toy_pseudo_protocol(kind: str, n: int, samples: int = 1) -> SmpProtocol:
    """Small pseudo-SMP protocols on uniform ``n``-bit inputs.

    ``verbatim``: each player sends bit 0 of their input. ``constant``: both
    send 0. ``parity``: each sends the XOR of bits 0 and 1. Players read
    ``samples`` registers as one block, which the maps ignore.
    """
    if kind == "verbatim":
        def msg(x, r):
            return x[..., 0].astype(np.int64)
        bits = 1
    elif kind == "constant":
        def msg(x, r):
            return np.zeros(x.shape[:-1], dtype=np.int64)
        bits = 0
    elif kind == "parity":
        if n < 2:
            raise ValueError("parity toy needs n >= 2")

        def msg(x, r):
            return (x[..., 0] ^ x[..., 1]).astype(np.int64)
        bits = 1
    else:
        raise ValueError(f"unknown toy protocol {kind!r}")

    def player(x, view):
        r = view.read(0, block=samples)
        return Message(msg(np.asarray(x), r), bits)

    def referee(ma, mb, coins, va, vb):
        return (ma.payload == mb.payload).astype(np.int64)

    return SmpProtocol(f"toy_{kind}(n={n})", player, player, referee, bits, bits, samples, None, True,
                       {"alice_map": msg, "bob_map": msg, "n": n, "samples": samples})


@dataclass
class InfluenceReport:
    n: int
    threshold: float
    l_a: np.ndarray
    l_b: np.ndarray
    prob_large_a: float
    prob_large_b: float
    per_i_a: np.ndarray
    per_i_b: np.ndarray
    per_i_both: np.ndarray
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {"n": self.n, "threshold": self.threshold, "trials": self.trials, "seed": self.seed,
                "prob_large_a": self.prob_large_a, "prob_large_b": self.prob_large_b,
                "per_i_a": self.per_i_a.tolist(), "per_i_b": self.per_i_b.tolist(),
                "per_i_both": self.per_i_both.tolist()}


INFLUENCE_BUDGET = 10**7


def _entropy_tables(msg_map, n: int, r_values: int) -> tuple[np.ndarray, dict]:
    """Per ``(r, message)``: ``H(X_i | R = r, M = message)`` for uniform ``X`` on ``{0,1}^n``."""
    xs = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.int64)
    tables = {}
    for r in range(r_values):
        msgs = np.asarray(msg_map(xs, np.full(len(xs), r)))
        for m in np.unique(msgs):
            sel = xs[msgs == m]
            tables[(r, int(m))] = binary_entropy(sel.mean(axis=0))
    return xs, tables


def influence_sets(s: BipartiteSource, pr: SmpProtocol, trials: int, seed: int) -> InfluenceReport:
    """Exact influence sets ``L = {i : H(X_i | R, M) < 1/2}`` along sampled runs.

    Inputs are uniform on ``{0,1}^n``; conditional entropies come from full
    enumeration of the inputs consistent with the observed randomness and
    message. The size threshold is ``2 * cost + 4 * log2 n``.
    """
    n = pr.info["n"]
    samples = pr.info["samples"]
    r_a, r_b = s.u_size ** samples, s.v_size ** samples
    work = (r_a + r_b) * (1 << n) * n
    if n > 12 or work > INFLUENCE_BUDGET:
        raise CapacityError("influence-set enumeration", work, INFLUENCE_BUDGET)
    _, tab_a = _entropy_tables(pr.info["alice_map"], n, r_a)
    _, tab_b = _entropy_tables(pr.info["bob_map"], n, r_b)
    tape = SharedTape.from_seed(s, seed, trials)
    ra = tape.alice().read(0, block=samples)
    rb = tape.bob().read(0, block=samples)
    rng = _rng.generator(seed, "influence_inputs")
    x = rng.integers(0, 2, size=(trials, n))
    y = rng.integers(0, 2, size=(trials, n))
    ma = np.asarray(pr.info["alice_map"](x, ra))
    mb = np.asarray(pr.info["bob_map"](y, rb))
    l_a = np.stack([tab_a[(int(r), int(m))] < 0.5 for r, m in zip(ra, ma)]) if trials else np.zeros((0, n), bool)
    l_b = np.stack([tab_b[(int(r), int(m))] < 0.5 for r, m in zip(rb, mb)]) if trials else np.zeros((0, n), bool)
    threshold = 2 * pr.cost + 4 * math.log2(n) if n > 1 else 2 * pr.cost
    return InfluenceReport(n, threshold, l_a, l_b,
                           float((l_a.sum(1) >= threshold).mean()), float((l_b.sum(1) >= threshold).mean()),
                           l_a.mean(0), l_b.mean(0), (l_a & l_b).mean(0), trials, seed)


PERFECT = make_standard("perf")

__all__ = [
    "BOTTOM", "GapipInstance", "InfluenceReport", "Message", "PublicCoinProtocol", "SmpProtocol",
    "WitnessSets", "as_smp", "binary_entropy", "eq_inner_product", "equality_problem", "equality_protocol",
    "equality_repetitions", "equality_round_rates", "find_witness_sets", "gapip_eval", "gapip_naive_protocol",
    "gapip_recount", "influence_sets", "run_gapip", "reduce_randomness", "run_smp", "sample_gapip_batch",
    "sample_gapip_instance", "simulate_with_collision", "simulation_failure_param", "smp_answers",
    "toy_pseudo_protocol",
]
