"""Finite bipartite sources of shared randomness.

A source is a joint distribution on ``U x V`` stored as a dense
``|U| x |V|`` matrix. Alice sees the ``U`` half of every i.i.d. draw and Bob
the ``V`` half. Symbols are integer indices ``0..|U|-1`` / ``0..|V|-1``.

Ordering conventions (all downstream indices depend on them):

* support pairs are enumerated row-major (``u`` then ``v``), zero cells skipped;
* ``tensor(a, b)`` pairs ``(u, u')`` as ``u * |U_b| + u'`` (and likewise for
  ``V``), i.e. ``numpy.kron`` order;
* an ``ell``-tuple ``(u_1, ..., u_ell)`` is the integer whose base-``|U|``
  digits are ``u_1 ... u_ell`` with ``u_1`` most significant.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _rng
from .errors import CapacityError, SourceError

DENSE_BUDGET = 1 << 22
NORMALIZATION_TOL = 1e-12
STANDARD_NAMES = ("perf", "priv", "disj", "bsc", "sigma")


@dataclass(frozen=True, eq=False)
class BipartiteSource:
    """Joint distribution ``probs[u, v]`` on ``U x V``; immutable."""

    probs: np.ndarray
    label: str = ""

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64, copy=True)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise SourceError(f"probs must be a non-empty matrix, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise SourceError("probs contains non-finite entries")
        if np.any(p < 0):
            raise SourceError("probs contains negative entries")
        total = float(p.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise SourceError(f"normalization: entries sum to {total!r}, expected 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def u_size(self) -> int:
        return self.probs.shape[0]

    @property
    def v_size(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    def __repr__(self):
        return f"BipartiteSource(label={self.label!r}, shape={self.shape})"


@dataclass(frozen=True)
class SampleBatch:
    count: int
    u_values: np.ndarray
    v_values: np.ndarray
    seed: int


def _check_budget(what: str, entries: float, budget: float):
    if entries > budget:
        raise CapacityError(what, entries, budget)


def parity_of_and(a, b) -> np.ndarray:
    """GF(2) inner product of integers viewed as bit vectors."""
    x = np.bitwise_and(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
    return (np.bitwise_count(x) & np.uint8(1)).astype(np.uint8)


def sigma_support_size(m: int, b: int) -> int:
    """Number of pairs ``(u, v)`` in ``GF(2)^m x GF(2)^m`` with ``u . v = b``."""
    return 2 ** (2 * m - 1) + (-1) ** b * 2 ** (m - 1)


def make_standard(name: str, p: float | None = None, m: int | None = None,
                  b: int | None = None, budget: int = DENSE_BUDGET) -> BipartiteSource:
    """Build one of the named sources.

    ``perf``: uniform on {00, 11}; ``priv``: uniform on {0,1}^2; ``disj``:
    uniform on {00, 01, 10}; ``bsc`` (needs ``p``): perfect bits flipped with
    probability ``p``; ``sigma`` (needs ``m >= 2`` and bit ``b``): uniform on
    pairs of ``m``-bit vectors with GF(2) inner product ``b``.
    """
    if name == "perf":
        return BipartiteSource(np.array([[0.5, 0.0], [0.0, 0.5]]), "perf")
    if name == "priv":
        return BipartiteSource(np.full((2, 2), 0.25), "priv")
    if name == "disj":
        t = 1.0 / 3.0
        return BipartiteSource(np.array([[t, t], [t, 0.0]]), "disj")
    if name == "bsc":
        if p is None or not 0.0 <= p <= 1.0:
            raise SourceError(f"bsc needs 0 <= p <= 1, got {p!r}")
        q = (1.0 - p) / 2.0
        return BipartiteSource(np.array([[q, p / 2.0], [p / 2.0, q]]), f"bsc({p:g})")
    if name == "sigma":
        if m is None or int(m) < 2:
            raise SourceError(f"sigma needs m >= 2, got {m!r}")
        if b not in (0, 1):
            raise SourceError(f"sigma needs a bit b, got {b!r}")
        m = int(m)
        _check_budget(f"sigma({m},{b}) dense matrix", 4.0 ** m, budget)
        k = np.arange(1 << m, dtype=np.uint64)
        mask = parity_of_and(k[:, None], k[None, :]) == b
        probs = mask / float(sigma_support_size(m, b))
        return BipartiteSource(probs, f"sigma({m},{b})")
    raise SourceError(f"unknown standard source {name!r}; expected one of {STANDARD_NAMES}")


_NAME_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_source_name(text: str, budget: int = DENSE_BUDGET) -> BipartiteSource:
    """Parse ``"disj"``, ``"bsc(0.2)"`` or ``"sigma(8,0)"``."""
    match = _NAME_RE.match(text)
    if not match:
        raise SourceError(f"cannot parse source name {text!r}")
    name, args = match.group(1), match.group(2)
    vals = [a.strip() for a in args.split(",")] if args else []
    if name == "bsc":
        if len(vals) != 1:
            raise SourceError("bsc takes one argument: bsc(p)")
        return make_standard("bsc", p=float(vals[0]))
    if name == "sigma":
        if len(vals) != 2:
            raise SourceError("sigma takes two arguments: sigma(m,b)")
        return make_standard("sigma", m=int(vals[0]), b=int(vals[1]), budget=budget)
    if vals:
        raise SourceError(f"{name} takes no arguments")
    return make_standard(name, budget=budget)


def source_from_dict(obj: dict, budget: int = DENSE_BUDGET) -> BipartiteSource:
    """Build a source from its JSON object form (explicit matrix or ``standard``)."""
    if not isinstance(obj, dict):
        raise SourceError("source definition must be a JSON object")
    if "standard" in obj:
        extra = set(obj) - {"standard", "label"}
        if extra:
            raise SourceError(f"unknown keys in standard source: {sorted(extra)}")
        std = obj["standard"]
        if isinstance(std, str):
            src = make_standard(std, budget=budget)
        elif isinstance(std, dict) and len(std) == 1:
            (name, params), = std.items()
            if name == "bsc":
                src = make_standard("bsc", p=float(params))
            elif name == "sigma":
                if not isinstance(params, dict) or set(params) != {"m", "b"}:
                    raise SourceError('sigma needs {"m": int, "b": 0|1}')
                src = make_standard("sigma", m=int(params["m"]), b=int(params["b"]), budget=budget)
            else:
                raise SourceError(f"standard source {name!r} takes no parameters")
        else:
            raise SourceError(f"cannot interpret standard source {std!r}")
        if "label" in obj:
            src = BipartiteSource(src.probs, str(obj["label"]))
        return src
    required = {"u_size", "v_size", "probs"}
    missing = required - set(obj)
    if missing:
        raise SourceError(f"missing keys {sorted(missing)}")
    extra = set(obj) - required - {"label"}
    if extra:
        raise SourceError(f"unknown keys {sorted(extra)}")
    u_size, v_size = int(obj["u_size"]), int(obj["v_size"])
    if u_size < 1 or v_size < 1:
        raise SourceError("u_size and v_size must be positive")
    _check_budget("explicit source", u_size * v_size, budget)
    probs = np.asarray(obj["probs"], dtype=np.float64)
    if probs.shape != (u_size, v_size):
        raise SourceError(f"probs has shape {probs.shape}, expected {(u_size, v_size)}")
    return BipartiteSource(probs, str(obj.get("label", "")))


def load_source(spec, budget: int = DENSE_BUDGET) -> BipartiteSource:
    """Resolve a source from a dict, a standard name, or a path to a JSON file."""
    if isinstance(spec, BipartiteSource):
        return spec
    if isinstance(spec, dict):
        return source_from_dict(spec, budget)
    text = str(spec)
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        with open(path) as fh:
            return source_from_dict(json.load(fh), budget)
    return parse_source_name(text, budget)


def source_to_dict(s: BipartiteSource) -> dict:
    return {"label": s.label, "u_size": s.u_size, "v_size": s.v_size,
            "probs": s.probs.tolist()}


def tensor(a: BipartiteSource, b: BipartiteSource, budget: int = DENSE_BUDGET) -> BipartiteSource:
    """Product source on ``(U_a x U_b) x (V_a x V_b)`` in kron order."""
    _check_budget("tensor product", float(a.probs.size) * b.probs.size, budget)
    label = f"{a.label or '?'}⊗{b.label or '?'}"
    return BipartiteSource(np.kron(a.probs, b.probs), label)


def tensor_power(s: BipartiteSource, t: int, budget: int = DENSE_BUDGET) -> BipartiteSource:
    if t < 1:
        raise ValueError("tensor power needs t >= 1")
    out = s
    for _ in range(t - 1):
        out = tensor(out, s, budget)
    return out


def marginals(s: BipartiteSource) -> tuple[np.ndarray, np.ndarray]:
    return s.probs.sum(axis=1), s.probs.sum(axis=0)


def is_product(s: BipartiteSource, tol: float = 1e-12) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    mu, nu = marginals(s)
    return bool(np.max(np.abs(s.probs - np.outer(mu, nu))) <= tol)


def is_degenerate(s: BipartiteSource) -> bool:
    mu, nu = marginals(s)
    return bool(np.count_nonzero(mu > 0) <= 1 or np.count_nonzero(nu > 0) <= 1)


def support(s: BipartiteSource) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-major support pairs ``(u, v, prob)`` with zero cells removed."""
    u, v = np.nonzero(s.probs)
    return u, v, s.probs[u, v]


def _cdf(weights: np.ndarray) -> np.ndarray:
    c = np.cumsum(weights)
    c /= c[-1]
    c[-1] = 1.0
    return c


def sample(s: BipartiteSource, count: int, seed: int) -> SampleBatch:
    """``count`` i.i.d. draws by inverse CDF over the row-major support."""
    if count < 0:
        raise ValueError("count must be non-negative")
    us, vs, ps = support(s)
    draws = _rng.generator(seed, "sample").random(count)
    idx = np.searchsorted(_cdf(ps), draws, side="right")
    return SampleBatch(count, us[idx], vs[idx], seed)


class BlockTable:
    """Support of the ``ell``-fold tensor power, for single-draw block sampling."""

    def __init__(self, s: BipartiteSource, ell: int, budget: int = DENSE_BUDGET):
        us, vs, ps = support(s)
        n_pairs = len(ps) ** ell
        _check_budget(f"support of {ell}-fold tensor power", n_pairs, budget)
        u_t = np.zeros(1, dtype=np.int64)
        v_t = np.zeros(1, dtype=np.int64)
        w = np.ones(1)
        for _ in range(ell):
            u_t = (u_t[:, None] * s.u_size + us[None, :]).ravel()
            v_t = (v_t[:, None] * s.v_size + vs[None, :]).ravel()
            w = (w[:, None] * ps[None, :]).ravel()
        self.ell = ell
        self.u = u_t
        self.v = v_t
        self.weights = w
        self.cdf = _cdf(w)
        # guide table: _start[b] = #{cdf <= b / B}, a lower bound for every u in bucket b
        buckets = 1 << max(4, min(16, (len(w) - 1).bit_length() + 2))
        self._buckets = buckets
        self._start = np.searchsorted(self.cdf, np.arange(buckets) / buckets, side="right")

    def lookup(self, uniforms: np.ndarray) -> np.ndarray:
        """``searchsorted(cdf, u, side="right")`` for uniforms in ``[0, 1)``."""
        u = np.asarray(uniforms)
        idx = self._start[np.minimum((u * self._buckets).astype(np.int64), self._buckets - 1)]
        while True:
            step = self.cdf[idx] <= u
            if not step.any():
                return idx
            idx = idx + step


_BLOCK_CACHE: dict = {}


def block_table(s: BipartiteSource, ell: int) -> BlockTable:
    key = (id(s), ell)
    hit = _BLOCK_CACHE.get(key)
    if hit is not None and hit[0] is s:
        return hit[1]
    table = BlockTable(s, ell)
    if len(_BLOCK_CACHE) > 64:
        _BLOCK_CACHE.clear()
    _BLOCK_CACHE[key] = (s, table)
    return table


def tuple_marginals(s: BipartiteSource, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Marginals of the ``ell``-fold tensor power, indexed by tuple integers."""
    mu, nu = marginals(s)
    mu_l, nu_l = np.ones(1), np.ones(1)
    for _ in range(ell):
        mu_l = np.kron(mu_l, mu)
        nu_l = np.kron(nu_l, nu)
    return mu_l, nu_l


def sample_sigma(m: int, b: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw from ``sigma(m, b)`` without the dense matrix (``2 <= m <= 63``).

    ``u`` follows the exact marginal (for ``b = 0`` the zero vector carries
    twice the weight of any other vector; for ``b = 1`` it is excluded), then
    ``v`` is uniform on ``{v : u . v = b}``: a uniform ``v`` with the wrong
    parity is fixed by flipping the lowest set bit of ``u``.
    """
    if not 2 <= m <= 63:
        raise ValueError("closed-form sigma sampler supports 2 <= m <= 63")
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    top = 1 << m
    u = rng.integers(1, top, size=count, dtype=np.uint64)
    if b == 0:
        zero = rng.random(count) < 2.0 / (top + 1)
        u[zero] = 0
    v = rng.integers(0, top, size=count, dtype=np.uint64)
    wrong = (parity_of_and(u, v) != b) & (u != 0)
    low = u & (~u + np.uint64(1))
    v[wrong] ^= low[wrong]
    return u, v


def int_to_bits(values, width: int) -> np.ndarray:
    """Little-endian bit expansion; output shape ``values.shape + (width,)``."""
    v = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    return ((v[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_int(bits) -> np.ndarray:
    """Inverse of :func:`int_to_bits` along the last axis."""
    b = np.asarray(bits, dtype=np.uint64)
    shifts = np.arange(b.shape[-1], dtype=np.uint64)
    return np.bitwise_or.reduce(b << shifts, axis=-1) if b.shape[-1] else np.zeros(b.shape[:-1], np.uint64)


def ceil_log2(n: int) -> int:
    """Smallest ``r`` with ``2**r >= n``."""
    if n < 1:
        raise ValueError("n must be positive")
    return (int(n) - 1).bit_length()
