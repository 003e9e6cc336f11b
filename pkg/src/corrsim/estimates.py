"""Point estimates with confidence intervals for exact and Monte Carlo runs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

Z_TWO_SIDED = NormalDist().inv_cdf(0.975)
Z_ONE_SIDED = NormalDist().inv_cdf(0.95)


def wilson_interval(successes: float, trials: int, z: float = Z_TWO_SIDED) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, float(centre - half)), min(1.0, float(centre + half))


@dataclass(frozen=True)
class EstimateReport:
    """A quantity with a 95% two-sided interval and 95% one-sided bounds.

    Exact reports have every bound equal to ``value``.
    """

    value: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int | None
    mode: str
    one_sided_low: float
    one_sided_high: float

    @classmethod
    def exact(cls, value: float) -> "EstimateReport":
        v = float(value)
        return cls(v, v, v, 0, None, "exact", v, v)

    @classmethod
    def from_successes(cls, successes: float, trials: int, seed: int | None) -> "EstimateReport":
        value = successes / trials if trials else 0.0
        lo, hi = wilson_interval(successes, trials)
        lo1, _ = wilson_interval(successes, trials, Z_ONE_SIDED)
        _, hi1 = wilson_interval(successes, trials, Z_ONE_SIDED)
        return cls(value, min(lo, value), max(hi, value), int(trials), seed,
                   "monte_carlo", min(lo1, value), max(hi1, value))

    @classmethod
    def from_samples(cls, samples, seed: int | None) -> "EstimateReport":
        """Mean of bounded samples; Wilson for 0/1 data, normal approximation otherwise."""
        x = np.asarray(samples, dtype=np.float64).ravel()
        n = x.size
        if n and np.all((x == 0.0) | (x == 1.0)):
            return cls.from_successes(float(x.sum()), n, seed)
        mean = float(x.mean()) if n else 0.0
        se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
        return cls(mean, mean - Z_TWO_SIDED * se, mean + Z_TWO_SIDED * se, n, seed,
                   "monte_carlo", mean - Z_ONE_SIDED * se, mean + Z_ONE_SIDED * se)

    def to_dict(self) -> dict:
        return asdict(self)
