"""Ensemble statistics: histograms, money temperature, entropy, Gini, wealth."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log

import numpy as np

from .ledger import Ensemble, UsageError

NONNEGATIVE = "nonnegative"
SIGNED = "signed"


@dataclass
class DistributionEstimate:
    """Histogram over integer balances with fixed-width contiguous bins.

    ``counts[k]`` covers [lo + k*width, lo + (k+1)*width); balances outside
    the binned range land in the underflow/overflow buckets so that
    ``counts.sum() + underflow + overflow == population`` always holds.
    """

    lo: int
    bin_width: int
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0
    support: str = NONNEGATIVE

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def population(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.bin_width * (np.arange(self.counts.size) + 0.5)

    def probabilities(self) -> np.ndarray:
        return self.counts / max(self.population, 1)

    def mean(self) -> float:
        """Mean of the binned mass at bin centers (out-of-range mass ignored)."""
        inside = int(self.counts.sum())
        if inside == 0:
            return 0.0
        return float((self.centers * self.counts).sum() / inside)

    @classmethod
    def from_values(cls, values, lo: int, n_bins: int, bin_width: int = 1,
                    support: str = NONNEGATIVE) -> "DistributionEstimate":
        v = np.asarray(values, dtype=np.int64)
        k = (v - lo) // bin_width
        under = int((k < 0).sum())
        over = int((k >= n_bins).sum())
        inside = k[(k >= 0) & (k < n_bins)]
        counts = np.bincount(inside, minlength=n_bins)
        return cls(lo, bin_width, counts, under, over, support)

    @classmethod
    def from_loop_row(cls, row: np.ndarray, lo: int,
                      support: str = NONNEGATIVE) -> "DistributionEstimate":
        """Adopt one [underflow, bins..., overflow] row from the event loops."""
        return cls(lo, 1, row[1:-1].copy(), int(row[0]), int(row[-1]), support)


def temperature(ensemble: Ensemble) -> float:
    """Average money per agent, M/N: the scale of the equilibrium exponential."""
    return ensemble.total_money / ensemble.n


def entropy(estimate: DistributionEstimate, mode: str = "shannon") -> float:
    """Entropy per agent, in nats.

    ``shannon``      -sum (n_k/N) ln(n_k/N) over occupied bins.
    ``multiplicity`` ln(N! / prod n_k!) / N via log-gamma, the combinatorial
                     count of ways to assign agents to bins.
    """
    n_total = estimate.population
    if n_total < 1:
        raise UsageError("entropy of an empty estimate is undefined")
    counts = [c for c in estimate.counts.tolist() if c > 0]
    if estimate.underflow > 0:
        counts.append(estimate.underflow)
    if estimate.overflow > 0:
        counts.append(estimate.overflow)
    if mode == "shannon":
        return -sum((c / n_total) * log(c / n_total) for c in counts) + 0.0
    if mode == "multiplicity":
        return (lgamma(n_total + 1) - sum(lgamma(c + 1) for c in counts)) / n_total
    raise UsageError(f"unknown entropy mode {mode!r}")


def max_entropy_at_mean(mean: float) -> float:
    """Largest Shannon entropy of any nonnegative-integer distribution with the
    given mean; attained by the geometric law (the unit-binned exponential)."""
    if mean <= 0:
        return 0.0
    return float((mean + 1.0) * log(mean + 1.0) - mean * log(mean))


def gini(balances) -> float:
    """Gini coefficient of nonnegative balances, in [0, 1).

    Exact pairwise mean |x_i - x_j| / (2 N^2 mean) for N <= 10^4 (chunked so
    memory stays bounded), the equivalent sorted O(N log N) identity above.
    Zero-mean samples return 0 by convention.
    """
    x = np.asarray(balances, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise UsageError("gini needs a one-dimensional, nonempty sample")
    if (x < 0).any():
        raise UsageError("gini is defined here for nonnegative balances only")
    total = x.sum()
    if total == 0:
        return 0.0
    n = x.size
    if n <= 10_000:
        acc = 0.0
        for start in range(0, n, 2048):
            block = x[start:start + 2048]
            acc += np.abs(block[:, None] - x[None, :]).sum()
        return float(acc / (2.0 * n * total))
    xs = np.sort(x)
    i = np.arange(1, n + 1)
    return float((2.0 * (i * xs).sum()) / (n * total) - (n + 1.0) / n)


def gini_weighted(values, weights) -> float:
    """Gini of a weighted (bracketed) sample; exact for the implied expansion."""
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if (v < 0).any():
        raise UsageError("gini is defined here for nonnegative balances only")
    if (w < 0).any() or w.sum() <= 0:
        raise UsageError("weights must be nonnegative with positive total")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    total_w = w.sum()
    total_v = (v * w).sum()
    if total_v == 0:
        return 0.0
    cw = np.cumsum(w)
    # mean absolute difference via the weighted sorted identity
    s = (w * v * (2.0 * cw - w - total_w)).sum()
    return float(s / (total_w * total_v))


@dataclass
class PriceVector:
    """Mark-to-market prices per unit volume, by commodity id."""

    prices: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for cid, p in self.prices.items():
            if p < 0:
                raise UsageError(f"price of commodity {cid} must be >= 0")

    def __getitem__(self, cid: int) -> int:
        try:
            return self.prices[cid]
        except KeyError:
            raise UsageError(f"no quoted price for commodity {cid}") from None


def wealth(agent, prices: PriceVector) -> int:
    """Money plus holdings valued at quoted prices.

    Unchanged by any transaction at the quoted price (the money leg and the
    goods leg cancel); changes only between transactions, through price moves
    or production.
    """
    w = agent.money
    for cid, volume in agent.holdings.items():
        w += prices[cid] * volume
    return w
