"""Monte Carlo realization of the pairwise-exchange kinetics.

A run executes a fixed number of events; each event draws an ordered
(payer, payee) pair uniformly, asks the kernel for an amount, and applies the
boundary-checked transfer. Time is measured in events; one sweep = N events.
Replicas share nothing but the config: replica r draws from the counter
stream keyed by (seed, r), so results are bit-reproducible regardless of
thread scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _loops
from .gof import ks_histogram_exponential
from .kernels import ADDITIVE_FIXED, ExchangeKernel
from .ledger import ConfigError, UsageError
from .measures import DistributionEstimate, entropy as _entropy, gini_weighted
from .rng import stream_key

NOT_EQUILIBRATED = None

# defaults from the desk-scale calibration; both are config parameters
EQUILIBRATION_WINDOW = 10
EQUILIBRATION_TOLERANCE = 1e-3


@dataclass(frozen=True)
class CreditPolicy:
    """Engine-level credit: payers short of cash buy on credit from the payee.

    The shortfall becomes an IOU held by the payee (pair creation), so the
    transaction moves both net worths by the transacted amount while total
    money is untouched. ``debt_limit`` bounds net worth from below at
    -debt_limit; ``None`` removes the boundary entirely. A positive interest
    rate accrues round-half-even on every open directed balance once per
    sweep.
    """

    debt_limit: int | None = None
    interest_rate: float | str | Fraction = 0
    accrue_sweeps: int = 1

    def rate_ratio(self) -> tuple[int, int]:
        r = self.interest_rate
        frac = r if isinstance(r, Fraction) else Fraction(str(r))
        if frac < 0:
            raise ConfigError("interest rate must be >= 0")
        return frac.numerator, frac.denominator


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    per_capita: int
    kernel: ExchangeKernel
    steps: int
    seed: int
    measure_every: int
    m_min: int | None = 0
    m_max: int | None = None
    credit: CreditPolicy | None = None
    replicas: int = 1
    bin_width: int = 1
    hist_lo: int | None = None
    hist_bins: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("need at least two agents to trade")
        if self.per_capita < 0:
            raise ConfigError("per-capita money must be >= 0")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.measure_every < 1 or self.steps % self.measure_every != 0:
            raise ConfigError("measure_every must divide the step count")
        if self.credit is not None:
            if self.kernel.kind != ADDITIVE_FIXED:
                raise ConfigError("credit runs support the additive-fixed kernel")
            if self.m_min not in (0, None):
                raise ConfigError("credit runs keep cash nonnegative (m_min=0)")
            num, _ = self.credit.rate_ratio()
            if num > 0 and self.n > 4096:
                raise ConfigError("interest accrual tracks an NxN debt matrix; "
                                  "use n <= 4096")

    @property
    def temperature(self) -> float:
        return float(self.per_capita)

    def histogram_range(self) -> tuple[int, int]:
        """(lo, n_bins) of the snapshot histograms, unit-width bins."""
        if self.hist_lo is not None and self.hist_bins is not None:
            return self.hist_lo, self.hist_bins
        if self.credit is not None:
            if self.credit.debt_limit is not None:
                lo = -self.credit.debt_limit
                span = 20 * max(self.per_capita + self.credit.debt_limit, 1)
                return lo, span
            # unbounded net worth spreads diffusively; cover ~10 sigma
            sigma = math.sqrt(2.0 * self.steps / self.n) * self.kernel.delta0
            half = int(math.ceil(10.0 * sigma)) + 20 * max(self.per_capita, 1)
            return self.per_capita - half, 2 * half
        lo = self.m_min if self.m_min is not None else 0
        if self.m_max is not None:
            return lo, int(self.m_max - lo + 1)
        return lo, 20 * max(self.per_capita, 1)


@dataclass
class ReplicaTrajectory:
    """Snapshot series of one replica plus its final microstate."""

    replica: int
    ticks: np.ndarray           # event counts, starting at 0
    hist: np.ndarray            # rows: [underflow, unit bins, overflow]
    hist_lo: int
    sums: np.ndarray            # exact integer sum of the tracked variable
    sumsqs: np.ndarray
    accepted: np.ndarray        # cumulative accepted events per snapshot
    final_money: np.ndarray
    final_debt: np.ndarray | None = None
    occupancy: np.ndarray | None = None
    occupancy_lo: int = 0
    moment_count: np.ndarray | None = None
    moment_sum: np.ndarray | None = None
    moment_sum2: np.ndarray | None = None

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted[-1]) / max(int(self.ticks[-1]), 1)

    def estimate(self, row: int, support: str = "nonnegative") -> DistributionEstimate:
        return DistributionEstimate.from_loop_row(self.hist[row], self.hist_lo,
                                                  support)

    def entropy_series(self, mode: str = "shannon") -> np.ndarray:
        return np.array([_entropy(self.estimate(r), mode)
                         for r in range(self.hist.shape[0])])

    def mean_series(self, n: int) -> np.ndarray:
        return self.sums / n

    def variance_series(self, n: int) -> np.ndarray:
        mean = self.sums / n
        return self.sumsqs / n - mean * mean

    def ks_exp_series(self, scale: float) -> np.ndarray:
        """Per-snapshot KS distance to Exp(scale), histogram-based."""
        out = np.empty(self.hist.shape[0])
        for r in range(self.hist.shape[0]):
            out[r] = ks_histogram_exponential(self.hist[r, 1:-1], self.hist_lo,
                                              1.0, scale)
        return out

    def gini_series(self) -> np.ndarray:
        """Per-snapshot Gini; exact for unit bins (overflow mass sits at the cap)."""
        values = self.hist_lo + np.arange(self.hist.shape[1] - 1)
        if values[0] < 0:
            raise UsageError("gini series needs nonnegative support")
        out = np.empty(self.hist.shape[0])
        for r in range(self.hist.shape[0]):
            w = np.concatenate([self.hist[r, 1:-1], self.hist[r, -1:]])
            out[r] = gini_weighted(values, w)
        return out

    def pooled_sample(self, rows) -> np.ndarray:
        """Expand snapshot histograms back into integer balance samples."""
        values = self.hist_lo + np.arange(self.hist.shape[1] - 2)
        parts = [np.repeat(values, self.hist[r, 1:-1]) for r in np.atleast_1d(rows)]
        return np.concatenate(parts)


@dataclass
class Trajectory:
    config: SimulationConfig
    replicas: list[ReplicaTrajectory] = field(default_factory=list)

    def __getitem__(self, r: int) -> ReplicaTrajectory:
        return self.replicas[r]

    @property
    def ticks(self) -> np.ndarray:
        return self.replicas[0].ticks


def thread_budget(requested: int | None = None) -> int:
    env = os.environ.get("MONEYKIN_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested or cap, cap))


def run(config: SimulationConfig,
        collect_occupancy: bool = False,
        occupancy_range: tuple[int, int] | None = None,
        occupancy_burn: int = 0,
        collect_moments: bool = False,
        threads: int | None = None) -> Trajectory:
    """Execute all replicas of a config; deterministic given (config, seed).

    ``collect_occupancy`` accumulates the time-averaged balance marginal after
    ``occupancy_burn`` events (the estimator the exact-enumeration checks
    compare against). ``collect_moments`` accumulates per-balance conditional
    moments of balance changes for drift/diffusion estimation.
    """
    nthreads = thread_budget(threads)
    jobs = list(range(config.replicas))
    if nthreads == 1 or config.replicas == 1:
        reps = [_run_replica(config, r, collect_occupancy, occupancy_range,
                             occupancy_burn, collect_moments) for r in jobs]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            reps = list(pool.map(
                lambda r: _run_replica(config, r, collect_occupancy,
                                       occupancy_range, occupancy_burn,
                                       collect_moments), jobs))
    return Trajectory(config, reps)


def _run_replica(config, replica, collect_occupancy, occupancy_range,
                 occupancy_burn, collect_moments) -> ReplicaTrajectory:
    n = config.n
    money = np.full(n, config.per_capita, dtype=np.int64)
    key = stream_key(config.seed, replica)
    hist_lo, hist_bins = config.histogram_range()
    rows = config.steps // config.measure_every
    hist = np.zeros((rows, hist_bins + 2), dtype=np.int64)
    sums = np.zeros(rows, dtype=np.int64)
    sumsqs = np.zeros(rows, dtype=np.int64)
    accepted = np.zeros(rows, dtype=np.int64)

    if collect_occupancy:
        olo, ohi = occupancy_range or (hist_lo, hist_lo + hist_bins)
        occ = np.zeros(ohi - olo, dtype=np.int64)
    else:
        olo = 0
        occ = np.zeros(0, dtype=np.int64)

    if config.credit is None:
        if collect_moments:
            cap = hist_lo + hist_bins if hist_lo >= 0 else hist_bins
            mom_cnt = np.zeros(cap, dtype=np.int64)
            mom_sum = np.zeros(cap, dtype=np.int64)
            mom_sum2 = np.zeros(cap, dtype=np.int64)
        else:
            mom_cnt = mom_sum = mom_sum2 = np.zeros(0, dtype=np.int64)
        kcode, p1, _ = config.kernel.code_and_params()
        m_min = config.m_min if config.m_min is not None else np.iinfo(np.int64).min // 4
        has_max = config.m_max is not None
        m_max = config.m_max if has_max else 0
        _loops.run_money(money, config.steps, key, np.uint64(0),
                         kcode, p1,
                         m_min, has_max, m_max,
                         config.measure_every, hist, hist_lo, sums, sumsqs,
                         accepted, occ, olo, occupancy_burn,
                         mom_cnt, mom_sum, mom_sum2)
        final_debt = None
    else:
        debt_net = np.zeros(n, dtype=np.int64)
        num, den = config.credit.rate_ratio()
        matrix = (np.zeros((n, n), dtype=np.int64) if num > 0
                  else np.zeros((0, 0), dtype=np.int64))
        floor = config.credit.debt_limit
        _loops.run_credit(money, debt_net, matrix, config.steps, key, np.uint64(0),
                          np.int64(config.kernel.delta0),
                          floor is not None,
                          -(floor or 0),
                          num, den, config.credit.accrue_sweeps * n,
                          config.measure_every, hist, hist_lo, sums, sumsqs,
                          accepted, occ, olo, occupancy_burn)
        final_debt = debt_net
        mom_cnt = mom_sum = mom_sum2 = np.zeros(0, dtype=np.int64)

    # prepend the tick-0 snapshot (net worth equals money at start: no debt yet)
    sum0 = n * config.per_capita
    sumsq0 = n * config.per_capita * config.per_capita
    row0 = np.zeros(hist_bins + 2, dtype=np.int64)
    k = config.per_capita - hist_lo
    if k < 0:
        row0[0] = n
    elif k >= hist_bins:
        row0[-1] = n
    else:
        row0[k + 1] = n
    ticks = np.concatenate([[0], (1 + np.arange(rows)) * config.measure_every])
    hist = np.vstack([row0, hist])
    sums = np.concatenate([[sum0], sums])
    sumsqs = np.concatenate([[sumsq0], sumsqs])
    accepted = np.concatenate([[0], accepted])

    return ReplicaTrajectory(
        replica=replica, ticks=ticks, hist=hist, hist_lo=hist_lo,
        sums=sums, sumsqs=sumsqs, accepted=accepted,
        final_money=money, final_debt=final_debt,
        occupancy=occ if collect_occupancy else None, occupancy_lo=olo,
        moment_count=mom_cnt if collect_moments else None,
        moment_sum=mom_sum if collect_moments else None,
        moment_sum2=mom_sum2 if collect_moments else None,
    )


# ---------------------------------------------------------------------------
# Relaxation and equilibration diagnostics
# ---------------------------------------------------------------------------

def relaxation_profile(traj: ReplicaTrajectory, scale: float,
                       mode: str = "shannon") -> list[tuple[int, float, float]]:
    """(tick, entropy, KS distance to Exp(scale)) per snapshot."""
    if traj.hist.shape[0] < 3:
        raise UsageError("relaxation profile needs at least 3 snapshots")
    ent = traj.entropy_series(mode)
    ks = traj.ks_exp_series(scale)
    return [(int(t), float(s), float(d))
            for t, s, d in zip(traj.ticks, ent, ks)]


def window_means(series: np.ndarray, window: int) -> np.ndarray:
    """Means over consecutive non-overlapping windows (tail partial dropped)."""
    k = len(series) // window
    if k < 1:
        raise UsageError("series shorter than one window")
    return np.asarray(series[:k * window], dtype=float).reshape(k, window).mean(axis=1)


def equilibration_detect(ticks: np.ndarray, entropy_series: np.ndarray,
                         window: int = EQUILIBRATION_WINDOW,
                         tolerance: float = EQUILIBRATION_TOLERANCE):
    """First tick after which windowed entropy stops changing, or None.

    Windowed means must change by less than ``tolerance`` per window from some
    window onward, with at least two windows in the settled suffix; a series
    still drifting at the end of the run reports not-equilibrated (None).
    """
    if window < 2:
        raise UsageError("window must span at least 2 snapshots")
    means = window_means(np.asarray(entropy_series, float), window)
    if means.size < 2:
        return NOT_EQUILIBRATED
    diffs = np.abs(np.diff(means))
    settled = diffs < tolerance
    # longest all-settled suffix
    idx = len(settled)
    while idx > 0 and settled[idx - 1]:
        idx -= 1
    if idx == len(settled):  # last pair still moving
        return NOT_EQUILIBRATED
    return int(ticks[idx * window])


def h_theorem_report(trajectories: list[ReplicaTrajectory],
                     window: int = EQUILIBRATION_WINDOW) -> dict:
    """Windowed entropy growth across replicas.

    For each pair of consecutive windows, reports the replica-mean entropy
    change and its standard error; a violation is a mean decrease beyond 3x
    the noise scale. Monotone growth up to the plateau is the statistical
    form of the H-theorem; on the plateau the empirical-entropy estimator
    wobbles, so the noise scale is the larger of the replica standard error
    and the late-run (plateau) step fluctuation.
    """
    per_rep = np.array([window_means(t.entropy_series(), window)
                        for t in trajectories])
    diffs = np.diff(per_rep, axis=1)
    mean = diffs.mean(axis=0)
    sem = diffs.std(axis=0, ddof=1) / math.sqrt(len(trajectories)) \
        if len(trajectories) > 1 else np.zeros_like(mean)
    plateau_noise = float(np.std(mean[mean.size // 2:])) if mean.size >= 4 else 0.0
    scale = np.maximum(sem, plateau_noise)
    violations = [int(i) for i in np.nonzero(mean < -3.0 * scale)[0]]
    return {
        "window_mean_entropy": per_rep.mean(axis=0),
        "step_mean": mean,
        "step_sem": sem,
        "plateau_noise": plateau_noise,
        "violations": violations,
    }
