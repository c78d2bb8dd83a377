"""Exponential, Pareto-tail, and two-class income distribution fits.

The two-class decomposition models a sample as an exponential bulk
(temperature T) with a power-law upper class P(r) ~ 1/r^(1+alpha) above a
crossover. The upper-class income share is f = 1 - T/<r> and the predicted
Gini coefficient is (1 + f)/2. Bracketed (income, weight) tables are handled
natively by every estimator; nothing is expanded into per-person samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .gof import ks_statistic
from .ledger import UsageError

MIN_POINTS = 100
MIN_TAIL = 100


class FitError(UsageError):
    """Fit impossible on this input; the message is the diagnostic."""


def _as_weighted(sample, weights):
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise UsageError("sample must be a nonempty 1-d array")
    if (x < 0).any():
        raise UsageError("income fits need nonnegative support")
    w = np.ones_like(x) if weights is None else np.asarray(weights, np.float64)
    if w.shape != x.shape or (w < 0).any() or w.sum() <= 0:
        raise UsageError("weights must be nonnegative, matching the sample")
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


def _weighted_quantile(x_sorted, w_sorted, q):
    cw = np.cumsum(w_sorted)
    return float(np.interp(q * cw[-1], cw, x_sorted))


@dataclass
class ExponentialFit:
    temperature: float
    n_points: float
    ci_low: float | None = None
    ci_high: float | None = None
    truncated_at: float | None = None
    ok: bool = True
    message: str = ""


def fit_exponential(sample, weights=None, truncated_at: float | None = None,
                    bootstrap: int = 0, seed: int = 0,
                    min_points: int = MIN_POINTS) -> ExponentialFit:
    """Maximum-likelihood exponential temperature.

    Untruncated data: the MLE is the (weighted) mean. With ``truncated_at``
    set, fits the exponential right-truncated at that point, which recovers
    the full-support scale from bulk-only data. Bootstrap CI on request.
    """
    x, w = _as_weighted(sample, weights)
    if w.sum() < min_points:
        raise UsageError(f"need at least {min_points} (weighted) points")
    mean = float((x * w).sum() / w.sum())
    if mean == 0.0 or x[0] == x[-1]:
        return ExponentialFit(0.0, w.sum(), ok=False,
                              message="degenerate sample: all values equal")
    if truncated_at is None:
        t_hat = mean
    else:
        t_hat = _truncated_exp_mle(mean, float(truncated_at))
        if t_hat is None:
            return ExponentialFit(mean, w.sum(), truncated_at=truncated_at,
                                  ok=False,
                                  message="truncated mean too close to the "
                                          "cutoff midpoint; scale unbounded")
    lo = hi = None
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        prob = w / w.sum()
        ts = []
        for _ in range(bootstrap):
            xb = rng.choice(x, size=x.size, p=prob)
            mb = xb.mean()
            tb = mb if truncated_at is None else \
                _truncated_exp_mle(mb, float(truncated_at))
            if tb is not None:
                ts.append(tb)
        lo, hi = (float(v) for v in np.percentile(ts, [2.5, 97.5]))
    return ExponentialFit(float(t_hat), float(w.sum()), lo, hi, truncated_at)


def _truncated_exp_mle(mean: float, cutoff: float):
    """Solve mean = T - c e^{-c/T} / (1 - e^{-c/T}) for T; None if unbounded."""
    if mean >= cutoff / 2.0 * 0.999:
        return None  # truncated mean approaches c/2 as T -> inf

    def gap(t):
        ec = np.exp(-cutoff / t)
        return t - cutoff * ec / (1.0 - ec) - mean

    hi = mean
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e9 * mean:
            return None
    return float(optimize.brentq(gap, mean * (1 + 1e-12), hi, xtol=1e-10 * mean))


def fit_exponential_loglinear(values, counts, min_count: int = 5) -> ExponentialFit:
    """Temperature from the slope of log counts against a histogram.

    Weighted least squares with per-bin counts as weights; the continuum
    scale is bin_width / slope.
    """
    v = np.asarray(values, dtype=np.float64)
    c = np.asarray(counts, dtype=np.float64)
    keep = c >= min_count
    if keep.sum() < 3:
        raise FitError("too few occupied bins for a log-linear fit")
    v, c = v[keep], c[keep]
    y = np.log(c)
    wsum = c.sum()
    vbar = (v * c).sum() / wsum
    ybar = (y * c).sum() / wsum
    slope = ((c * (v - vbar) * (y - ybar)).sum() /
             (c * (v - vbar) ** 2).sum())
    if slope >= 0:
        return ExponentialFit(np.inf, wsum, ok=False,
                              message="histogram is not decaying")
    return ExponentialFit(float(-1.0 / slope), float(wsum))


# ---------------------------------------------------------------------------
# Pareto tail
# ---------------------------------------------------------------------------

QUANTILE_POLICY = "quantile"
KS_SCAN_POLICY = "ks-scan"

TAIL_QUANTILE = 0.99


@dataclass
class ParetoTailFit:
    alpha: float
    threshold: float
    n_tail: float
    ks: float
    loglik_vs_exponential: float = np.nan
    ok: bool = True
    message: str = ""

    @property
    def plausible(self) -> bool:
        """Power-law tail not rejected: the KS distance stays below the 1%
        critical value and the Pareto out-scores an exponential tail fit on
        the same exceedances (any smooth tail passes a local KS check, so the
        likelihood comparison is what separates heavy from thin tails)."""
        if not self.ok or self.n_tail <= 0:
            return False
        return self.ks < 1.628 / np.sqrt(self.n_tail) \
            and self.loglik_vs_exponential > 0.0


def hill_alpha(x_sorted, w_sorted, threshold: float) -> tuple[float, float]:
    """Weighted Hill/MLE exponent over values above the threshold."""
    mask = x_sorted > threshold
    xt, wt = x_sorted[mask], w_sorted[mask]
    n = float(wt.sum())
    if n <= 0:
        return np.nan, 0.0
    return float(n / (wt * np.log(xt / threshold)).sum()), n


def _pareto_tail_ks(x_sorted, threshold: float, alpha: float) -> float:
    t = x_sorted[x_sorted > threshold]
    if t.size == 0:
        return 1.0
    cdf = 1.0 - (threshold / t) ** alpha
    return ks_statistic(t, cdf)


def _pareto_vs_exponential_loglik(x_sorted, w_sorted, threshold, alpha):
    """Weighted log-likelihood margin of Pareto over a shifted-exponential
    fit on the exceedances above the threshold."""
    mask = x_sorted > threshold
    t, wt = x_sorted[mask], w_sorted[mask]
    if t.size == 0:
        return np.nan
    ll_pareto = (wt * (np.log(alpha / threshold)
                       - (alpha + 1.0) * np.log(t / threshold))).sum()
    excess = t - threshold
    scale = max(float((wt * excess).sum() / wt.sum()), 1e-300)
    ll_exp = (wt * (-np.log(scale) - excess / scale)).sum()
    return float(ll_pareto - ll_exp)


def fit_pareto_tail(sample, weights=None, threshold: float | None = None,
                    policy: str = QUANTILE_POLICY,
                    quantile: float = TAIL_QUANTILE,
                    min_tail: int = MIN_TAIL) -> ParetoTailFit:
    """Power-law exponent of the upper tail, alpha = n / sum ln(x_i / r*).

    The threshold comes from the fixed-quantile policy by default; the
    KS-scan policy picks the candidate threshold whose fitted Pareto has the
    smallest KS distance (normalized across candidate sizes). An explicit
    ``threshold`` overrides the policy. The estimator is scale-free: scaling
    incomes and threshold together leaves alpha unchanged.
    """
    x, w = _as_weighted(sample, weights)
    if threshold is not None:
        u = float(threshold)
    elif policy == QUANTILE_POLICY:
        u = _weighted_quantile(x, w, quantile)
    elif policy == KS_SCAN_POLICY:
        u = _ks_scan_threshold(x, w, min_tail)
        if u is None:
            return ParetoTailFit(np.nan, np.nan, 0, 1.0, ok=False,
                                 message="no candidate threshold kept a "
                                         f"{min_tail}-point tail")
    else:
        raise UsageError(f"unknown threshold policy {policy!r}")
    alpha, n_tail = hill_alpha(x, w, u)
    if n_tail < min_tail:
        return ParetoTailFit(alpha, u, n_tail, 1.0, ok=False,
                             message=f"only {n_tail:.0f} points above the "
                                     f"threshold (need {min_tail})")
    ks = _pareto_tail_ks(x, u, alpha)
    margin = _pareto_vs_exponential_loglik(x, w, u, alpha)
    return ParetoTailFit(alpha, u, n_tail, ks, margin)


def _ks_scan_threshold(x, w, min_tail):
    total = w.sum()
    qs = np.linspace(0.80, 1.0 - min_tail / total, 30)
    best_u, best_score = None, np.inf
    for q in qs:
        u = _weighted_quantile(x, w, q)
        alpha, n_tail = hill_alpha(x, w, u)
        if n_tail < min_tail or not np.isfinite(alpha):
            continue
        # sqrt(n) normalization puts candidate tails of different sizes on a
        # common footing; raw D always favors the smallest tail
        score = _pareto_tail_ks(x, u, alpha) * np.sqrt(n_tail)
        if score < best_score:
            best_u, best_score = u, score
    return best_u


# ---------------------------------------------------------------------------
# Two-class decomposition
# ---------------------------------------------------------------------------

CROSSOVER_NATS = 0.5
BULK_QUANTILE = 0.95
TAIL_PURITY = 0.05


@dataclass
class TwoClassFit:
    temperature: float            # exponential scale of the lower class
    alpha: float                  # Pareto exponent of the upper class
    crossover: float              # where the sample leaves the exponential law
    f: float                      # upper-class income fraction, 1 - T/<r>
    gini_predicted: float         # (1 + f)/2
    gini_empirical: float
    mean_income: float
    diagnostics: dict = field(default_factory=dict)


def two_class_decompose(sample, weights=None,
                        departure_nats: float = CROSSOVER_NATS,
                        bulk_quantile: float = BULK_QUANTILE,
                        tail_purity: float = TAIL_PURITY,
                        tail_policy: str = "purity",
                        min_tail: int = MIN_TAIL) -> TwoClassFit:
    """Split a sample into exponential bulk and Pareto tail; fit both.

    Crossover: fit an exponential to the lower ``bulk_quantile`` of the data,
    then take the first point where the empirical CCDF exceeds that model by
    ``departure_nats`` (log-ratio). The bulk temperature is then refit by
    truncated MLE below the crossover.

    Power-law threshold: the crossover marks where the exponential class
    stops describing the data, but just above it the two classes still mix,
    which would bias the Hill exponent. The default "purity" policy fits the
    Pareto only where the fitted exponential accounts for at most
    ``tail_purity`` of the empirical CCDF; "quantile" and "ks-scan" defer to
    :func:`fit_pareto_tail`.
    """
    x, w = _as_weighted(sample, weights)
    if w.sum() < max(1000, MIN_POINTS):
        raise UsageError("two-class decomposition needs >= 1000 points")
    mean = float((x * w).sum() / w.sum())
    gini_emp = _gini_sorted(x, w)

    bulk_cut = _weighted_quantile(x, w, bulk_quantile)
    below = x <= bulk_cut
    t0_fit = fit_exponential(x[below], w[below], truncated_at=bulk_cut)
    crossover = _ccdf_departure(x, w, t0_fit.temperature, departure_nats) \
        if t0_fit.ok else None

    if crossover is None:
        # no detectable upper class: the whole sample is the lower class
        temperature = fit_exponential(x, w).temperature
        f = 1.0 - temperature / mean
        return TwoClassFit(temperature, np.nan, np.nan, f, (1.0 + f) / 2.0,
                           gini_emp, mean,
                           diagnostics={"upper_class": "not detected",
                                        "bulk_fit": t0_fit})

    t_fit = fit_exponential(x[x <= crossover], w[x <= crossover],
                            truncated_at=crossover)
    temperature = t_fit.temperature if t_fit.ok else t0_fit.temperature

    if tail_policy == "purity":
        u = _purity_threshold(x, w, temperature, tail_purity, min_tail)
        tail = fit_pareto_tail(x, w, threshold=u, min_tail=min_tail) \
            if u is not None else ParetoTailFit(
                np.nan, np.nan, 0, 1.0, ok=False,
                message="exponential component never drops below the purity "
                        "ratio with enough tail points")
    else:
        tail = fit_pareto_tail(x, w, policy=tail_policy, min_tail=min_tail)

    f = 1.0 - temperature / mean
    return TwoClassFit(float(temperature), float(tail.alpha), float(crossover),
                       float(f), (1.0 + f) / 2.0, gini_emp, mean,
                       diagnostics={
                           "bulk_fit": t_fit,
                           "tail_fit": tail,
                           "tail_threshold": tail.threshold,
                           "tail_ks": tail.ks,
                           "tail_ok": tail.ok,
                       })


def _ccdf_departure(x, w, temperature, nats, min_tail_points: int = 20):
    """First value where the empirical CCDF exceeds e^{nats} times the
    exponential model; None when the sample never departs."""
    cw = np.cumsum(w)
    total = cw[-1]
    ccdf = 1.0 - cw / total
    measurable = ccdf * total >= min_tail_points
    with np.errstate(divide="ignore"):
        log_ratio = np.log(ccdf) + x / temperature
    hit = measurable & (log_ratio > nats)
    idx = np.nonzero(hit)[0]
    return float(x[idx[0]]) if idx.size else None


def _purity_threshold(x, w, temperature, purity, min_tail):
    """Smallest threshold where the fitted exponential explains at most
    ``purity`` of the empirical CCDF, keeping at least ``min_tail`` points.

    Uses the full exponential CCDF (no class-share discount), which can only
    push the threshold deeper, i.e. toward a purer tail.
    """
    cw = np.cumsum(w)
    total = cw[-1]
    ccdf = 1.0 - cw / total
    model = np.exp(-x / temperature)
    ok = (model <= purity * ccdf) & (ccdf * total >= min_tail)
    idx = np.nonzero(ok)[0]
    return float(x[idx[0]]) if idx.size else None


def _gini_sorted(x, w):
    total_w = w.sum()
    total_v = (x * w).sum()
    if total_v == 0:
        return 0.0
    cw = np.cumsum(w)
    return float((w * x * (2.0 * cw - w - total_w)).sum() / (total_w * total_v))


# ---------------------------------------------------------------------------
# Income table ingestion
# ---------------------------------------------------------------------------

@dataclass
class IncomeTable:
    incomes: np.ndarray
    weights: np.ndarray
    source: str = ""

    @property
    def mean(self) -> float:
        return float((self.incomes * self.weights).sum() / self.weights.sum())


def ingest_income_table(path) -> IncomeTable:
    """Read a CSV of raw `income` rows or bracketed `income,weight` rows.

    Malformed rows raise with their line number; weights must be positive
    and incomes nonnegative.
    """
    incomes, weights = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise UsageError(f"{path}: empty file")
        cols = [h.strip().lower() for h in header]
        if "income" not in cols:
            raise UsageError(f"{path}: missing required column 'income'")
        i_col = cols.index("income")
        w_col = cols.index("weight") if "weight" in cols else None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                income = float(row[i_col])
            except (ValueError, IndexError):
                raise UsageError(f"{path}:{lineno}: non-numeric income "
                                 f"{row[i_col] if len(row) > i_col else '<missing>'!r}")
            if income < 0:
                raise UsageError(f"{path}:{lineno}: negative income {income}")
            if w_col is not None:
                try:
                    weight = float(row[w_col])
                except (ValueError, IndexError):
                    raise UsageError(f"{path}:{lineno}: non-numeric weight")
                if weight < 0:
                    raise UsageError(f"{path}:{lineno}: negative weight {weight}")
            else:
                weight = 1.0
            incomes.append(income)
            weights.append(weight)
    if not incomes:
        raise UsageError(f"{path}: no data rows")
    return IncomeTable(np.array(incomes), np.array(weights), str(path))
