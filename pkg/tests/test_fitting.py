import numpy as np
import pytest

from moneykin import UsageError
from moneykin.fitting import (fit_exponential, fit_exponential_loglinear,
                              fit_pareto_tail, ingest_income_table,
                              two_class_decompose)


def pareto(rng, alpha, xm, n):
    return xm * (1.0 - rng.random(n)) ** (-1.0 / alpha)


def mixture(rng, n=100_000, T=30.0, alpha=2.0, xm=97.5, upper_frac=0.03):
    n_upper = int(round(n * upper_frac))
    x = np.concatenate([rng.exponential(T, n - n_upper),
                        pareto(rng, alpha, xm, n_upper)])
    rng.shuffle(x)
    return x


def test_exponential_generator_round_trip():
    x = np.random.default_rng(10).exponential(10.0, 100_000)
    fit = fit_exponential(x, bootstrap=200)
    assert 9.9 < fit.temperature < 10.1
    assert fit.ci_low < fit.temperature < fit.ci_high
    assert fit.ci_high - fit.ci_low < 0.3


def test_degenerate_sample_reports_failure():
    fit = fit_exponential(np.zeros(500))
    assert not fit.ok and "degenerate" in fit.message


def test_needs_enough_points():
    with pytest.raises(UsageError):
        fit_exponential(np.arange(10.0))


def test_loglinear_agrees_with_mle_within_two_percent():
    x = np.random.default_rng(11).exponential(10.0, 200_000)
    mle = fit_exponential(x)
    counts, edges = np.histogram(x, bins=np.arange(0.0, 80.0, 1.0))
    ll = fit_exponential_loglinear(edges[:-1] + 0.5, counts)
    assert abs(ll.temperature - mle.temperature) / mle.temperature < 0.02


def test_truncated_mle_recovers_full_scale():
    x = np.random.default_rng(12).exponential(10.0, 200_000)
    kept = x[x <= 25.0]
    fit = fit_exponential(kept, truncated_at=25.0)
    assert fit.temperature == pytest.approx(10.0, rel=0.03)


def test_truncated_mle_unbounded_diagnostic():
    # near-uniform data on [0, c] pushes the truncated scale to infinity
    x = np.random.default_rng(13).uniform(0.0, 10.0, 5_000)
    fit = fit_exponential(x, truncated_at=10.0)
    assert not fit.ok


def test_weighted_equals_expanded():
    values = np.array([1.0, 5.0, 20.0, 60.0] * 30)
    weights = np.tile([4.0, 3.0, 2.0, 1.0], 30)
    expanded = np.repeat(values, weights.astype(int))
    fw = fit_exponential(values, weights=weights)
    fe = fit_exponential(expanded)
    assert fw.temperature == pytest.approx(fe.temperature)


def test_pareto_generator_round_trip():
    rng = np.random.default_rng(14)
    x = pareto(rng, 2.0, 100.0, 10_000)
    fit = fit_pareto_tail(x, threshold=100.0)
    assert 1.94 < fit.alpha < 2.06
    assert fit.plausible


def test_pareto_scale_free():
    rng = np.random.default_rng(15)
    x = pareto(rng, 1.5, 10.0, 5_000)
    a1 = fit_pareto_tail(x, threshold=10.0).alpha
    a2 = fit_pareto_tail(10.0 * x, threshold=100.0).alpha
    assert a1 == pytest.approx(a2)


def test_pareto_on_exponential_flagged_poor():
    x = np.random.default_rng(16).exponential(10.0, 50_000)
    fit = fit_pareto_tail(x, policy="ks-scan")
    assert not fit.plausible


def test_pareto_too_few_tail_points():
    rng = np.random.default_rng(17)
    x = pareto(rng, 2.0, 1.0, 300)
    fit = fit_pareto_tail(x, threshold=float(np.sort(x)[-50]))
    assert not fit.ok and "need" in fit.message


def test_two_class_pure_exponential():
    x = np.random.default_rng(18).exponential(30.0, 100_000)
    fit = two_class_decompose(x)
    assert abs(fit.f) < 0.02
    assert fit.gini_predicted == pytest.approx(0.5, abs=0.01)
    assert fit.gini_empirical == pytest.approx(0.5, abs=0.01)
    assert fit.diagnostics.get("upper_class") == "not detected" \
        or not fit.diagnostics["tail_ok"]


def test_two_class_mixture_recovery():
    x = mixture(np.random.default_rng(19))
    fit = two_class_decompose(x)
    assert fit.temperature == pytest.approx(30.0, rel=0.05)
    assert fit.alpha == pytest.approx(2.0, rel=0.10)
    assert fit.crossover > 60.0
    assert fit.gini_predicted == (1.0 + fit.f) / 2.0  # identity by construction
    assert fit.f == pytest.approx(1.0 - fit.temperature / fit.mean_income)


def test_two_class_scale_covariance():
    rng = np.random.default_rng(20)
    x = mixture(rng)
    a = two_class_decompose(x)
    b = two_class_decompose(7.0 * x)
    assert b.temperature == pytest.approx(7.0 * a.temperature)
    assert b.crossover == pytest.approx(7.0 * a.crossover)
    assert b.f == pytest.approx(a.f, abs=1e-12)
    assert b.alpha == pytest.approx(a.alpha, abs=1e-9)
    assert b.gini_predicted == pytest.approx(a.gini_predicted, abs=1e-12)


def test_two_class_needs_a_thousand_points():
    with pytest.raises(UsageError):
        two_class_decompose(np.random.default_rng(21).exponential(1.0, 500))


# ---------------------------------------------------------------------------
# Income table ingestion
# ---------------------------------------------------------------------------

def test_ingest_two_rows(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("income,weight\n10,5\n20,5\n")
    table = ingest_income_table(p)
    assert table.mean == 15.0


def test_ingest_raw_income_column(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text("income\n1\n2\n3\n")
    table = ingest_income_table(p)
    assert table.incomes.tolist() == [1.0, 2.0, 3.0]
    assert (table.weights == 1.0).all()


def test_ingest_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(UsageError, match="empty"):
        ingest_income_table(p)


def test_ingest_error_carries_line_number(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("income,weight\n10,1\nvoodoo,2\n")
    with pytest.raises(UsageError, match=":3:"):
        ingest_income_table(p)
    p2 = tmp_path / "neg.csv"
    p2.write_text("income\n-4\n")
    with pytest.raises(UsageError, match=":2:"):
        ingest_income_table(p2)
    p3 = tmp_path / "nocol.csv"
    p3.write_text("wealth\n4\n")
    with pytest.raises(UsageError, match="income"):
        ingest_income_table(p3)


def test_bracketed_round_trip_matches_raw_decomposition(tmp_path):
    """Bin a known mixture into brackets; the weighted decomposition must
    land near the raw-sample one."""
    x = mixture(np.random.default_rng(22))
    raw = two_class_decompose(x)
    edges = np.unique(np.concatenate([
        np.linspace(0, np.quantile(x, 0.99), 400),
        np.quantile(x, np.linspace(0.99, 1.0, 200)) + 1e-9]))
    counts, _ = np.histogram(x, bins=edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    keep = counts > 0
    p = tmp_path / "brackets.csv"
    lines = ["income,weight"] + [f"{m},{c}" for m, c in
                                 zip(mids[keep], counts[keep])]
    p.write_text("\n".join(lines) + "\n")
    table = ingest_income_table(p)
    fit = two_class_decompose(table.incomes, table.weights)
    assert fit.temperature == pytest.approx(raw.temperature, rel=0.05)
    assert fit.alpha == pytest.approx(raw.alpha, rel=0.15)
    assert fit.gini_empirical == pytest.approx(raw.gini_empirical, abs=0.01)
