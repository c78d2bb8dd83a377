"""Exact reference solver for tiny instances.

Enumerates every way to split the total money among the agents, builds the
master-equation rate matrix generated by one kernel event (ordered pair plus
amount draw, boundary-forbidden moves omitted), and solves for the stationary
distribution directly. Where the Monte Carlo engine samples, this module
enumerates, so the two can be cross-checked on small systems. The amount
integerization is shared with the engine, so the reference describes the
implemented system rather than an idealization.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .kernels import (ADDITIVE_FIXED, ADDITIVE_UNIFORM, LETS_SERVICE,
                      MULTIPLICATIVE, ExchangeKernel, round_half_even)
from .ledger import ConfigError, UsageError

STATE_GUARD = 1_000_000
DENSE_LIMIT = 10_000


@dataclass
class StateSpace:
    """All compositions of the total into per-agent balances >= m_min."""

    states: np.ndarray          # (n_states, n_agents) balances
    index: dict[tuple, int]
    total: int
    m_min: int

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]


def state_count(n: int, total: int, m_min: int = 0) -> int:
    shifted = total - n * m_min
    if shifted < 0:
        return 0
    return comb(shifted + n - 1, n - 1)


def enumerate_states(n: int, total: int, m_min: int = 0,
                     guard: int = STATE_GUARD) -> StateSpace:
    """All length-n integer tuples >= m_min summing to total."""
    count = state_count(n, total, m_min)
    if count == 0:
        raise ConfigError("no states: total below n * m_min")
    if count > guard:
        raise ConfigError(f"state space has {count} states, exceeding the "
                          f"guard of {guard}")
    shifted = total - n * m_min
    rows = []
    comp = np.zeros(n, dtype=np.int64)

    def rec(pos, remaining):
        if pos == n - 1:
            comp[pos] = remaining
            rows.append(comp.copy())
            return
        for v in range(remaining + 1):
            comp[pos] = v
            rec(pos + 1, remaining - v)

    rec(0, shifted)
    states = np.array(rows, dtype=np.int64) + m_min
    index = {tuple(s): i for i, s in enumerate(states)}
    return StateSpace(states, index, total, m_min)


def _amount_distribution(kernel: ExchangeKernel, payer: int, payee: int):
    """[(delta, probability)] proposed for one (payer, payee) event.

    Mirrors ``propose_delta``; the pooled split reports the payer's loss,
    which may be negative.
    """
    if kernel.kind in (ADDITIVE_FIXED, LETS_SERVICE):
        return [(kernel.delta0, 1.0)]
    if kernel.kind == ADDITIVE_UNIFORM:
        p = 1.0 / kernel.delta_max
        return [(d, p) for d in range(1, kernel.delta_max + 1)]
    if kernel.kind == MULTIPLICATIVE:
        if payer < 1:
            return []
        return [(max(1, round_half_even(kernel.gamma * float(payer))), 1.0)]
    s = payer + payee
    p = 1.0 / (s + 1)
    return [(payer - u, p) for u in range(s + 1)]


def build_master(n: int, total: int, kernel: ExchangeKernel,
                 m_min: int = 0, m_max: int | None = None,
                 guard: int = STATE_GUARD) -> tuple[StateSpace, sparse.csr_matrix]:
    """State space and generator matrix Q (row sums zero) for one instance.

    Each legal (ordered pair, amount) event contributes its per-event
    probability as the off-diagonal rate; boundary-breaching moves are
    omitted, which makes the rejected attempts self-loops that drop out of Q.
    """
    space = enumerate_states(n, total, m_min, guard)
    pair_p = 1.0 / (n * (n - 1))
    rows, cols, vals = [], [], []
    for si in range(space.n_states):
        s = space.states[si]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for delta, prob in _amount_distribution(kernel, int(s[i]), int(s[j])):
                    if delta == 0:
                        continue
                    ni, nj = s[i] - delta, s[j] + delta
                    if ni < m_min or nj < m_min:
                        continue
                    if m_max is not None and (ni > m_max or nj > m_max):
                        continue
                    t = s.copy()
                    t[i], t[j] = ni, nj
                    rows.append(si)
                    cols.append(space.index[tuple(t)])
                    vals.append(pair_p * prob)
    q = sparse.coo_matrix((vals, (rows, cols)),
                          shape=(space.n_states, space.n_states)).tocsr()
    q = q - sparse.diags(np.asarray(q.sum(axis=1)).ravel())
    return space, q.tocsr()


def stationary(q: sparse.csr_matrix, initial: np.ndarray | None = None) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 by direct linear algebra.

    Irreducible chains get the unique stationary vector. A reducible chain is
    solved per closed communicating class and mixed with the exact absorption
    weights of the initial distribution (uniform if omitted).
    """
    n = q.shape[0]
    ncomp, labels = connected_components(abs(q) > 0, directed=True,
                                         connection="strong")
    if ncomp == 1:
        return _stationary_irreducible(q)
    if initial is None:
        initial = np.full(n, 1.0 / n)
    closed = _closed_classes(q, ncomp, labels)
    weights = _absorption_weights(q, labels, closed, initial)
    pi = np.zeros(n)
    for ci, cls in enumerate(closed):
        idx = np.nonzero(labels == cls)[0]
        sub = q[np.ix_(idx, idx)]
        pi[idx] = weights[ci] * _stationary_irreducible(sparse.csr_matrix(sub))
    return pi


def _stationary_irreducible(q) -> np.ndarray:
    n = q.shape[0]
    if n <= DENSE_LIMIT:
        a = q.toarray().T if sparse.issparse(q) else np.asarray(q).T
        a = a.copy()
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = np.linalg.solve(a, b)
    else:
        a = sparse.csr_matrix(q).T.tolil()
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = sparse.linalg.spsolve(a.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _closed_classes(q, ncomp, labels):
    qb = sparse.csr_matrix(abs(q) > 0)
    closed = []
    for c in range(ncomp):
        idx = np.nonzero(labels == c)[0]
        outside = qb[idx][:, np.nonzero(labels != c)[0]]
        if outside.nnz == 0:
            closed.append(c)
    return closed


def _absorption_weights(q, labels, closed, initial):
    """P(absorbed in each closed class | initial distribution)."""
    n = q.shape[0]
    closed_set = set(closed)
    transient = np.nonzero(~np.isin(labels, closed))[0]
    weights = np.array([initial[labels == c].sum() for c in closed])
    if transient.size == 0:
        return weights / weights.sum()
    # jump-chain absorption: solve (I - P_tt) X = P_t,class
    qd = q.toarray()
    rates = -np.diag(qd)[transient]
    p_tt = qd[np.ix_(transient, transient)] / rates[:, None]
    np.fill_diagonal(p_tt, 0.0)
    rhs = np.zeros((transient.size, len(closed)))
    for ci, c in enumerate(closed):
        cols = np.nonzero(labels == c)[0]
        rhs[:, ci] = qd[np.ix_(transient, cols)].sum(axis=1) / rates
    x = np.linalg.solve(np.eye(transient.size) - p_tt, rhs)
    weights = weights + initial[transient] @ x
    return weights / weights.sum()


def stationarity_residual(q, pi: np.ndarray) -> float:
    return float(np.abs(pi @ q).max())


def detailed_balance_residual(q, pi: np.ndarray) -> float:
    """max over state pairs of |pi_s q_st - pi_t q_ts|; zero iff reversible."""
    coo = sparse.coo_matrix(q)
    qt = sparse.csr_matrix(q).T.tocsr()
    worst = 0.0
    for s, t, rate in zip(coo.row, coo.col, coo.data):
        if s == t:
            continue
        back = qt[s, t]
        worst = max(worst, abs(pi[s] * rate - pi[t] * back))
    return worst


def marginal_money(space: StateSpace, pi: np.ndarray,
                   agent: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stationary balance distribution of one agent (agents exchangeable)."""
    if pi.shape[0] != space.n_states:
        raise UsageError("pi length does not match the state space")
    balances = space.states[:, agent]
    lo, hi = int(balances.min()), int(balances.max())
    values = np.arange(lo, hi + 1)
    probs = np.zeros(values.size)
    np.add.at(probs, balances - lo, pi)
    return values, probs


def l1_distance(values_a, probs_a, values_b, probs_b) -> float:
    lo = min(values_a.min(), values_b.min())
    hi = max(values_a.max(), values_b.max())
    pa = np.zeros(hi - lo + 1)
    pb = np.zeros(hi - lo + 1)
    pa[np.asarray(values_a) - lo] = probs_a
    pb[np.asarray(values_b) - lo] = probs_b
    return float(np.abs(pa - pb).sum())


@dataclass
class VerificationReport:
    l1: float
    tolerance: float
    passed: bool
    oracle_values: np.ndarray
    oracle_probs: np.ndarray
    empirical_probs: np.ndarray


def verify_simulation(config, tolerance: float, burn_in: int | None = None,
                      guard: int = STATE_GUARD) -> VerificationReport:
    """Compare the engine's time-averaged marginal with the exact one.

    The same instance is enumerated and simulated: the engine accumulates
    per-event occupancy of every agent's balance (net worth for credit runs)
    after burn-in, and the L1 gap against the enumerated marginal decides
    pass/fail.
    """
    from .engine import run  # local import to avoid a cycle

    total = config.n * config.per_capita
    if config.credit is not None:
        if config.credit.debt_limit is None:
            raise ConfigError("only bounded-debt credit runs can be verified "
                              "by enumeration")
        m_min = -config.credit.debt_limit
    else:
        m_min = config.m_min if config.m_min is not None else 0
    space, q = build_master(config.n, total, config.kernel,
                            m_min=m_min, m_max=config.m_max, guard=guard)
    pi = stationary(q)
    values, probs = marginal_money(space, pi)

    burn = burn_in if burn_in is not None else config.steps // 10
    traj = run(config, collect_occupancy=True,
               occupancy_range=(int(values[0]), int(values[-1]) + 1),
               occupancy_burn=burn)
    occ = traj[0].occupancy.astype(np.float64)
    emp = occ / occ.sum()
    l1 = l1_distance(values, probs, values, emp)
    return VerificationReport(l1, tolerance, l1 < tolerance, values, probs, emp)
