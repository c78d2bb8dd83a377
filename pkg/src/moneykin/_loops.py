"""Compiled event loops for the Monte Carlo engine.

One event = one transaction attempt: draw an ordered (payer, payee) pair
uniformly, ask the kernel for an amount, apply it unless a boundary would be
breached (the attempt still consumes the tick). All randomness is a pure
function of (stream key, event index), so replicas are reproducible and
independent; every event consumes exactly three counter slots whether or not
all draws are used.

The loops optionally accumulate, without leaving compiled code:
  * snapshot histograms plus exact integer sum / sum-of-squares,
  * per-event occupancy counts (time-averaged marginal, for oracle checks),
  * per-balance first/second moments of balance changes (drift/diffusion),
  * a directed gross-debt matrix with per-sweep interest accrual.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

KC_ADDITIVE_FIXED = 0
KC_ADDITIVE_UNIFORM = 1
KC_MULTIPLICATIVE = 2
KC_RANDOM_SPLIT = 3


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True, nogil=True, inline="always")
def _uniform(key, ctr):
    return np.float64(_mix64(key + ctr * _GOLDEN) >> U64(11)) * _INV53


@njit(cache=True, nogil=True, inline="always")
def _below(key, ctr, n):
    return np.int64(_uniform(key, ctr) * n)


@njit(cache=True, nogil=True, inline="always")
def _round_half_even(x):
    f = np.floor(x)
    q = np.int64(f)
    r = x - f
    if r > 0.5:
        q += 1
    elif r == 0.5 and q % 2 != 0:
        q += 1
    return q


@njit(cache=True, nogil=True, inline="always")
def _rhe_ratio(num, den):
    # round-half-even of num/den in exact integer arithmetic
    q = num // den
    r = num - q * den
    if 2 * r > den:
        q += 1
    elif 2 * r == den and q % 2 != 0:
        q += 1
    return q


@njit(cache=True, nogil=True, inline="always")
def _hist_accumulate(row, values, lo, nbins):
    # row layout: [underflow, nbins unit bins, overflow]
    for a in range(values.shape[0]):
        k = values[a] - lo
        if k < 0:
            row[0] += 1
        elif k >= nbins:
            row[nbins + 1] += 1
        else:
            row[k + 1] += 1


@njit(cache=True, nogil=True)
def run_money(m, events, key, ctr0,
              kcode, p1,
              m_min, has_max, m_max,
              snap_every, hist, hist_lo, snap_sum, snap_sumsq, snap_accepted,
              occ, occ_lo, occ_burn,
              mom_cnt, mom_sum, mom_sum2):
    """Evolve integer balances in place; returns (accepted, counter)."""
    n = m.shape[0]
    nbins = hist.shape[1] - 2 if hist.shape[0] > 0 else 0
    occ_on = occ.shape[0] > 0
    mom_on = mom_cnt.shape[0] > 0
    accepted = 0
    ctr = ctr0
    row = 0
    for ev in range(events):
        i = _below(key, ctr, n)
        j = _below(key, ctr + U64(1), n - 1)
        if j >= i:
            j += 1
        mi = m[i]
        mj = m[j]

        if kcode == KC_RANDOM_SPLIT:
            s = mi + mj
            u = _below(key, ctr + U64(2), s + 1)  # payer's new balance
            ok = u >= m_min and s - u >= m_min
            if ok and has_max:
                ok = u <= m_max and s - u <= m_max
            if ok:
                delta = mi - u
                m[i] = u
                m[j] = s - u
                accepted += 1
            else:
                delta = 0
        else:
            if kcode == KC_ADDITIVE_FIXED:
                d = np.int64(p1)
            elif kcode == KC_ADDITIVE_UNIFORM:
                d = np.int64(1) + _below(key, ctr + U64(2), np.int64(p1))
            else:  # multiplicative
                if mi < 1:
                    d = np.int64(0)
                else:
                    d = _round_half_even(p1 * np.float64(mi))
                    if d < 1:
                        d = np.int64(1)
            delta = np.int64(0)
            if d == 0:
                accepted += 1  # no-op event, not a boundary rejection
            elif mi - d >= m_min and (not has_max or mj + d <= m_max):
                m[i] = mi - d
                m[j] = mj + d
                delta = d
                accepted += 1

        ctr += U64(3)

        if mom_on:
            cap = mom_cnt.shape[0]
            if 0 <= mi < cap:
                mom_cnt[mi] += 1
                mom_sum[mi] -= delta
                mom_sum2[mi] += delta * delta
            if 0 <= mj < cap:
                mom_cnt[mj] += 1
                mom_sum[mj] += delta
                mom_sum2[mj] += delta * delta

        if occ_on and ev >= occ_burn:
            for a in range(n):
                k = m[a] - occ_lo
                if 0 <= k < occ.shape[0]:
                    occ[k] += 1

        if snap_every > 0 and (ev + 1) % snap_every == 0 and row < hist.shape[0]:
            _hist_accumulate(hist[row], m, hist_lo, nbins)
            ssum = np.int64(0)
            ssq = np.int64(0)
            for a in range(n):
                ssum += m[a]
                ssq += m[a] * m[a]
            snap_sum[row] = ssum
            snap_sumsq[row] = ssq
            snap_accepted[row] = accepted
            row += 1
    return accepted, ctr


@njit(cache=True, nogil=True)
def run_credit(m, d, debt, events, key, ctr0,
               delta0,
               has_floor, floor_w,
               rate_num, rate_den, accrue_every,
               snap_every, hist, hist_lo, snap_sum, snap_sumsq, snap_accepted,
               occ, occ_lo, occ_burn):
    """Additive exchange where a payer short of cash buys on credit.

    The shortfall becomes an IOU from payer to payee (pair creation: both net
    worths move by exactly the transacted amount, total money is untouched).
    A hard floor on net worth, when enabled, plays the role of the debt limit.
    With a positive rate, every open directed balance accrues round-half-even
    interest once per sweep, which preserves the zero sum of net positions
    exactly.
    """
    n = m.shape[0]
    nbins = hist.shape[1] - 2 if hist.shape[0] > 0 else 0
    track_matrix = debt.shape[0] > 0
    occ_on = occ.shape[0] > 0
    accepted = 0
    ctr = ctr0
    row = 0
    for ev in range(events):
        i = _below(key, ctr, n)
        j = _below(key, ctr + U64(1), n - 1)
        if j >= i:
            j += 1
        ctr += U64(3)

        wi = m[i] + d[i]
        if has_floor and wi - delta0 < floor_w:
            pass  # rejected attempt, tick consumed
        else:
            cash = m[i] if m[i] < delta0 else delta0
            short = delta0 - cash
            m[i] -= cash
            m[j] += cash
            if short > 0:
                d[i] -= short
                d[j] += short
                if track_matrix:
                    debt[i, j] += short
            accepted += 1

        if rate_num > 0 and track_matrix and (ev + 1) % accrue_every == 0:
            for a in range(n):
                for b in range(n):
                    bal = debt[a, b]
                    if bal > 0:
                        acc = _rhe_ratio(rate_num * bal, rate_den)
                        debt[a, b] = bal + acc
                        d[a] -= acc
                        d[b] += acc

        if occ_on and ev >= occ_burn:
            for a in range(n):
                k = (m[a] + d[a]) - occ_lo
                if 0 <= k < occ.shape[0]:
                    occ[k] += 1

        if snap_every > 0 and (ev + 1) % snap_every == 0 and row < hist.shape[0]:
            ssum = np.int64(0)
            ssq = np.int64(0)
            for a in range(n):
                w = m[a] + d[a]
                k = w - hist_lo
                if k < 0:
                    hist[row, 0] += 1
                elif k >= nbins:
                    hist[row, nbins + 1] += 1
                else:
                    hist[row, k + 1] += 1
                ssum += w
                ssq += w * w
            snap_sum[row] = ssum
            snap_sumsq[row] = ssq
            snap_accepted[row] = accepted
            row += 1
    return accepted, ctr
