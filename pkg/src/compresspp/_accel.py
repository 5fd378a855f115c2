"""Hot numeric loops in two flavors: numba-jitted Gaussian cores and generic
numpy engines.

The jitted functions specialize the Gaussian kernel (the only built-in family)
and return the number of scalar kernel evaluations they performed. The numpy
engines run the same algorithms against a kernel-ops adapter (any registered
kernel family) whose row/mean primitives count evaluations as a side effect,
so both backends report identical counts for identical calls.
"""

from __future__ import annotations

import threading

import numpy as np

from . import backend


class EvalCounter:
    """Accumulator for scalar kernel evaluations (thread-safe; the recursive
    compress branches may run concurrently)."""

    __slots__ = ("count", "_lock")

    def __init__(self):
        self.count = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self.count += int(n)


# ---------------------------------------------------------------------------
# numba cores (Gaussian kernel, scalar loops)
# ---------------------------------------------------------------------------

if backend.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True, inline="always")
    def _gauss(x, y, inv2bw):
        s = 0.0
        for k in range(x.shape[0]):
            t = x[k] - y[k]
            s += t * t
        return np.exp(-s * inv2bw)

    @njit(cache=True, nogil=True)
    def nb_gram_mean(X, Y, inv2bw):
        tot = 0.0
        for i in range(X.shape[0]):
            for j in range(Y.shape[0]):
                tot += _gauss(X[i], Y[j], inv2bw)
        return tot / (X.shape[0] * Y.shape[0]), X.shape[0] * Y.shape[0]

    @njit(cache=True, nogil=True)
    def nb_mean_rows(X, Y, inv2bw):
        # out[i] = mean_j k(X[i], Y[j])
        n = X.shape[0]
        m = Y.shape[0]
        out = np.empty(n)
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += _gauss(X[i], Y[j], inv2bw)
            out[i] = s / m
        return out, n * m

    @njit(cache=True, nogil=True)
    def nb_halve_signs(X, inv2bw, two_log, uniforms):
        # Self-balancing halving of consecutive pairs (X[2t], X[2t+1]).
        # signs[t] = +1 sends X[2t+1] to the selected half, -1 sends X[2t].
        half = X.shape[0] // 2
        signs = np.empty(half, dtype=np.int64)
        sigma_sq = 0.0
        nev = 0
        for t in range(half):
            x = X[2 * t]
            xp = X[2 * t + 1]
            b_sq = _gauss(x, x, inv2bw) + _gauss(xp, xp, inv2bw) \
                - 2.0 * _gauss(x, xp, inv2bw)
            nev += 3
            if b_sq < 0.0:
                b_sq = 0.0
            a = np.sqrt(sigma_sq * b_sq * two_log)
            if b_sq > a:
                a = b_sq
            theta = 0.0
            for j in range(t):
                u = X[2 * j]
                v = X[2 * j + 1]
                theta += signs[j] * (
                    _gauss(u, x, inv2bw) - _gauss(u, xp, inv2bw)
                    - _gauss(v, x, inv2bw) + _gauss(v, xp, inv2bw)
                )
                nev += 4
            if a > 0.0:
                if theta > a:
                    theta = a
                elif theta < -a:
                    theta = -a
                p_plus = 0.5 * (1.0 - theta / a)
            else:
                p_plus = 0.5
            signs[t] = 1 if uniforms[t] <= p_plus else -1
            if a > 0.0:
                upd = b_sq * (1.0 + (b_sq - 2.0 * a) * sigma_sq / (a * a))
                if upd > 0.0:
                    sigma_sq += upd
        return signs, nev

    @njit(cache=True, nogil=True)
    def nb_herding(X, inv2bw, meank, m_out, distinct):
        # Greedy selection maximizing meank[i] - (1/(t+1)) sum_{j<=t} k(x_i, x_j).
        n = X.shape[0]
        out = np.empty(m_out, dtype=np.int64)
        sumk = np.zeros(n)
        taken = np.zeros(n, dtype=np.bool_)
        nev = 0
        for t in range(m_out):
            best = -1
            best_obj = -np.inf
            for i in range(n):
                if distinct and taken[i]:
                    continue
                obj = meank[i] - sumk[i] / (t + 1.0)
                if obj > best_obj:
                    best_obj = obj
                    best = i
            out[t] = best
            taken[best] = True
            xb = X[best]
            for i in range(n):
                sumk[i] += _gauss(X[i], xb, inv2bw)
            nev += n
        return out, nev

    @njit(cache=True, nogil=True)
    def nb_swap_sweep(X, inv2bw, coreset, meank, member_count, distinct):
        # One greedy replacement pass over coreset positions; coreset and
        # member_count are updated in place. Returns the final objective
        # T1/m^2 - (2/m) T2, which differs from the squared MMD to X by a
        # candidate-independent constant, plus the evaluation count.
        n = X.shape[0]
        m = coreset.shape[0]
        nev = 0
        S = np.zeros(n)
        for p in range(m):
            xc = X[coreset[p]]
            for j in range(n):
                S[j] += _gauss(X[j], xc, inv2bw)
            nev += n
        T1 = 0.0
        T2 = 0.0
        for p in range(m):
            T1 += S[coreset[p]]
            T2 += meank[coreset[p]]
        inv_m2 = 1.0 / (m * m)
        two_over_m = 2.0 / m
        rowcp = np.empty(n)
        for p in range(m):
            cp = coreset[p]
            xcp = X[cp]
            base = T1 - 2.0 * S[cp] + 1.0
            best_obj = T1 * inv_m2 - two_over_m * T2
            best_i = cp
            for i in range(n):
                rowcp[i] = _gauss(X[i], xcp, inv2bw)
            nev += n
            for i in range(n):
                if distinct and member_count[i] > 0 and i != cp:
                    continue
                t1_new = base + 2.0 * S[i] - 2.0 * rowcp[i] + 1.0
                obj = t1_new * inv_m2 \
                    - two_over_m * (T2 - meank[cp] + meank[i])
                if obj < best_obj:
                    best_obj = obj
                    best_i = i
            if best_i != cp:
                T1 = base + 2.0 * S[best_i] - 2.0 * rowcp[best_i] + 1.0
                T2 += meank[best_i] - meank[cp]
                xb = X[best_i]
                for j in range(n):
                    S[j] += _gauss(X[j], xb, inv2bw) - rowcp[j]
                nev += n
                member_count[cp] -= 1
                member_count[best_i] += 1
                coreset[p] = best_i
        return T1 * inv_m2 - two_over_m * T2, nev


# ---------------------------------------------------------------------------
# numpy engines (any kernel family, vectorized via a kernel-ops adapter)
# ---------------------------------------------------------------------------
#
# The adapter must provide:
#   ops.rows(A, B)      -> (len(A), len(B)) matrix of kernel values
#   ops.diag(A)         -> (len(A),) vector of k(a, a)
# and count every evaluation it performs.


def np_halve_signs(X, ops, two_log, uniforms):
    half = X.shape[0] // 2
    signs = np.empty(half, dtype=np.int64)
    sigma_sq = 0.0
    for t in range(half):
        pair = X[2 * t:2 * t + 2]
        small = ops.rows(pair, pair)
        b_sq = max(small[0, 0] + small[1, 1] - 2.0 * small[0, 1], 0.0)
        # rows(pair, pair) performs 4 evaluations but the algorithm only
        # needs 3; rebate the duplicate so counts match the jitted core.
        ops.uncount(1)
        a = max(np.sqrt(sigma_sq * b_sq * two_log), b_sq)
        if t > 0:
            block = ops.rows(X[:2 * t], pair)
            diff = block[:, 0] - block[:, 1]
            theta = float(np.dot(signs[:t].astype(np.float64),
                                 diff[0::2] - diff[1::2]))
        else:
            theta = 0.0
        if a > 0.0:
            theta = min(max(theta, -a), a)
            p_plus = 0.5 * (1.0 - theta / a)
        else:
            p_plus = 0.5
        signs[t] = 1 if uniforms[t] <= p_plus else -1
        if a > 0.0:
            upd = b_sq * (1.0 + (b_sq - 2.0 * a) * sigma_sq / (a * a))
            if upd > 0.0:
                sigma_sq += upd
    return signs


def np_herding(X, ops, meank, m_out, distinct):
    n = X.shape[0]
    out = np.empty(m_out, dtype=np.int64)
    sumk = np.zeros(n)
    taken = np.zeros(n, dtype=bool)
    for t in range(m_out):
        obj = meank - sumk / (t + 1.0)
        if distinct:
            obj = np.where(taken, -np.inf, obj)
        best = int(np.argmax(obj))
        out[t] = best
        taken[best] = True
        sumk += ops.rows(X[best:best + 1], X)[0]
    return out


def np_swap_sweep(X, ops, coreset, meank, diag, member_count, distinct):
    n = X.shape[0]
    m = coreset.shape[0]
    S = ops.rows(X, X[coreset]).sum(axis=1)
    T1 = float(S[coreset].sum())
    T2 = float(meank[coreset].sum())
    inv_m2 = 1.0 / (m * m)
    two_over_m = 2.0 / m
    for p in range(m):
        cp = int(coreset[p])
        base = T1 - 2.0 * S[cp] + diag[cp]
        cur_obj = T1 * inv_m2 - two_over_m * T2
        rowcp = ops.rows(X, X[cp:cp + 1])[:, 0]
        t1_new = base + 2.0 * S - 2.0 * rowcp + diag
        obj = t1_new * inv_m2 - two_over_m * (T2 - meank[cp] + meank)
        if distinct:
            mask = member_count > 0
            mask[cp] = False
            obj = np.where(mask, np.inf, obj)
        best_i = int(np.argmin(obj))
        if obj[best_i] < cur_obj and best_i != cp:
            T1 = base + 2.0 * S[best_i] - 2.0 * rowcp[best_i] + diag[best_i]
            T2 += meank[best_i] - meank[cp]
            S += ops.rows(X, X[best_i:best_i + 1])[:, 0] - rowcp
            member_count[cp] -= 1
            member_count[best_i] += 1
            coreset[p] = best_i
    return T1 * inv_m2 - two_over_m * T2
