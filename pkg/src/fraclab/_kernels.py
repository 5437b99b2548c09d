"""Compiled pair-sum loops.

Every loop reduces one row (one ``x`` cell) at a time with compensated
summation; callers merge the row totals with ``math.fsum`` so results do not
depend on the thread count.
"""

from __future__ import annotations

import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer")

import numba as nb  # noqa: E402
import numpy as np  # noqa: E402


@nb.njit(cache=True, inline="always")
def _powabs(x, p):
    if p == 2.0:
        return x * x
    if p == 1.0:
        return abs(x)
    return abs(x) ** p


@nb.njit(parallel=True, cache=True)
def pair_rows(act, vals, part, pvals, pweight, kern, strides, p, swap):
    """Rows ``sum_b w_b |u_a - v_b|^p K(a - b)`` for active cells ``a``.

    ``act``/``part`` are integer cell coordinates, ``kern`` a flattened table
    over absolute offsets.  Pairs with identical coordinates are skipped.
    With ``swap`` the difference is taken as ``v_b - u_a`` and offsets as
    ``b - a``, i.e. the roles of the two points exchanged.
    """
    m = act.shape[0]
    k = part.shape[0]
    n = act.shape[1]
    rows = np.zeros(m)
    for a in nb.prange(m):
        s = 0.0
        c = 0.0
        ua = vals[a]
        for b in range(k):
            off = 0
            for d in range(n):
                if swap:
                    off += abs(part[b, d] - act[a, d]) * strides[d]
                else:
                    off += abs(act[a, d] - part[b, d]) * strides[d]
            if off == 0:
                continue
            if swap:
                diff = pvals[b] - ua
            else:
                diff = ua - pvals[b]
            t = pweight[b] * _powabs(diff, p) * kern[off]
            y = t - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        rows[a] = s
    return rows


@nb.njit(parallel=True, cache=True)
def pair_grad(act, vals, zero_weight, kern, strides, p):
    """Energy rows and gradient of ``sum_{a != b} |u_a - u_b|^p K + 2 sum_a |u_a|^p Z_a``."""
    m = act.shape[0]
    n = act.shape[1]
    rows = np.zeros(m)
    grad = np.zeros(m)
    for a in nb.prange(m):
        s = 0.0
        g = 0.0
        ua = vals[a]
        for b in range(m):
            if b == a:
                continue
            off = 0
            for d in range(n):
                off += abs(act[a, d] - act[b, d]) * strides[d]
            diff = ua - vals[b]
            ad = abs(diff)
            kk = kern[off]
            pw = _powabs(ad, p)
            s += pw * kk
            if ad > 0.0:
                # d/du |u - v|^p = p |u - v|^p / (u - v)
                g += 2.0 * p * pw / diff * kk
        au = abs(ua)
        s += 2.0 * _powabs(au, p) * zero_weight[a]
        if au > 0.0:
            g += 2.0 * p * au ** (p - 1.0) * (1.0 if ua > 0 else -1.0) * zero_weight[a]
        rows[a] = s
        grad[a] = g
    return rows, grad


@nb.njit(parallel=True, cache=True)
def tau_rows_2d(u, inside, dist, h, tau, s_exp, p):
    """Rows of the restricted pair sum: ``y`` ranges over ``|x - y| < tau dist(x)``.

    ``u``, ``inside``, ``dist`` are 2-d arrays; the weight is
    ``|x - y|^(-2 - s_exp) h^4``.
    """
    nx, ny = u.shape
    rows = np.zeros(nx)
    expo = -2.0 - s_exp
    for i in nb.prange(nx):
        s = 0.0
        c = 0.0
        for j in range(ny):
            if not inside[i, j]:
                continue
            r = tau * dist[i, j]
            rr = r / h
            R = int(rr)
            ux = u[i, j]
            for di in range(-R, R + 1):
                ii = i + di
                if ii < 0 or ii >= nx:
                    continue
                for dj in range(-R, R + 1):
                    if di == 0 and dj == 0:
                        continue
                    jj = j + dj
                    if jj < 0 or jj >= ny or not inside[ii, jj]:
                        continue
                    d2 = float(di * di + dj * dj)
                    if d2 >= rr * rr:
                        continue
                    t = _powabs(ux - u[ii, jj], p) * (d2 ** (0.5 * expo)) * h ** (expo + 4.0)
                    y = t - c
                    tt = s + y
                    c = (tt - s) - y
                    s = tt
        rows[i] = s
    return rows


@nb.njit(parallel=True, cache=True)
def tau_rows_3d(u, inside, dist, h, tau, s_exp, p):
    nx, ny, nz = u.shape
    rows = np.zeros(nx)
    expo = -3.0 - s_exp
    for i in nb.prange(nx):
        s = 0.0
        c = 0.0
        for j in range(ny):
            for k in range(nz):
                if not inside[i, j, k]:
                    continue
                rr = tau * dist[i, j, k] / h
                R = int(rr)
                ux = u[i, j, k]
                for di in range(-R, R + 1):
                    ii = i + di
                    if ii < 0 or ii >= nx:
                        continue
                    for dj in range(-R, R + 1):
                        jj = j + dj
                        if jj < 0 or jj >= ny:
                            continue
                        for dk in range(-R, R + 1):
                            if di == 0 and dj == 0 and dk == 0:
                                continue
                            kk = k + dk
                            if kk < 0 or kk >= nz or not inside[ii, jj, kk]:
                                continue
                            d2 = float(di * di + dj * dj + dk * dk)
                            if d2 >= rr * rr:
                                continue
                            t = _powabs(ux - u[ii, jj, kk], p) * (d2 ** (0.5 * expo)) * h ** (expo + 6.0)
                            y = t - c
                            tt = s + y
                            c = (tt - s) - y
                            s = tt
        rows[i] = s
    return rows
