"""Numba-compiled inner loops.

All kernels release the GIL so a thread pool gets true parallelism.
They operate on the flat variable arrays directly; orientation and
bookkeeping conventions must match core.py exactly:

  * pair position of (i, j), i < j:  i*(n-1) - i*(i-1)/2 + (j-i-1)
  * metric key code: ((i*n + j)*n + k)*3 + kind, kinds 0/1/2 in the
    fixed visit order (IJ, IK, JK)
  * duals below THETA_FLOOR are dropped from the sparse worker arrays

The metric kernels fuse the dual correction and the projection into a
single update v += ((y_old - theta)/eps) W^-1 a, computing the
constraint value once.
"""

import numpy as np
from numba import njit

THETA_FLOOR = 1e-15


@njit(cache=True, inline="always")
def _pidx(n, i, j):
    return i * (n - 1) - i * (i - 1) // 2 + (j - i - 1)


@njit(cache=True, nogil=True)
def max_violation(xv, fv, dflat, n):
    viol = 0.0
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            pij = _pidx(n, i, j)
            for k in range(j + 1, n):
                pik = _pidx(n, i, k)
                pjk = _pidx(n, j, k)
                xij = xv[pij]
                xik = xv[pik]
                xjk = xv[pjk]
                v1 = xij - xik - xjk
                v2 = xik - xij - xjk
                v3 = xjk - xij - xik
                if v1 > viol:
                    viol = v1
                if v2 > viol:
                    viol = v2
                if v3 > viol:
                    viol = v3
    m = n * (n - 1) // 2
    for p in range(m):
        vu = xv[p] - fv[p] - dflat[p]
        vl = dflat[p] - xv[p] - fv[p]
        if vu > viol:
            viol = vu
        if vl > viol:
            viol = vl
    return viol


@njit(cache=True, nogil=True)
def metric_units_pass(xv, n, b, units, eps, winvx,
                      rkeys, rvals, cursor, wkeys, wvals):
    """Visit all triplets of the given tile units, three constraints each.

    units is an (m, 2) array of (x, z) tile bases, processed in order.
    Reads old duals from (rkeys, rvals) at cursor, appends new nonzero
    duals to (wkeys, wvals).  Returns (written, cursor, viol, steps).
    """
    wcount = 0
    viol = 0.0
    steps = 0
    rlen = rkeys.shape[0]
    for u in range(units.shape[0]):
        x = units[u, 0]
        z = units[u, 1]
        ilo = x if x > 0 else 0
        ihi = x + b - 1
        klo = z - b + 1
        if klo < 0:
            klo = 0
        jb = x + 1
        while jb <= z - 1:
            je = jb + b - 1
            if je > z - 1:
                je = z - 1
            jlo = jb if jb > 1 else 1
            # one b x b x b cube: k outer, j middle, i inner (column locality)
            for k in range(klo, z + 1):
                jtop = je if je < k - 1 else k - 1
                for j in range(jlo, jtop + 1):
                    pjk = _pidx(n, j, k)
                    itop = ihi if ihi < j - 1 else j - 1
                    for i in range(ilo, itop + 1):
                        pij = _pidx(n, i, j)
                        pik = _pidx(n, i, k)
                        tcode = ((i * n + j) * n + k) * 3
                        for kind in range(3):
                            if kind == 0:
                                plus = pij
                                m1 = pik
                                m2 = pjk
                            elif kind == 1:
                                plus = pik
                                m1 = pij
                                m2 = pjk
                            else:
                                plus = pjk
                                m1 = pij
                                m2 = pik
                            key = tcode + kind
                            y_old = 0.0
                            if cursor < rlen and rkeys[cursor] == key:
                                y_old = rvals[cursor]
                                cursor += 1
                            d0 = xv[plus] - xv[m1] - xv[m2]
                            if d0 > viol:
                                viol = d0
                            s = winvx[plus] + winvx[m1] + winvx[m2]
                            delta = d0 + y_old * s / eps
                            theta = eps * delta / s if delta > 0.0 else 0.0
                            coef = (y_old - theta) / eps
                            if coef != 0.0:
                                xv[plus] += coef * winvx[plus]
                                xv[m1] -= coef * winvx[m1]
                                xv[m2] -= coef * winvx[m2]
                            if theta > THETA_FLOOR:
                                wkeys[wcount] = key
                                wvals[wcount] = theta
                                wcount += 1
                            steps += 1
            jb += b
    return wcount, cursor, viol, steps


@njit(cache=True, nogil=True)
def serial_metric_pass(xv, n, eps, winvx, rkeys, rvals, cursor, wkeys, wvals):
    """Lexicographic (i, j, k) visit order; otherwise as metric_units_pass."""
    wcount = 0
    viol = 0.0
    steps = 0
    rlen = rkeys.shape[0]
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            pij = _pidx(n, i, j)
            for k in range(j + 1, n):
                pik = _pidx(n, i, k)
                pjk = _pidx(n, j, k)
                tcode = ((i * n + j) * n + k) * 3
                for kind in range(3):
                    if kind == 0:
                        plus = pij
                        m1 = pik
                        m2 = pjk
                    elif kind == 1:
                        plus = pik
                        m1 = pij
                        m2 = pjk
                    else:
                        plus = pjk
                        m1 = pij
                        m2 = pik
                    key = tcode + kind
                    y_old = 0.0
                    if cursor < rlen and rkeys[cursor] == key:
                        y_old = rvals[cursor]
                        cursor += 1
                    d0 = xv[plus] - xv[m1] - xv[m2]
                    if d0 > viol:
                        viol = d0
                    s = winvx[plus] + winvx[m1] + winvx[m2]
                    delta = d0 + y_old * s / eps
                    theta = eps * delta / s if delta > 0.0 else 0.0
                    coef = (y_old - theta) / eps
                    if coef != 0.0:
                        xv[plus] += coef * winvx[plus]
                        xv[m1] -= coef * winvx[m1]
                        xv[m2] -= coef * winvx[m2]
                    if theta > THETA_FLOOR:
                        wkeys[wcount] = key
                        wvals[wcount] = theta
                        wcount += 1
                    steps += 1
    return wcount, cursor, viol, steps


@njit(cache=True, nogil=True)
def pair_pass(xv, fv, lo, hi, eps, winvx, winvf, dflat, pair_duals):
    """Both pair constraints (upper then lower) for pairs in [lo, hi)."""
    viol = 0.0
    steps = 0
    for p in range(lo, hi):
        d = dflat[p]
        s = winvx[p] + winvf[p]
        # upper: x_ij - f_ij <= d_ij
        y_old = pair_duals[p, 0]
        d0 = xv[p] - fv[p] - d
        if d0 > viol:
            viol = d0
        delta = d0 + y_old * s / eps
        theta = eps * delta / s if delta > 0.0 else 0.0
        coef = (y_old - theta) / eps
        if coef != 0.0:
            xv[p] += coef * winvx[p]
            fv[p] -= coef * winvf[p]
        pair_duals[p, 0] = theta if theta > THETA_FLOOR else 0.0
        steps += 1
        # lower: -x_ij - f_ij <= -d_ij
        y_old = pair_duals[p, 1]
        d0 = d - xv[p] - fv[p]
        if d0 > viol:
            viol = d0
        delta = d0 + y_old * s / eps
        theta = eps * delta / s if delta > 0.0 else 0.0
        coef = (y_old - theta) / eps
        if coef != 0.0:
            xv[p] -= coef * winvx[p]
            fv[p] -= coef * winvf[p]
        pair_duals[p, 1] = theta if theta > THETA_FLOOR else 0.0
        steps += 1
    return viol, steps
