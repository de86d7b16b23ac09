"""Compiled inner loops for Galerkin assembly of the K and T operators.

Near triangle pairs use singularity extraction: the 1/R part of G and the
1/R**3 and 1/R parts of grad G are integrated in closed form over the trial
triangle, the smooth remainder by the regular rule.
"""

import math

import numpy as np
from numba import njit

FOUR_PI = 4.0 * math.pi


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def static_potentials(x, v, n):
    """Closed-form integrals over the flat triangle ``v`` (3x3, CCW about ``n``).

    Returns (I0, Irho, Igrad, rho, d) with
      I0    = int 1/R dS'
      Irho  = int (r' - rho)/R dS'
      Igrad = int grad_x (1/R) dS'
    where rho is the projection of x on the plane and d = n.(x - v0).
    """
    d = (x[0] - v[0, 0]) * n[0] + (x[1] - v[0, 1]) * n[1] + (x[2] - v[0, 2]) * n[2]
    rho = x - d * n
    scale = 0.0
    for i in range(3):
        for c in range(3):
            scale = max(scale, abs(v[i, c] - v[(i + 1) % 3, c]))
    if abs(d) < 1e-12 * scale:
        d = 0.0
    ad = abs(d)
    i0 = 0.0
    irho = np.zeros(3)
    sum_uf = np.zeros(3)
    sum_beta = 0.0
    tiny = (1e-12 * scale) ** 2
    for i in range(3):
        a = v[i]
        b = v[(i + 1) % 3]
        edge = b - a
        lvec = edge / math.sqrt(edge[0] ** 2 + edge[1] ** 2 + edge[2] ** 2)
        u = _cross(lvec, n)
        am = a - rho
        bm = b - rho
        lp = bm[0] * lvec[0] + bm[1] * lvec[1] + bm[2] * lvec[2]
        lm = am[0] * lvec[0] + am[1] * lvec[1] + am[2] * lvec[2]
        p0 = am[0] * u[0] + am[1] * u[1] + am[2] * u[2]
        r02 = p0 * p0 + d * d
        rp = math.sqrt(lp * lp + r02)
        rm = math.sqrt(lm * lm + r02)
        if lm >= 0.0:
            f = math.log((rp + lp) / (rm + lm))
        elif lp <= 0.0:
            f = math.log((rm - lm) / (rp - lp))
        elif r02 > tiny:
            f = math.log((rp + lp) * (rm - lm) / r02)
        else:
            f = 0.0
        if abs(p0) > 1e-14 * scale:
            beta = math.atan(p0 * lp / (r02 + ad * rp)) - math.atan(p0 * lm / (r02 + ad * rm))
        else:
            beta = 0.0
        i0 += p0 * f - ad * beta
        sum_beta += beta
        w = 0.5 * (r02 * f + lp * rp - lm * rm)
        for c in range(3):
            irho[c] += w * u[c]
            sum_uf[c] += u[c] * f
    sgn = 0.0
    if d > 0.0:
        sgn = 1.0
    elif d < 0.0:
        sgn = -1.0
    igrad = -sum_uf - sgn * sum_beta * n
    return i0, irho, igrad, rho, d


@njit(cache=True)
def _g_smooth(k, r):
    """(exp(-jkR) - 1)/(4 pi R), finite at R = 0."""
    a = 1j * k * r
    if abs(a) < 0.5:
        term = -a + 0j
        s = term
        for m in range(2, 14):
            term = term * (-a) / m
            s += term
        return s / (FOUR_PI * r) if r > 0.0 else -1j * k / FOUR_PI
    return (np.exp(-a) - 1.0) / (FOUR_PI * r)


@njit(cache=True)
def _grad_smooth(k, r):
    """grad G minus its 1/R**3 and 1/R parts, as the factor multiplying (x - y)."""
    a = 1j * k * r
    if abs(a) < 0.5:
        # sum_{m>=3} (-1)^m (m-1) a^m / m!
        fact = 6.0
        pw = a * a * a
        s = -2.0 * pw / fact
        for m in range(4, 16):
            pw = pw * a
            fact *= m
            s += (-1.0) ** m * (m - 1) * pw / fact
        if r == 0.0:
            return 0.0 + 0j
        return s / (FOUR_PI * r ** 3)
    h = 1.0 - (1.0 + a) * np.exp(-a)
    return (h - 0.5 * a * a) / (FOUR_PI * r ** 3)


@njit(cache=True)
def _pair_locals(P, Q, corners, normals, areas, bary, wq, ks, near, Kloc, Tloc, skip_k):
    """Local 3x3 K and T blocks (per medium) for test triangle P, trial triangle Q."""
    nq = wq.shape[0]
    nm = ks.shape[0]
    xs = np.zeros((nq, 3))
    ys = np.zeros((nq, 3))
    for i in range(nq):
        for c in range(3):
            xs[i, c] = bary[i, 0] * corners[P, 0, c] + bary[i, 1] * corners[P, 1, c] + bary[i, 2] * corners[P, 2, c]
            ys[i, c] = bary[i, 0] * corners[Q, 0, c] + bary[i, 1] * corners[Q, 1, c] + bary[i, 2] * corners[Q, 2, c]
    wx = wq * areas[P]
    wy = wq * areas[Q]
    for m in range(nm):
        for a in range(3):
            for b in range(3):
                Kloc[m, a, b] = 0.0
                Tloc[m, a, b] = 0.0
    u = np.zeros(nm, dtype=np.complex128)
    U = np.zeros((nm, 3), dtype=np.complex128)
    V = np.zeros((nm, 3), dtype=np.complex128)
    for i in range(nq):
        x = xs[i]
        u[:] = 0.0
        U[:, :] = 0.0
        V[:, :] = 0.0
        for j in range(nq):
            dx = x[0] - ys[j, 0]
            dy = x[1] - ys[j, 1]
            dz = x[2] - ys[j, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            for m in range(nm):
                k = ks[m]
                if near:
                    gval = _g_smooth(k, r)
                    gg = _grad_smooth(k, r)
                else:
                    e = np.exp(-1j * k * r)
                    gval = e / (FOUR_PI * r)
                    gg = -(1.0 + 1j * k * r) * e / (FOUR_PI * r ** 3)
                wg = wy[j] * gval
                u[m] += wg
                U[m, 0] += wg * ys[j, 0]
                U[m, 1] += wg * ys[j, 1]
                U[m, 2] += wg * ys[j, 2]
                wgg = wy[j] * gg
                V[m, 0] += wgg * dx
                V[m, 1] += wgg * dy
                V[m, 2] += wgg * dz
        if near:
            i0, irho, igrad, rho, d = static_potentials(x, corners[Q], normals[Q])
            for m in range(nm):
                k = ks[m]
                u[m] += i0 / FOUR_PI
                c2 = -k * k / (2.0 * FOUR_PI)
                for c in range(3):
                    U[m, c] += (irho[c] + rho[c] * i0) / FOUR_PI
                    # int (x - y)/R dS' = d n I0 - Irho
                    V[m, c] += igrad[c] / FOUR_PI + c2 * (d * normals[Q, c] * i0 - irho[c])
        for m in range(nm):
            k = ks[m]
            for a in range(3):
                pa = corners[P, a]
                xa0 = x[0] - pa[0]
                xa1 = x[1] - pa[1]
                xa2 = x[2] - pa[2]
                for b in range(3):
                    qb = corners[Q, b]
                    xb0 = x[0] - qb[0]
                    xb1 = x[1] - qb[1]
                    xb2 = x[2] - qb[2]
                    # (x - p_a).(U - q_b u)
                    dot = xa0 * (U[m, 0] - qb[0] * u[m]) + xa1 * (U[m, 1] - qb[1] * u[m]) + xa2 * (U[m, 2] - qb[2] * u[m])
                    if k != 0:
                        Tloc[m, a, b] += wx[i] * (-1j * k * dot + 4j / k * u[m])
                    if not skip_k:
                        # V . ((x - q_b) x (x - p_a))
                        c0 = xb1 * xa2 - xb2 * xa1
                        c1 = xb2 * xa0 - xb0 * xa2
                        c2 = xb0 * xa1 - xb1 * xa0
                        Kloc[m, a, b] += wx[i] * (V[m, 0] * c0 + V[m, 1] * c1 + V[m, 2] * c2)


@njit(cache=True)
def assemble_kt(corners, normals, areas, centroids, diam, tri_edge, tri_coef, bary, wq, near_bary, near_wq, ks,
                test_tris, trial_tris, row_map, col_map, near_factor, nrow, ncol):
    """Dense K and T blocks for every medium wavenumber in ``ks``.

    Each unordered triangle pair is integrated once with the lower triangle
    index as the test side, so the result is exactly symmetric whenever the
    test and trial edge sets coincide, and any sub-block equals the matching
    slice of the full matrix.  Near pairs use ``near_bary``/``near_wq`` for
    the outer integral and the smooth remainder.
    """
    nm = ks.shape[0]
    K = np.zeros((nm, nrow, ncol), dtype=np.complex128)
    T = np.zeros((nm, nrow, ncol), dtype=np.complex128)
    Kloc = np.zeros((nm, 3, 3), dtype=np.complex128)
    Tloc = np.zeros((nm, 3, 3), dtype=np.complex128)
    nf = corners.shape[0]
    in_test = np.zeros(nf, dtype=np.bool_)
    in_trial = np.zeros(nf, dtype=np.bool_)
    for t in test_tris:
        in_test[t] = True
    for t in trial_tris:
        in_trial[t] = True
    for P in range(nf):
        if not (in_test[P] or in_trial[P]):
            continue
        for Q in range(P, nf):
            # pair (P,Q) feeds rows on P with columns on Q, and rows on Q with columns on P
            fwd = in_test[P] and in_trial[Q]
            bwd = in_test[Q] and in_trial[P] and P != Q
            if not (fwd or bwd):
                continue
            dist = 0.0
            for c in range(3):
                dist += (centroids[P, c] - centroids[Q, c]) ** 2
            near = math.sqrt(dist) < near_factor * max(diam[P], diam[Q])
            if near:
                _pair_locals(P, Q, corners, normals, areas, near_bary, near_wq, ks, True, Kloc, Tloc, P == Q)
            else:
                _pair_locals(P, Q, corners, normals, areas, bary, wq, ks, False, Kloc, Tloc, P == Q)
            if P == Q:
                for m in range(nm):
                    for a in range(3):
                        for b in range(a + 1, 3):
                            s = 0.5 * (Tloc[m, a, b] + Tloc[m, b, a])
                            Tloc[m, a, b] = s
                            Tloc[m, b, a] = s
            for a in range(3):
                ea = tri_edge[P, a]
                ca = tri_coef[P, a]
                for b in range(3):
                    eb = tri_edge[Q, b]
                    cc = ca * tri_coef[Q, b]
                    if fwd:
                        r = row_map[ea]
                        c = col_map[eb]
                        if r >= 0 and c >= 0:
                            for m in range(nm):
                                K[m, r, c] += cc * Kloc[m, a, b]
                                T[m, r, c] += cc * Tloc[m, a, b]
                    if bwd:
                        r = row_map[eb]
                        c = col_map[ea]
                        if r >= 0 and c >= 0:
                            for m in range(nm):
                                K[m, r, c] += cc * Kloc[m, a, b]
                                T[m, r, c] += cc * Tloc[m, a, b]
    return K, T
