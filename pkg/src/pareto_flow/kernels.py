"""Numeric inner loops.

Every convex set handed to a kernel is a list of *blocks* packed into flat
arrays (see ``convex_core.pack_groups``):

    kinds  int64[nb]        0 point, 1 box, 2 polytope, 3 euclidean ball
    lo     float64[nb, d]   point value / box lower corner / ball centre
    hi     float64[nb, d]   box upper corner (copy of ``lo`` otherwise)
    rad    float64[nb]      ball radius
    vptr   int64[nb + 1]    polytope vertex ranges into ``verts``
    verts  float64[nv, d]
    scale  float64[nb]      Minkowski weight of the block inside its group
    gptr   int64[ng + 1]    group g is the weighted sum of blocks gptr[g]:gptr[g+1]
    gens   float64[m, d]    unit generators of a polyhedral cone

The set described is ``conv(G_0 u ... u G_{ng-1}) + cone(gens)``.
"""
import math

import numpy as np

from ._jit import JIT_ENABLED, njit

WOLFE_CONVERGED = 0
WOLFE_STALLED = 1
WOLFE_MAX_ITER = 2
WOLFE_MULTIPLIER_CAP = 3


@njit(inline="always")
def _dot(a, b):
    s = 0.0
    for j in range(a.shape[0]):
        s += a[j] * b[j]
    return s


@njit
def project_simplex(x):
    """Euclidean projection of ``x`` onto the unit simplex (sort-and-threshold)."""
    n = x.shape[0]
    u = np.sort(x)[::-1]
    css = 0.0
    tau = 0.0
    for j in range(n):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            tau = t
    out = np.empty(n)
    for j in range(n):
        v = x[j] - tau
        out[j] = v if v > 0.0 else 0.0
    return out


@njit(inline="always")
def block_lmo(b, kinds, lo, hi, rad, vptr, verts, z, out):
    """out <- a minimiser of <z, p> over block b (lowest index on ties)."""
    k = kinds[b]
    d = z.shape[0]
    if k == 0:
        for j in range(d):
            out[j] = lo[b, j]
    elif k == 1:
        for j in range(d):
            out[j] = hi[b, j] if z[j] < 0.0 else lo[b, j]
    elif k == 2:
        best = np.inf
        bi = vptr[b]
        for v in range(vptr[b], vptr[b + 1]):
            s = _dot(z, verts[v])
            if s < best:
                best = s
                bi = v
        for j in range(d):
            out[j] = verts[bi, j]
    else:
        nz = math.sqrt(_dot(z, z))
        for j in range(d):
            out[j] = lo[b, j]
            if nz > 0.0:
                out[j] -= rad[b] * z[j] / nz


@njit(inline="always")
def group_lmo(g, kinds, lo, hi, rad, vptr, verts, scale, gptr, z, out, tmp):
    for j in range(z.shape[0]):
        out[j] = 0.0
    for b in range(gptr[g], gptr[g + 1]):
        block_lmo(b, kinds, lo, hi, rad, vptr, verts, z, tmp)
        for j in range(z.shape[0]):
            out[j] += scale[b] * tmp[j]


@njit
def max_support(kinds, lo, hi, rad, vptr, verts, scale, gptr, dvec, vout, neg, tmp, tmp2):
    """max over groups of sup <p, dvec>; the maximising element goes to ``vout``."""
    for j in range(dvec.shape[0]):
        neg[j] = -dvec[j]
    best = -np.inf
    for g in range(gptr.shape[0] - 1):
        group_lmo(g, kinds, lo, hi, rad, vptr, verts, scale, gptr, neg, tmp2, tmp)
        val = _dot(dvec, tmp2)
        if val > best:
            best = val
            for j in range(dvec.shape[0]):
                vout[j] = tmp2[j]
    return best


@njit
def _affine_minimizer(S, tag, n):
    """Minimise ||sum_a y_a S_a|| with sum of group-atom weights equal to one."""
    M = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    for a in range(n):
        for c in range(a, n):
            g = _dot(S[a], S[c])
            M[a, c] = g
            M[c, a] = g
        if tag[a] >= 0:
            M[a, n] = 1.0
            M[n, a] = 1.0
    rhs[n] = 1.0
    sol = np.linalg.lstsq(M, rhs)[0]
    return sol[:n].copy()


@njit
def wolfe_min_norm(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, tol, max_iter, mult_cap):
    """Wolfe's minimum-norm-point method over conv(groups) + cone(gens).

    Returns ``(x, atoms, weights, tags, iters, gap, status)``.  ``tags[a]`` is
    the group index of atom ``a`` or ``-(j + 1)`` for cone generator ``j``.
    ``gap`` is ``max(||x||^2 - min_y <x, y>, -min_j <x, g_j>)`` at exit.
    """
    d = lo.shape[1]
    ng = gptr.shape[0] - 1
    m = gens.shape[0]
    cap = d + m + 2
    S = np.zeros((cap, d))
    tag = np.full(cap, -1, dtype=np.int64)
    w = np.zeros(cap)
    tmp = np.zeros(d)
    v = np.zeros(d)
    cand = np.zeros(d)
    x = np.zeros(d)

    best = np.inf
    for g in range(ng):
        group_lmo(g, kinds, lo, hi, rad, vptr, verts, scale, gptr, x, v, tmp)
        nv = _dot(v, v)
        if nv < best:
            best = nv
            for j in range(d):
                S[0, j] = v[j]
            tag[0] = g
    w[0] = 1.0
    n = 1
    for j in range(d):
        x[j] = S[0, j]

    status = WOLFE_MAX_ITER
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        xx = _dot(x, x)
        bestval = np.inf
        bg = 0
        for g in range(ng):
            group_lmo(g, kinds, lo, hi, rad, vptr, verts, scale, gptr, x, v, tmp)
            val = _dot(x, v)
            if val < bestval:
                bestval = val
                bg = g
                for j in range(d):
                    cand[j] = v[j]
        gap_p = xx - bestval
        gap_c = -np.inf
        bj = 0
        for jj in range(m):
            val = -_dot(x, gens[jj])
            if val > gap_c:
                gap_c = val
                bj = jj
        gap = gap_p if gap_p > gap_c else gap_c
        if gap <= tol:
            status = WOLFE_CONVERGED
            break

        if gap_p >= gap_c:
            newtag = bg
        else:
            newtag = -(bj + 1)
            for j in range(d):
                cand[j] = gens[bj, j]
        dup = False
        for a in range(n):
            if tag[a] == newtag:
                same = True
                for j in range(d):
                    if S[a, j] != cand[j]:
                        same = False
                        break
                if same:
                    dup = True
                    break
        if dup or n >= cap:
            status = WOLFE_STALLED
            break
        for j in range(d):
            S[n, j] = cand[j]
        tag[n] = newtag
        w[n] = 0.0
        n += 1
        newest = n - 1

        dropped_new = False
        first = True
        while True:
            y = _affine_minimizer(S, tag, n)
            feasible = True
            for a in range(n):
                if y[a] <= 0.0:
                    feasible = False
                    break
            if feasible:
                for a in range(n):
                    w[a] = y[a]
                break
            beta = 1.0
            for a in range(n):
                if y[a] <= 0.0 and w[a] - y[a] > 0.0:
                    r = w[a] / (w[a] - y[a])
                    if r < beta:
                        beta = r
            for a in range(n):
                w[a] = w[a] + beta * (y[a] - w[a])
            # compact: drop atoms whose weight hit zero
            k = 0
            for a in range(n):
                if w[a] > 1e-15:
                    if k != a:
                        for j in range(d):
                            S[k, j] = S[a, j]
                        tag[k] = tag[a]
                        w[k] = w[a]
                    if a == newest:
                        newest = k
                    k += 1
                elif a == newest:
                    newest = -1
                    if first:
                        dropped_new = True
            n = k
            first = False
            if dropped_new:
                break

        # renormalise group weights against rounding drift
        tot = 0.0
        for a in range(n):
            if tag[a] >= 0:
                tot += w[a]
        for a in range(n):
            if tag[a] >= 0:
                w[a] /= tot
        for j in range(d):
            x[j] = 0.0
        for a in range(n):
            for j in range(d):
                x[j] += w[a] * S[a, j]
            if tag[a] < 0 and w[a] > mult_cap:
                return x, S[:n].copy(), w[:n].copy(), tag[:n].copy(), it, gap, WOLFE_MULTIPLIER_CAP
        if dropped_new:
            status = WOLFE_STALLED
            break
        if _dot(x, x) > xx:
            status = WOLFE_STALLED
            break

    return x, S[:n].copy(), w[:n].copy(), tag[:n].copy(), it, gap, status


@njit
def dykstra_halfspaces(v, A, b, tol, max_iter):
    """Dykstra's projection of ``v`` onto {x : A x <= b}.

    Returns ``(x, iters, residual, status)`` with status 0 on convergence.
    """
    m, d = A.shape
    x = v.copy()
    P = np.zeros((m, d))
    nrm2 = np.zeros(m)
    for i in range(m):
        nrm2[i] = _dot(A[i], A[i])
    y = np.zeros(d)
    res = np.inf
    for it in range(max_iter):
        change = 0.0
        for i in range(m):
            for j in range(d):
                y[j] = x[j] + P[i, j]
            viol = _dot(A[i], y) - b[i]
            for j in range(d):
                xn = y[j]
                if viol > 0.0 and nrm2[i] > 0.0:
                    xn = y[j] - viol / nrm2[i] * A[i, j]
                P[i, j] = y[j] - xn
                change += (xn - x[j]) ** 2
                x[j] = xn
        worst = 0.0
        for i in range(m):
            if nrm2[i] > 0.0:
                viol = (_dot(A[i], x) - b[i]) / math.sqrt(nrm2[i])
                if viol > worst:
                    worst = viol
        res = max(math.sqrt(change), worst)
        if res <= tol:
            return x, it + 1, res, 0
    return x, max_iter, res, 1


@njit
def _tangent_project_inplace(dvec, gens, zeros_m):
    if gens.shape[0] == 0:
        return
    p, _, _, _ = dykstra_halfspaces(dvec, gens, zeros_m, 1e-14, 2000)
    for j in range(dvec.shape[0]):
        dvec[j] = p[j]


@njit
def _support_argmax(kinds, lo, hi, rad, vptr, verts, scale, gptr, dv, gsum, vg):
    """max over groups of sup <p, dv>; the maximiser is written to ``vg``.

    Same quantity as ``max_support``. Hot loops below repeat this body inline
    because numba calls with many array arguments cost far more than the work.
    """
    d = dv.shape[0]
    best = -np.inf
    for g in range(gptr.shape[0] - 1):
        for j in range(d):
            gsum[j] = 0.0
        for b in range(gptr[g], gptr[g + 1]):
            kb = kinds[b]
            sc = scale[b]
            if kb == 0:
                for j in range(d):
                    gsum[j] += sc * lo[b, j]
            elif kb == 1:
                for j in range(d):
                    gsum[j] += sc * (hi[b, j] if dv[j] > 0.0 else lo[b, j])
            elif kb == 2:
                bv = -np.inf
                bi = vptr[b]
                for v in range(vptr[b], vptr[b + 1]):
                    s = 0.0
                    for j in range(d):
                        s += dv[j] * verts[v, j]
                    if s > bv:
                        bv = s
                        bi = v
                for j in range(d):
                    gsum[j] += sc * verts[bi, j]
            else:
                nz = 0.0
                for j in range(d):
                    nz += dv[j] * dv[j]
                nz = math.sqrt(nz)
                for j in range(d):
                    gsum[j] += sc * (lo[b, j] + (rad[b] * dv[j] / nz if nz > 0.0 else 0.0))
        val = 0.0
        for j in range(d):
            val += dv[j] * gsum[j]
        if val > best:
            best = val
            for j in range(d):
                vg[j] = gsum[j]
    return best


@njit
def subgradient_powered(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, r, c, n_iter):
    """Projected subgradient on ||d||^r / r + max_i sup_{p in G_i} <p, d>, d in T.

    Step sizes ``c / sqrt(k)``; returns the average of the second half of
    the iterates.
    """
    d = lo.shape[1]
    dv = np.zeros(d)
    acc = np.zeros(d)
    vg = np.zeros(d)
    gsum = np.zeros(d)
    zm = np.zeros(gens.shape[0])
    start = n_iter // 2
    cnt = 0
    ng = gptr.shape[0] - 1
    for k in range(1, n_iter + 1):
        # inline copy of _support_argmax
        best = -np.inf
        for g in range(ng):
            for j in range(d):
                gsum[j] = 0.0
            for b in range(gptr[g], gptr[g + 1]):
                kb = kinds[b]
                sc = scale[b]
                if kb == 0:
                    for j in range(d):
                        gsum[j] += sc * lo[b, j]
                elif kb == 1:
                    for j in range(d):
                        gsum[j] += sc * (hi[b, j] if dv[j] > 0.0 else lo[b, j])
                elif kb == 2:
                    bv = -np.inf
                    bi = vptr[b]
                    for v in range(vptr[b], vptr[b + 1]):
                        s = 0.0
                        for j in range(d):
                            s += dv[j] * verts[v, j]
                        if s > bv:
                            bv = s
                            bi = v
                    for j in range(d):
                        gsum[j] += sc * verts[bi, j]
                else:
                    nz = 0.0
                    for j in range(d):
                        nz += dv[j] * dv[j]
                    nz = math.sqrt(nz)
                    for j in range(d):
                        gsum[j] += sc * (lo[b, j] + (rad[b] * dv[j] / nz if nz > 0.0 else 0.0))
            val = 0.0
            for j in range(d):
                val += dv[j] * gsum[j]
            if val > best:
                best = val
                for j in range(d):
                    vg[j] = gsum[j]
        nd = 0.0
        for j in range(d):
            nd += dv[j] * dv[j]
        nd = math.sqrt(nd)
        coef = nd ** (r - 2.0) if nd > 0.0 else 0.0
        step = c / math.sqrt(k)
        for j in range(d):
            dv[j] -= step * (coef * dv[j] + vg[j])
        if gens.shape[0]:
            _tangent_project_inplace(dv, gens, zm)
        if k > start:
            for j in range(d):
                acc[j] += dv[j]
            cnt += 1
    for j in range(d):
        acc[j] /= cnt
    return acc


@njit
def _angular_argmin_loop(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, n):
    dv = np.zeros(2)
    gsum = np.zeros(2)
    best = np.inf
    bi = -1
    ng = gptr.shape[0] - 1
    for i in range(n):
        ang = 2.0 * math.pi * i / n
        dv[0] = math.cos(ang)
        dv[1] = math.sin(ang)
        ok = True
        for jj in range(gens.shape[0]):
            if gens[jj, 0] * dv[0] + gens[jj, 1] * dv[1] > 1e-12:
                ok = False
                break
        if not ok:
            continue
        # inline copy of _support_argmax, value only
        val = -np.inf
        for g in range(ng):
            gsum[0] = 0.0
            gsum[1] = 0.0
            for b in range(gptr[g], gptr[g + 1]):
                kb = kinds[b]
                sc = scale[b]
                for j in range(2):
                    if kb == 0:
                        gsum[j] += sc * lo[b, j]
                    elif kb == 1:
                        gsum[j] += sc * (hi[b, j] if dv[j] > 0.0 else lo[b, j])
                    elif kb == 3:
                        gsum[j] += sc * (lo[b, j] + rad[b] * dv[j])
                if kb == 2:
                    bv = -np.inf
                    bk = vptr[b]
                    for v in range(vptr[b], vptr[b + 1]):
                        s = dv[0] * verts[v, 0] + dv[1] * verts[v, 1]
                        if s > bv:
                            bv = s
                            bk = v
                    gsum[0] += sc * verts[bk, 0]
                    gsum[1] += sc * verts[bk, 1]
            gv = dv[0] * gsum[0] + dv[1] * gsum[1]
            if gv > val:
                val = gv
        if val < best:
            best = val
            bi = i
    return bi, best


def _angular_argmin_numpy(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, n):
    ang = 2.0 * np.pi * np.arange(n) / n
    D = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    sup_b = np.empty((len(kinds), n))
    for b, k in enumerate(kinds):
        if k == 0:
            sup_b[b] = D @ lo[b]
        elif k == 1:
            sup_b[b] = np.maximum(D * lo[b], D * hi[b]).sum(axis=1)
        elif k == 2:
            sup_b[b] = (D @ verts[vptr[b]:vptr[b + 1]].T).max(axis=1)
        else:
            sup_b[b] = D @ lo[b] + rad[b]
    groups = np.stack([(scale[gptr[g]:gptr[g + 1], None] * sup_b[gptr[g]:gptr[g + 1]]).sum(axis=0)
                       for g in range(len(gptr) - 1)])
    vals = groups.max(axis=0)
    if len(gens):
        vals[(D @ gens.T > 1e-12).any(axis=1)] = np.inf
    bi = int(np.argmin(vals))
    if not np.isfinite(vals[bi]):
        return -1, np.inf
    return bi, float(vals[bi])


def angular_argmin(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, n):
    """Grid search of max_i sup <p, d> over unit d in the plane, d in T.

    Returns ``(index, value)``; the direction is at angle ``2 pi index / n``.
    """
    if JIT_ENABLED:
        return _angular_argmin_loop(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, n)
    return _angular_argmin_numpy(kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, n)


# ---------------------------------------------------------------------------
# Compiled fixed-step integrator for objectives of the form
#     f_i(u) = 1/2 <Q_i u, u> + <c_i, u> + r_i + w_i * H_i(u)
# with H_i = ||.||_1 when lam_i == 0 and its Moreau envelope (Huber) when
# lam_i > 0, over the whole space. Mirrors dynamics._integrate_fixed step for
# step; see there for the scheme.

FIELD_OK = 0


@njit
def qh_values(Qs, cs, rs, ws, lams, u, out):
    q, d = cs.shape
    for i in range(q):
        v = rs[i]
        for j in range(d):
            qu = 0.0
            for k in range(d):
                qu += Qs[i, j, k] * u[k]
            v += u[j] * (0.5 * qu + cs[i, j])
        if ws[i] > 0.0:
            w = ws[i]
            lam = lams[i]
            acc = 0.0
            for j in range(d):
                a = abs(u[j])
                if lam == 0.0:
                    acc += a
                elif a <= lam * w:
                    acc += a * a / (2.0 * lam) / w
                else:
                    acc += a - 0.5 * lam * w
            v += w * acc
        out[i] = v


@njit
def qh_field(Qs, cs, ws, lams, u, tol, max_iter, mult_cap, s, theta, picks):
    """Steepest direction for the quadratic + l1/Huber family; returns (residual, status)."""
    q, d = cs.shape
    kinds = np.zeros(q, dtype=np.int64)
    lo = np.zeros((q, d))
    hi = np.zeros((q, d))
    allpoint = True
    for i in range(q):
        for j in range(d):
            g = cs[i, j]
            for k in range(d):
                g += Qs[i, j, k] * u[k]
            lo[i, j] = g
            hi[i, j] = g
        w = ws[i]
        if w > 0.0:
            if lams[i] == 0.0:
                kinds[i] = 1
                allpoint = False
                for j in range(d):
                    if u[j] > 0.0:
                        lo[i, j] += w
                        hi[i, j] += w
                    elif u[j] < 0.0:
                        lo[i, j] -= w
                        hi[i, j] -= w
                    else:
                        lo[i, j] -= w
                        hi[i, j] += w
            else:
                for j in range(d):
                    x = u[j] / lams[i]
                    if x > w:
                        x = w
                    elif x < -w:
                        x = -w
                    lo[i, j] += x
                    hi[i, j] += x
    if allpoint and q <= 2:
        for i in range(q):
            for j in range(d):
                picks[i, j] = lo[i, j]
        if q == 1:
            theta[0] = 1.0
            for j in range(d):
                s[j] = -lo[0, j]
        else:
            ee = 0.0
            ge = 0.0
            for j in range(d):
                e = lo[0, j] - lo[1, j]
                ee += e * e
                ge += lo[1, j] * e
            t = 0.0
            if ee != 0.0:
                t = -ge / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            theta[0] = t
            theta[1] = 1.0 - t
            for j in range(d):
                s[j] = -(t * lo[0, j] + (1.0 - t) * lo[1, j])
        return math.sqrt(_dot(s, s)), FIELD_OK
    rad = np.zeros(q)
    vptr = np.zeros(q + 1, dtype=np.int64)
    verts = np.zeros((0, d))
    scale = np.ones(q)
    gptr = np.arange(q + 1)
    gens = np.zeros((0, d))
    x, atoms, w_, tags, iters, gap, status = wolfe_min_norm(
        kinds, lo, hi, rad, vptr, verts, scale, gptr, gens, tol, max_iter, mult_cap)
    if status == WOLFE_MAX_ITER or status == WOLFE_MULTIPLIER_CAP:
        return np.inf, status
    for i in range(q):
        theta[i] = 0.0
        for j in range(d):
            picks[i, j] = 0.0
    for a in range(w_.shape[0]):
        t = tags[a]
        if t >= 0:
            theta[t] += w_[a]
            for j in range(d):
                picks[t, j] += w_[a] * atoms[a, j]
    tmp = np.zeros(d)
    row = np.zeros(d)
    for i in range(q):
        if theta[i] > 0.0:
            for j in range(d):
                picks[i, j] /= theta[i]
        else:
            group_lmo(i, kinds, lo, hi, rad, vptr, verts, scale, gptr, x, row, tmp)
            for j in range(d):
                picks[i, j] = row[j]
    tot = 0.0
    for i in range(q):
        if theta[i] < 0.0:
            theta[i] = 0.0
        tot += theta[i]
    for i in range(q):
        theta[i] /= tot
    for j in range(d):
        s[j] = -x[j]
    return math.sqrt(_dot(s, s)), FIELD_OK


@njit
def _l1_kink(u, s):
    t = np.inf
    for j in range(u.shape[0]):
        if u[j] != 0.0 and u[j] * s[j] < 0.0:
            r = -u[j] / s[j]
            if r < t:
                t = r
    return t


@njit
def _l1_snap(u):
    m = 0.0
    for j in range(u.shape[0]):
        if abs(u[j]) > m:
            m = abs(u[j])
    tol = 1e-13 * (1.0 + m)
    for j in range(u.shape[0]):
        if abs(u[j]) <= tol:
            u[j] = 0.0


@njit
def _qh_guarded_snap(Qs, cs, rs, ws, lams, new, fu, fraw, fsn, snapped):
    """Snap ``new`` in place unless that raises some objective above max(fu, f(new))."""
    for j in range(new.shape[0]):
        snapped[j] = new[j]
    _l1_snap(snapped)
    changed = False
    for j in range(new.shape[0]):
        if snapped[j] != new[j]:
            changed = True
    if not changed:
        return
    qh_values(Qs, cs, rs, ws, lams, new, fraw)
    qh_values(Qs, cs, rs, ws, lams, snapped, fsn)
    for i in range(fu.shape[0]):
        if fsn[i] > max(fu[i], fraw[i]):
            return
    for j in range(new.shape[0]):
        new[j] = snapped[j]


@njit
def integrate_qh(Qs, cs, rs, ws, lams, u0, h, t_max, stop_res, heun, max_steps,
                 record_every, tol, max_iter, mult_cap):
    """Fixed-step (MOG) integration; see dynamics._integrate_fixed.

    Returns ``(times, states, values, thetas, residuals, picks, energy,
    n_steps, n_events, n_fallbacks, converged, status)`` with one row per
    recorded state.
    """
    q, d = cs.shape
    has_l1 = False
    for i in range(q):
        if ws[i] > 0.0 and lams[i] == 0.0:
            has_l1 = True
    cap = max_steps // record_every + 2
    times = np.zeros(cap)
    states = np.zeros((cap, d))
    values = np.zeros((cap, q))
    thetas = np.zeros((cap, q))
    residuals = np.zeros(cap)
    picks_rec = np.zeros((cap, q, d))

    u = u0.copy()
    s = np.zeros(d)
    theta = np.zeros(q)
    picks = np.zeros((q, d))
    s2 = np.zeros(d)
    theta2 = np.zeros(q)
    picks2 = np.zeros((q, d))
    fu = np.zeros(q)
    fc = np.zeros(q)
    up = np.zeros(d)
    avg = np.zeros(d)
    cand = np.zeros(d)
    new = np.zeros(d)
    fraw = np.zeros(q)
    fsn = np.zeros(q)
    snapped = np.zeros(d)

    res, st = qh_field(Qs, cs, ws, lams, u, tol, max_iter, mult_cap, s, theta, picks)
    if st != FIELD_OK:
        return (times[:0], states[:0], values[:0], thetas[:0], residuals[:0], picks_rec[:0],
                0.0, 0, 0, 0, False, st)
    qh_values(Qs, cs, rs, ws, lams, u, fu)
    n_rec = 0
    times[0] = 0.0
    states[0] = u
    values[0] = fu
    thetas[0] = theta
    residuals[0] = res
    picks_rec[0] = picks
    n_rec = 1
    last_rec_step = 0

    t = 0.0
    energy = 0.0
    n_steps = 0
    n_events = 0
    n_fallbacks = 0
    n_loops = 0
    converged = False
    while True:
        if res <= stop_res:
            converged = True
            break
        if t_max - t <= 1e-12 * h or n_loops >= max_steps:
            break
        n_loops += 1
        hs = h if h < t_max - t else t_max - t
        tk = _l1_kink(u, s) if has_l1 else np.inf
        if tk < hs:
            for j in range(d):
                new[j] = u[j] + tk * s[j]
            _qh_guarded_snap(Qs, cs, rs, ws, lams, new, fu, fraw, fsn, snapped)
            n_events += 1
            dt = tk
            if tk <= 1e-12 * hs:
                # negligible move: correct the state in place
                for j in range(d):
                    u[j] = new[j]
                res, st = qh_field(Qs, cs, ws, lams, u, tol, max_iter, mult_cap, s, theta, picks)
                if st != FIELD_OK:
                    break
                qh_values(Qs, cs, rs, ws, lams, u, fu)
                continue
        else:
            accepted = False
            if heun:
                for j in range(d):
                    up[j] = u[j] + hs * s[j]
                if has_l1:
                    _l1_snap(up)
                r2, st = qh_field(Qs, cs, ws, lams, up, tol, max_iter, mult_cap, s2, theta2, picks2)
                if st != FIELD_OK:
                    break
                for j in range(d):
                    avg[j] = 0.5 * (s[j] + s2[j])
                tk2 = _l1_kink(u, avg) if has_l1 else np.inf
                if tk2 >= hs:
                    for j in range(d):
                        cand[j] = u[j] + hs * avg[j]
                    qh_values(Qs, cs, rs, ws, lams, cand, fc)
                    ok = True
                    for i in range(q):
                        if fc[i] > fu[i]:
                            ok = False
                    if ok:
                        accepted = True
                        for j in range(d):
                            new[j] = cand[j]
                if not accepted:
                    n_fallbacks += 1
            if not accepted:
                for j in range(d):
                    new[j] = u[j] + hs * s[j]
            if has_l1:
                _qh_guarded_snap(Qs, cs, rs, ws, lams, new, fu, fraw, fsn, snapped)
            dt = hs
        du2 = 0.0
        for j in range(d):
            du2 += (new[j] - u[j]) ** 2
            u[j] = new[j]
        energy += du2 / dt
        t += dt
        n_steps += 1
        res, st = qh_field(Qs, cs, ws, lams, u, tol, max_iter, mult_cap, s, theta, picks)
        if st != FIELD_OK:
            break
        qh_values(Qs, cs, rs, ws, lams, u, fu)
        if n_steps % record_every == 0:
            times[n_rec] = t
            states[n_rec] = u
            values[n_rec] = fu
            thetas[n_rec] = theta
            residuals[n_rec] = res
            picks_rec[n_rec] = picks
            n_rec += 1
            last_rec_step = n_steps
    if last_rec_step != n_steps and st == FIELD_OK:
        times[n_rec] = t
        states[n_rec] = u
        values[n_rec] = fu
        thetas[n_rec] = theta
        residuals[n_rec] = res
        picks_rec[n_rec] = picks
        n_rec += 1
    return (times[:n_rec].copy(), states[:n_rec].copy(), values[:n_rec].copy(),
            thetas[:n_rec].copy(), residuals[:n_rec].copy(), picks_rec[:n_rec].copy(),
            energy, n_steps, n_events, n_fallbacks, converged, st)
