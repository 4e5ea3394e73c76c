# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython fused forward/backward for one video.

Mirrors kernels/pure.py section by section; keep the two in sync. Same
conventions throughout: the hinge subgradient is zero at the kink, ties
in the hard-negative argmax resolve to the lowest index, and cosine
norms are floored at eps with the floored side contributing no
gradient.
"""

import numpy as np

from libc.math cimport INFINITY, exp, fabs, sqrt

GAUSSIAN = 0
CAUCHY = 1
HARD_BINARY = 2
POOL_PLAIN = 0
POOL_WEIGHTED = 1

cdef enum:
    K_GAUSSIAN = 0
    K_CAUCHY = 1
    K_HARD = 2
    P_PLAIN = 0


cdef inline double _row_norm(double[:, ::1] x, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t a
    cdef double acc = 0.0
    for a in range(x.shape[1]):
        acc += x[i, a] * x[i, a]
    return sqrt(acc)


cdef inline double _row_dot(double[:, ::1] x, Py_ssize_t i,
                            double[:, ::1] y, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t a
    cdef double acc = 0.0
    for a in range(x.shape[1]):
        acc += x[i, a] * y[j, a]
    return acc


cdef void _mask_rows(int kind, double[::1] centers, double[::1] widths, double tau,
                     double[:, ::1] m, double[:, ::1] pc, double[:, ::1] pw) noexcept nogil:
    """Mask matrix (K, N) plus center/width partials for the backward pass."""
    cdef Py_ssize_t k = centers.shape[0]
    cdef Py_ssize_t n = m.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, s2, s3t, half, tj, dd, g, u, mm, m2
    for i in range(k):
        s = widths[i] / tau
        s2 = s * s
        s3t = s2 * s * tau
        half = widths[i] / 2.0
        for j in range(n):
            tj = (j + 0.5) / n
            dd = tj - centers[i]
            if kind == K_CAUCHY:
                u = dd / s
                mm = 1.0 / (1.0 + u * u)
                m2 = mm * mm
                m[i, j] = mm
                pc[i, j] = 2.0 * dd * m2 / s2
                pw[i, j] = 2.0 * dd * dd * m2 / s3t
            else:
                g = exp(-(dd * dd) / (2.0 * s2))
                pc[i, j] = g * dd / s2
                pw[i, j] = g * dd * dd / s3t
                if kind == K_HARD:
                    # indicator forward, gaussian surrogate backward
                    m[i, j] = 1.0 if fabs(dd) <= half else 0.0
                else:
                    m[i, j] = g


cdef void _pool(double[:, ::1] f, double[:, ::1] m, int pooling, double eps,
                double[:, ::1] p, double[::1] ssum, double[::1] z) noexcept nogil:
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t k = m.shape[0]
    cdef Py_ssize_t i, j, a
    cdef double acc, wj, denom
    for i in range(k):
        for a in range(d):
            p[i, a] = 0.0
        acc = 0.0
        for j in range(n):
            wj = m[i, j]
            acc += wj
            if wj != 0.0:
                for a in range(d):
                    p[i, a] += wj * f[j, a]
        ssum[i] = acc
        z[i] = acc if acc > eps else eps
        denom = n if pooling == P_PLAIN else z[i]
        for a in range(d):
            p[i, a] /= denom


cdef void _pool_back(double[:, ::1] g, double[:, ::1] f, double[:, ::1] p,
                     double[::1] ssum, double[::1] z, int pooling, double eps,
                     double[:, ::1] dm) noexcept nogil:
    """Map dL/dpooled (K, D) to dL/dmask (K, N)."""
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t k = g.shape[0]
    cdef Py_ssize_t i, j, a
    cdef double corr, acc
    for i in range(k):
        if pooling == P_PLAIN:
            for j in range(n):
                acc = 0.0
                for a in range(d):
                    acc += g[i, a] * f[j, a]
                dm[i, j] = acc / n
        else:
            corr = 0.0
            if ssum[i] > eps:
                for a in range(d):
                    corr += g[i, a] * p[i, a]
            for j in range(n):
                acc = 0.0
                for a in range(d):
                    acc += g[i, a] * f[j, a]
                dm[i, j] = (acc - corr) / z[i]


cdef void _accum(double sign, double[:, ::1] dm, double[:, ::1] pc, double[:, ::1] pw,
                 double[::1] dc, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t k = dm.shape[0]
    cdef Py_ssize_t n = dm.shape[1]
    cdef Py_ssize_t i, j
    cdef double ac, aw
    for i in range(k):
        ac = 0.0
        aw = 0.0
        for j in range(n):
            ac += dm[i, j] * pc[i, j]
            aw += dm[i, j] * pw[i, j]
        dc[i] += sign * ac
        dw[i] += sign * aw


cdef double _sim_term(double[:, ::1] f, double[:, ::1] cap, double[::1] capn,
                      double[:, ::1] m, double[:, ::1] pc, double[:, ::1] pw,
                      int pooling, double margin, double eps,
                      double[:, ::1] p, double[:, ::1] g, double[:, ::1] dm,
                      double[::1] ssum, double[::1] z,
                      double[::1] dc, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t k = cap.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t i, j, a, ks
    cdef double val = 0.0
    cdef double pn, a1, splus, sminus, best, sij, zed, rowdot, guard, ga
    cdef bint any_active = False
    _pool(f, m, pooling, eps, p, ssum, z)
    for i in range(k):
        pn = _row_norm(p, i)
        a1 = pn if pn > eps else eps
        splus = _row_dot(p, i, cap, i) / (a1 * capn[i])
        sminus = 0.0
        ks = -1
        if k > 1:
            best = -INFINITY
            for j in range(k):
                if j == i:
                    continue
                sij = _row_dot(p, i, cap, j) / (a1 * capn[j])
                if sij > best:  # strict keeps the lowest index on ties
                    best = sij
                    ks = j
            sminus = best
        zed = margin - splus + sminus
        if zed > 0.0:
            val += zed
            any_active = True
            rowdot = (sminus - splus) / k if k > 1 else -splus / k
            guard = 1.0 if pn > eps else 0.0
            for a in range(d):
                ga = -cap[i, a] / (capn[i] * k)
                if k > 1:
                    ga += cap[ks, a] / (capn[ks] * k)
                g[i, a] = ga / a1 - rowdot * guard / (a1 * a1) * p[i, a]
        else:
            for a in range(d):
                g[i, a] = 0.0
    if any_active:
        _pool_back(g, f, p, ssum, z, pooling, eps, dm)
        _accum(1.0, dm, pc, pw, dc, dw)
    return val / k


cdef double _inverse_term(double[:, ::1] f, double[:, ::1] cap, double[::1] capn,
                          double[:, ::1] m, double[:, ::1] pc, double[:, ::1] pw,
                          int pooling, double margin, double eps,
                          double[:, ::1] p, double[:, ::1] g, double[:, ::1] dm,
                          double[::1] ssum, double[::1] z,
                          double[::1] capsum, double[::1] tgt,
                          double[::1] dc, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t k = cap.shape[0]
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double val = 0.0
    cdef double ptn, at, tn, sp, sm, zed, guard, acc
    cdef bint any_active = False
    # pool the complement mask; dm doubles as the (1 - m) buffer until
    # _pool_back overwrites it
    for i in range(k):
        for j in range(n):
            dm[i, j] = 1.0 - m[i, j]
    _pool(f, dm, pooling, eps, p, ssum, z)
    for a in range(d):
        acc = 0.0
        for i in range(k):
            acc += cap[i, a]
        capsum[a] = acc
    for i in range(k):
        for a in range(d):
            tgt[a] = (capsum[a] - cap[i, a]) / (k - 1)
        ptn = _row_norm(p, i)
        at = ptn if ptn > eps else eps
        acc = 0.0
        for a in range(d):
            acc += tgt[a] * tgt[a]
        tn = sqrt(acc)
        if tn < eps:
            tn = eps
        sp = 0.0
        for a in range(d):
            sp += p[i, a] * tgt[a]
        sp /= at * tn
        sm = _row_dot(p, i, cap, i) / (at * capn[i])
        zed = margin - sp + sm
        if zed > 0.0:
            val += zed
            any_active = True
            guard = 1.0 if ptn > eps else 0.0
            for a in range(d):
                g[i, a] = (-tgt[a] / (at * tn) + cap[i, a] / (at * capn[i])
                           + (sp - sm) * guard / (at * at) * p[i, a]) / k
        else:
            for a in range(d):
                g[i, a] = 0.0
    if any_active:
        _pool_back(g, f, p, ssum, z, pooling, eps, dm)
        # gradient flows through 1 - m, flipping the sign
        _accum(-1.0, dm, pc, pw, dc, dw)
    return val / k


cdef double _aug_term(double[:, ::1] f, double[:, ::1] syn,
                      double[:, ::1] mi, double[:, ::1] pci,
                      int pooling, double alpha_aug, double eps,
                      double[:, ::1] q, double[:, ::1] gq, double[:, ::1] dmq,
                      double[::1] ssq, double[::1] zq,
                      double[::1] dc) noexcept nogil:
    cdef Py_ssize_t km1 = syn.shape[0]
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double val = 0.0
    cdef double qn, aq, sn, qs, guard, dci
    _pool(f, mi, pooling, eps, q, ssq, zq)
    for i in range(km1):
        qn = _row_norm(q, i)
        aq = qn if qn > eps else eps
        sn = _row_norm(syn, i)
        if sn < eps:
            sn = eps
        qs = _row_dot(q, i, syn, i) / (aq * sn)
        val += 1.0 - qs
        guard = 1.0 if qn > eps else 0.0
        for a in range(d):
            gq[i, a] = (-syn[i, a] / (aq * sn)
                        + qs * guard / (aq * aq) * q[i, a]) * (alpha_aug / km1)
    _pool_back(gq, f, q, ssq, zq, pooling, eps, dmq)
    for i in range(km1):
        dci = 0.0
        for j in range(n):
            dci += dmq[i, j] * pci[i, j]
        # each inter center is the midpoint of its two event centers
        dc[i] += 0.5 * dci
        dc[i + 1] += 0.5 * dci
    return val / km1


cdef double _div_term(double[:, ::1] m, double[:, ::1] pc, double[:, ::1] pw,
                      double lambda_div, double eps,
                      double[:, ::1] r, double[::1] mn_raw, double[::1] mn,
                      double[::1] colsum, double[:, ::1] dmv,
                      double[::1] dc, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t k = m.shape[0]
    cdef Py_ssize_t n = m.shape[1]
    cdef Py_ssize_t i, j, jn
    cdef double offsum = 0.0
    cdef double npairs = k * (k - 1) / 2.0
    cdef double rowdot, guard, val
    for i in range(k):
        mn_raw[i] = _row_norm(m, i)
        mn[i] = mn_raw[i] if mn_raw[i] > eps else eps
    for i in range(k):
        for j in range(k):
            r[i, j] = _row_dot(m, i, m, j) / (mn[i] * mn[j])
            if i != j:
                offsum += r[i, j]
    val = offsum / 2.0 / npairs
    for jn in range(n):
        colsum[jn] = 0.0
        for j in range(k):
            colsum[jn] += m[j, jn] / mn[j]
    for i in range(k):
        rowdot = 0.0
        for j in range(k):
            if j != i:
                rowdot += r[i, j]
        rowdot /= npairs
        guard = 1.0 if mn_raw[i] > eps else 0.0
        for jn in range(n):
            dmv[i, jn] = ((colsum[jn] - m[i, jn] / mn[i]) / npairs / mn[i]
                          - rowdot * guard / (mn[i] * mn[i]) * m[i, jn]) * lambda_div
    _accum(1.0, dmv, pc, pw, dc, dw)
    return val


def video_loss_grad(frames, captions, syn, centers, widths,
                    int kind, int pooling, double tau, double margin,
                    double w_inter, double alpha_aug, double lambda_div,
                    bint use_sim, bint use_inverse, double eps):
    """Loss terms and parameter gradients for one video.

    Same contract as kernels.pure.video_loss_grad: returns
    (sim, sim_inverse, aug, diversity, dcenters, dwidths) with the
    gradients taken for sim + sim_inverse + lambda_div * diversity
    + alpha_aug * aug with respect to the constrained parameters.
    """
    f_arr = np.ascontiguousarray(frames, dtype=np.float64)
    cap_arr = np.ascontiguousarray(captions, dtype=np.float64)
    cen_arr = np.ascontiguousarray(centers, dtype=np.float64)
    wid_arr = np.ascontiguousarray(widths, dtype=np.float64)

    cdef double[:, ::1] f = f_arr
    cdef double[:, ::1] cap = cap_arr
    cdef double[::1] c = cen_arr
    cdef double[::1] w = wid_arr
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t d = f.shape[1]
    cdef Py_ssize_t k = cap.shape[0]
    cdef Py_ssize_t i

    out_dc = np.zeros(k)
    out_dw = np.zeros(k)
    cdef double[::1] dc = out_dc
    cdef double[::1] dw = out_dw

    m_arr = np.empty((k, n))
    pc_arr = np.empty((k, n))
    pw_arr = np.empty((k, n))
    cdef double[:, ::1] m = m_arr
    cdef double[:, ::1] pc = pc_arr
    cdef double[:, ::1] pw = pw_arr
    _mask_rows(kind, c, w, tau, m, pc, pw)

    # scratch shared by the sim and inverse sections
    p_arr = np.empty((k, d))
    g_arr = np.empty((k, d))
    dm_arr = np.empty((k, n))
    ssum_arr = np.empty(k)
    z_arr = np.empty(k)
    capn_arr = np.empty(k)
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] g = g_arr
    cdef double[:, ::1] dm = dm_arr
    cdef double[::1] ssum = ssum_arr
    cdef double[::1] z = z_arr
    cdef double[::1] capn = capn_arr
    for i in range(k):
        capn[i] = _row_norm(cap, i)
        if capn[i] < eps:
            capn[i] = eps

    cdef double sim_val = 0.0
    cdef double inv_val = 0.0
    cdef double aug_val = 0.0
    cdef double div_val = 0.0
    cdef double[:, ::1] syn_v, mi, pci, pwi, q, gq, dmq, r, dmv
    cdef double[::1] ic, iw, ssq, zq, capsum, tgt, mn_raw, mn, colsum

    if use_sim:
        sim_val = _sim_term(f, cap, capn, m, pc, pw, pooling, margin, eps,
                            p, g, dm, ssum, z, dc, dw)

    if use_inverse and k > 1:
        capsum_arr = np.empty(d)
        tgt_arr = np.empty(d)
        capsum = capsum_arr
        tgt = tgt_arr
        inv_val = _inverse_term(f, cap, capn, m, pc, pw, pooling, margin, eps,
                                p, g, dm, ssum, z, capsum, tgt, dc, dw)

    if alpha_aug > 0.0 and syn is not None and k > 1:
        syn_arr = np.ascontiguousarray(syn, dtype=np.float64)
        syn_v = syn_arr
        ic_arr = np.empty(k - 1)
        iw_arr = np.full(k - 1, w_inter)
        ic = ic_arr
        iw = iw_arr
        for i in range(k - 1):
            ic[i] = (c[i] + c[i + 1]) / 2.0
        mi_arr = np.empty((k - 1, n))
        pci_arr = np.empty((k - 1, n))
        pwi_arr = np.empty((k - 1, n))
        mi = mi_arr
        pci = pci_arr
        pwi = pwi_arr
        _mask_rows(kind, ic, iw, tau, mi, pci, pwi)
        q_arr = np.empty((k - 1, d))
        gq_arr = np.empty((k - 1, d))
        dmq_arr = np.empty((k - 1, n))
        ssq_arr = np.empty(k - 1)
        zq_arr = np.empty(k - 1)
        q = q_arr
        gq = gq_arr
        dmq = dmq_arr
        ssq = ssq_arr
        zq = zq_arr
        aug_val = _aug_term(f, syn_v, mi, pci, pooling, alpha_aug, eps,
                            q, gq, dmq, ssq, zq, dc)

    if lambda_div > 0.0 and k > 1:
        r_arr = np.empty((k, k))
        mn_raw_arr = np.empty(k)
        mn_arr = np.empty(k)
        colsum_arr = np.empty(n)
        dmv_arr = np.empty((k, n))
        r = r_arr
        mn_raw = mn_raw_arr
        mn = mn_arr
        colsum = colsum_arr
        dmv = dmv_arr
        div_val = _div_term(m, pc, pw, lambda_div, eps, r, mn_raw, mn,
                            colsum, dmv, dc, dw)

    return sim_val, inv_val, aug_val, div_val, out_dc, out_dw
