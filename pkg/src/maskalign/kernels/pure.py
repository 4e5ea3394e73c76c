"""Pure NumPy fused forward/backward for one video.

Computes every enabled loss term and the analytic gradient with respect
to the constrained mask parameters in a single pass. The Cython backend
(_fast.pyx) mirrors this routine section by section; keep the two in
sync. Gradients of the hinge are taken as zero at the kink, ties in the
hard-negative argmax resolve to the lowest index, and cosine norms are
floored at eps (the floored side contributes no gradient).
"""

from __future__ import annotations

import numpy as np

GAUSSIAN, CAUCHY, HARD_BINARY = 0, 1, 2
POOL_PLAIN, POOL_WEIGHTED = 0, 1


def _mask_rows(kind, t, centers, widths, tau):
    """Mask matrix (K, N) plus center/width partials for the backward pass."""
    d = t[None, :] - centers[:, None]
    s = widths / tau
    s2 = (s * s)[:, None]
    if kind == CAUCHY:
        u = d / s[:, None]
        m = 1.0 / (1.0 + u * u)
        m2 = m * m
        pc = 2.0 * d * m2 / s2
        pw = 2.0 * (d * d) * m2 / (s ** 3 * tau)[:, None]
        return m, pc, pw
    g = np.exp(-(d * d) / (2.0 * s2))
    pc = g * d / s2
    pw = g * (d * d) / (s ** 3 * tau)[:, None]
    if kind == HARD_BINARY:
        # indicator forward, gaussian surrogate backward
        m = (np.abs(d) <= (widths / 2.0)[:, None]).astype(np.float64)
        return m, pc, pw
    return g, pc, pw


def _pool(frames, m, pooling, eps):
    if pooling == POOL_PLAIN:
        return (m @ frames) / frames.shape[0], None, None
    ssum = m.sum(axis=1)
    z = np.maximum(ssum, eps)
    return (m @ frames) / z[:, None], ssum, z


def _pool_back(g, frames, p, ssum, z, pooling, eps):
    """Map dL/dpooled (K, D) to dL/dmask (K, N)."""
    if pooling == POOL_PLAIN:
        return (g @ frames.T) / frames.shape[0]
    corr = np.where(ssum > eps, (g * p).sum(axis=1), 0.0)
    return (g @ frames.T - corr[:, None]) / z[:, None]


def video_loss_grad(
    frames: np.ndarray,
    captions: np.ndarray,
    syn: np.ndarray | None,
    centers: np.ndarray,
    widths: np.ndarray,
    kind: int,
    pooling: int,
    tau: float,
    margin: float,
    w_inter: float,
    alpha_aug: float,
    lambda_div: float,
    use_sim: bool,
    use_inverse: bool,
    eps: float,
):
    """Loss terms and parameter gradients for one video.

    frames: (N, D). captions: (K, D). syn: (K - 1, D) or None.
    centers/widths: constrained parameters, shape (K,).

    Returns (sim, sim_inverse, aug, diversity, dcenters, dwidths) where
    the gradients are of the weighted per-video objective
    sim + sim_inverse + lambda_div * diversity + alpha_aug * aug.
    """
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    captions = np.ascontiguousarray(captions, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.float64)
    n, _ = frames.shape
    k = captions.shape[0]
    t = (np.arange(n, dtype=np.float64) + 0.5) / n

    m, pc, pw = _mask_rows(kind, t, centers, widths, tau)
    dc = np.zeros(k)
    dw = np.zeros(k)
    sim_val = 0.0
    inv_val = 0.0
    aug_val = 0.0
    div_val = 0.0

    cap_norm = np.maximum(np.linalg.norm(captions, axis=1), eps)

    if use_sim:
        p, ssum, z = _pool(frames, m, pooling, eps)
        pn = np.linalg.norm(p, axis=1)
        a = np.maximum(pn, eps)
        smat = (p @ captions.T) / (a[:, None] * cap_norm[None, :])
        s_plus = np.diag(smat).copy()
        coef = np.zeros((k, k))
        if k > 1:
            off = smat.copy()
            np.fill_diagonal(off, -np.inf)
            kstar = np.argmax(off, axis=1)  # first maximum = lowest index
            s_minus = off[np.arange(k), kstar]
        else:
            s_minus = np.zeros(1)
        zed = margin - s_plus + s_minus
        act = zed > 0.0
        sim_val = float(np.maximum(zed, 0.0).mean())
        rows = np.flatnonzero(act)
        if rows.size:
            coef[rows, rows] -= 1.0 / k
            if k > 1:
                coef[rows, kstar[rows]] += 1.0 / k
            guard = (pn > eps).astype(np.float64)
            g = ((coef / cap_norm[None, :]) @ captions) / a[:, None]
            g -= (((coef * smat).sum(axis=1) * guard / (a * a))[:, None]) * p
            dm = _pool_back(g, frames, p, ssum, z, pooling, eps)
            dc += (dm * pc).sum(axis=1)
            dw += (dm * pw).sum(axis=1)

    if use_inverse and k > 1:
        minv = 1.0 - m
        pt, ssum_t, z_t = _pool(frames, minv, pooling, eps)
        ptn = np.linalg.norm(pt, axis=1)
        at = np.maximum(ptn, eps)
        targets = (captions.sum(axis=0)[None, :] - captions) / (k - 1)
        tn = np.maximum(np.linalg.norm(targets, axis=1), eps)
        sp = (pt * targets).sum(axis=1) / (at * tn)
        sm = (pt * captions).sum(axis=1) / (at * cap_norm)
        zed2 = margin - sp + sm
        act2 = zed2 > 0.0
        inv_val = float(np.maximum(zed2, 0.0).mean())
        if act2.any():
            guard_t = (ptn > eps).astype(np.float64)
            scale = act2.astype(np.float64) / k
            # d/dpt of (-cos(pt, target) + cos(pt, own caption))
            g2 = -targets / (at * tn)[:, None] + captions / (at * cap_norm)[:, None]
            g2 += ((sp - sm) * guard_t / (at * at))[:, None] * pt
            g2 *= scale[:, None]
            dminv = _pool_back(g2, frames, pt, ssum_t, z_t, pooling, eps)
            dc -= (dminv * pc).sum(axis=1)
            dw -= (dminv * pw).sum(axis=1)

    if alpha_aug > 0.0 and syn is not None and k > 1:
        syn = np.ascontiguousarray(syn, dtype=np.float64)
        ic = (centers[:-1] + centers[1:]) / 2.0
        iw = np.full(k - 1, w_inter)
        mi, pci, _ = _mask_rows(kind, t, ic, iw, tau)
        q, ssum_q, z_q = _pool(frames, mi, pooling, eps)
        qn = np.linalg.norm(q, axis=1)
        aq = np.maximum(qn, eps)
        sn = np.maximum(np.linalg.norm(syn, axis=1), eps)
        qs = (q * syn).sum(axis=1) / (aq * sn)
        aug_val = float((1.0 - qs).mean())
        guard_q = (qn > eps).astype(np.float64)
        gq = -syn / (aq * sn)[:, None] + (qs * guard_q / (aq * aq))[:, None] * q
        gq *= alpha_aug / (k - 1)
        dmq = _pool_back(gq, frames, q, ssum_q, z_q, pooling, eps)
        dci = (dmq * pci).sum(axis=1)
        dc[:-1] += 0.5 * dci
        dc[1:] += 0.5 * dci

    if lambda_div > 0.0 and k > 1:
        mn_raw = np.linalg.norm(m, axis=1)
        mn = np.maximum(mn_raw, eps)
        r = (m @ m.T) / (mn[:, None] * mn[None, :])
        npairs = k * (k - 1) / 2.0
        div_val = float((r.sum() - np.trace(r)) / 2.0 / npairs)
        e = (np.ones((k, k)) - np.eye(k)) / npairs
        guard_m = (mn_raw > eps).astype(np.float64)
        dm_div = ((e / mn[None, :]) @ m) / mn[:, None]
        dm_div -= (((e * r).sum(axis=1) * guard_m / (mn * mn))[:, None]) * m
        dm_div *= lambda_div
        dc += (dm_div * pc).sum(axis=1)
        dw += (dm_div * pw).sum(axis=1)

    return sim_val, inv_val, aug_val, div_val, dc, dw
