"""Fused kernel checks against a from-scratch double-loop reference.

The reference below shares no code with the package kernels: masks,
pools, cosines and every loss term are rebuilt with plain Python loops,
so agreement is evidence rather than tautology.
"""

import math

import numpy as np
import pytest

from maskalign.kernels import (
    CAUCHY,
    GAUSSIAN,
    HARD_BINARY,
    POOL_PLAIN,
    POOL_WEIGHTED,
    backend_names,
    get_kernel,
)

ALL_KINDS = (GAUSSIAN, CAUCHY, HARD_BINARY)


def _ref_mask(kind, n, center, width, tau):
    row = np.zeros(n)
    s = width / tau
    for j in range(n):
        d = (j + 0.5) / n - center
        if kind == GAUSSIAN:
            row[j] = math.exp(-d * d / (2.0 * s * s))
        elif kind == CAUCHY:
            row[j] = 1.0 / (1.0 + (d / s) ** 2)
        else:
            row[j] = 1.0 if abs(d) <= width / 2.0 else 0.0
    return row


def _ref_pool(frames, row, pooling, eps):
    n, d = frames.shape
    out = np.zeros(d)
    for j in range(n):
        out += row[j] * frames[j]
    if pooling == POOL_PLAIN:
        return out / n
    return out / max(sum(row[j] for j in range(n)), eps)


def _ref_cos(a, b, eps):
    na = max(math.sqrt(sum(x * x for x in a)), eps)
    nb = max(math.sqrt(sum(x * x for x in b)), eps)
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def _ref_terms(frames, captions, syn, centers, widths, kind, pooling,
               tau, margin, w_inter, eps):
    """(sim, inverse, aug, diversity) for one video, loops only."""
    n = frames.shape[0]
    k = captions.shape[0]
    rows = [_ref_mask(kind, n, centers[i], widths[i], tau) for i in range(k)]
    pools = [_ref_pool(frames, rows[i], pooling, eps) for i in range(k)]

    sim = 0.0
    for i in range(k):
        s_plus = _ref_cos(pools[i], captions[i], eps)
        s_minus = 0.0
        if k > 1:
            s_minus = max(_ref_cos(pools[i], captions[j], eps)
                          for j in range(k) if j != i)
        sim += max(0.0, margin - s_plus + s_minus)
    sim /= k

    inv = 0.0
    if k > 1:
        for i in range(k):
            comp = _ref_pool(frames, 1.0 - rows[i], pooling, eps)
            rest = sum(captions[j] for j in range(k) if j != i) / (k - 1)
            s_plus = _ref_cos(comp, rest, eps)
            s_minus = _ref_cos(comp, captions[i], eps)
            inv += max(0.0, margin - s_plus + s_minus)
        inv /= k

    aug = 0.0
    if syn is not None and k > 1:
        for i in range(k - 1):
            c_mid = (centers[i] + centers[i + 1]) / 2.0
            row = _ref_mask(kind, n, c_mid, w_inter, tau)
            q = _ref_pool(frames, row, pooling, eps)
            aug += 1.0 - _ref_cos(q, syn[i], eps)
        aug /= k - 1

    div = 0.0
    if k > 1:
        for i in range(k):
            for j in range(i + 1, k):
                div += _ref_cos(rows[i], rows[j], eps)
        div /= k * (k - 1) / 2.0
    return sim, inv, aug, div


def _instance(rng, k_min=1):
    n = int(rng.integers(4, 33))
    d = int(rng.integers(2, 9))
    k = int(rng.integers(k_min, 6))
    frames = rng.standard_normal((n, d))
    captions = rng.standard_normal((k, d))
    syn = rng.standard_normal((k - 1, d)) if k > 1 else None
    centers = rng.uniform(0.1, 0.9, size=k)
    widths = rng.uniform(0.05, 0.9, size=k)
    return frames, captions, syn, centers, widths


def test_forward_matches_reference_all_kinds():
    kern = get_kernel("pure")
    rng = np.random.default_rng(41)
    for trial in range(60):
        frames, captions, syn, centers, widths = _instance(rng)
        kind = ALL_KINDS[trial % 3]
        pooling = (POOL_PLAIN, POOL_WEIGHTED)[trial % 2]
        tau = (2.0, 4.0, 6.0)[trial % 3]
        margin = (0.0, 0.1, 0.5)[trial % 3]
        got = kern(frames, captions, syn, centers, widths, kind, pooling,
                   tau, margin, 0.6, 0.25, 0.7, True, True, 1e-8)
        want = _ref_terms(frames, captions, syn, centers, widths, kind,
                          pooling, tau, margin, 0.6, 1e-8)
        for name, g, w in zip(("sim", "inverse", "aug", "div"), got[:4], want):
            assert g == pytest.approx(w, rel=1e-9, abs=1e-11), (trial, name)


def test_hard_binary_forward_is_an_indicator():
    # pooled values must be reproducible from a 0/1 mask alone
    kern = get_kernel("pure")
    frames = np.eye(8)
    captions = np.vstack([np.ones(8) / math.sqrt(8.0)])
    sim, *_ = kern(frames, captions, None, np.array([0.5]), np.array([0.25]),
                   HARD_BINARY, POOL_PLAIN, 4.0, 1.0, 0.6, 0.0, 0.0,
                   True, False, 1e-8)
    # frames inside [0.375, 0.625] are indices 3 and 4
    pool = (frames[3] + frames[4]) / 8.0
    s_plus = _ref_cos(pool, captions[0], 1e-8)
    assert sim == pytest.approx(1.0 - s_plus, abs=1e-12)


def test_gradients_match_finite_differences_when_smooth():
    # margin=2 keeps every hinge strictly active, so the objective is
    # smooth in the parameters apart from argmax switches; the seeds
    # below produce well separated negatives
    rng = np.random.default_rng(3)
    h = 1e-6
    for kind in (GAUSSIAN, CAUCHY):
        for pooling in (POOL_PLAIN, POOL_WEIGHTED):
            frames, captions, syn, centers, widths = _instance(rng, k_min=2)

            def f(c, w):
                kern = get_kernel("pure")
                s, i, a, d, _, _ = kern(frames, captions, syn, c, w, kind,
                                        pooling, 4.0, 2.0, 0.6, 0.25, 0.7,
                                        True, True, 1e-8)
                return s + i + 0.7 * d + 0.25 * a

            kern = get_kernel("pure")
            *_, dc, dw = kern(frames, captions, syn, centers, widths, kind,
                              pooling, 4.0, 2.0, 0.6, 0.25, 0.7,
                              True, True, 1e-8)
            for i in range(len(centers)):
                e = np.zeros_like(centers)
                e[i] = h
                fd_c = (f(centers + e, widths) - f(centers - e, widths)) / (2 * h)
                fd_w = (f(centers, widths + e) - f(centers, widths - e)) / (2 * h)
                assert dc[i] == pytest.approx(fd_c, rel=5e-5, abs=5e-7)
                assert dw[i] == pytest.approx(fd_w, rel=5e-5, abs=5e-7)


def test_hard_negative_tie_takes_the_lowest_index():
    # frames [(1,1), (1,-1)] with the mask centred between them pool to
    # (w, 0) exactly, so captions (c, s) and (c, -s) tie bitwise; moving
    # the centre left makes caption 1 the argmax, moving right makes it
    # caption 2, and the analytic gradient must follow the left branch
    frames = np.array([[1.0, 1.0], [1.0, -1.0]])
    a = math.pi / 4.0
    captions = np.array([
        [0.0, 1.0],
        [math.cos(a), math.sin(a)],
        [math.cos(a), -math.sin(a)],
    ])
    centers = np.array([0.5, 0.2, 0.8])
    widths = np.array([0.4, 0.3, 0.3])

    def args(c):
        return (frames, captions, None, c, widths, GAUSSIAN, POOL_PLAIN,
                4.0, 0.5, 0.6, 0.0, 0.0, True, False, 1e-8)

    for backend in backend_names():
        kern = get_kernel(backend)
        sim0, *_rest = kern(*args(centers))
        dc = _rest[-2]
        h = 1e-6
        left = centers.copy()
        left[0] -= h
        right = centers.copy()
        right[0] += h
        back = (sim0 - kern(*args(left))[0]) / h
        fwd = (kern(*args(right))[0] - sim0) / h
        assert abs(fwd - back) > 1e-3  # a genuine two-branch point
        assert dc[0] == pytest.approx(back, abs=1e-4)
        assert abs(dc[0] - fwd) > 1e-3


def test_section_gating():
    kern = get_kernel("pure")
    rng = np.random.default_rng(5)
    frames, captions, syn, centers, widths = _instance(rng, k_min=3)

    out = kern(frames, captions, syn, centers, widths, GAUSSIAN, POOL_PLAIN,
               4.0, 0.1, 0.6, 0.0, 0.0, False, False, 1e-8)
    assert out[:4] == (0.0, 0.0, 0.0, 0.0)
    assert not out[4].any() and not out[5].any()

    # alpha_aug = 0 or missing synthetic captions disable the aug term
    out = kern(frames, captions, None, centers, widths, GAUSSIAN, POOL_PLAIN,
               4.0, 0.1, 0.6, 0.25, 0.0, True, False, 1e-8)
    assert out[2] == 0.0
    out = kern(frames, captions, syn, centers, widths, GAUSSIAN, POOL_PLAIN,
               4.0, 0.1, 0.6, 0.0, 0.0, True, False, 1e-8)
    assert out[2] == 0.0

    # single-event videos have no inverse, aug or diversity term
    out = kern(frames, captions[:1], None, centers[:1], widths[:1], GAUSSIAN,
               POOL_PLAIN, 4.0, 0.1, 0.6, 0.25, 0.7, True, True, 1e-8)
    assert out[1] == 0.0 and out[2] == 0.0 and out[3] == 0.0


def test_kernel_is_deterministic():
    rng = np.random.default_rng(9)
    frames, captions, syn, centers, widths = _instance(rng, k_min=2)
    for backend in backend_names():
        kern = get_kernel(backend)
        runs = [kern(frames, captions, syn, centers, widths, CAUCHY,
                     POOL_WEIGHTED, 4.0, 0.1, 0.6, 0.25, 0.7, True, True, 1e-8)
                for _ in range(3)]
        for other in runs[1:]:
            assert other[:4] == runs[0][:4]
            assert np.array_equal(other[4], runs[0][4])
            assert np.array_equal(other[5], runs[0][5])


@pytest.mark.skipif("compiled" not in backend_names(),
                    reason="compiled backend not built")
def test_pure_and_compiled_agree():
    pure_k = get_kernel("pure")
    fast_k = get_kernel("compiled")
    rng = np.random.default_rng(17)
    for trial in range(50):
        frames, captions, syn, centers, widths = _instance(rng)
        kind = ALL_KINDS[trial % 3]
        pooling = (POOL_PLAIN, POOL_WEIGHTED)[trial % 2]
        use_sim = trial % 4 != 3
        use_inv = trial % 5 != 4
        a = (frames, captions, syn, centers, widths, kind, pooling,
             (2.0, 4.0, 6.0)[trial % 3], (0.0, 0.1, 0.5)[trial % 3],
             0.6, 0.25, 0.7, use_sim, use_inv, 1e-8)
        p = pure_k(*a)
        f = fast_k(*a)
        for name, pv, fv in zip(("sim", "inverse", "aug", "div"), p[:4], f[:4]):
            np.testing.assert_allclose(fv, pv, rtol=1e-6, atol=1e-10,
                                       err_msg=f"{trial}:{name}")
        np.testing.assert_allclose(f[4], p[4], rtol=1e-6, atol=1e-10)
        np.testing.assert_allclose(f[5], p[5], rtol=1e-6, atol=1e-10)


def test_get_kernel_rejects_unknown_backend():
    with pytest.raises(ValueError):
        get_kernel("vectorised")
