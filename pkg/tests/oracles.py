"""Reference implementations written independently of the package code.

They trade speed for transparency: explicit loops, textbook algorithms and
no shared helpers with ``nsipd``.
"""

import math

import numpy as np


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a small symmetric matrix.

    Returns eigenvalues in descending order and matching column eigenvectors.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * max(1.0, np.abs(a).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def gram_svd(x):
    """Singular values and right vectors of ``x`` from its Gram matrix ``x^T x``."""
    w, v = jacobi_eigh(x.T @ x)
    return np.sqrt(np.clip(w, 0, None)), v


def gram_low_cut(x, cut):
    """``x`` minus its ``cut`` leading rank-1 terms, via the Gram oracle."""
    _, v = gram_svd(x)
    lead = v[:, :cut]
    return x - (x @ lead) @ lead.T


def loop_das(analytic, element_x, angle, pixels, apertures, weights, c, fs, fc):
    """Delay-and-sum by explicit loops over pixels and aperture elements.

    ``apertures[p]`` is the element index list of pixel ``p`` and
    ``weights[p]`` the matching apodization weights.  Each channel is
    demodulated at ``fc``, interpolated linearly, then remodulated.
    """
    n_samples = analytic.shape[1]
    t_axis = np.arange(n_samples)
    baseband = analytic * np.exp(-2j * np.pi * fc * t_axis / fs)
    out = np.zeros(len(pixels), dtype=complex)
    for p, (x, z) in enumerate(pixels):
        total = 0j
        for e, w in zip(apertures[p], weights[p]):
            delay = (z * math.cos(angle) + x * math.sin(angle) + math.hypot(x - element_x[e], z)) / c
            pos = delay * fs
            if pos < 0 or pos > n_samples - 1:
                continue
            re = np.interp(pos, t_axis, baseband[e].real)
            im = np.interp(pos, t_axis, baseband[e].imag)
            total += w * complex(re, im) * np.exp(2j * np.pi * fc * delay)
        out[p] = total
    return out


def half_max_width(x, y):
    """FWHM of a densely sampled single-peaked curve by bisection on its interpolant."""
    peak = int(np.argmax(y))
    half = y[peak] / 2

    def crossing(lo, hi):
        f = lambda s: np.interp(s, x, y) - half
        for _ in range(200):
            mid = (lo + hi) / 2
            if (f(lo) > 0) == (f(mid) > 0):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    return crossing(x[peak], x[-1]) - crossing(x[peak], x[0])
