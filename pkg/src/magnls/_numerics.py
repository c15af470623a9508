"""Small numerical helpers used across modules."""

import math

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, a, b, tol=1e-12, max_iter=200):
    """Minimize a unimodal scalar function on ``[a, b]``.

    Returns
    -------
    x, fx : float
        Location and value of the minimum.
    """
    a, b = float(a), float(b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    # the bracket may have collapsed onto an endpoint of a monotone function
    for xe in (a, b):
        fe = f(xe)
        if fe < fx:
            x, fx = xe, fe
    return x, fx


def scan_then_golden(f, a, b, n=2048, tol=1e-12):
    """Dense scan of ``f`` on ``[a, b]`` followed by golden-section refinement.

    ``f`` must accept numpy arrays. The refinement bracket is the pair of
    scan cells around the best sample, so a multimodal ``f`` is handled as
    long as its wells are resolved by the scan.
    """
    xs = np.linspace(a, b, n)
    fs = np.asarray(f(xs), dtype=float)
    k = int(np.argmin(fs))
    lo = xs[max(k - 1, 0)]
    hi = xs[min(k + 1, n - 1)]
    x, fx = golden_section_min(lambda t: float(f(np.array([t]))[0]), lo, hi, tol=tol)
    if fs[k] < fx:
        x, fx = float(xs[k]), float(fs[k])
    return x, fx


def smoothstep(t):
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    out[inside] = a / (a + b)
    out[t >= 1] = 1.0
    return out
