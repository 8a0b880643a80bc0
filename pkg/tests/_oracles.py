"""Independent oracles used by the test suite.

These deliberately avoid the library's closed-form cubic solver and branch
logic: roots come from dense sign-change scanning plus bisection, stability
from explicit forward-Euler relaxation of the mean-field amplitude equation,
and window boundaries from scanning the detuning axis with the scan oracle.
"""

from __future__ import annotations

import numpy as np


def cubic_poly(shift, delta, gamma, drive_term):
    return ((shift + delta) ** 2 + (gamma / 2.0) ** 2) * shift - drive_term


def root_bound(delta, gamma, drive_term) -> float:
    """Fujiwara bound on |roots| of the monic cubic."""
    a2 = 2.0 * abs(delta)
    a1 = delta * delta + (gamma / 2.0) ** 2
    a0 = abs(drive_term)
    return 2.0 * max(a2, np.sqrt(a1), np.cbrt(a0)) + 1.0


def scan_bisect_roots(delta, gamma, drive_term, n_scan=32768, n_bisect=60,
                      scan_range=None):
    """All real roots by dense scan and sign-change bisection."""
    if scan_range is None:
        b = root_bound(delta, gamma, drive_term)
        scan_range = (-b, b)
    x = np.linspace(scan_range[0], scan_range[1], n_scan)
    f = cubic_poly(x, delta, gamma, drive_term)
    sign = np.sign(f)
    # treat exact zeros as roots directly
    exact = x[f == 0.0]
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    lo, hi = x[idx].copy(), x[idx + 1].copy()
    flo = f[idx].copy()
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        fmid = cubic_poly(mid, delta, gamma, drive_term)
        left = (fmid > 0) == (flo > 0)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fmid, flo)
        hi = np.where(left, hi, mid)
    roots = np.sort(np.concatenate([0.5 * (lo + hi), exact]))
    return roots


def scan_bisect_roots_batch(deltas, gammas, drive_terms,
                            n_scan=16384, n_bisect=56):
    """Vectorized scan-bisection over a batch of parameter draws.

    Returns a list of root arrays, one per draw.
    """
    deltas = np.asarray(deltas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    drive_terms = np.asarray(drive_terms, dtype=float)
    m = deltas.size
    b = np.array([root_bound(deltas[i], gammas[i], drive_terms[i])
                  for i in range(m)])
    t = np.linspace(-1.0, 1.0, n_scan)
    x = b[:, None] * t[None, :]
    f = cubic_poly(x, deltas[:, None], gammas[:, None], drive_terms[:, None])
    sign_change = np.sign(f[:, :-1]) * np.sign(f[:, 1:]) < 0
    draw_idx, grid_idx = np.nonzero(sign_change)
    lo = x[draw_idx, grid_idx]
    hi = x[draw_idx, grid_idx + 1]
    flo = f[draw_idx, grid_idx]
    dd = deltas[draw_idx]
    gg = gammas[draw_idx]
    cc = drive_terms[draw_idx]
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        fmid = cubic_poly(mid, dd, gg, cc)
        left = (fmid > 0) == (flo > 0)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fmid, flo)
        hi = np.where(left, hi, mid)
    roots = 0.5 * (lo + hi)
    out = [roots[draw_idx == i] for i in range(m)]
    return [np.sort(r) for r in out]


def three_root_window(gamma, drive_term, d_lo, d_hi, step=0.01):
    """Boundaries of the contiguous 3-root detuning interval by scanning.

    Returns (first, last) detunings with 3 roots, or None when no such
    interval exists on the scanned range.
    """
    # all roots share the drive-term sign and |root| <= |cP|/(gamma/2)^2 at
    # the apex, so a tight scan range keeps the grid fine enough to resolve
    # near-fold root pairs
    apex = abs(drive_term) / (gamma / 2.0) ** 2
    span = apex + 2.0 * max(abs(d_lo), abs(d_hi)) + 10.0
    rng = (-span, 1.0) if drive_term < 0 else (-1.0, span)

    def count(d):
        return scan_bisect_roots(d, gamma, drive_term, n_scan=16384,
                                 n_bisect=40, scan_range=rng).size

    # coarse pass locates the window, fine pass pins each boundary
    coarse = np.arange(d_lo, d_hi + 0.25, 0.5)
    c_counts = np.array([count(d) for d in coarse])
    where = np.nonzero(c_counts == 3)[0]
    if where.size == 0:
        return None
    lo_grid = np.arange(coarse[where[0]] - 1.0,
                        coarse[where[0]] + 0.5 * step, step)
    hi_grid = np.arange(coarse[where[-1]],
                        coarse[where[-1]] + 1.0 + 0.5 * step, step)
    lo_counts = [count(d) for d in lo_grid]
    hi_counts = [count(d) for d in hi_grid]
    lo_idx = [i for i, c in enumerate(lo_counts) if c == 3]
    hi_idx = [i for i, c in enumerate(hi_counts) if c == 3]
    return float(lo_grid[lo_idx[0]]), float(hi_grid[hi_idx[-1]])


def relaxes_back(delta, gamma, drive_term, root, rel_perturb=0.01,
                 n_steps=200_000):
    """Forward-Euler relaxation oracle for one root.

    Integrates da/dt = -[i(delta + shift(|a|^2)) + gamma/2] a - i*Omega from
    the root's steady amplitude perturbed by ``rel_perturb``, with the Kerr
    scaled so the root's shift maps onto the amplitude. Returns True when the
    trajectory returns to the starting root (stable), False when it settles
    elsewhere (unstable).
    """
    sign = 1.0 if drive_term >= 0 else -1.0
    kerr = sign  # shift = 2*kerr*|a|^2
    omega = np.sqrt(abs(drive_term) / 2.0)
    n_ss = root / (2.0 * kerr)
    if n_ss < 0:
        raise ValueError("root/drive sign mismatch")
    denom = 1j * (delta + root) + gamma / 2.0
    a0 = -1j * omega / denom
    # consistency: |a0|^2 should equal n_ss
    a = a0 * np.sqrt((1.0 + rel_perturb))
    scale = max(gamma, abs(delta) + abs(root), 1.0)
    dt = 0.02 / scale
    for _ in range(n_steps):
        shift = 2.0 * kerr * (a.real ** 2 + a.imag ** 2)
        a = a + dt * (-(1j * (delta + shift) + gamma / 2.0) * a - 1j * omega)
    final_shift = 2.0 * kerr * abs(a) ** 2
    return abs(final_shift - root) < 0.05 * max(1.0, abs(root))
