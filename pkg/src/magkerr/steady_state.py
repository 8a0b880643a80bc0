"""Mean-field steady state of a driven Kerr mode: the cubic shift equation.

Under the mean-field approximation, the self-Kerr frequency shift D of a
driven mode with detuning d = f_mode - f_drive and linewidth gamma (FWHM)
satisfies

    [ (D + d)^2 + (gamma/2)^2 ] * D - c*P = 0,

a cubic in D whose forcing term c*P (MHz^3) lumps drive efficiency and power.
Through the cross-Kerr interaction the undriven mode is dragged along with a
fixed shift ratio. Above a critical |c*P| the cubic has three real roots over
a detuning window: the system is bistable there and detuning sweeps show
hysteretic jumps.

All quantities are linear frequencies in MHz; the forcing term is in MHz^3.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import SweepDirection

# Roots closer than this are treated as a fold-degenerate pair (MHz).
ROOT_MERGE_TOL = 1e-4
# Normalized discriminant magnitude below which merging is considered.
DISC_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class ShiftSolution:
    """Real roots of the cubic shift equation at one detuning.

    roots    : 1 to 3 real shifts, sorted ascending, MHz
    stable   : per-root stability flag (middle root of a triple is unstable)
    selected : index into roots of the branch a sweep occupies, or None when
               no selection has been made yet
    """

    detuning: float
    roots: tuple[float, ...]
    stable: tuple[bool, ...]
    selected: int | None = None

    @property
    def selected_shift(self) -> float:
        if self.selected is None:
            raise ValueError("no branch selected")
        return self.roots[self.selected]

    def residuals(self, gamma: float, drive_term: float) -> tuple[float, ...]:
        """Cubic residuals of each root, MHz^3."""
        return tuple(cubic_residual(r, self.detuning, gamma, drive_term)
                     for r in self.roots)


@dataclass(frozen=True)
class SweepPoint:
    """One point of a hysteresis sweep."""

    control: float
    solution: ShiftSolution
    cross_shift: float
    excitations: float


@dataclass(frozen=True)
class SweepResult:
    """Branch-following sweep over a detuning grid.

    jumps holds the control values at which the occupied branch vanished and
    the selection moved discontinuously to the remaining stable branch.
    """

    direction: SweepDirection
    points: tuple[SweepPoint, ...]
    jumps: tuple[float, ...] = ()

    def selected_shifts(self) -> np.ndarray:
        return np.array([p.solution.selected_shift for p in self.points])

    def controls(self) -> np.ndarray:
        return np.array([p.control for p in self.points])


def cubic_residual(shift: float, detuning: float, gamma: float,
                   drive_term: float) -> float:
    """Value of the cubic at ``shift`` (zero for an exact root)."""
    return ((shift + detuning) ** 2 + (gamma / 2.0) ** 2) * shift - drive_term


def solve_shift_cubic(detuning: float, gamma: float,
                      drive_term: float) -> ShiftSolution:
    """All real roots of the steady-state shift cubic, with stability flags.

    Expands the shift equation to monic form

        D^3 + 2 d D^2 + (d^2 + (gamma/2)^2) D - c*P = 0

    and solves it in closed form (trigonometric method for three real roots,
    Cardano otherwise), then polishes each root with one Newton step to
    restore the precision lost to cancellation. Roots within ROOT_MERGE_TOL
    of each other near the discriminant boundary are merged.

    A cubic with real coefficients always has at least one real root, and with
    (gamma/2)^2 > 0 the root count is 1 or 3 away from the fold boundary.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    a2 = 2.0 * detuning
    a1 = detuning * detuning + (gamma / 2.0) ** 2
    a0 = -drive_term

    if drive_term == 0.0:
        # bracket (d^2 + (gamma/2)^2 + 2 d D + D^2) has no real zeros in D of
        # the remaining quadratic since (gamma/2)^2 > 0: single root at 0
        roots = [0.0]
    else:
        # depressed form t^3 + p t + q with D = t - a2/3
        p = a1 - a2 * a2 / 3.0
        q = 2.0 * a2 ** 3 / 27.0 - a2 * a1 / 3.0 + a0
        disc = -4.0 * p ** 3 - 27.0 * q * q
        shift0 = -a2 / 3.0
        if disc > 0.0:
            # three distinct real roots
            m = 2.0 * math.sqrt(-p / 3.0)
            arg = 3.0 * q / (p * m)
            arg = min(1.0, max(-1.0, arg))
            theta = math.acos(arg)
            roots = [shift0 + m * math.cos((theta - 2.0 * math.pi * k) / 3.0)
                     for k in range(3)]
        else:
            # one real root (or a boundary multiple root)
            half_q = q / 2.0
            rad = half_q * half_q + (p / 3.0) ** 3
            if rad >= 0.0:
                s = math.sqrt(rad)
                u = float(np.cbrt(-half_q + s))
                v = float(np.cbrt(-half_q - s))
                roots = [shift0 + u + v]
            else:  # pragma: no cover - only reachable through rounding
                m = 2.0 * math.sqrt(-p / 3.0)
                theta = math.acos(min(1.0, max(-1.0, 3.0 * q / (p * m))))
                roots = [shift0 + m * math.cos(theta / 3.0)]

        # one Newton polish per root
        polished = []
        for r in roots:
            f = ((r + detuning) ** 2 + (gamma / 2.0) ** 2) * r - drive_term
            df = 3.0 * r * r + 2.0 * a2 * r + a1
            if df != 0.0:
                r = r - f / df
            polished.append(r)
        roots = sorted(polished)

        # merge fold-degenerate pairs
        if len(roots) == 3:
            scale = max(1.0, abs(p)) ** 3
            near_boundary = abs(disc) / scale < DISC_BOUNDARY_TOL or (
                min(roots[1] - roots[0], roots[2] - roots[1]) < ROOT_MERGE_TOL)
            if near_boundary:
                merged = [roots[0]]
                for r in roots[1:]:
                    if r - merged[-1] < ROOT_MERGE_TOL:
                        merged[-1] = 0.5 * (merged[-1] + r)
                    else:
                        merged.append(r)
                roots = merged

    sol = ShiftSolution(detuning=float(detuning), roots=tuple(roots),
                        stable=(True,) * len(roots))
    return classify_stability(sol)


def classify_stability(sol: ShiftSolution) -> ShiftSolution:
    """Attach stability flags to a sorted root set.

    On the S-shaped response the middle branch is dynamically unstable: with
    three roots the flags are (stable, unstable, stable); a single root is
    stable. A merged fold pair (two roots) marks the degenerate root, which is
    marginal, as unstable so sweeps never select it.
    """
    n = len(sol.roots)
    if n == 1:
        flags = (True,)
    elif n == 3:
        flags = (True, False, True)
    elif n == 2:
        # the merged entry is whichever root came out of a fold; mark the one
        # with the smaller curvature margin unstable: without extra context we
        # conservatively mark the inner (second) root unstable
        flags = (True, False)
    else:
        raise ValueError("root count must be 1..3")
    return replace(sol, stable=flags)


def cross_shift(shift_driven: float, ratio: float) -> float:
    """Shift of the undriven mode dragged by the driven mode's excitation.

    Both shifts are proportional to the driven mode's excitation number, so
    the undriven mode moves by ratio * shift_driven with
    ratio = K_cross / K_self(driven).
    """
    return ratio * shift_driven


def excitation_number(shift: float, kerr: float) -> float:
    """Excitation number that produces ``shift`` for Kerr coefficient ``kerr``.

    The self-Kerr shift equals 2 * K * <n>, so n = shift / (2 K). Zero shift
    gives zero occupation; a sign mismatch between shift and K would mean a
    negative occupation and raises.
    """
    if kerr == 0.0:
        raise ValueError("kerr coefficient must be nonzero")
    if shift == 0.0:
        return 0.0
    n = shift / (2.0 * kerr)
    if n < 0.0:
        raise ValueError(
            f"sign mismatch: shift {shift} MHz with kerr {kerr} MHz "
            "implies negative occupation")
    return n


def bistability_threshold(gamma: float) -> float:
    """|c*P| above which a detuning sweep develops a bistable window.

    The two folds of the cubic merge at |c*P| = gamma^3 / (3*sqrt(3)); below
    this forcing the response is single-valued at every detuning.
    """
    return gamma ** 3 / (3.0 * math.sqrt(3.0))


def drive_term_for_peak_shift(gamma: float, peak_shift: float) -> float:
    """Forcing term c*P whose swept-branch apex shift equals ``peak_shift``.

    On the resonance-tracking branch the largest |shift| occurs where the
    drive is resonant with the shifted mode, where the cubic bracket collapses
    to (gamma/2)^2; hence c*P = peak_shift * (gamma/2)^2.
    """
    return peak_shift * (gamma / 2.0) ** 2


def hysteresis_sweep(gamma: float, drive_term: float,
                     detuning_grid: Sequence[float],
                     direction: SweepDirection = SweepDirection.UP,
                     cross_ratio: float = 0.0,
                     kerr: float | None = None) -> SweepResult:
    """Follow the occupied branch through a monotone detuning sweep.

    At each grid point the branch continuously connected to the previous
    selection is kept; when it terminates at a fold, the selection jumps to
    the remaining stable root and the grid point is recorded in ``jumps``.
    The sweep starts on the smallest-|shift| root of the first point.

    cross_ratio scales the cross shift reported per point; kerr, when given,
    is used to report the driven mode's excitation number (NaN otherwise).
    """
    grid = np.asarray(detuning_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("detuning grid is empty")
    diffs = np.diff(grid)
    if direction is SweepDirection.UP and np.any(diffs <= 0):
        raise ValueError("up-sweep grid must be strictly increasing")
    if direction is SweepDirection.DOWN and np.any(diffs >= 0):
        raise ValueError("down-sweep grid must be strictly decreasing")

    points: list[SweepPoint] = []
    jumps: list[float] = []
    prev_sel: int | None = None
    prev_roots: tuple[float, ...] = ()
    prev_shift = 0.0

    for d in grid:
        sol = solve_shift_cubic(d, gamma, drive_term)
        if prev_sel is None:
            sel = int(np.argmin(np.abs(sol.roots)))
        elif len(sol.roots) == len(prev_roots):
            sel = prev_sel
        elif len(sol.roots) > len(prev_roots):
            # entering the multi-root window: stay on the nearest branch
            sel = int(np.argmin([abs(r - prev_shift) for r in sol.roots]))
        else:
            # leaving the window: did our branch survive the fold?
            new_shift = sol.roots[0] if len(sol.roots) == 1 else None
            if new_shift is None:
                # 3 -> 2 merged state: nearest surviving root
                sel = int(np.argmin([abs(r - prev_shift) for r in sol.roots]))
            else:
                survivor = int(np.argmin([abs(r - new_shift)
                                          for r in prev_roots]))
                sel = 0
                if survivor != prev_sel:
                    jumps.append(float(d))
        if not sol.stable[sel]:
            # never occupy an unstable branch; fall back to the nearest
            # stable root and record the discontinuity
            stable_idx = [i for i, s in enumerate(sol.stable) if s]
            sel = min(stable_idx, key=lambda i: abs(sol.roots[i] - prev_shift))
            jumps.append(float(d))
        sol = replace(sol, selected=sel)
        shift = sol.roots[sel]
        exc = math.nan
        if kerr is not None and kerr != 0.0:
            exc = excitation_number(shift, kerr) if shift / kerr >= 0 \
                else math.nan
        points.append(SweepPoint(control=float(d), solution=sol,
                                 cross_shift=cross_shift(shift, cross_ratio),
                                 excitations=exc))
        prev_sel, prev_roots, prev_shift = sel, sol.roots, shift

    return SweepResult(direction=direction, points=tuple(points),
                       jumps=tuple(jumps))


# ---------------------------------------------------------------------------
# serialization

SWEEP_CSV_COLUMNS = ["control", "delta", "root1", "root2", "root3",
                     "stable1", "stable2", "stable3", "selected",
                     "cross_shift", "excitations"]


def sweep_to_csv(result: SweepResult, path: str | Path | None = None,
                 header_lines: Sequence[str] = ()) -> str:
    """Serialize a sweep to CSV (written to ``path`` when given).

    Missing roots are empty fields; ``selected`` is 1-based to match the
    root1..root3 column names.
    """
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_COLUMNS)
    for p in result.points:
        roots = list(p.solution.roots) + [None] * (3 - len(p.solution.roots))
        flags = list(p.solution.stable) + [None] * (3 - len(p.solution.stable))
        writer.writerow(
            [repr(p.control), repr(p.solution.detuning)]
            + ["" if r is None else repr(r) for r in roots]
            + ["" if s is None else int(s) for s in flags]
            + [p.solution.selected + 1,
               repr(p.cross_shift), repr(p.excitations)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
