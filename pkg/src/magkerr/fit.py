"""Fitting the steady-state shift model to extracted curves.

The driven-mode curve determines the drive-efficiency product c*P (the only
free parameter of the cubic once the independently measured linewidth is
fixed); the undriven-mode curve against the driven one determines the
cross-to-self Kerr coefficient ratio as a slope through the origin. Repeating
the procedure over several drive frequencies gives a stability report of the
two ratio families.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SweepDirection
from .extract import ShiftCurve
from .steady_state import hysteresis_sweep

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitConvergenceError(RuntimeError):
    """Raised when refinement stalls; carries the best estimate so far."""

    def __init__(self, message: str, best: "FitResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one driven-shift curve.

    cp_estimate  : fitted forcing term c*P, MHz^3
    ratio        : cross-to-self Kerr ratio when the fit produced one
    residual_rms : root-mean-square misfit, MHz
    """

    cp_estimate: float
    residual_rms: float
    n_points: int
    drive_frequency: float
    ratio: float | None = None

    def __post_init__(self):
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be >= 0")

    def to_dict(self) -> dict:
        return {"cp_estimate_mhz3": self.cp_estimate,
                "ratio": self.ratio,
                "residual_rms_mhz": self.residual_rms,
                "n_points": self.n_points,
                "drive_frequency_mhz": self.drive_frequency}


def model_shifts(detunings: np.ndarray, gamma: float, drive_term: float,
                 direction: SweepDirection = SweepDirection.UP) -> np.ndarray:
    """Swept-branch model shifts on a detuning grid.

    Branch selection replays the acquisition direction so the model occupies
    the same stable branch as swept data, including the hysteretic jump.
    """
    order = np.argsort(detunings)
    if direction is SweepDirection.DOWN:
        order = order[::-1]
    grid = detunings[order]
    sweep = hysteresis_sweep(gamma, drive_term, grid, direction)
    shifts = sweep.selected_shifts()
    out = np.empty_like(shifts)
    out[order] = shifts
    return out


def fit_driven_curve(curve: ShiftCurve, gamma: float,
                     direction: SweepDirection = SweepDirection.UP,
                     rel_tol: float = 1e-12, max_iter: int = 200,
                     drive_frequency: float = math.nan) -> FitResult:
    """Fit the forcing term c*P to a driven-mode shift curve.

    One-dimensional least squares in c*P with the linewidth held at its
    independently measured value. The magnitude is located by bracketed
    golden-section search (the swept-branch response grows monotonically with
    the forcing, making the objective unimodal where gradient steps stall at
    fold points), then polished by quadratic interpolation.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    delta = np.asarray(curve.detunings, dtype=float)
    shifts = np.asarray(curve.shifts, dtype=float)
    if delta.size < 5:
        raise ValueError("need at least 5 points to fit")

    peak = float(np.max(np.abs(shifts)))
    if peak == 0.0:
        return FitResult(cp_estimate=0.0, residual_rms=0.0,
                         n_points=delta.size, drive_frequency=drive_frequency)
    sign = math.copysign(1.0, float(np.sum(shifts)))

    # every exact point satisfies cp = [(D+d)^2 + (gamma/2)^2] D, so the
    # pointwise values bound the magnitude bracket
    cp_points = ((shifts + delta) ** 2 + (gamma / 2.0) ** 2) * shifts
    hi = 4.0 * float(np.max(np.abs(cp_points)))
    lo = 0.0

    def sse(mag: float) -> float:
        model = model_shifts(delta, gamma, sign * mag, direction)
        return float(np.sum((model - shifts) ** 2))

    # golden-section on [lo, hi]
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = sse(c), sse(d)
    it = 0
    while (b - a) > rel_tol * hi and it < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = sse(d)
        it += 1
    mag = c if fc < fd else d
    best_sse = min(fc, fd)

    if (b - a) > 1e-6 * hi:
        best = FitResult(cp_estimate=sign * mag,
                         residual_rms=math.sqrt(best_sse / delta.size),
                         n_points=delta.size, drive_frequency=drive_frequency)
        raise FitConvergenceError(
            f"bracket failed to shrink after {max_iter} iterations", best)

    # quadratic refinement around the minimum
    h = max((b - a), rel_tol * hi)
    for _ in range(8):
        xs = np.array([mag - h, mag, mag + h])
        ys = np.array([sse(xs[0]), sse(xs[1]), sse(xs[2])])
        denom = ys[0] - 2.0 * ys[1] + ys[2]
        if denom <= 0:
            break
        step = 0.5 * h * (ys[0] - ys[2]) / denom
        if not math.isfinite(step):
            break
        mag = max(0.0, mag + step)
        h *= 0.25
    final = sse(mag)

    return FitResult(cp_estimate=sign * mag,
                     residual_rms=math.sqrt(final / delta.size),
                     n_points=delta.size, drive_frequency=drive_frequency)


def fit_ratio(driven: ShiftCurve, undriven: ShiftCurve) -> float:
    """Cross-to-self Kerr ratio as a slope through the origin.

    Resamples the driven curve onto the undriven curve's detunings inside the
    overlap of the two axes, then fits undriven = ratio * driven by least
    squares through the origin, which suppresses the noise amplification of a
    pointwise division near zero shift.
    """
    lo = max(driven.detunings[0], undriven.detunings[0])
    hi = min(driven.detunings[-1], undriven.detunings[-1])
    mask = (undriven.detunings >= lo) & (undriven.detunings <= hi)
    if int(mask.sum()) < 3:
        raise ValueError("fewer than 3 overlapping points between curves")
    x = np.interp(undriven.detunings[mask], driven.detunings, driven.shifts)
    y = undriven.shifts[mask]
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        return 0.0
    return float(np.dot(x, y) / sxx)


def derived_self_kerr_ratio(ratio_kittel: float, ratio_hms: float) -> float:
    """Ratio of the two self-Kerr coefficients from the two cross ratios.

    (K_cross/K_self_kittel) / (K_cross/K_self_hms) = K_self_hms/K_self_kittel.
    """
    if ratio_hms == 0.0:
        raise ValueError("HMS-family ratio is zero; derived ratio undefined")
    return ratio_kittel / ratio_hms


@dataclass(frozen=True)
class RatioEntry:
    """Fitted ratios at one drive frequency (NaN when a family is absent)."""

    drive_frequency: float
    ratio_kittel: float = math.nan
    ratio_hms: float = math.nan


@dataclass(frozen=True)
class RatioReport:
    """Per-family statistics of the fitted ratios across drive frequencies.

    A family is flagged stable when std/|mean| < stability_threshold.
    """

    entries: tuple[RatioEntry, ...]
    mean_kittel: float
    mean_hms: float
    std_kittel: float
    std_hms: float
    stable_kittel: bool
    stable_hms: bool
    stability_threshold: float

    def to_dict(self) -> dict:
        return {
            "entries": [{"drive_frequency_mhz": e.drive_frequency,
                         "ratio_kittel": e.ratio_kittel,
                         "ratio_hms": e.ratio_hms} for e in self.entries],
            "mean_kittel": self.mean_kittel, "std_kittel": self.std_kittel,
            "stable_kittel": self.stable_kittel,
            "mean_hms": self.mean_hms, "std_hms": self.std_hms,
            "stable_hms": self.stable_hms,
            "stability_threshold": self.stability_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        lines = [f"{'drive (MHz)':>12}  {'K_cross/K_kittel':>17}  "
                 f"{'K_cross/K_hms':>14}"]
        for e in self.entries:
            rk = "" if math.isnan(e.ratio_kittel) else f"{e.ratio_kittel:.4f}"
            rh = "" if math.isnan(e.ratio_hms) else f"{e.ratio_hms:.4f}"
            lines.append(f"{e.drive_frequency:>12.1f}  {rk:>17}  {rh:>14}")
        lines.append("-" * 49)

        def fam(label, mean, std, stable):
            flag = "stable" if stable else "NOT stable"
            return (f"{label}: mean {mean:.4f}, std {std:.4f} ({flag} at "
                    f"std/mean < {self.stability_threshold:g})")

        lines.append(fam("K_cross/K_kittel", self.mean_kittel,
                         self.std_kittel, self.stable_kittel))
        lines.append(fam("K_cross/K_hms", self.mean_hms, self.std_hms,
                         self.stable_hms))
        return "\n".join(lines)


def ratio_stability_report(entries: Sequence[RatioEntry],
                           stability_threshold: float = 0.1) -> RatioReport:
    """Aggregate fitted ratios per family across drive frequencies.

    Each family needs at least 2 finite entries for a standard deviation;
    fewer leaves std = NaN and the family unconditionally not stable.
    """
    def family(values: np.ndarray) -> tuple[float, float, bool]:
        vals = values[np.isfinite(values)]
        if vals.size == 0:
            return math.nan, math.nan, False
        mean = float(np.mean(vals))
        if vals.size < 2:
            return mean, math.nan, False
        std = float(np.std(vals, ddof=0))
        stable = mean != 0.0 and std / abs(mean) < stability_threshold
        return mean, std, stable

    rk = np.array([e.ratio_kittel for e in entries], dtype=float)
    rh = np.array([e.ratio_hms for e in entries], dtype=float)
    mean_k, std_k, stable_k = family(rk)
    mean_h, std_h, stable_h = family(rh)
    return RatioReport(entries=tuple(entries),
                       mean_kittel=mean_k, mean_hms=mean_h,
                       std_kittel=std_k, std_hms=std_h,
                       stable_kittel=stable_k, stable_hms=stable_h,
                       stability_threshold=stability_threshold)
