"""Shift extraction from transmission maps, in the style of swept-VNA data
processing: locate mode features, subtract the linear bias-field trend, and
convert the sweep axis to drive detuning.

Two feature detectors are provided. ``find_dips`` locates anti-resonance
minima inside a single fixed-current trace; it resolves a mode wherever the
mode's coupling dominates its linewidth (2g > gamma), which holds for the
strongly coupled Kittel mode at any detuning. A weakly coupled mode with
2g < gamma produces no trace-direction minimum away from the cavity (the
Fano modulation never overcomes the background slope), so its branch is
located with ``find_branch_crossings``: for each probe frequency, the sweep
(control) direction shows a local minimum/maximum pair where the branch
crosses that frequency, and the pair midpoint estimates the crossing.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .model import (DriveConfig, FieldCalibration, Mode, SystemConfig,
                    mode_frequencies_at_current)
from .spectrum import ProbeTrace, SpectrumMap

# Default feature-to-branch matching window (MHz): must exceed the largest
# Kerr displacement expected in a dataset (150 MHz at the calibrated scale).
ASSIGN_TOLERANCE = 160.0
# A feature whose two nearest predicted branches differ by less than this is
# ambiguous and stays unassigned rather than guessed (MHz).
ASSIGN_TIE_MARGIN = 0.5


@dataclass(frozen=True)
class Dip:
    """One anti-resonance found in a trace.

    frequency : refined dip position, MHz
    depth     : prominence of the minimum in |S21|^2 units
    width     : full width at half prominence, MHz
    """

    frequency: float
    depth: float
    width: float
    mode_label: Mode | None = None


@dataclass(frozen=True)
class DipSet:
    """Dips of one trace."""

    control: float
    dips: tuple[Dip, ...]


@dataclass(frozen=True)
class CrossingPoint:
    """A (control, frequency) point where a mode branch crosses a probe row."""

    control: float
    frequency: float
    strength: float
    mode_label: Mode | None = None


@dataclass(frozen=True)
class ShiftCurve:
    """Extracted frequency shift of one mode versus drive detuning.

    detunings are strictly increasing; shifts are in MHz after background
    subtraction.
    """

    mode_label: Mode
    detunings: np.ndarray
    shifts: np.ndarray

    def __post_init__(self):
        if self.detunings.shape != self.shifts.shape:
            raise ValueError("detuning and shift arrays differ in shape")
        if np.any(np.diff(self.detunings) <= 0):
            raise ValueError("detunings must be strictly increasing")


def _parabolic_vertex(x: np.ndarray, y: np.ndarray) -> float:
    """Vertex abscissa of the parabola through three points."""
    d21 = (y[1] - y[0]) / (x[1] - x[0])
    d32 = (y[2] - y[1]) / (x[2] - x[1])
    curv = (d32 - d21) / (x[2] - x[0])
    if curv == 0.0:
        return float(x[1])
    return float(0.5 * (x[0] + x[1] - d21 / curv))


def _relative_prominence_floor(values: np.ndarray,
                               min_prominence: float) -> float:
    """Absolute prominence threshold from a relative multiplier.

    The threshold is min_prominence times the median absolute deviation of
    the signal, which is robust to a sloped background and scales with the
    signal, keeping detection invariant under uniform rescaling. A small
    floor relative to the maximum avoids zero thresholds on flat traces.
    """
    mad = np.median(np.abs(values - np.median(values)))
    return max(min_prominence * float(mad), 1e-12 * float(np.max(values, initial=0.0)))


def find_dips(trace: ProbeTrace, min_prominence: float = 3.0) -> DipSet:
    """Anti-resonance minima of one trace.

    Local minima of |S21|^2 with prominence at least ``min_prominence`` times
    the trace's median absolute deviation, refined to sub-grid precision with
    a parabola through the three points around each minimum. An empty result
    is not an error.
    """
    y = trace.s21_sq
    x = trace.probe_frequencies
    thr = _relative_prominence_floor(y, min_prominence)
    idx, props = find_peaks(-y, prominence=thr)
    if idx.size == 0:
        return DipSet(control=trace.control, dips=())
    widths_samples = peak_widths(-y, idx, rel_height=0.5)[0]
    step = float(np.median(np.diff(x)))
    dips = []
    for k, i in enumerate(idx):
        pos = _parabolic_vertex(x[i - 1:i + 2], y[i - 1:i + 2])
        dips.append(Dip(frequency=pos,
                        depth=float(props["prominences"][k]),
                        width=float(widths_samples[k] * step)))
    return DipSet(control=trace.control, dips=tuple(dips))


def find_branch_crossings(m: SpectrumMap, cfg: SystemConfig,
                          min_prominence: float = 3.0,
                          pair_window_mhz: float = 25.0) -> list[CrossingPoint]:
    """Branch crossing points from control-direction extrema.

    For each probe frequency, the |S21|^2 column versus control shows a
    local minimum/maximum pair where a branch sweeps through that frequency;
    the midpoint of the pair estimates the crossing control value. Pairs are
    accepted when the two extrema lie within ``pair_window_mhz`` of each
    other measured along the branch sweep (converted through the field
    calibration). Unpaired extrema, e.g. where a branch only grazes a row,
    are discarded.
    """
    cal = cfg.calibration
    sweep_rate = abs(cal.kittel_slope * cal.current_to_field_slope)  # MHz/A
    if sweep_rate == 0.0:
        raise ValueError("calibration sweeps no frequency; no crossings exist")
    window_amps = pair_window_mhz / sweep_rate
    controls = m.controls
    points: list[CrossingPoint] = []
    for j, f_row in enumerate(m.probe_frequencies):
        col = m.s21_sq[:, j]
        thr = _relative_prominence_floor(col, min_prominence)
        imax, pmax = find_peaks(col, prominence=thr)
        imin, pmin = find_peaks(-col, prominence=thr)
        if imax.size == 0 or imin.size == 0:
            continue
        extrema = sorted(
            [(i, +1, p) for i, p in zip(imax, pmax["prominences"])]
            + [(i, -1, p) for i, p in zip(imin, pmin["prominences"])])
        k = 0
        while k + 1 < len(extrema):
            i1, t1, p1 = extrema[k]
            i2, t2, p2 = extrema[k + 1]
            if t1 != t2 and (controls[i2] - controls[i1]) <= window_amps:
                c1 = _parabolic_vertex(controls[i1 - 1:i1 + 2],
                                       t1 * col[i1 - 1:i1 + 2]) \
                    if 0 < i1 < controls.size - 1 else float(controls[i1])
                c2 = _parabolic_vertex(controls[i2 - 1:i2 + 2],
                                       t2 * col[i2 - 1:i2 + 2]) \
                    if 0 < i2 < controls.size - 1 else float(controls[i2])
                points.append(CrossingPoint(control=0.5 * (c1 + c2),
                                            frequency=float(f_row),
                                            strength=float(p1 + p2)))
                k += 2
            else:
                k += 1
    return points


def _predicted_branches(cfg: SystemConfig, control) -> dict[Mode, float]:
    f_k, f_h = mode_frequencies_at_current(cfg.calibration, control)
    return {Mode.KITTEL: f_k, Mode.HMS: f_h,
            Mode.CAVITY: cfg.cavity.bare_frequency}


def label_feature(cfg: SystemConfig, control: float, frequency: float,
                  tolerance: float = ASSIGN_TOLERANCE,
                  tie_margin: float = ASSIGN_TIE_MARGIN) -> Mode | None:
    """Label one feature by the nearest predicted branch.

    Returns None (unassigned) when no branch lies within ``tolerance`` or
    when the two nearest branches are closer than ``tie_margin`` apart in
    distance, which makes the assignment ambiguous.
    """
    branches = _predicted_branches(cfg, control)
    dists = sorted((abs(frequency - f), mode) for mode, f in branches.items())
    if dists[0][0] > tolerance:
        return None
    if len(dists) > 1 and dists[1][0] - dists[0][0] < tie_margin \
            and dists[1][0] <= tolerance:
        return None
    return dists[0][1]


def assign_modes(dipsets: Iterable[DipSet], cfg: SystemConfig,
                 tolerance: float = ASSIGN_TOLERANCE,
                 tie_margin: float = ASSIGN_TIE_MARGIN) -> list[DipSet]:
    """Label every dip of a sweep by the closest predicted branch.

    Branch predictions are the bare calibration lines plus the cavity;
    ambiguous dips (two branches within ``tie_margin`` of the same distance)
    are left unassigned rather than guessed.
    """
    out = []
    for ds in dipsets:
        labeled = tuple(
            replace(d, mode_label=label_feature(cfg, ds.control, d.frequency,
                                                tolerance, tie_margin))
            for d in ds.dips)
        out.append(DipSet(control=ds.control, dips=labeled))
    return out


def label_crossings(points: Iterable[CrossingPoint], cfg: SystemConfig,
                    tolerance: float = ASSIGN_TOLERANCE,
                    tie_margin: float = ASSIGN_TIE_MARGIN) -> list[CrossingPoint]:
    """Label branch-crossing points by the closest predicted branch."""
    return [replace(p, mode_label=label_feature(cfg, p.control, p.frequency,
                                                tolerance, tie_margin))
            for p in points]


def subtract_linear_background(controls, frequencies,
                               ref_fraction: float = 0.1,
                               ref_mask=None):
    """Remove the linear bias-field trend from branch positions.

    Fits frequency = a*control + b by least squares on a reference segment
    where Kerr shifts are negligible (by default the first and last
    ``ref_fraction`` of the sweep; pass ``ref_mask`` to override), then
    returns (residuals, (a, b)). The residual is the Kerr-induced shift.
    """
    controls = np.asarray(controls, dtype=float)
    frequencies = np.asarray(frequencies, dtype=float)
    n = controls.size
    if n < 3:
        raise ValueError("need at least 3 points")
    if ref_mask is None:
        k = max(1, int(math.floor(n * ref_fraction)))
        ref_mask = np.zeros(n, dtype=bool)
        ref_mask[:k] = True
        ref_mask[n - k:] = True
    else:
        ref_mask = np.asarray(ref_mask, dtype=bool)
    if int(ref_mask.sum()) < 3:
        raise ValueError("reference segment must hold at least 3 points")
    a, b = np.polyfit(controls[ref_mask], frequencies[ref_mask], 1)
    residuals = frequencies - (a * controls + b)
    return residuals, (float(a), float(b))


def to_detuning_axis(controls, shifts, cal: FieldCalibration,
                     drive_frequency: float, mode: Mode,
                     label: Mode | None = None) -> ShiftCurve:
    """Re-index extracted shifts by drive detuning.

    The detuning is delta = f_mode(control) - f_drive using the *bare*
    (pre-shift) branch frequency of ``mode`` from the calibration, since the
    steady-state equation defines its detuning from the unshifted mode.
    ``mode`` picks which branch defines the axis (the driven one); ``label``
    names the mode the shifts belong to (defaults to ``mode``).

    Points are sorted by detuning; exact duplicates are averaged so the axis
    is strictly monotone.
    """
    controls = np.asarray(controls, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    f_k, f_h = mode_frequencies_at_current(cal, controls)
    branch = np.atleast_1d(f_k if mode is Mode.KITTEL else f_h)
    delta = branch - drive_frequency
    order = np.argsort(delta, kind="stable")
    delta, shifts = delta[order], shifts[order]
    # average shifts sharing one detuning value
    uniq, inverse, counts = np.unique(delta, return_inverse=True,
                                      return_counts=True)
    if uniq.size != delta.size:
        summed = np.zeros(uniq.size)
        np.add.at(summed, inverse, shifts)
        shifts = summed / counts
        delta = uniq
    return ShiftCurve(mode_label=label or mode, detunings=delta,
                      shifts=shifts)


# ---------------------------------------------------------------------------
# assembled pipeline


def _mode_resolved_in_trace(cfg: SystemConfig, mode: Mode) -> bool:
    """Trace-direction dips resolve a mode when 2g exceeds its linewidth."""
    if mode is Mode.KITTEL:
        return 2.0 * cfg.couplings.g_k > cfg.kittel.linewidth
    return 2.0 * cfg.couplings.g_h > cfg.hms.linewidth


def extract_branch_points(m: SpectrumMap, cfg: SystemConfig,
                          min_prominence: float = 3.0,
                          tolerance: float = ASSIGN_TOLERANCE,
                          tie_margin: float = ASSIGN_TIE_MARGIN
                          ) -> dict[Mode, tuple[np.ndarray, np.ndarray]]:
    """Locate both magnon branches in a map.

    Uses trace-direction dips for modes resolved in a single trace and
    control-direction branch crossings otherwise. Returns, per magnon mode,
    (controls, frequencies) sorted by control.
    """
    out: dict[Mode, tuple[np.ndarray, np.ndarray]] = {}
    need_dips = [mode for mode in (Mode.KITTEL, Mode.HMS)
                 if _mode_resolved_in_trace(cfg, mode)]
    need_crossings = [mode for mode in (Mode.KITTEL, Mode.HMS)
                      if mode not in need_dips]
    if need_dips:
        dipsets = assign_modes((find_dips(t, min_prominence)
                                for t in m.traces()),
                               cfg, tolerance, tie_margin)
        for mode in need_dips:
            ctrl, freq = [], []
            for ds in dipsets:
                for d in ds.dips:
                    if d.mode_label is mode:
                        ctrl.append(ds.control)
                        freq.append(d.frequency)
            out[mode] = _sorted_points(ctrl, freq)
    if need_crossings:
        crossings = label_crossings(
            find_branch_crossings(m, cfg, min_prominence),
            cfg, tolerance, tie_margin)
        for mode in need_crossings:
            pts = [(p.control, p.frequency) for p in crossings
                   if p.mode_label is mode]
            ctrl = [p[0] for p in pts]
            freq = [p[1] for p in pts]
            out[mode] = _sorted_points(ctrl, freq)
    return out


def _sorted_points(ctrl, freq):
    ctrl = np.asarray(ctrl, dtype=float)
    freq = np.asarray(freq, dtype=float)
    order = np.argsort(ctrl, kind="stable")
    return ctrl[order], freq[order]


def extract_shift_curves(m: SpectrumMap, cfg: SystemConfig,
                         drive: DriveConfig,
                         min_prominence: float = 3.0,
                         ref_fraction: float = 0.1,
                         tolerance: float = ASSIGN_TOLERANCE,
                         tie_margin: float = ASSIGN_TIE_MARGIN
                         ) -> dict[Mode, ShiftCurve]:
    """Full extraction: branch points -> linear background -> detuning axis.

    Both curves are indexed by the detuning of the *driven* branch, matching
    how driven-sweep data are analyzed. Modes with fewer than 3 located
    points are omitted from the result.
    """
    points = extract_branch_points(m, cfg, min_prominence,
                                   tolerance, tie_margin)
    curves: dict[Mode, ShiftCurve] = {}
    for mode, (ctrl, freq) in points.items():
        if ctrl.size < 3:
            continue
        shifts, _ = subtract_linear_background(ctrl, freq, ref_fraction)
        curves[mode] = to_detuning_axis(ctrl, shifts, cfg.calibration,
                                        drive.drive_frequency,
                                        mode=drive.target, label=mode)
    return curves


# ---------------------------------------------------------------------------
# file I/O

CURVE_CSV_COLUMNS = ["delta_MHz", "shift_MHz", "mode"]


def save_curve_csv(curve: ShiftCurve, path: str | Path | None = None,
                   header_lines: Sequence[str] = ()) -> str:
    """Serialize a shift curve to CSV (written to ``path`` when given)."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_CSV_COLUMNS)
    for d, s in zip(curve.detunings, curve.shifts):
        writer.writerow([repr(float(d)), repr(float(s)),
                         curve.mode_label.value])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def load_curve_csv(path: str | Path) -> ShiftCurve:
    """Read a shift-curve CSV written by :func:`save_curve_csv`."""
    deltas, shifts, modes = [], [], set()
    with open(path, newline="") as f:
        rows = (r for r in f if not r.startswith("#"))
        reader = csv.reader(rows)
        header = next(reader)
        if [h.strip() for h in header] != CURVE_CSV_COLUMNS:
            raise ValueError(f"unexpected curve CSV header: {header}")
        for row in reader:
            deltas.append(float(row[0]))
            shifts.append(float(row[1]))
            modes.add(row[2])
    if len(modes) != 1:
        raise ValueError("curve file must hold exactly one mode")
    return ShiftCurve(mode_label=Mode(modes.pop()),
                      detunings=np.asarray(deltas),
                      shifts=np.asarray(shifts))


_FLOAT_RE = re.compile(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")


def control_from_filename(name: str) -> float:
    """Control value encoded in a VNA file name (the last number in the stem)."""
    stem = Path(name).stem
    matches = _FLOAT_RE.findall(stem)
    if not matches:
        raise ValueError(f"no control value found in file name {name!r}")
    return float(matches[-1])


def load_vna_csv_dir(directory: str | Path,
                     pattern: str = "*.csv") -> SpectrumMap:
    """Read a directory of per-control VNA traces into a SpectrumMap.

    Each file holds two columns, frequency_Hz and s21_db, and encodes its
    control value in the file name (the last number in the stem, e.g.
    ``trace_I4.750.csv``). All files must share one frequency grid.
    """
    files = sorted(Path(directory).glob(pattern))
    if not files:
        raise FileNotFoundError(f"no files matching {pattern} in {directory}")
    entries = []
    grid = None
    for path in files:
        control = control_from_filename(path.name)
        freq_hz, s21_db = [], []
        with open(path, newline="") as f:
            rows = (r for r in f if not r.startswith("#"))
            reader = csv.reader(rows)
            header = [h.strip() for h in next(reader)]
            if header != ["frequency_Hz", "s21_db"]:
                raise ValueError(f"{path.name}: unexpected header {header}")
            for row in reader:
                freq_hz.append(float(row[0]))
                s21_db.append(float(row[1]))
        freq = np.asarray(freq_hz) / 1e6
        if grid is None:
            grid = freq
        elif freq.shape != grid.shape or not np.allclose(freq, grid):
            raise ValueError(f"{path.name}: frequency grid differs")
        entries.append((control, 10.0 ** (np.asarray(s21_db) / 10.0)))
    entries.sort(key=lambda e: e[0])
    controls = np.array([e[0] for e in entries])
    data = np.vstack([e[1] for e in entries])
    return SpectrumMap(controls=controls, probe_frequencies=grid,
                       s21_sq=data)
