"""Command-line pipelines: derive coefficients, simulate maps, analyze, report.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure, 3 I/O
failure. Every run writes a manifest.json recording the resolved parameters
and a short manifest hash that all text outputs carry in a comment line.
The worker count for map synthesis comes from --workers or the
MAGKERR_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import presets
from .extract import extract_branch_points, extract_shift_curves, save_curve_csv
from .fit import (FitConvergenceError, RatioEntry, fit_driven_curve,
                  fit_ratio, ratio_stability_report)
from .model import (DriveConfig, Mode, SystemConfig, config_from_dict,
                    config_to_dict, cross_kerr_from_overlap, dispersive_check,
                    drive_from_dict, kerr_self_from_material,
                    load_config_dict, mode_frequencies_at_current)
from .spectrum import (load_map_binary, load_map_csv, save_map_binary,
                       save_map_csv, synthesize_map)
from .extract import load_vna_csv_dir
from .fit import model_shifts

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply dotted-path ``key=value`` overrides to a config mapping."""
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = _parse_value(value)
    return data


def _resolve_config(args) -> tuple[SystemConfig, DriveConfig | None, dict]:
    """Config from file (or calibrated defaults) with overrides applied."""
    if args.config is not None:
        data = load_config_dict(args.config)
    else:
        data = config_to_dict(presets.system(), drive=None)
    data = apply_overrides(data, args.set or [])
    try:
        cfg = config_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    drive = None
    if "drive" in data:
        try:
            drive = drive_from_dict(data["drive"])
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid [drive] section: {exc}") from exc
    return cfg, drive, data


def parse_drive_spec(spec: str, config_drive: DriveConfig | None
                     ) -> DriveConfig | None:
    """Parse ``none`` or ``target:freq[MHz]:power[dBm]`` drive specs.

    Efficiencies come from the config's [drive] section when present, else
    from the calibrated defaults.
    """
    if spec.lower() == "none":
        return None
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(
            f"drive spec {spec!r} is not target:freqMHz:powerdBm")
    target_s, freq_s, power_s = parts
    try:
        target = Mode(target_s.lower())
    except ValueError:
        raise UsageError(f"unknown drive target {target_s!r}") from None
    freq = float(freq_s.lower().removesuffix("mhz"))
    power = float(power_s.lower().removesuffix("dbm"))
    if config_drive is not None:
        base = config_drive
    elif target is Mode.KITTEL:
        base = presets.kittel_drive()
    else:
        base = presets.hms_drive()
    return replace(base, target=target, drive_frequency=freq,
                   drive_power_dbm=power)


def _manifest(args, command: str, data: dict) -> tuple[dict, str]:
    manifest = {
        "command": command,
        "config_path": str(args.config) if args.config else None,
        "overrides": list(args.set or []),
        "seed": args.seed,
        "output_dir": str(args.output_dir),
        "resolved_config": data,
    }
    digest = hashlib.sha256(
        json.dumps(manifest, sort_keys=True).encode()).hexdigest()[:16]
    manifest["manifest_hash"] = digest
    return manifest, digest


def _write_manifest(manifest: dict, outdir: Path, outputs: list[Path]):
    manifest = dict(manifest)
    manifest["outputs"] = {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in outputs}
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("MAGKERR_WORKERS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _parse_grid(spec: str, what: str) -> np.ndarray:
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"{what} spec {spec!r} is not lo:hi:step") from None
    if step <= 0 or hi <= lo:
        raise UsageError(f"{what} spec {spec!r} describes an empty grid")
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# subcommands


def cmd_derive(args) -> int:
    cfg, _, data = _resolve_config(args)
    if cfg.material is None:
        raise UsageError(
            "derive needs a [material] section with keys: "
            "anisotropy_constant, gyromagnetic_ratio, "
            "saturation_magnetization, sphere_volume, overlap_coefficient, "
            "total_spin_kittel, total_spin_hms")
    m = cfg.material
    k_self = kerr_self_from_material(m)
    cross = cross_kerr_from_overlap(m)
    disp = dispersive_check(cfg)
    ratio_hms_cfg = cfg.kerr_ratio(Mode.HMS)
    k_hms = cross.k_cross / ratio_hms_cfg if ratio_hms_cfg else math.nan
    report = {
        "k_self_kittel_mhz": k_self,
        "k_cross_mhz": cross.k_cross,
        "k_self_hms_mhz_inferred": k_hms,
        "g_kh_mhz": cross.g_kh,
        "frequency_renormalization_kittel_mhz": cross.delta_omega_kittel,
        "frequency_renormalization_hms_mhz": cross.delta_omega_hms,
        "ratio_cross_to_kittel": (cross.k_cross / k_self
                                  if k_self else math.nan),
        "ratio_hms_to_kittel": (k_hms / k_self if k_self else math.nan),
        "dispersive": {
            "lam_ck_mhz": disp.lam_ck, "lam_hk_mhz": disp.lam_hk,
            "ratio_ck": disp.ratio_ck, "ratio_hk": disp.ratio_hk,
            "shift_ck_mhz": disp.shift_ck, "shift_hk_mhz": disp.shift_hk,
            "dispersive_ck": disp.dispersive_ck,
            "dispersive_hk": disp.dispersive_hk,
            "infinite_shift": disp.infinite_shift,
        },
    }
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest, digest = _manifest(args, "derive", data)
    out = outdir / "derive.json"
    out.write_text(json.dumps({"manifest_hash": digest, **report}, indent=2)
                   + "\n")
    _write_manifest(manifest, outdir, [out])
    print(f"self-Kerr (Kittel)   : {k_self:.6e} MHz/excitation")
    print(f"cross-Kerr           : {cross.k_cross:.6e} MHz/excitation")
    print(f"self-Kerr (HMS, inf.): {k_hms:.6e} MHz/excitation")
    print(f"g_kh                 : {cross.g_kh:.6f} MHz")
    print(f"renormalizations     : kittel {cross.delta_omega_kittel:+.6f}, "
          f"hms {cross.delta_omega_hms:+.6f} MHz")
    print(f"K_cross/K_kittel     : {report['ratio_cross_to_kittel']:.4f}")
    print(f"K_hms/K_kittel       : {report['ratio_hms_to_kittel']:.4f}")
    print(f"dispersive flags     : cavity-kittel {disp.dispersive_ck} "
          f"(ratio {disp.ratio_ck:.2f}), "
          f"hms-kittel {disp.dispersive_hk} (ratio {disp.ratio_hk:.2f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, config_drive, data = _resolve_config(args)
    drive = parse_drive_spec(args.drive, config_drive)
    if args.currents is not None:
        currents = _parse_grid(args.currents, "--currents")
        probe = (_parse_grid(args.probe, "--probe") if args.probe
                 else presets.driven_sweep_grids(
                     drive or presets.kittel_drive())[1])
    elif drive is not None:
        span = args.detunings or "-100:80:0.1"
        lo, hi, step = (float(x) for x in span.split(":"))
        currents, probe = presets.driven_sweep_grids(
            drive, detuning_span=(lo, hi), detuning_step=step)
        if args.probe:
            probe = _parse_grid(args.probe, "--probe")
    else:
        raise UsageError("undriven simulate needs --currents lo:hi:step")
    manifest, digest = _manifest(args, "simulate", data)
    m = synthesize_map(cfg, currents, probe, drive, workers=_workers(args))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "map.csv"
    bin_path = outdir / "map.bin"
    save_map_csv(m, csv_path, header_lines=[f"manifest_hash={digest}"])
    save_map_binary(m, bin_path)
    _write_manifest(manifest, outdir, [csv_path, bin_path])
    print(f"map: {m.controls.size} currents x {probe.size} probe points "
          f"-> {csv_path}, {bin_path}")
    return EXIT_OK


def _load_map(path: Path):
    if path.is_dir():
        return load_vna_csv_dir(path)
    if path.suffix == ".bin":
        return load_map_binary(path)
    return load_map_csv(path)


def cmd_analyze(args) -> int:
    cfg, config_drive, data = _resolve_config(args)
    drive = parse_drive_spec(args.drive, config_drive)
    manifest, digest = _manifest(args, "analyze", data)
    m = _load_map(Path(args.input))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []

    if drive is None:
        points = extract_branch_points(m, cfg)
        summary = {"manifest_hash": digest, "driven": False}
        for mode, (ctrl, freq) in points.items():
            if ctrl.size < 3:
                continue
            from .extract import subtract_linear_background
            shifts, _ = subtract_linear_background(ctrl, freq)
            summary[f"max_abs_shift_{mode.value}_mhz"] = float(
                np.max(np.abs(shifts)))
        summary["ratio_fit"] = "refused: no drive, insufficient signal"
        out = outdir / "analysis.json"
        out.write_text(json.dumps(summary, indent=2) + "\n")
        outputs.append(out)
        _write_manifest(manifest, outdir, outputs)
        print(json.dumps(summary, indent=2))
        return EXIT_OK

    curves = extract_shift_curves(m, cfg, drive)
    driven_mode = drive.target
    undriven_mode = (Mode.HMS if driven_mode is Mode.KITTEL else Mode.KITTEL)
    if driven_mode not in curves:
        raise ValueError("driven-mode curve could not be extracted")
    gamma = (cfg.kittel.linewidth if driven_mode is Mode.KITTEL
             else cfg.hms.linewidth)
    result = fit_driven_curve(curves[driven_mode], gamma,
                              drive_frequency=drive.drive_frequency)
    ratio = None
    if undriven_mode in curves:
        ratio = fit_ratio(curves[driven_mode], curves[undriven_mode])
        result = replace(result, ratio=ratio)

    header = [f"manifest_hash={digest}"]
    for mode, curve in curves.items():
        path = outdir / f"curve_{mode.value}.csv"
        save_curve_csv(curve, path, header_lines=header)
        outputs.append(path)
    # model curve at the fitted forcing term, plot-ready
    dense = np.linspace(curves[driven_mode].detunings[0],
                        curves[driven_mode].detunings[-1], 1201)
    model = model_shifts(dense, gamma, result.cp_estimate)
    path = outdir / "curve_model.csv"
    with open(path, "w") as f:
        f.write(f"# manifest_hash={digest}\n")
        f.write("delta_MHz,shift_MHz,mode\n")
        for d, s in zip(dense, model):
            f.write(f"{d!r},{s!r},{driven_mode.value}-model\n")
    outputs.append(path)

    fit_json = {"manifest_hash": digest,
                "target": driven_mode.value,
                **result.to_dict()}
    out = outdir / "fit.json"
    out.write_text(json.dumps(fit_json, indent=2) + "\n")
    outputs.append(out)
    _write_manifest(manifest, outdir, outputs)
    print(f"fitted c*P = {result.cp_estimate:.4f} MHz^3, "
          f"residual rms {result.residual_rms:.4f} MHz on "
          f"{result.n_points} points")
    if ratio is not None:
        print(f"cross-to-self Kerr ratio ({undriven_mode.value} vs "
              f"{driven_mode.value}): {ratio:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    entries: dict[float, dict] = {}
    paths = [Path(p) for p in args.fits]
    for path in paths:
        data = json.loads(path.read_text())
        freq = float(data["drive_frequency_mhz"])
        ratio = data.get("ratio")
        if ratio is None:
            continue
        slot = entries.setdefault(freq, {})
        if data.get("target") == Mode.KITTEL.value:
            slot["kittel"] = float(ratio)
        else:
            slot["hms"] = float(ratio)
    if not entries:
        raise UsageError("no fit files with ratios given")
    rows = [RatioEntry(drive_frequency=f,
                       ratio_kittel=v.get("kittel", math.nan),
                       ratio_hms=v.get("hms", math.nan))
            for f, v in sorted(entries.items())]
    report = ratio_stability_report(rows)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest, digest = _manifest(args, "report", {"fits": args.fits})
    out = outdir / "ratio_report.json"
    out.write_text(json.dumps({"manifest_hash": digest, **report.to_dict()},
                              indent=2) + "\n")
    _write_manifest(manifest, outdir, [out])
    print(report.table())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="magkerr",
                     description="Kerr cavity-magnonics simulation and "
                                 "analysis pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="TOML config (default: calibrated preset)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override (repeatable)")
        p.add_argument("--output-dir", type=Path, default=Path("."),
                       help="directory for outputs")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (default: MAGKERR_WORKERS or "
                            "machine parallelism)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed recorded in the manifest for any "
                            "randomized generation")

    p = sub.add_parser("derive", help="coefficients from material parameters")
    common(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("simulate", help="synthesize a transmission map")
    common(p)
    p.add_argument("--drive", default="none",
                   help="none or target:freqMHz:powerdBm")
    p.add_argument("--currents", default=None, metavar="LO:HI:STEP",
                   help="current grid in A")
    p.add_argument("--detunings", default=None, metavar="LO:HI:STEP",
                   help="driven-branch detuning grid in MHz")
    p.add_argument("--probe", default=None, metavar="LO:HI:STEP",
                   help="probe grid in MHz (default: auto)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="extract shifts and fit a map")
    common(p)
    p.add_argument("input", help="map.csv, map.bin, or a VNA CSV directory")
    p.add_argument("--drive", default="none",
                   help="none or target:freqMHz:powerdBm")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="aggregate fit.json files into a "
                                      "ratio-stability report")
    common(p)
    p.add_argument("fits", nargs="+", help="fit.json files")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, FitConvergenceError,
            RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
