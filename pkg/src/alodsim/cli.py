"""Command-line front end.

Subcommands: simulate, analyze, stimulus, render, match, presets. All
commands exit 0 on success; failures print a single ``error: ...`` line to
stderr and exit nonzero. Runs are deterministic given (scene, profile,
seed, version); each simulate run writes a JSON manifest alongside the WAV.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    drr,
    dual_slope_fit,
    ned,
    schroeder_edc,
    t30,
)
from .errors import AlodsimError, InsufficientDecayError, SceneParseError
from .pipeline import simulate
from .postproc import match_spectrum
from .scene import (
    parse_scene,
    preset,
    preset_names,
    profile_names,
    profile_preset,
    serialize_scene,
)
from .spatial import ImpulseResponse, LoudspeakerLayout, array_preset_86, load_hrtf_dir
from .stimuli import (
    BandLevels,
    Stimulus,
    convolve,
    ess_generate,
    pink_pulse,
    pink_pulse_variant,
)
from .wavio import read_wav, write_wav

HRTF_ENV_VAR = "ALODSIM_HRTF_DIR"
ANALYZE_METRICS = ("t30", "edc", "ned", "drr", "dual-slope")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _file_sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return _sha256(fh.read())


def _load_scene(args) -> tuple:
    """Returns (scene, scene document text)."""
    if args.scene is not None:
        with open(args.scene, "r", encoding="utf-8") as fh:
            doc = fh.read()
        return parse_scene(doc), doc
    if args.preset is not None:
        scene = preset(args.preset, seed=args.seed)
        return scene, serialize_scene(scene)
    raise SceneParseError("either --scene or --preset is required")


def _load_layout(spec: str) -> LoudspeakerLayout:
    if spec == "86-preset":
        return array_preset_86()
    with open(spec, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return LoudspeakerLayout(
        positions=np.asarray(doc["positions"], dtype=float),
        center=np.asarray(doc.get("center", (0.0, 0.0, 0.0)), dtype=float),
        calibration_gains=(np.asarray(doc["calibration_gains"], dtype=float)
                           if doc.get("calibration_gains") else None),
        calibration_delays=(np.asarray(doc["calibration_delays"], dtype=float)
                            if doc.get("calibration_delays") else None),
    )


def _metric_summary(ir: ImpulseResponse) -> dict:
    mono = ir.channels.sum(axis=0)
    summary = {
        "n_channels": int(ir.n_channels),
        "n_samples": int(ir.n_samples),
        "peak": float(np.max(np.abs(ir.channels))),
    }
    try:
        summary["t30_s"] = round(t30(schroeder_edc(mono, ir.sample_rate)), 4)
    except InsufficientDecayError:
        summary["t30_s"] = None
    return summary


def _cmd_simulate(args) -> int:
    scene, doc = _load_scene(args)
    profile = profile_preset(args.profile)
    hrtf = None
    hrtf_dir = args.hrtf or os.environ.get(HRTF_ENV_VAR)
    if hrtf_dir:
        hrtf = load_hrtf_dir(hrtf_dir)
    layout = _load_layout(args.layout) if args.layout else None
    result = simulate(scene, profile, source_id=args.source,
                      duration=args.duration, seed=args.seed,
                      output_mode=args.output_mode, hrtf=hrtf, layout=layout)
    write_wav(args.out, result.ir.channels.T, result.ir.sample_rate)
    manifest = {
        "tool": "alodsim",
        "version": __version__,
        "scene_sha256": _sha256(doc.encode("utf-8")),
        "scene_name": scene.name,
        "profile": profile.name,
        "seed": args.seed,
        "source": result.source_id,
        "output_mode": result.output_mode,
        "duration_s": result.duration,
        "outputs": [{"path": args.out, "sha256": _file_sha256(args.out)}],
        "metrics": _metric_summary(result.ir),
    }
    manifest_path = args.manifest or args.out + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} ({result.ir.n_channels} ch) and {manifest_path}")
    return 0


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _analyze_one(metric: str, channels: np.ndarray, fs: float, path: str):
    if metric == "t30":
        rows = [(ch, f"{t30(schroeder_edc(channels[ch], fs)):.6f}")
                for ch in range(channels.shape[0])]
        _write_csv(path, ("channel", "t30_s"), rows)
    elif metric == "drr":
        rows = [(ch, f"{drr(channels[ch], fs):.4f}")
                for ch in range(channels.shape[0])]
        _write_csv(path, ("channel", "drr_db"), rows)
    elif metric == "edc":
        curves = [schroeder_edc(channels[ch], fs) for ch in range(channels.shape[0])]
        n = max(c.values.size for c in curves)
        rows = []
        for i in range(n):
            row = [f"{i / fs:.6f}"]
            for c in curves:
                row.append(f"{c.values[i]:.4f}" if i < c.values.size else "")
            rows.append(row)
        _write_csv(path, ("time_s", *(f"edc_db_ch{ch}" for ch in range(len(curves)))), rows)
    elif metric == "ned":
        profiles = [ned(channels[ch], fs) for ch in range(channels.shape[0])]
        times = profiles[0].times
        rows = [
            [f"{times[i]:.6f}"] + [f"{p.values[i]:.5f}" for p in profiles]
            for i in range(times.size)
        ]
        _write_csv(path, ("time_s", *(f"ned_ch{ch}" for ch in range(len(profiles)))), rows)
    elif metric == "dual-slope":
        rows = []
        for ch in range(channels.shape[0]):
            fit = dual_slope_fit(schroeder_edc(channels[ch], fs))
            rows.append((ch, f"{fit.slope1:.3f}", f"{fit.slope2:.3f}",
                         f"{fit.knee_time:.5f}", f"{fit.knee_level:.2f}"))
        _write_csv(path, ("channel", "slope1_db_per_s", "slope2_db_per_s",
                          "knee_time_s", "knee_level_db"), rows)
    else:
        raise SceneParseError(
            f"unknown metric {metric!r}; known: {', '.join(ANALYZE_METRICS)}"
        )


def _cmd_analyze(args) -> int:
    data, fs = read_wav(args.ir)
    if data.size == 0:
        raise SceneParseError(f"{args.ir}: empty WAV")
    channels = data.T
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if not metrics:
        raise SceneParseError("no metrics requested")
    base, ext = os.path.splitext(args.out)
    for metric in metrics:
        path = args.out if len(metrics) == 1 else f"{base}-{metric}{ext or '.csv'}"
        _analyze_one(metric, channels, fs, path)
        print(f"wrote {path}")
    return 0


def _cmd_stimulus(args) -> int:
    if args.kind == "pink-pulse":
        if args.band_offsets:
            offsets = tuple(float(v) for v in args.band_offsets.split(","))
            stim = pink_pulse_variant(BandLevels(offsets_db=offsets),
                                      fs=args.rate, duration=args.duration)
        else:
            stim = pink_pulse(fs=args.rate, duration=args.duration)
    elif args.kind == "sweep":
        stim = ess_generate(f1=args.f1, f2=args.f2, duration=args.duration
                            if args.duration != 0.5 else 3.2, fs=args.rate)
    else:
        raise SceneParseError(f"unknown stimulus kind {args.kind!r}")
    write_wav(args.out, stim.samples, stim.sample_rate)
    print(f"wrote {args.out} ({stim.samples.size} samples)")
    return 0


def _cmd_render(args) -> int:
    stim_data, stim_fs = read_wav(args.stim)
    ir_data, ir_fs = read_wav(args.ir)
    stim = Stimulus(samples=stim_data[:, 0], sample_rate=stim_fs, kind="file")
    ir = ImpulseResponse(channels=ir_data.T, sample_rate=ir_fs)
    out = convolve(stim, ir)
    peak = float(np.max(np.abs(out)))
    if args.normalize and peak > 0:
        out = out / peak * 10.0 ** (-1.0 / 20.0)
    write_wav(args.out, out.T, ir_fs)
    print(f"wrote {args.out} ({out.shape[0]} ch, peak {peak:.4g})")
    return 0


def _cmd_match(args) -> int:
    sim_data, sim_fs = read_wav(args.sim)
    ref_data, ref_fs = read_wav(args.ref)
    sim = ImpulseResponse(channels=sim_data.T, sample_rate=sim_fs)
    ref = ImpulseResponse(channels=ref_data.T, sample_rate=ref_fs)
    corrected, _fir, report = match_spectrum(sim, ref)
    write_wav(args.out, corrected.channels.T, corrected.sample_rate)
    report_doc = {
        "residual_mean_db": float(report.residual_mean_db),
        "residual_max_db": float(report.residual_max_db),
        "residual_rms_db": float(report.residual_rms_db),
        "band_range_hz": [float(v) for v in report.band_range],
        "clamped": bool(report.clamped),
        "filter_taps": int(np.asarray(report.filter_taps).size),
    }
    report_path = args.report or args.out + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report_doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} and {report_path} "
          f"(mean residual {report.residual_mean_db:.3f} dB)")
    return 0


def _cmd_presets(args) -> int:
    print("scenes: " + ", ".join(preset_names()))
    print("profiles: " + ", ".join(profile_names()))
    if args.write_scenes:
        os.makedirs(args.write_scenes, exist_ok=True)
        for name in preset_names():
            path = os.path.join(args.write_scenes, f"{name}.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(serialize_scene(preset(name)))
                fh.write("\n")
            print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alodsim",
        description="Room-acoustics simulation with selectable level of detail.",
    )
    parser.add_argument("--version", action="version",
                        version=f"alodsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a scene to an IR WAV")
    sim.add_argument("--scene", help="scene JSON file")
    sim.add_argument("--preset", choices=preset_names(), help="built-in scene")
    sim.add_argument("--profile", required=True, choices=profile_names())
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--source", help="source id (default: first)")
    sim.add_argument("--duration", type=float, help="tail length override (s)")
    sim.add_argument("--output-mode", choices=("binaural", "array", "diotic", "mono"))
    sim.add_argument("--hrtf", help=f"HRTF directory (default ${HRTF_ENV_VAR})")
    sim.add_argument("--layout", help="loudspeaker layout JSON or '86-preset'")
    sim.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="compute objective metrics from an IR WAV")
    ana.add_argument("--ir", required=True)
    ana.add_argument("--metrics", required=True,
                     help="comma-separated: " + ",".join(ANALYZE_METRICS))
    ana.add_argument("--out", required=True, help="CSV path (suffixed per metric)")
    ana.set_defaults(func=_cmd_analyze)

    stim = sub.add_parser("stimulus", help="generate a test stimulus WAV")
    stim.add_argument("kind", choices=("pink-pulse", "sweep"))
    stim.add_argument("--duration", type=float, default=0.5)
    stim.add_argument("--rate", type=float, default=44100.0)
    stim.add_argument("--band-offsets",
                      help="comma-separated octave offsets in dB (pink-pulse)")
    stim.add_argument("--f1", type=float, default=100.0)
    stim.add_argument("--f2", type=float, default=22050.0)
    stim.add_argument("--out", required=True)
    stim.set_defaults(func=_cmd_stimulus)

    ren = sub.add_parser("render", help="convolve a stimulus with an IR")
    ren.add_argument("--ir", required=True)
    ren.add_argument("--stim", required=True)
    ren.add_argument("--normalize", action="store_true",
                     help="peak-normalize the result to -1 dBFS")
    ren.add_argument("--out", required=True)
    ren.set_defaults(func=_cmd_render)

    mat = sub.add_parser("match", help="match an IR's spectrum to a reference")
    mat.add_argument("--sim", required=True)
    mat.add_argument("--ref", required=True)
    mat.add_argument("--report", help="report path (default <out>.report.json)")
    mat.add_argument("--out", required=True)
    mat.set_defaults(func=_cmd_match)

    pre = sub.add_parser("presets", help="list built-in scenes and profiles")
    pre.add_argument("--write-scenes", metavar="DIR",
                     help="also write the scene presets as JSON files")
    pre.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AlodsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
