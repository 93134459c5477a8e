"""Command-line entry point: ``nsipd {simulate,sense,process,sweep,metrics}``.

Each subcommand writes its outputs plus a JSON sidecar recording the inputs
that produced them.  Outputs depend only on the config and input files, so
repeated runs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import ConfigError, load_config, load_metric_regions
from .pd_pipeline import dc_sweep, run_pipeline
from .rf_sim import simulate_dataset, simulate_sensitivity_measurement


def _sidecar(path, payload: dict) -> None:
    Path(str(path) + ".json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (np.ndarray, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def cmd_simulate(args) -> None:
    cfg = load_config(args.config)
    scene = cfg.build_scene()
    dataset = simulate_dataset(scene, cfg.geometry, cfg.angles, cfg.pulse, cfg.n_frames, cfg.frame_rate,
                               cfg.n_samples, dtype=np.float32)
    fileio.write_rf(args.out, dataset)
    _sidecar(args.out, {"command": "simulate", "config": cfg.source})


def cmd_sense(args) -> None:
    cfg = load_config(args.config)
    profile = simulate_sensitivity_measurement(cfg.geometry, cfg.element_gains(), cfg.reflector_constant)
    fileio.write_sensitivity(args.out, profile)
    _sidecar(args.out, {"command": "sense", "config": cfg.source})


def _rows_for(results) -> list:
    rows = []
    for variant, (image, report) in results.items():
        p = image.provenance
        rows.append({"variant": variant, "esc": p["esc"], "dc_offset": p["dc_offset"],
                     "fwhm": report.fwhm, "snr_db": report.snr_db, "cnr_db": report.cnr_db})
    return rows


def cmd_process(args) -> None:
    cfg = load_config(args.config)
    dataset = fileio.read_rf(args.rf)
    sensitivity = fileio.read_sensitivity(args.sens) if args.sens else None
    pcfg = cfg.pipeline_config(dataset.n_frames, args.rf, args.sens)
    if pcfg.esc and sensitivity is None:
        raise ValueError("pipeline.esc is on but no --sens file was given")
    results = run_pipeline(pcfg, dataset, sensitivity)
    outdir = fileio.ensure_dir(args.outdir)
    for variant, (image, _) in results.items():
        fileio.export_image(image, outdir / f"{variant}.pgm", cfg.dynamic_range_db)
    fileio.write_metrics_csv(outdir / "metrics.csv", _rows_for(results))


def _dc_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid DC list {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("DC offsets must be positive numbers")
    return values


def cmd_sweep(args) -> None:
    cfg = load_config(args.config)
    dataset = fileio.read_rf(args.rf)
    sensitivity = fileio.read_sensitivity(args.sens) if args.sens else None
    pcfg = cfg.pipeline_config(dataset.n_frames, args.rf, args.sens)
    esc_settings = (True, False) if sensitivity is not None else (False,)
    rows = dc_sweep(pcfg, args.dc, dataset, sensitivity, esc_settings)
    outdir = fileio.ensure_dir(args.outdir)
    path = outdir / "sweep.csv"
    fileio.write_metrics_csv(path, [
        {"variant": "nsi", "esc": r.esc, "dc_offset": r.dc_offset, "fwhm": r.fwhm,
         "snr_db": r.snr_db, "cnr_db": r.cnr_db} for r in rows])
    _sidecar(path, {"command": "sweep", "config": pcfg.to_dict(), "dc_values": args.dc,
                    "esc_settings": list(esc_settings)})


def cmd_metrics(args) -> None:
    image = fileio.load_image(args.image)
    spec = load_metric_regions(args.regions)
    report = spec.evaluate(image)
    p = image.provenance
    text = fileio.metrics_csv_text([{
        "variant": p.get("variant", ""), "esc": p.get("esc", False), "dc_offset": p.get("dc_offset"),
        "fwhm": report.fwhm, "snr_db": report.snr_db, "cnr_db": report.cnr_db}])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsipd", description="NSI power Doppler simulation and processing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an RF dataset from a scene config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sense", help="simulate the element sensitivity measurement")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("process", help="form DAS and NSI power Doppler images")
    p.add_argument("--config", required=True)
    p.add_argument("--rf", required=True)
    p.add_argument("--sens")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("sweep", help="NSI metrics over a list of DC offsets")
    p.add_argument("--config", required=True)
    p.add_argument("--rf", required=True)
    p.add_argument("--sens")
    p.add_argument("--dc", required=True, type=_dc_list, help="comma-separated DC offsets")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="recompute metrics on a stored image")
    p.add_argument("--image", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ConfigError, fileio.FormatError, ValueError, OSError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"nsipd {args.command}: error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
