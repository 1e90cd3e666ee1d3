"""Command-line entry point: estimate, sweep, detect, bench, verify-clt.

Every run is driven by one root seed, writes its outputs under --out-dir, and
drops a manifest.json recording the command, configuration, seed, and output
paths, so reruns with the same manifest inputs reproduce identical files.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, matio, rmt, validate
from .detector import DetectorConfig, detect
from .rcml import rcml_estimate
from .scenario import (
    PRESETS,
    ScenarioConfig,
    Scatterer,
    ScattererClutter,
    SnapshotSampler,
    SteeringSpec,
    ToeplitzClutter,
    amplitude_for_snr,
    inject_target,
    preset,
    synthesize_clutter_covariance,
)
from .shrinkage import SpikedModel, shrink_spectrum


class ConfigError(Exception):
    """Bad flags, missing files, or malformed scenario JSON."""


def _clutter_from_json(spec: dict, p: int, sigma2: float):
    kind = spec.get("kind")
    if kind == "spiked":
        return SpikedModel(p=p, sigma2=sigma2, spikes=np.asarray(spec["spikes"], dtype=float))
    if kind == "scatterers":
        return ScattererClutter(
            tuple(
                Scatterer(amplitude=s["amplitude"], theta=s["theta"], doppler=s["doppler"])
                for s in spec["scatterers"]
            )
        )
    if kind == "toeplitz":
        taps = np.asarray([complex(re, im) for re, im in spec["taps"]])
        return ToeplitzClutter(taps=taps, pulse_len=int(spec["pulse_len"]))
    if kind in (None, "none"):
        return None
    raise ConfigError(f"unknown clutter kind: {kind!r}")


def _scenario_from_args(args) -> ScenarioConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        try:
            n_val = int(args.n) if getattr(args, "n", None) else int(raw["n"])
            cfg = ScenarioConfig(
                N=int(raw["N"]),
                K=int(raw["K"]),
                n=n_val,
                sigma2=float(raw["sigma2"]),
                clutter=_clutter_from_json(
                    raw.get("clutter", {}), int(raw["N"]) * int(raw["K"]), float(raw["sigma2"])
                ),
                q=int(raw.get("q", 1)),
                seed=int(raw.get("seed", 0)),
                name=raw.get("name", path.stem),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc
        return cfg
    name = getattr(args, "scenario", None) or "challenge-synthetic"
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario preset: {name!r}")
    return preset(name, n=getattr(args, "n", None))


def _target_from_args(args, scn: ScenarioConfig) -> SteeringSpec:
    return SteeringSpec(
        theta=np.deg2rad(args.angle_deg),
        doppler=args.doppler,
        N=scn.N,
        K=scn.K,
    )


def _write_manifest(out_dir: Path, args, outputs: list[Path]) -> Path:
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config_path": getattr(args, "config", None),
        "scenario": getattr(args, "scenario", None),
        "seed": getattr(args, "seed", None),
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _validate_outputs(paths: list[Path]) -> None:
    """Re-open every declared output and check it against its schema."""
    for path in paths:
        if not path.exists():
            raise RuntimeError(f"declared output missing: {path}")
        if path.suffix == ".json":
            json.loads(path.read_text())
        elif path.suffix == ".csv":
            text = path.read_text()
            if not text.strip():
                raise RuntimeError(f"empty CSV output: {path}")
        elif path.suffix == ".bin":
            base = path.with_suffix("")
            matio.load_matrix(base)


def _cmd_estimate(args) -> int:
    scn = _scenario_from_args(args)
    seed = scn.seed if args.seed is None else args.seed
    truth = synthesize_clutter_covariance(scn)
    cube = SnapshotSampler(truth).draw(scn.n, seed)
    if scn.n < scn.p:
        raise ValueError("insufficient samples")
    ratio = rmt.AspectRatio(scn.p, scn.n)
    decomp = rmt.eigh(rmt.sample_covariance(cube.snapshots).matrix)
    shrunk = shrink_spectrum(decomp, ratio)
    if args.estimator == "shrinkage":
        est = shrunk
    else:
        rank = shrunk.spike_count if args.rank is None else args.rank
        est = rcml_estimate(decomp, shrunk.noise, rank, ratio=ratio)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = matio.save_estimate(out_dir / f"estimate-{args.estimator}", est)
    outputs.append(_write_manifest(out_dir, args, outputs))
    _validate_outputs(outputs)
    print(json.dumps(est.summary()))
    return 0


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x)
    except ValueError as exc:
        raise ConfigError(f"bad float list: {text!r}") from exc


def _cmd_sweep(args) -> int:
    scn = _scenario_from_args(args)
    seed = scn.seed if args.seed is None else args.seed
    plan = validate.TrialPlan(
        scenario=scn,
        trials=args.trials,
        seed=seed,
        target=_target_from_args(args, scn),
    )
    values = None
    if args.axis == "doppler" and args.doppler_grid:
        values = np.linspace(-0.5, 0.5, args.doppler_grid)
    elif args.axis == "angle" and args.angle_grid:
        values = np.linspace(-np.pi / 3, np.pi / 3, args.angle_grid)
    elif args.axis == "snr":
        values = np.arange(args.snr_lo, args.snr_hi + 1e-9, args.snr_step)
    csv_text = validate.sweep(
        plan, args.axis, values=values, pfa_list=_parse_float_list(args.pfa), rank=args.rank
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"sweep-{args.axis}.csv"
    csv_path.write_text(csv_text)
    outputs = [csv_path, _write_manifest(out_dir, args, [csv_path])]
    _validate_outputs(outputs)
    print(csv_path)
    return 0


def _cmd_detect(args) -> int:
    scn = _scenario_from_args(args)
    seed = scn.seed if args.seed is None else args.seed
    target = _target_from_args(args, scn)
    truth = synthesize_clutter_covariance(scn)
    cube = SnapshotSampler(truth).draw(scn.n + 1, seed)
    amp = amplitude_for_snr(args.snr_db, scn.sigma2, scn.N, scn.K)
    cube = inject_target(cube, target, amp)
    if args.rank == 0 and scn.clutter is not None:
        print(
            "warning: rank 0 disables the clutter projection on a clutter-bearing scene",
            file=sys.stderr,
        )
    report = detect(cube, target, DetectorConfig(rank=args.rank, p_fa=args.pfa))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "detection.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    outputs = [report_path, _write_manifest(out_dir, args, [report_path])]
    _validate_outputs(outputs)
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_bench(args) -> int:
    p_list = [int(x) for x in args.p_list.split(",") if x]
    csv_text = validate.bench_scaling(p_list, args.reps, seed=args.seed or 0)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "bench.csv"
    csv_path.write_text(csv_text)
    outputs = [csv_path, _write_manifest(out_dir, args, [csv_path])]
    _validate_outputs(outputs)
    print(csv_text, end="")
    return 0


def _cmd_verify_clt(args) -> int:
    spikes = np.asarray(sorted(_parse_float_list(args.spikes), reverse=True))
    model = SpikedModel(p=args.p, sigma2=args.sigma2, spikes=spikes * args.sigma2)
    results = validate.verify_clt(
        model, args.gamma, args.p, args.trials, args.seed or 0, ensemble=args.ensemble
    )
    payload = [
        {
            "spike": r.ell,
            "limit_value": r.limit_value,
            "mean_estimate": r.mean_estimate,
            "ks_statistic": r.ks.statistic,
            "p_value": r.ks.p_value,
            "trials": r.ks.n1,
        }
        for r in results
    ]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "clt-verification.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    outputs = [path, _write_manifest(out_dir, args, [path])]
    _validate_outputs(outputs)
    print(json.dumps(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cluttercov",
        description="Spiked clutter-plus-noise covariance estimation and detection toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, scenario=True):
        sp.add_argument("--seed", type=int, default=None, help="root seed (default: scenario seed)")
        sp.add_argument("--out-dir", default="cluttercov-out", help="output directory")
        if scenario:
            sp.add_argument("--scenario", default=None, help="preset scene name")
            sp.add_argument("--config", default=None, help="scenario JSON path")
            sp.add_argument("--n", type=int, default=None, help="training snapshot count")

    sp = sub.add_parser("estimate", help="estimate a covariance from a synthetic scene")
    add_common(sp)
    sp.add_argument("--estimator", choices=["shrinkage", "rcml"], default="shrinkage")
    sp.add_argument("--rank", type=int, default=None, help="clutter rank for the rcml estimator")
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("sweep", help="Monte Carlo sweep along one axis")
    add_common(sp)
    sp.add_argument("--axis", choices=["n", "doppler", "angle", "snr"], required=True)
    sp.add_argument("--trials", type=int, default=validate.DEFAULT_TRIALS)
    sp.add_argument("--doppler-grid", type=int, default=None, help="rows for a Doppler sweep")
    sp.add_argument("--angle-grid", type=int, default=None, help="rows for an angle sweep")
    sp.add_argument("--pfa", default="1e-2", help="comma-separated false-alarm rates (snr axis)")
    sp.add_argument("--snr-lo", type=float, default=-10.0)
    sp.add_argument("--snr-hi", type=float, default=30.0)
    sp.add_argument("--snr-step", type=float, default=4.0)
    sp.add_argument("--rank", type=int, default=None, help="projection rank (snr axis)")
    sp.add_argument("--doppler", type=float, default=0.2, help="target Doppler")
    sp.add_argument("--angle-deg", type=float, default=30.0, help="target angle, degrees")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("detect", help="single detection run on a synthetic scene")
    add_common(sp)
    sp.add_argument("--pfa", type=float, default=1e-3)
    sp.add_argument("--snr-db", type=float, default=30.0)
    sp.add_argument("--rank", type=int, default=None, help="projection rank (default: estimated)")
    sp.add_argument("--doppler", type=float, default=0.2, help="target Doppler")
    sp.add_argument("--angle-deg", type=float, default=30.0, help="target angle, degrees")
    sp.set_defaults(func=_cmd_detect)

    sp = sub.add_parser("bench", help="scaling benchmark of the estimation steps")
    add_common(sp, scenario=False)
    sp.add_argument("--p-list", default="256,512,1024")
    sp.add_argument("--reps", type=int, default=3)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("verify-clt", help="distributional check of the shrunk eigenvalues")
    add_common(sp, scenario=False)
    sp.add_argument("--spikes", default="5,3,2.5", help="whitened spike values")
    sp.add_argument("--gamma", type=float, default=0.2)
    sp.add_argument("--p", type=int, default=400)
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--trials", type=int, default=validate.DEFAULT_TRIALS)
    sp.add_argument("--ensemble", choices=["real", "complex"], default="complex")
    sp.set_defaults(func=_cmd_verify_clt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags, which matches the config error code
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError, KeyError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
