"""Command-line front end: parse a scenario config, run it, write
time-series CSVs, per-figure data files, a metrics summary, and a run
manifest."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import SimulationDiverged, SystemParams
from .metrics import SegmentMetrics, reduction_percent, segment_report
from .scenario import (
    DC_MODELS,
    PHASES,
    NswSchedule,
    PhaseTrace,
    ScenarioConfig,
    SimTrace,
    config_from_dict,
    config_to_dict,
    fast_config,
    paper_config,
    run_scenario,
)
from .modulation import ALGORITHMS

__version__ = "0.1.0"

_SETTLE = {"paper": 0.02, "fast": 0.01}


class ConfigError(ValueError):
    """Invalid or malformed scenario configuration."""


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_schedule(key: str, raw: str) -> NswSchedule:
    segments = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ConfigError(
                f"{key}: segment {chunk!r} must be start:end:n_sw_max"
            )
        segments.append(
            (_parse_float(key, parts[0]), _parse_float(key, parts[1]),
             _parse_int(key, parts[2]))
        )
    if not segments:
        raise ConfigError(f"{key}: no segments given")
    return NswSchedule(segments=tuple(segments))


_PARAM_KEYS = {
    "params.n": ("n", _parse_int),
    "params.v_dc": ("v_dc", _parse_float),
    "params.c_sm": ("c_sm", _parse_float),
    "params.l_arm": ("l_arm", _parse_float),
    "params.r_grid": ("r_grid", _parse_float),
    "params.l_grid": ("l_grid", _parse_float),
    "params.t_s": ("t_s", _parse_float),
    "params.f_grid": ("f_grid", _parse_float),
    "params.w_track": ("w_track", _parse_float),
    "params.w_circ": ("w_circ", _parse_float),
}

_SCENARIO_KEYS = {
    "scenario.duration": ("duration", _parse_float),
    "scenario.warmup": ("warmup", _parse_float),
    "scenario.p_ref": ("p_ref", _parse_float),
    "scenario.v_s_peak": ("v_s_peak", _parse_float),
    "scenario.algorithm": ("algorithm", str),
    "scenario.dc_model": ("dc_model", str),
    "line.length_km": ("line_length_km", _parse_float),
    "line.c_per_km": ("line_c_per_km", _parse_float),
    "line.l_per_km": ("line_l_per_km", _parse_float),
}


def _fit_schedule(schedule: NswSchedule, duration: float) -> NswSchedule:
    """Clip a default schedule to a shorter run, or stretch its last
    segment over a longer one.  Only applied to schedules the user did
    not write out explicitly."""
    segments = []
    for start, end, n_max in schedule.segments:
        if start >= duration:
            break
        segments.append((start, min(end, duration), n_max))
    if not segments:
        start0, _, n0 = schedule.segments[0]
        segments.append((start0, duration, n0))
    last = segments[-1]
    if last[1] < duration:
        segments[-1] = (last[0], duration, last[2])
    return NswSchedule(segments=tuple(segments))


def parse_config(path: str | Path, profile: str = "paper") -> ScenarioConfig:
    """Read a flat key-value config file into a validated ScenarioConfig.

    Unset keys fall back to the chosen profile's defaults (the ``paper``
    profile is the full case-study setup).  Lines are ``key = value``,
    ``#`` starts a comment; the schedule is written as comma-separated
    ``start:end:n_sw_max`` triples.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()

    base = paper_config() if profile == "paper" else fast_config()
    params_kw: dict[str, Any] = {}
    scenario_kw: dict[str, Any] = {}
    schedule = None
    for key, value in raw.items():
        if key in _PARAM_KEYS:
            field_name, conv = _PARAM_KEYS[key]
            params_kw[field_name] = conv(key, value) if conv is not str else value
        elif key in _SCENARIO_KEYS:
            field_name, conv = _SCENARIO_KEYS[key]
            scenario_kw[field_name] = conv(key, value) if conv is not str else value
        elif key == "schedule.segments":
            schedule = _parse_schedule(key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    try:
        params = SystemParams(**{**config_to_dict(base)["params"], **params_kw})
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None

    duration = scenario_kw.get("duration", base.duration)
    if schedule is None:
        schedule = _fit_schedule(base.nsw_schedule, duration)
    try:
        return ScenarioConfig(
            params=params,
            duration=duration,
            warmup=scenario_kw.get("warmup", base.warmup),
            p_ref=scenario_kw.get("p_ref", base.p_ref),
            v_s_peak=scenario_kw.get("v_s_peak", base.v_s_peak),
            algorithm=scenario_kw.get("algorithm", base.algorithm),
            nsw_schedule=schedule,
            dc_model=scenario_kw.get("dc_model", base.dc_model),
            line_length_km=scenario_kw.get("line_length_km", base.line_length_km),
            line_c_per_km=scenario_kw.get("line_c_per_km", base.line_c_per_km),
            line_l_per_km=scenario_kw.get("line_l_per_km", base.line_l_per_km),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_phase_csv(path: Path, trace: SimTrace, phase: str) -> int:
    """One row per step: t, phase, i_ref, i, i_z, v_s, nsw_max, then the
    2n capacitor voltages and 2n statuses.  Returns the row count."""
    tr = trace.phase(phase)
    n2 = tr.v_c.shape[1]
    header = (
        ["t", "phase", "i_ref", "i", "i_z", "v_s", "nsw_max"]
        + [f"vC_{k + 1}" for k in range(n2)]
        + [f"u_{k + 1}" for k in range(n2)]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(trace.steps):
            row = [
                _fmt(trace.t[k]),
                phase,
                _fmt(tr.i_ref[k]),
                _fmt(tr.i_ac[k]),
                _fmt(tr.i_circ[k]),
                _fmt(tr.v_grid[k]),
                str(int(trace.n_sw_max[k])),
            ]
            row += [_fmt(v) for v in tr.v_c[k]]
            row += [str(int(u)) for u in tr.u[k]]
            writer.writerow(row)
    return trace.steps


def load_run(out_dir: str | Path) -> SimTrace:
    """Rebuild a SimTrace from an output directory's manifest and CSVs.

    Timestamps are regenerated on the exact step grid (the serialized
    column is display precision); statuses and per-step switch counts
    round-trip exactly.  A pi-line run's varying bus voltage is not part
    of the CSV schema and comes back as the nominal value.
    """
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "run_manifest.json").read_text())
    config = config_from_dict(manifest["config"])
    steps = config.steps
    n2 = 2 * config.params.n

    t = np.arange(1, steps + 1, dtype=float) * config.params.t_s
    nsw = np.zeros(steps, dtype=np.int16)
    phases = {}
    for ph in PHASES:
        rows = list(csv.reader((out_dir / f"phase_{ph}.csv").open()))
        body = rows[1:]
        if len(body) != steps:
            raise ConfigError(
                f"phase_{ph}.csv has {len(body)} rows, config expects {steps}"
            )
        i_ref = np.array([float(r[2]) for r in body])
        i_ac = np.array([float(r[3]) for r in body])
        i_circ = np.array([float(r[4]) for r in body])
        v_grid = np.array([float(r[5]) for r in body])
        nsw = np.array([int(r[6]) for r in body], dtype=np.int16)
        v_c = np.array([[float(x) for x in r[7 : 7 + n2]] for r in body])
        u = np.array([[int(x) for x in r[7 + n2 :]] for r in body], dtype=np.int8)
        prev = np.vstack([np.zeros((1, n2), dtype=np.int8), u[:-1]])
        flips = (u != prev).astype(np.int16)
        n = config.params.n
        phases[ph] = PhaseTrace(
            i_ac=i_ac,
            i_ref=i_ref,
            i_circ=i_circ,
            v_grid=v_grid,
            v_c=v_c,
            u=u,
            switches_upper=flips[:, :n].sum(axis=1).astype(np.int16),
            switches_lower=flips[:, n:].sum(axis=1).astype(np.int16),
        )
    return SimTrace(
        config=config,
        t=t,
        n_sw_max=nsw,
        v_dc=np.full(steps, config.params.v_dc),
        phases=phases,
    )


def _write_fig_files(out_dir: Path, trace: SimTrace, report: list[SegmentMetrics]) -> dict[str, int]:
    files: dict[str, int] = {}
    reductions = reduction_percent(report)
    n2 = 2 * trace.config.params.n

    path = out_dir / "fig4_switching_frequency.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["segment", "t_start", "t_end", "nsw_max", "f_s_mean_hz", "reduction_pct"]
            + [f"f_s_sm_{k + 1}_hz" for k in range(n2)]
        )
        for seg, red in zip(report, reductions):
            w.writerow(
                [seg.index, _fmt(seg.t_start), _fmt(seg.t_end), seg.n_sw_max,
                 _fmt(seg.f_s_mean("a")), _fmt(red)]
                + [_fmt(v) for v in seg.f_s_per_sm[0]]
            )
    files[path.name] = len(report)

    tr = trace.phase("a")
    path = out_dir / "fig5_capacitor_voltages.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"vC_{k + 1}" for k in range(n2)])
        for k in range(trace.steps):
            w.writerow([_fmt(trace.t[k])] + [_fmt(v) for v in tr.v_c[k]])
    files[path.name] = trace.steps

    path = out_dir / "fig6_ac_tracking.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i_ref", "i"])
        for k in range(trace.steps):
            w.writerow([_fmt(trace.t[k]), _fmt(tr.i_ref[k]), _fmt(tr.i_ac[k])])
    files[path.name] = trace.steps

    path = out_dir / "fig7_circulating_current.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i_z"])
        for k in range(trace.steps):
            w.writerow([_fmt(trace.t[k]), _fmt(tr.i_circ[k])])
    files[path.name] = trace.steps
    return files


def format_summary(report: list[SegmentMetrics]) -> str:
    """Human-readable per-segment table (phase A values)."""
    reductions = reduction_percent(report)
    lines = [
        f"{'seg':>3} {'span [s]':>16} {'nsw':>4} {'f_s mean [Hz]':>14} "
        f"{'reduction %':>12} {'ripple %':>9} {'i_z dev %':>10} {'rmse %':>7}"
    ]
    for seg, red in zip(report, reductions):
        lines.append(
            f"{seg.index:>3} {seg.t_start:>7.3f}-{seg.t_end:<8.3f} {seg.n_sw_max:>4} "
            f"{seg.f_s_mean('a'):>14.1f} {red:>12.1f} {seg.ripple_mean('a'):>9.2f} "
            f"{seg.izm_ratio('a'):>10.1f} {seg.tracking('a'):>7.2f}"
        )
    return "\n".join(lines)


def run_command(args: argparse.Namespace) -> int:
    try:
        config = build_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    try:
        trace = run_scenario(config)
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = segment_report(trace, settle=_SETTLE[args.profile])

    files: dict[str, int] = {}
    for ph in PHASES:
        files[f"phase_{ph}.csv"] = write_phase_csv(out_dir / f"phase_{ph}.csv", trace, ph)
    files.update(_write_fig_files(out_dir, trace, report))

    summary = format_summary(report)
    (out_dir / "summary.txt").write_text(summary + "\n")
    files["summary.txt"] = len(report)

    manifest = {
        "package_version": __version__,
        "started_utc": started,
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "profile": args.profile,
        "settle": _SETTLE[args.profile],
        "config": config_to_dict(config),
        "files": {name: {"rows": rows} for name, rows in files.items()},
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    print(summary)
    print(f"\noutputs written to {out_dir}")
    return 0


def build_config(args: argparse.Namespace) -> ScenarioConfig:
    """Profile defaults, overridden by the config file, then by flags."""
    if args.config:
        config = parse_config(args.config, profile=args.profile)
    else:
        config = paper_config() if args.profile == "paper" else fast_config()

    overrides: dict[str, Any] = {}
    if args.algorithm:
        overrides["algorithm"] = args.algorithm
    if args.dc_model:
        overrides["dc_model"] = args.dc_model
    if args.duration is not None:
        overrides["duration"] = args.duration
        overrides["nsw_schedule"] = _fit_schedule(config.nsw_schedule, args.duration)
        overrides["warmup"] = min(config.warmup, args.duration)
    if not overrides:
        return config
    from dataclasses import replace

    try:
        return replace(config, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmcsim",
        description="Fixed-step MMC-HVDC simulator with sorted modulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario and write outputs")
    run_p.add_argument("--config", default=None, help="scenario config file")
    run_p.add_argument("--algorithm", choices=ALGORITHMS, default=None)
    run_p.add_argument("--out-dir", default="mmcsim-out")
    run_p.add_argument("--duration", type=float, default=None, help="override run length [s]")
    run_p.add_argument("--profile", choices=("paper", "fast"), default="paper")
    run_p.add_argument("--dc-model", choices=DC_MODELS, default=None)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_command(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
