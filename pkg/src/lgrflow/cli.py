"""Command-line interface.

Every subcommand accepts ``--config FILE`` plus one flag per
:class:`~lgrflow.config.RunConfig` field; flags override the file, and a
preset is applied before both. Runs print ``key: value`` diagnostics to
stdout and write the resolved configuration to ``<output>.config``. Failures
exit non-zero with a single ``ERROR {json}`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import typing
from dataclasses import fields

import numpy as np

from . import backend as _backend
from . import io as lio
from .config import PRESETS, RunConfig, read_config, write_config
from .metrics import FINITE_TIME_KINDS, INSTANTANEOUS_KINDS
from .pipeline import compute_metrics
from .plotting import COLORMAPS, ScatterStyle, render_scatter
from .synthetic import (
    FLOWS,
    GridSpec,
    advect,
    apply_euclidean_motion,
    dense_ftle_oracle,
    make_flow,
    random_seeds,
    scaled,
)
from .tracking import filter_min_length, smooth_set, track_detections

__all__ = ["main", "build_parser"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(RunConfig)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="key = value config file")
    for f in fields(RunConfig):
        tp = typing.get_args(hints[f.name])
        tp = next((a for a in tp if a is not type(None)), hints[f.name]) if tp else hints[f.name]
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=tp, default=None,
                       help=f"(default: {f.default})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lgrflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "track": "link detections (frame,t,x,y) into trajectories",
        "smooth": "drop short tracks, then median + Gaussian smoothing",
        "gradients": "instantaneous velocity gradients, vorticity, deviation, strain rate",
        "ftle": "finite-time Lyapunov exponents from composed Jacobians",
        "lavd": "Lagrangian-averaged vorticity deviation",
        "synth": "advect random tracers through an analytic flow",
        "oracle-ftle": "dense finite-difference FTLE grid for an analytic flow",
        "transform": "apply a homography or a rigid observer motion to trajectories",
        "plot": "SVG scatter of metric samples",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text, description=text)
        _add_config_flags(sp)
        if name == "transform":
            sp.add_argument("--rotation-rate", type=float, default=0.0, help="observer spin (rad/s)")
            sp.add_argument("--rotation-offset", type=float, default=0.0, help="initial angle (rad)")
            sp.add_argument("--drift", type=str, default="0,0", help="observer drift vx,vy")
        if name == "plot":
            sp.add_argument("--metric", help="only plot samples of this metric")
            sp.add_argument("--colormap", default="viridis", choices=sorted(COLORMAPS))
            sp.add_argument("--title")
        if name == "oracle-ftle":
            sp.add_argument("--nx", type=int, default=512)
            sp.add_argument("--ny", type=int, default=256)
            sp.add_argument("--sample-at", help="trajectory file; sample the oracle at frame-start positions")
    return p


def _resolve(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = read_config(args.config)
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    return cfg.updated(**overrides)


def _need(cfg: RunConfig, *names) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join('--' + n.replace('_', '-') for n in missing)}")


def _emit(report: dict) -> None:
    for k, v in report.items():
        print(f"{k}: {v}")


def _flow_from(cfg: RunConfig):
    _need(cfg, "flow")
    params = {}
    for item in (cfg.flow_params or "").split(","):
        if item.strip():
            key, _, val = item.partition("=")
            params[key.strip()] = float(val)
    length = params.pop("length", None)
    tscale = params.pop("time", None)
    flow = make_flow(cfg.flow, **params)
    if length is not None or tscale is not None:
        flow = scaled(flow, length or 1.0, tscale or 1.0)
    return flow


def _interval(cfg: RunConfig, tset, finite: bool) -> tuple[int, int]:
    if tset.n_frames < 2:
        raise ValueError("need at least two frames")
    start = int(tset.frame_numbers[0]) if cfg.frame_start is None else cfg.frame_start
    if cfg.frame_end is not None:
        return start, cfg.frame_end
    if not finite:
        return start, start + 1
    if cfg.interval_seconds is not None:
        target = tset.time_of(start) + cfg.interval_seconds
        idx = int(np.searchsorted(tset.frame_times, target - 1e-9 * max(1.0, abs(target))))
        if idx >= tset.n_frames:
            raise ValueError(f"interval of {cfg.interval_seconds} s from frame {start} runs past the data")
        return start, int(tset.frame_numbers[idx])
    return start, int(tset.frame_numbers[-1])


def _metrics_run(cfg: RunConfig, default_kinds, finite: bool) -> dict:
    _need(cfg, "input", "output")
    tset = lio.read_trajectories(cfg.input)
    kinds = cfg.metric_list() or list(default_kinds)
    a, b = _interval(cfg, tset, finite)
    results = compute_metrics(tset, cfg.kernel(), a, b, kinds, scheme=cfg.scheme, workers=cfg.workers)
    samples = [s for k in kinds for s in results[k].samples]
    lio.write_metric_samples(samples, cfg.output)
    d = results[kinds[0]].diagnostics
    report = {"tracers": tset.n_tracks, "frames": tset.n_frames, "interval": f"{a}-{b}",
              "metrics": ",".join(kinds), "samples_written": len(samples)}
    report.update(line.split(": ", 1) for line in d.summary_lines()[2:])
    cfg.frame_start, cfg.frame_end = a, b
    return report


def _cmd_track(cfg: RunConfig, args) -> dict:
    _need(cfg, "input", "output")
    dets = lio.read_detections(cfg.input)
    tset = track_detections(dets, cfg.gating())
    if cfg.homography:
        tset = lio.apply_homography(tset, cfg.homography)
    n_raw = tset.n_tracks
    tset = filter_min_length(tset, cfg.min_length)
    lio.write_trajectories(tset, cfg.output)
    return {"detection_frames": len(dets), "detections": sum(len(d) for d in dets),
            "tracks_linked": n_raw, "tracks_kept": tset.n_tracks,
            "skipped_short_tracks": n_raw - tset.n_tracks, "samples": tset.n_samples}


def _cmd_smooth(cfg: RunConfig, args) -> dict:
    _need(cfg, "input", "output")
    tset = lio.read_trajectories(cfg.input)
    kept = filter_min_length(tset, cfg.min_length)
    out = smooth_set(kept, cfg.smoothing())
    lio.write_trajectories(out, cfg.output)
    return {"tracers": tset.n_tracks, "tracks_kept": kept.n_tracks,
            "skipped_short_tracks": tset.n_tracks - kept.n_tracks, "samples": out.n_samples}


def _cmd_gradients(cfg, args):
    return _metrics_run(cfg, INSTANTANEOUS_KINDS, finite=False)


def _cmd_ftle(cfg, args):
    if not cfg.metrics:
        cfg.metrics = "ftle"
    return _metrics_run(cfg, ["ftle"], finite=True)


def _cmd_lavd(cfg, args):
    if not cfg.metrics:
        cfg.metrics = "lavd"
    return _metrics_run(cfg, ["lavd"], finite=True)


def _cmd_synth(cfg: RunConfig, args) -> dict:
    _need(cfg, "output", "t_end")
    flow = _flow_from(cfg)
    dt = cfg.dt if cfg.dt is not None else (1.0 / cfg.fps if cfg.fps else None)
    if dt is None:
        raise ValueError("set --dt or --fps")
    cfg.dt = dt
    seeds = random_seeds(cfg.n_tracers, flow.domain, cfg.seed)
    tset = advect(flow, seeds, cfg.t0, cfg.t_end, dt, substeps=cfg.substeps)
    if cfg.homography:
        tset = lio.apply_homography(tset, cfg.homography)
    lio.write_trajectories(tset, cfg.output)
    return {"flow": flow.name, "tracers": tset.n_tracks, "frames": tset.n_frames, "samples": tset.n_samples}


def _cmd_oracle(cfg: RunConfig, args) -> dict:
    _need(cfg, "output", "t_end")
    flow = _flow_from(cfg)
    (x0, x1), (y0, y1) = flow.domain
    grid = GridSpec(x0, x1, args.nx, y0, y1, args.ny)
    field = dense_ftle_oracle(flow, grid, cfg.t0, cfg.t_end, dt=cfg.dt)
    gx, gy = grid.axes()
    with open(cfg.output, "w", encoding="utf-8") as fh:
        fh.write("x,y,ftle\n")
        for j, y in enumerate(gy):
            for i, x in enumerate(gx):
                fh.write(f"{x:.17g},{y:.17g},{field.sigma[j, i]:.17g}\n")
    report = {"flow": flow.name, "grid": f"{args.nx}x{args.ny}",
              "ftle_min": f"{field.sigma.min():.6g}", "ftle_max": f"{field.sigma.max():.6g}"}
    if args.sample_at:
        from .metrics import MetricSample
        tset = lio.read_trajectories(args.sample_at)
        f0 = int(tset.frame_numbers[0])
        view = tset.frame_view(f0)
        vals = field.sample(view.positions)
        samples = [MetricSample(int(i), tuple(map(float, p)), float(v), "ftle_oracle", (f0, f0))
                   for i, p, v in zip(view.ids, view.positions, vals)]
        lio.write_metric_samples(samples, cfg.output + ".samples.csv")
        report["samples_written"] = len(samples)
    return report


def _cmd_transform(cfg: RunConfig, args) -> dict:
    _need(cfg, "input", "output")
    tset = lio.read_trajectories(cfg.input)
    if cfg.homography:
        tset = lio.apply_homography(tset, cfg.homography)
    drift = np.array([float(v) for v in args.drift.split(",")], dtype=float).reshape(2)
    if args.rotation_rate or args.rotation_offset or np.any(drift):
        rate, off = args.rotation_rate, args.rotation_offset
        tset = apply_euclidean_motion(tset, lambda t: off + rate * t, lambda t: drift * t)
    lio.write_trajectories(tset, cfg.output)
    return {"tracers": tset.n_tracks, "samples": tset.n_samples,
            "homography": "yes" if cfg.homography else "no",
            "rotation_rate": args.rotation_rate, "drift": args.drift}


def _cmd_plot(cfg: RunConfig, args) -> dict:
    _need(cfg, "input", "output")
    samples = lio.read_metric_samples(cfg.input)
    if args.metric:
        samples = [s for s in samples if s.metric == args.metric]
    render_scatter(samples, ScatterStyle(colormap=args.colormap, title=args.title), cfg.output)
    return {"samples_plotted": len(samples)}


_COMMANDS = {
    "track": _cmd_track, "smooth": _cmd_smooth, "gradients": _cmd_gradients, "ftle": _cmd_ftle,
    "lavd": _cmd_lavd, "synth": _cmd_synth, "oracle-ftle": _cmd_oracle,
    "transform": _cmd_transform, "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t_start = time.perf_counter()
    try:
        cfg = _resolve(args)
        report = _COMMANDS[args.command](cfg, args)
        if cfg.output:
            write_config(cfg, cfg.output + ".config", header=f"lgrflow {args.command} (resolved)")
    except (ValueError, OSError) as exc:
        print("ERROR " + json.dumps({"command": args.command, "type": type(exc).__name__,
                                     "message": str(exc)}), file=sys.stderr)
        return 1
    report = {"command": args.command, **report, "backend": _backend.BACKEND,
              "elapsed_seconds": f"{time.perf_counter() - t_start:.3f}"}
    _emit(report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
