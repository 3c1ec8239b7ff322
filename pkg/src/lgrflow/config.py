"""Run configuration: one flat record, stored as ``key = value`` lines.

Blank lines and ``#`` comments are ignored; an empty value means "unset".
Every CLI run writes its fully resolved configuration next to its output.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, fields

from .errors import FormatError
from .lgr import KernelConfig
from .tracking import GatingConfig, SmoothingConfig

__all__ = ["RunConfig", "PRESETS", "read_config", "write_config", "parse_config_text"]

PRESETS: dict[str, dict] = {
    # laboratory water channel: 60 Hz video, neighbors 15, bandwidth 3 cm
    "lab": {"k": 15, "s": 0.03, "fps": 60.0},
    # pond field data: 30 Hz video, neighbors 25, bandwidth 0.6 m, 8 s windows
    "field": {"k": 25, "s": 0.6, "fps": 30.0, "interval_seconds": 8.0, "min_length": 5,
              "median_kernel": 5, "gaussian_kernel": 10},
}


@dataclass
class RunConfig:
    preset: str | None = None
    # regression kernel
    k: int = 15
    s: float = 0.03
    gamma: float = 1e-10
    scheme: str = "polar"
    # association gates (no defaults)
    max_speed: float | None = None
    max_accel: float | None = None
    max_match_radius: float | None = None
    # smoothing / filtering
    median_kernel: int = 5
    gaussian_kernel: int = 10
    gaussian_sigma: float | None = None
    min_length: int = 1
    # interval and metrics
    frame_start: int | None = None
    frame_end: int | None = None
    interval_seconds: float | None = None
    metrics: str | None = None
    # io
    input: str | None = None
    output: str | None = None
    homography: str | None = None
    # synthetic data
    flow: str | None = None
    flow_params: str | None = None
    n_tracers: int = 1000
    t0: float = 0.0
    t_end: float | None = None
    fps: float | None = None
    dt: float | None = None
    substeps: int = 1
    seed: int = 0
    # runtime
    workers: int = 1

    def kernel(self) -> KernelConfig:
        return KernelConfig(k=self.k, s=self.s, gamma=self.gamma)

    def gating(self) -> GatingConfig:
        missing = [n for n in ("max_speed", "max_accel", "max_match_radius") if getattr(self, n) is None]
        if missing:
            raise ValueError(f"tracking needs explicit gates: set {', '.join(missing)}")
        return GatingConfig(self.max_speed, self.max_accel, self.max_match_radius)

    def smoothing(self) -> SmoothingConfig:
        return SmoothingConfig(self.median_kernel, self.gaussian_kernel, self.gaussian_sigma)

    def metric_list(self) -> list[str]:
        return [m.strip() for m in (self.metrics or "").split(",") if m.strip()]

    def updated(self, **changes) -> "RunConfig":
        """Copy with ``changes`` applied; a ``preset`` change applies its values first."""
        preset = changes.get("preset", None)
        base = self
        if preset:
            if preset not in PRESETS:
                raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            base = dataclasses.replace(base, preset=preset, **PRESETS[preset])
        rest = {k: v for k, v in changes.items() if k != "preset" and v is not None}
        return dataclasses.replace(base, **rest)


def _base_type(tp):
    args = typing.get_args(tp)
    if isinstance(tp, types.UnionType) or typing.get_origin(tp) is typing.Union:
        return next(a for a in args if a is not type(None))
    return tp


def _convert(name: str, text: str, line: int | None = None):
    field = {f.name: f for f in fields(RunConfig)}.get(name)
    if field is None:
        raise FormatError(f"unknown config key {name!r}", line=line)
    if text == "":
        if field.default is None:
            return None
        raise FormatError(f"config key {name!r} needs a value", line=line)
    tp = _base_type(typing.get_type_hints(RunConfig)[name])
    try:
        return tp(text)
    except ValueError:
        raise FormatError(f"config key {name!r}: cannot parse {text!r} as {tp.__name__}", line=line) from None


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {raw!r}", line=n)
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = _convert(key, value, line=n)
    return out


def read_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    return RunConfig().updated(**values)


def write_config(cfg: RunConfig, path, header: str | None = None) -> None:
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'' if v is None else (format(v, '.17g') if isinstance(v, float) else v)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
