"""Plain-text configuration: INI-style key=value sections -> SimConfig.

Bundled scenario files resolve by bare name ("translate" ->
handproj/configs/translate.cfg); anything containing a path separator or
ending in .cfg is read from disk. Overrides are "section.key=value" strings
applied on top of the file before validation, and every diagnostic names the
offending section.key.
"""

from __future__ import annotations

import configparser
import os
from importlib import resources

import numpy as np

from .filters import KALMAN_MEASUREMENT_NOISE, KALMAN_PROCESS_NOISE, FilterStrategy
from .hand import MotionScript, SensorModels
from .simulate import ConfigError, SimConfig

BUNDLED = ("translate", "rotate", "articulate", "combined")

_SCHEMA = {
    "scene": {"width", "height", "focal_scale", "screen_bias_px", "texture", "atlas", "mesh_vertices"},
    "scenario": {"kind", "amplitude", "frequency", "seed", "csv"},
    "sensors": {
        "lmc_rate_hz", "lmc_latency_s", "lmc_bias_mm", "lmc_jitter_std_mm",
        "camera_interval_s", "camera_latency_s", "detector_latency_s", "detector_jitter_std_px",
    },
    "projector": {"rate_hz", "latency_s"},
    "filter": {"variant", "kalman_process_noise", "kalman_measurement_noise"},
    "deform": {"enabled", "spacing_px", "alpha", "variant"},
    "pbr": {"enabled"},
    "run": {"duration_s", "seed", "parallel"},
}


def resolve_config_path(name_or_path: str) -> str:
    if os.sep in name_or_path or name_or_path.endswith(".cfg") or os.path.exists(name_or_path):
        if not os.path.exists(name_or_path):
            raise ConfigError(f"config file not found: {name_or_path}")
        return name_or_path
    if name_or_path in BUNDLED:
        return str(resources.files("handproj").joinpath(f"configs/{name_or_path}.cfg"))
    raise ConfigError(
        f"unknown config {name_or_path!r}; bundled names are {', '.join(BUNDLED)}"
    )


def _get(parser, section, key, conv, default, problems):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (ValueError, TypeError):
        problems.append(f"{section}.{key}: cannot parse {raw!r}")
        return default


def _to_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _to_vec(n):
    def conv(raw: str):
        parts = [float(x) for x in raw.replace(" ", "").split(",")]
        if len(parts) != n:
            raise ValueError(raw)
        return np.array(parts)
    return conv


def load_config(name_or_path: str, overrides: list[str] | None = None) -> SimConfig:
    """Parse a config file (or bundled name) plus overrides into a SimConfig."""
    path = resolve_config_path(name_or_path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for spec in overrides or []:
        if "=" not in spec or "." not in spec.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {spec!r}")
        key, value = spec.split("=", 1)
        section, option = key.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), option.strip(), value.strip())

    problems: list[str] = []
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")

    duration = _get(parser, "run", "duration_s", float, 3.0, problems)
    try:
        scenario = MotionScript(
            kind=_get(parser, "scenario", "kind", str, "translate", problems),
            amplitude=_get(parser, "scenario", "amplitude", float, 60.0, problems),
            frequency=_get(parser, "scenario", "frequency", float, 0.5, problems),
            duration=max(duration, 1e-9),
            seed=_get(parser, "scenario", "seed", int, 0, problems),
        )
    except ValueError as exc:
        problems.append(f"scenario: {exc}")
        scenario = MotionScript("translate", 60.0, 0.5, 3.0)

    try:
        sensors = SensorModels(
            lmc_rate_hz=_get(parser, "sensors", "lmc_rate_hz", float, 100.0, problems),
            lmc_latency_s=_get(parser, "sensors", "lmc_latency_s", float, 0.010, problems),
            lmc_bias_mm=_get(parser, "sensors", "lmc_bias_mm", _to_vec(3), np.zeros(3), problems),
            lmc_jitter_std_mm=_get(parser, "sensors", "lmc_jitter_std_mm", float, 0.0, problems),
            camera_interval_s=_get(parser, "sensors", "camera_interval_s", float, 0.00185, problems),
            camera_latency_s=_get(parser, "sensors", "camera_latency_s", float, 0.0, problems),
            detector_latency_s=_get(parser, "sensors", "detector_latency_s", float, 0.016, problems),
            detector_jitter_std_px=_get(parser, "sensors", "detector_jitter_std_px", float, 0.0, problems),
        )
    except ValueError as exc:
        problems.append(f"sensors: {exc}")
        sensors = SensorModels()

    try:
        strategy = FilterStrategy(
            variant=_get(parser, "filter", "variant", str, "propagation", problems),
            kalman_process_noise=_get(
                parser, "filter", "kalman_process_noise", float, KALMAN_PROCESS_NOISE, problems
            ),
            kalman_measurement_noise=_get(
                parser, "filter", "kalman_measurement_noise", float, KALMAN_MEASUREMENT_NOISE, problems
            ),
        )
    except ValueError as exc:
        problems.append(f"filter.variant: {exc}")
        strategy = FilterStrategy()

    config = SimConfig(
        width=_get(parser, "scene", "width", int, 256, problems),
        height=_get(parser, "scene", "height", int, 192, problems),
        focal_scale=_get(parser, "scene", "focal_scale", float, 0.9, problems),
        screen_bias_px=tuple(_get(parser, "scene", "screen_bias_px", _to_vec(2), np.zeros(2), problems)),
        texture=_get(parser, "scene", "texture", str, "bands", problems),
        atlas=_get(parser, "scene", "atlas", int, 0, problems),
        mesh_vertices=_get(parser, "scene", "mesh_vertices", int, 2045, problems),
        projector_rate_hz=_get(parser, "projector", "rate_hz", float, 360.0, problems),
        projector_latency_s=_get(parser, "projector", "latency_s", float, 0.003, problems),
        sensors=sensors,
        filter=strategy,
        mls_enabled=_get(parser, "deform", "enabled", _to_bool, True, problems),
        mls_spacing_px=_get(parser, "deform", "spacing_px", float, 16.0, problems),
        mls_alpha=_get(parser, "deform", "alpha", float, 1.0, problems),
        mls_variant=_get(parser, "deform", "variant", str, "affine", problems),
        pbr_enabled=_get(parser, "pbr", "enabled", _to_bool, True, problems),
        scenario=scenario,
        scenario_csv=_get(parser, "scenario", "csv", str, None, problems),
        seed=_get(parser, "run", "seed", int, 1, problems),
        duration_s=duration,
        parallel=_get(parser, "run", "parallel", _to_bool, True, problems),
    )
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))
    config.validate()
    return config


def dump_config(config: SimConfig) -> str:
    """Round-trippable key=value snapshot of a resolved config."""
    s = config.sensors
    f = config.filter
    bias = ",".join("%.17g" % x for x in np.asarray(s.lmc_bias_mm).ravel()[:3])
    sb = ",".join("%.17g" % x for x in config.screen_bias_px)
    lines = [
        "[scene]",
        f"width = {config.width}",
        f"height = {config.height}",
        f"focal_scale = {config.focal_scale!r}",
        f"screen_bias_px = {sb}",
        f"texture = {config.texture}",
        f"atlas = {config.atlas}",
        f"mesh_vertices = {config.mesh_vertices}",
        "",
        "[scenario]",
        f"kind = {config.scenario.kind}",
        f"amplitude = {config.scenario.amplitude!r}",
        f"frequency = {config.scenario.frequency!r}",
        f"seed = {config.scenario.seed}",
    ]
    if config.scenario_csv:
        lines.append(f"csv = {config.scenario_csv}")
    lines += [
        "",
        "[sensors]",
        f"lmc_rate_hz = {s.lmc_rate_hz!r}",
        f"lmc_latency_s = {s.lmc_latency_s!r}",
        f"lmc_bias_mm = {bias}",
        f"lmc_jitter_std_mm = {s.lmc_jitter_std_mm!r}",
        f"camera_interval_s = {s.camera_interval_s!r}",
        f"camera_latency_s = {s.camera_latency_s!r}",
        f"detector_latency_s = {s.detector_latency_s!r}",
        f"detector_jitter_std_px = {s.detector_jitter_std_px!r}",
        "",
        "[projector]",
        f"rate_hz = {config.projector_rate_hz!r}",
        f"latency_s = {config.projector_latency_s!r}",
        "",
        "[filter]",
        f"variant = {f.variant}",
        f"kalman_process_noise = {f.kalman_process_noise!r}",
        f"kalman_measurement_noise = {f.kalman_measurement_noise!r}",
        "",
        "[deform]",
        f"enabled = {str(config.mls_enabled).lower()}",
        f"spacing_px = {config.mls_spacing_px!r}",
        f"alpha = {config.mls_alpha!r}",
        f"variant = {config.mls_variant}",
        "",
        "[pbr]",
        f"enabled = {str(config.pbr_enabled).lower()}",
        "",
        "[run]",
        f"duration_s = {config.duration_s!r}",
        f"seed = {config.seed}",
        f"parallel = {str(config.parallel).lower()}",
    ]
    return "\n".join(lines) + "\n"
