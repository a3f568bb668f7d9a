"""INI-style run configuration shared by every CLI command.

Sections: ``[geometry]``, ``[phantom]`` plus one ``[phantom.<name>]`` per
extra ellipsoid, ``[acquisition]``, ``[recon]`` and ``[output]``.  Unknown
sections or keys are rejected with the offending name in the message.
"""
from __future__ import annotations

import configparser
import io as _io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .geometry import DEFAULT_GEOMETRY, Geometry, GeometryError, make_geometry
from .phantom import Ellipsoid, Motion, PhantomSpec, default_phantom
from .recon import ReconConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_override"]

ARTIFACTS = ("sinogram", "truth", "mask", "mask_area", "reconstructions", "reports",
             "profiles", "summary")

_DEFAULTS: dict[str, dict[str, str]] = {
    "geometry": {
        "source_to_iso": "300", "source_to_detector": "480",
        "detector_cols": "48", "detector_rows": "24",
        "col_spacing": "10", "row_spacing": "8",
        "num_views": "72", "angle_offset": "0",
        "volume_dims": "64, 64, 64", "voxel_size": "2, 2, 2",
    },
    "phantom": {"preset": "default", "drift": "32"},
    "acquisition": {"photons": "1e5", "seed": "20190501"},
    "recon": {
        "iterations": "50", "step_size": "line_search", "beta": "16",
        "potential": "huber", "huber_delta": "0.0005", "subsets": "1",
        "nesterov": "true", "init": "fbp", "half_scan_start": "0",
        "mask": "geometric", "feather_width": "0", "mask_file": "",
        "convergence_tol": "1e-6", "weighting": "photon", "half_weighting": "binary",
    },
    "output": {"directory": "saw_out", "artifacts": ", ".join(ARTIFACTS)},
}

_ELLIPSOID_KEYS = {
    "center": "0, 0, 0", "semi_axes": "", "density": "", "rotation": "0",
    "motion": "static", "velocity": "0, 0, 0", "amplitude": "0, 0, 0",
    "period": "1", "phase": "0",
}

assert set(_DEFAULTS["geometry"]) == set(DEFAULT_GEOMETRY)


class ConfigError(ValueError):
    """Invalid run configuration; the message names the section and key."""


def _floats(text: str, key: str, n: int = 3) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    try:
        out = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: expected {n} numbers, got {text!r}") from None
    if len(out) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {text!r}")
    return out


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_override(arg: str) -> tuple[str, str, str]:
    """``--section.key=value`` -> (section, key, value); sections may contain dots."""
    body = arg[2:] if arg.startswith("--") else arg
    if "=" not in body or "." not in body.split("=", 1)[0]:
        raise ConfigError(f"{arg}: overrides look like --section.key=value")
    name, value = body.split("=", 1)
    section, key = name.rsplit(".", 1)
    return section, key, value


@dataclass(frozen=True)
class RunConfig:
    parser: configparser.ConfigParser
    source: str = "<defaults>"

    # -- typed views ------------------------------------------------------
    def get(self, section: str, key: str) -> str:
        return self.parser.get(section, key)

    @property
    def geometry(self) -> Geometry:
        sec = self.parser["geometry"]
        try:
            return make_geometry({k: sec[k] for k in DEFAULT_GEOMETRY})
        except GeometryError as exc:
            raise ConfigError(f"geometry.{exc}") from None

    @property
    def phantom(self) -> PhantomSpec:
        sec = self.parser["phantom"]
        preset = sec["preset"].strip()
        if preset == "default":
            base = list(default_phantom(self._float("phantom", "drift")).ellipsoids)
        elif preset == "none":
            base = []
        else:
            raise ConfigError(f"phantom.preset: unknown preset {preset!r}")
        for name in self.parser.sections():
            if name.startswith("phantom."):
                base.append(self._ellipsoid(name))
        return PhantomSpec(tuple(base))

    def _ellipsoid(self, name: str) -> Ellipsoid:
        sec = self.parser[name]
        for key in ("semi_axes", "density"):
            if not sec.get(key, "").strip():
                raise ConfigError(f"{name}.{key}: required")
        try:
            motion = Motion(
                kind=sec.get("motion", "static").strip(),
                velocity=_floats(sec.get("velocity", "0,0,0"), f"{name}.velocity"),
                amplitude=_floats(sec.get("amplitude", "0,0,0"), f"{name}.amplitude"),
                period=float(sec.get("period", "1")),
                phase=float(sec.get("phase", "0")),
            )
            return Ellipsoid(
                center=_floats(sec.get("center", "0,0,0"), f"{name}.center"),
                semi_axes=_floats(sec["semi_axes"], f"{name}.semi_axes"),
                density=float(sec["density"]),
                rotation=float(sec.get("rotation", "0")),
                motion=motion,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None

    def _float(self, section: str, key: str) -> float:
        try:
            return float(self.parser.get(section, key))
        except ValueError:
            raise ConfigError(f"{section}.{key}: not a number") from None

    def _int(self, section: str, key: str) -> int:
        try:
            return int(self.parser.get(section, key))
        except ValueError:
            raise ConfigError(f"{section}.{key}: not an integer") from None

    @property
    def photons(self) -> float | None:
        text = self.get("acquisition", "photons").strip().lower()
        if text in ("", "none", "off"):
            return None
        value = self._float("acquisition", "photons")
        if not value > 0:
            raise ConfigError("acquisition.photons: must be positive (or 'none')")
        return value

    @property
    def seed(self) -> int:
        return self._int("acquisition", "seed")

    def recon(self, mode: str = "full_mbir") -> ReconConfig:
        sec = self.parser["recon"]
        step = sec["step_size"].strip()
        mask_kind = sec["mask"].strip()
        if mask_kind not in ("geometric", "file"):
            raise ConfigError(f"recon.mask: 'geometric' or 'file', got {mask_kind!r}")
        mask_file = sec["mask_file"].strip() or None
        if mask_kind == "file" and not mask_file:
            raise ConfigError("recon.mask_file: required when recon.mask = file")
        try:
            return ReconConfig(
                mode=mode,
                max_iterations=self._int("recon", "iterations"),
                step_size=step if step == "line_search" else self._float("recon", "step_size"),
                beta=self._float("recon", "beta"),
                potential=sec["potential"].strip(),
                huber_delta=self._float("recon", "huber_delta"),
                num_subsets=self._int("recon", "subsets"),
                nesterov=_bool(sec["nesterov"], "recon.nesterov"),
                init=sec["init"].strip(),
                half_scan_start=self._int("recon", "half_scan_start"),
                mask_feather=self._float("recon", "feather_width"),
                mask_file=mask_file if mask_kind == "file" else None,
                convergence_tol=self._float("recon", "convergence_tol"),
                weighting=sec["weighting"].strip(),
                half_weighting=sec["half_weighting"].strip(),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"recon.{exc}") from None

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output", "directory"))

    @property
    def artifacts(self) -> tuple[str, ...]:
        items = tuple(a.strip() for a in self.get("output", "artifacts").split(",") if a.strip())
        for a in items:
            if a not in ARTIFACTS:
                raise ConfigError(f"output.artifacts: unknown artifact {a!r}")
        return items

    def validate(self) -> "RunConfig":
        """Touch every typed view so errors surface before any compute."""
        self.geometry
        self.phantom
        self.photons
        self.seed
        cfg = self.recon("saw_mbir")
        try:
            cfg.check(self.geometry)
        except ValueError as exc:
            raise ConfigError(f"recon.{exc}") from None
        if cfg.mask_file and not Path(cfg.mask_file).is_file():
            raise ConfigError(f"recon.mask_file: no such file {cfg.mask_file!r}")
        self.artifacts
        return self

    def with_overrides(self, overrides: Iterable[tuple[str, str, str]]) -> "RunConfig":
        parser = _copy(self.parser)
        for section, key, value in overrides:
            _check_key(section, key)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, value)
        return replace(self, parser=parser)

    def dumps(self) -> str:
        buf = _io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()


def _check_key(section: str, key: str) -> None:
    if section.startswith("phantom."):
        allowed = _ELLIPSOID_KEYS
    elif section in _DEFAULTS:
        allowed = _DEFAULTS[section]
    else:
        raise ConfigError(f"{section}: unknown section")
    if key not in allowed:
        raise ConfigError(f"{section}.{key}: unknown key")


def _copy(parser: configparser.ConfigParser) -> configparser.ConfigParser:
    out = _new_parser()
    out.read_string(_dump(parser))
    return out


def _dump(parser) -> str:
    buf = _io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _new_parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, default_section="__none__")
    p.optionxform = str  # keep key case
    return p


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Read a run config, fill defaults and reject unknown sections/keys."""
    user = _new_parser()
    try:
        if path is not None:
            with open(path) as fh:
                user.read_file(fh)
        elif text is not None:
            user.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for section in user.sections():
        for key in user[section]:
            _check_key(section, key)
    merged = _new_parser()
    for section, values in _DEFAULTS.items():
        merged[section] = dict(values)
        if user.has_section(section):
            merged[section].update(dict(user[section]))
    for section in user.sections():
        if section.startswith("phantom."):
            merged[section] = {k: v for k, v in _ELLIPSOID_KEYS.items()}
            merged[section].update(dict(user[section]))
    return RunConfig(merged, str(path) if path is not None else "<text>")
