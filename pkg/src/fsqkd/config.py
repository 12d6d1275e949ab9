"""JSON config validation and presets.

``validate_config`` checks a parsed document against the schema for one
command.  It rejects unknown fields, fills defaults (the 950 m experiment
for sessions, the 300 km satellite scenario for link budgets), and
reports every problem at once through ``ConfigError``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .adversary import B92_EFFICIENCY, BeamsplitterAttackConfig, OpaqueAttackConfig
from .devices import ChannelModel, DetectorModel
from .linkbudget import BackgroundScenario, SatelliteScenario
from .protocol import SessionConfig
from .reconciliation import ParityBlockConfig
from .streams import SEED_MAX

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Field:
    kind: Any  # int, float, bool, str, a nested schema dict, or a one-item list of schema
    default: Any = REQUIRED
    check: Callable[[Any], str | None] | None = None


def _between(lo, hi):
    return lambda v: None if lo <= v <= hi else f"must be in [{lo}, {hi}]"


def _positive(v):
    return None if v > 0 else "must be > 0"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _at_least(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def _one_of(*choices):
    return lambda v: None if v in choices else f"must be one of {', '.join(map(repr, choices))}"


PROB = _between(0.0, 1.0)
SEED = _between(0, SEED_MAX)

CHANNEL = {
    "coupling_efficiency": Field(float, 0.14, PROB),
    "misalignment_flip_prob": Field(float, 0.015, PROB),
    "background_rate_hz": Field(float, 1100.0, _nonneg),
}
DETECTOR = {
    "efficiency": Field(float, 0.65, PROB),
    "dark_rate_hz": Field(float, 80.0, _nonneg),
    "gate_window_s": Field(float, 5e-9, _positive),
}
SESSION = {
    "pulse_count": Field(int, 1_000_000, _at_least(1)),
    "pulse_rate_hz": Field(float, 20e3, _positive),
    "mean_photon_number": Field(float, 0.1, _nonneg),
    "force_single_photon": Field(bool, False),
    "seed": Field(int, 0, SEED),
    "channel": Field(CHANNEL, {}),
    "detector": Field(DETECTOR, {}),
}
ATTACK = {
    "type": Field(str, REQUIRED, _one_of("opaque", "beamsplitter")),
    "resend": Field(str, None, _one_of("single", "dim", "bright")),
    "resend_mean": Field(float, None, _positive),
    "reflectivity": Field(float, None, PROB),
    "eve_efficiency": Field(float, B92_EFFICIENCY, _between(0.0, B92_EFFICIENCY)),
}
ATTACK_SESSION = {**SESSION, "attack": Field(ATTACK, REQUIRED)}
RECONCILE = {
    "rows": Field(int, 8, _at_least(1)),
    "cols": Field(int, 8, _at_least(1)),
    "passes": Field(int, 3, _at_least(1)),
    "shuffle_seed": Field(int, 0, SEED),
    "final_checks": Field(int, 50, _nonneg),
}
SCENARIO = {
    "altitude_m": Field(float, 300e3, _positive),
    "wavelength_m": Field(float, 772e-9, _positive),
    "tx_aperture_m": Field(float, 0.30, _positive),
    "rx_aperture_m": Field(float, 0.30, _positive),
    "pulse_rate_hz": Field(float, 10e6, _positive),
    "mean_photon_number": Field(float, 1.0, _nonneg),
    "atmospheric_transmission": Field(float, 0.8, PROB),
    "beam_wander_arcsec_lo": Field(float, 2.5, _nonneg),
    "beam_wander_arcsec_hi": Field(float, 10.0, _nonneg),
    "detector_efficiency": Field(float, 0.65, PROB),
    "protocol_efficiency": Field(float, 0.25, PROB),
    "filter_transmission": Field(float, 0.7, PROB),
    "fiber_coupling": Field(float, 0.4, PROB),
    "tilt_correction_factor": Field(float, 1.0, _at_least(1)),
    "protocol_rate_multiplier": Field(int, 1, _one_of(1, 2)),
    "direction": Field(str, "uplink", _one_of("uplink", "downlink")),
    "downlink_improvement": Field(float, 150.0, _at_least(1)),
}
BACKGROUND = {
    "name": Field(str, REQUIRED),
    "radiance": Field(float, REQUIRED, _nonneg),
    "fov_arcsec": Field(float, 5.0, _positive),
    "filter_bandwidth_nm": Field(float, 1.0, _positive),
    "gate_window_s": Field(float, 1e-9, _positive),
    "detector_dark_rate_hz": Field(float, 50.0, _nonneg),
    "fov_full_angle": Field(bool, False),
}
DEFAULT_BACKGROUNDS = [
    {"name": "full_moon", "radiance": 4e16},
    {"name": "new_moon", "radiance": 1e15},
]
LINKBUDGET = {
    "scenario": Field(SCENARIO, {}),
    "backgrounds": Field([BACKGROUND], DEFAULT_BACKGROUNDS),
}

SCHEMAS = {
    "session": SESSION,
    "attack": ATTACK_SESSION,
    "reconcile": RECONCILE,
    "linkbudget": LINKBUDGET,
}


def _coerce(value, kind, where, errors):
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            if math.isfinite(value):
                return float(value)
            errors.append(f"{where}: must be finite")
            return None
    elif kind is str:
        if isinstance(value, str):
            return value
    errors.append(f"{where}: expected {kind.__name__}, got {type(value).__name__}")
    return None


def _validate(doc, schema: dict, path: str, errors: list[str]) -> dict:
    if not isinstance(doc, dict):
        errors.append(f"{path or '<root>'}: expected an object, got {type(doc).__name__}")
        return {}
    out = {}
    for key in sorted(set(doc) - set(schema)):
        errors.append(f"{path}{key}: unknown field")
    for key, spec in schema.items():
        where = f"{path}{key}"
        if key not in doc:
            if spec.default is REQUIRED:
                errors.append(f"{where}: required field missing")
                continue
            value = spec.default
        else:
            value = doc[key]
        if isinstance(spec.kind, dict):
            out[key] = _validate(value, spec.kind, where + ".", errors)
        elif isinstance(spec.kind, list):
            if not isinstance(value, list) or not value:
                errors.append(f"{where}: expected a non-empty list")
                continue
            out[key] = [_validate(v, spec.kind[0], f"{where}[{i}].", errors) for i, v in enumerate(value)]
        elif value is None:
            if spec.default is not None:
                errors.append(f"{where}: must not be null")
            out[key] = None
        else:
            v = _coerce(value, spec.kind, where, errors)
            if v is not None and spec.check is not None:
                msg = spec.check(v)
                if msg:
                    errors.append(f"{where}: {msg} (got {value!r})")
                    v = None
            out[key] = v
    return out


def _attack_rules(attack: dict, errors: list[str]) -> None:
    if attack.get("type") == "opaque":
        if attack.get("reflectivity") is not None:
            errors.append("attack.reflectivity: not used by an opaque attack")
        resend = attack.get("resend") or "single"
        attack["resend"] = resend
        if resend == "single" and attack.get("resend_mean") is not None:
            errors.append("attack.resend_mean: not used by single-photon resend")
        if resend in ("dim", "bright") and attack.get("resend_mean") is None:
            errors.append(f"attack.resend_mean: required for {resend} resend")
    elif attack.get("type") == "beamsplitter":
        for key in ("resend", "resend_mean"):
            if attack.get(key) is not None:
                errors.append(f"attack.{key}: not used by a beamsplitter attack")
        if attack.get("reflectivity") is None:
            attack["reflectivity"] = 0.5


def validate_config(document, kind: str) -> dict:
    """Return the normalized config for ``kind`` or raise ``ConfigError``."""
    if kind not in SCHEMAS:
        raise ValueError(f"unknown config kind {kind!r}")
    errors: list[str] = []
    out = _validate(document, SCHEMAS[kind], "", errors)
    if kind == "attack" and isinstance(out.get("attack"), dict):
        _attack_rules(out["attack"], errors)
    if not errors:
        # Cross-field invariants live in the model constructors.
        try:
            build(kind, out)
        except (ValueError, TypeError) as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError(errors)
    return out


def session_from(cfg: dict) -> SessionConfig:
    return SessionConfig(
        pulse_count=cfg["pulse_count"],
        pulse_rate_hz=cfg["pulse_rate_hz"],
        mean_photon_number=cfg["mean_photon_number"],
        channel=ChannelModel(**cfg["channel"]),
        detector=DetectorModel(**cfg["detector"]),
        seed=cfg["seed"],
        force_single_photon=cfg["force_single_photon"],
    )


def attack_from(cfg: dict) -> OpaqueAttackConfig | BeamsplitterAttackConfig:
    a = cfg["attack"]
    if a["type"] == "opaque":
        return OpaqueAttackConfig(a["resend"], a["resend_mean"], a["eve_efficiency"])
    return BeamsplitterAttackConfig(a["reflectivity"], a["eve_efficiency"])


def build(kind: str, cfg: dict):
    """Turn a normalized config into model objects."""
    if kind == "session":
        return session_from(cfg)
    if kind == "attack":
        return session_from(cfg), attack_from(cfg)
    if kind == "reconcile":
        return ParityBlockConfig(**cfg)
    if kind == "linkbudget":
        return SatelliteScenario(**cfg["scenario"]), [BackgroundScenario(**b) for b in cfg["backgrounds"]]
    raise ValueError(f"unknown config kind {kind!r}")


def preset_names() -> list[str]:
    return sorted(p.name for p in resources.files("fsqkd.presets").iterdir() if p.name.endswith(".json"))


def resolve_config_path(name: str) -> Path:
    """A filesystem path, or else the name of a bundled preset."""
    path = Path(name)
    if path.exists():
        return path
    preset = resources.files("fsqkd.presets").joinpath(path.name)
    if preset.is_file():
        return Path(str(preset))
    raise FileNotFoundError(f"no such config file or preset: {name}")


def load_document(path: Path):
    """Parse JSON, turning syntax errors into a line/column diagnostic."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
