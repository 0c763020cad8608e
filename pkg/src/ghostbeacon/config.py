"""Run configuration: one INI file, one master seed, documented schema.

Every key has a default reproducing the stock scenario, so a bare
``ghostbeacon simulate`` runs the reference setup.  Unknown sections or
keys are rejected by name.  The config hash covers the fully resolved
configuration (defaults included) plus the master seed, and is embedded
in every output manifest.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

from .channel import ChannelParams
from .inject import BandSpec, default_bands
from .scenario import ScenarioConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    bands: list[BandSpec] = field(default_factory=default_bands)
    train_pool: int = 25000
    holdout: int = 1000
    dae_widths: tuple[int, ...] = (5, 128, 64, 20, 64, 128, 5)
    dae_learning_rate: float = 0.00095
    dae_epochs: int = 200
    dae_batch_size: int = 64
    ocsvm_nu: float = 0.1
    ocsvm_learning_rate: float = 0.01
    ocsvm_epochs: int = 500
    target_fpr: float = 0.2
    seed: int = 7
    out_dir: str = "runs/default"
    mobility_trace: str | None = None

    def validate(self) -> None:
        self.scenario.seed = self.seed
        self.scenario.validate()
        self.channel.validate()
        for band in self.bands:
            band.validate()
        if self.train_pool <= 0 or self.holdout <= 0:
            raise ConfigError("features.train_pool and features.holdout must be > 0")
        if not 0.0 < self.target_fpr < 1.0:
            raise ConfigError("eval.target_fpr must be inside (0, 1)")
        if self.dae_epochs <= 0 or self.dae_batch_size <= 0 or self.dae_learning_rate <= 0:
            raise ConfigError("dae hyperparameters must be > 0")
        if self.ocsvm_epochs <= 0 or self.ocsvm_learning_rate <= 0:
            raise ConfigError("ocsvm hyperparameters must be > 0")
        if not 0.0 < self.ocsvm_nu <= 1.0:
            raise ConfigError("ocsvm.nu must be in (0, 1]")


_SCENARIO_KEYS = {
    "area_width_m": float,
    "area_height_m": float,
    "sim_duration_s": float,
    "fleet_size": int,
    "beacon_interval_s": float,
    "packet_length_bytes": int,
    "grid_spacing_m": float,
    "street_width_m": float,
    "building_setback_m": float,
    "speed_min_mps": float,
    "speed_max_mps": float,
    "obstacle_wall_loss_db": float,
    "obstacle_interior_loss_db_per_m": float,
    "vehicle_obstruction": lambda raw: raw.strip().lower() in ("1", "true", "yes", "on"),
    "vehicle_length_m": float,
    "vehicle_width_m": float,
    "vehicle_wall_loss_db": float,
    "vehicle_interior_loss_db_per_m": float,
    "data_rate_bps": float,
}

_CHANNEL_KEYS = {
    "carrier_freq_hz": float,
    "tx_power_dbm": float,
    "antenna_gain_tx_dbi": float,
    "antenna_gain_rx_dbi": float,
    "cable_loss_db": float,
    "path_loss_exponent": float,
    "rician_k_db": float,
    "reference_distance_m": float,
    "noise_mean_dbm": float,
    "noise_std_db": float,
    "sensitivity_dbm": float,
    "snir_threshold_db": float,
}


def _convert(section: str, key: str, raw: str, caster):
    try:
        return caster(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {section}.{key}: {raw!r}") from None


def _parse_band(name: str, raw: str) -> BandSpec:
    tokens = raw.split()
    try:
        if len(tokens) == 3:
            lo, hi, count = float(tokens[0]), float(tokens[1]), int(tokens[2])
            return BandSpec(name=name.upper(), d_tt_lo=lo, d_tt_hi=hi, sample_count=count)
        if len(tokens) == 6 and tokens[3].lower() == "annulus":
            lo, hi, count = float(tokens[0]), float(tokens[1]), int(tokens[2])
            ann = (float(tokens[4]), float(tokens[5]))
            return BandSpec(name=name.upper(), d_tt_lo=lo, d_tt_hi=hi, sample_count=count, annulus=ann)
    except ValueError:
        pass
    raise ConfigError(
        f"invalid band spec bands.{name}: {raw!r} "
        "(expected 'lo hi count' or 'lo hi count annulus lo hi')"
    )


def _parse_obstacles(raw: str) -> list[tuple]:
    out = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        nums = part.split()
        if len(nums) != 6:
            raise ConfigError(
                f"invalid scenario.obstacles entry {part!r} (need x0 y0 x1 y1 wall_db beta)"
            )
        out.append(tuple(float(v) for v in nums))
    return out


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    cfg = RunConfig()
    known_sections = {"run", "scenario", "channel", "features", "dae", "ocsvm", "eval", "bands"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown config section [{section}]")

    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key == "seed":
                cfg.seed = _convert("run", key, raw, int)
            elif key == "out":
                cfg.out_dir = raw
            else:
                raise ConfigError(f"unknown config key run.{key}")

    if parser.has_section("scenario"):
        for key, raw in parser.items("scenario"):
            if key in _SCENARIO_KEYS:
                setattr(cfg.scenario, key, _convert("scenario", key, raw, _SCENARIO_KEYS[key]))
            elif key == "mobility_trace":
                cfg.mobility_trace = raw
            elif key == "obstacles":
                cfg.scenario.obstacles = _parse_obstacles(raw)
            else:
                raise ConfigError(f"unknown config key scenario.{key}")

    if parser.has_section("channel"):
        for key, raw in parser.items("channel"):
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"unknown config key channel.{key}")
            setattr(cfg.channel, key, _convert("channel", key, raw, _CHANNEL_KEYS[key]))

    if parser.has_section("features"):
        for key, raw in parser.items("features"):
            if key == "train_pool":
                cfg.train_pool = _convert("features", key, raw, int)
            elif key == "holdout":
                cfg.holdout = _convert("features", key, raw, int)
            else:
                raise ConfigError(f"unknown config key features.{key}")

    if parser.has_section("dae"):
        for key, raw in parser.items("dae"):
            if key == "widths":
                try:
                    cfg.dae_widths = tuple(int(v) for v in raw.replace(",", " ").split())
                except ValueError:
                    raise ConfigError(f"invalid value for dae.widths: {raw!r}") from None
            elif key == "learning_rate":
                cfg.dae_learning_rate = _convert("dae", key, raw, float)
            elif key == "epochs":
                cfg.dae_epochs = _convert("dae", key, raw, int)
            elif key == "batch_size":
                cfg.dae_batch_size = _convert("dae", key, raw, int)
            else:
                raise ConfigError(f"unknown config key dae.{key}")

    if parser.has_section("ocsvm"):
        for key, raw in parser.items("ocsvm"):
            if key == "nu":
                cfg.ocsvm_nu = _convert("ocsvm", key, raw, float)
            elif key == "learning_rate":
                cfg.ocsvm_learning_rate = _convert("ocsvm", key, raw, float)
            elif key == "epochs":
                cfg.ocsvm_epochs = _convert("ocsvm", key, raw, int)
            else:
                raise ConfigError(f"unknown config key ocsvm.{key}")

    if parser.has_section("eval"):
        for key, raw in parser.items("eval"):
            if key == "target_fpr":
                cfg.target_fpr = _convert("eval", key, raw, float)
            else:
                raise ConfigError(f"unknown config key eval.{key}")

    if parser.has_section("bands"):
        bands = [_parse_band(name, raw) for name, raw in parser.items("bands")]
        if bands:
            cfg.bands = bands

    try:
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def canonical_text(cfg: RunConfig) -> str:
    """Stable key-sorted dump of the resolved configuration."""
    lines = [f"run.seed = {cfg.seed}"]
    for key in sorted(_SCENARIO_KEYS):
        lines.append(f"scenario.{key} = {getattr(cfg.scenario, key)!r}")
    if cfg.scenario.obstacles is not None:
        lines.append(f"scenario.obstacles = {cfg.scenario.obstacles!r}")
    if cfg.mobility_trace:
        lines.append(f"scenario.mobility_trace = {cfg.mobility_trace}")
    for key in sorted(_CHANNEL_KEYS):
        lines.append(f"channel.{key} = {getattr(cfg.channel, key)!r}")
    lines.append(f"features.train_pool = {cfg.train_pool}")
    lines.append(f"features.holdout = {cfg.holdout}")
    lines.append(f"dae.widths = {list(cfg.dae_widths)}")
    lines.append(f"dae.learning_rate = {cfg.dae_learning_rate!r}")
    lines.append(f"dae.epochs = {cfg.dae_epochs}")
    lines.append(f"dae.batch_size = {cfg.dae_batch_size}")
    lines.append(f"ocsvm.nu = {cfg.ocsvm_nu!r}")
    lines.append(f"ocsvm.learning_rate = {cfg.ocsvm_learning_rate!r}")
    lines.append(f"ocsvm.epochs = {cfg.ocsvm_epochs}")
    lines.append(f"eval.target_fpr = {cfg.target_fpr!r}")
    for band in cfg.bands:
        hi = "inf" if math.isinf(band.d_tt_hi) else repr(band.d_tt_hi)
        ann = f" annulus {band.annulus[0]!r} {band.annulus[1]!r}" if band.annulus else ""
        lines.append(
            f"bands.{band.name.lower()} = {band.d_tt_lo!r} {hi} {band.sample_count}{ann}"
        )
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()
