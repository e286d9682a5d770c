"""Scenario configuration: YAML ingestion, defaults and validation.

All times are in subframes unless a key says otherwise. With the default
0.5 ms subframe, ``t_svd: 5`` is 2.5 ms and the default delay budget of
5 + 5 + 3 subframes gives 5 ms for the baselines and 6.5 ms for EGVP-FMPP.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..channel import ArrayGeometry, GridConfig, kmh
from ..weights import max_svd_cycle

SCHEME_NAMES = ("full_time", "periodic", "agmi", "wiener", "egvp", "egvp_fmpp")
AXES = ("snr_db", "v_kmh", "n_t", "t_svd", "csi_delay", "sampling_snr_db")


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario files."""


class BoundWarning(UserWarning):
    """The SVD cycle exceeds the sampling bound for the configured speed."""


@dataclass(frozen=True)
class ChannelSection:
    n_paths: int = 460
    delay_spread: float = 300e-9
    on_grid: bool = False
    grid_bias: float = 0.0


@dataclass(frozen=True)
class ScheduleSection:
    t_svd: int = 5
    n_svd: int = 7
    l_svd: int = 3
    order_mode: str = "fixed"


@dataclass(frozen=True)
class FmppSection:
    l_ce: int = 3
    n_ce: int = 7
    t_trs: int = 5
    t_svd: int = 5
    t_int: int = 3
    order_mode: str = "fixed"
    threshold: float = 1e-10


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one scenario or sweep.

    ``csi_delay`` applies the transmission plus SVD delay to every scheme
    except EGVP-FMPP, which always runs on the full delay budget. A
    ``sweep`` maps one axis name to a list of values.
    """

    grid: GridConfig = field(default_factory=GridConfig)
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    channel: ChannelSection = field(default_factory=ChannelSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    fmpp: FmppSection = field(default_factory=FmppSection)
    k: int = 8
    m: int = 4
    v_kmh: float = 30.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    schemes: tuple = SCHEME_NAMES
    csi_delay: bool = False
    delay_override: int | None = None
    sampling_snr_db: float | None = None
    l_w: int = 4
    seeds: tuple = tuple(range(20))
    n_subframes: int = 200
    sweep: dict = field(default_factory=dict)
    output: str | None = None

    @property
    def v(self) -> float:
        """Speed in m/s."""
        return kmh(self.v_kmh)

    @property
    def baseline_delay(self) -> int:
        if self.delay_override is not None:
            return int(self.delay_override)
        return self.fmpp.t_trs + self.fmpp.t_svd if self.csi_delay else 0

    @property
    def fmpp_delay(self) -> int:
        if self.delay_override is not None:
            return int(self.delay_override)
        return self.fmpp.t_trs + self.fmpp.t_svd + self.fmpp.t_int

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_axis(self, axis: str, value) -> "ScenarioConfig":
        """Copy with one sweep axis set to ``value``."""
        if axis == "snr_db":
            return self.replace(snr_db=(float(value),))
        if axis == "v_kmh":
            return self.replace(v_kmh=float(value))
        if axis == "n_t":
            return self.replace(geometry=_geometry_for(int(value), self.geometry))
        if axis == "t_svd":
            return self.replace(schedule=dataclasses.replace(self.schedule, t_svd=int(value)))
        if axis == "csi_delay":
            return self.replace(delay_override=int(value))
        if axis == "sampling_snr_db":
            return self.replace(sampling_snr_db=None if value is None else float(value))
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")


def _geometry_for(n_t: int, base: ArrayGeometry) -> ArrayGeometry:
    """Planar array with ``n_t`` elements keeping the polarization count, horizontal-first."""
    per_pol, rem = divmod(n_t, base.n_pl)
    if rem or per_pol < 1:
        raise ConfigError(f"N_t={n_t} is not divisible by {base.n_pl} polarizations")
    n_v = 1
    while 4 * n_v * n_v <= per_pol and per_pol % (2 * n_v) == 0:
        n_v *= 2
    return ArrayGeometry(n_v=n_v, n_h=per_pol // n_v, n_pl=base.n_pl, spacing=base.spacing)


_SECTIONS = {
    "grid": GridConfig,
    "geometry": ArrayGeometry,
    "channel": ChannelSection,
    "schedule": ScheduleSection,
    "fmpp": FmppSection,
}


def _build_section(name, cls, data, errors):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        errors.append(f"section '{name}' must be a mapping")
        return cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        errors.append(f"section '{name}': unknown keys {unknown}")
    try:
        return cls(**{k: v for k, v in data.items() if k in known})
    except (TypeError, ValueError) as exc:
        errors.append(f"section '{name}': {exc}")
        return cls()


def _tuple(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def validate(cfg: ScenarioConfig) -> list:
    """Constraint violations as messages (empty when valid); bound violations only warn."""
    errors = []
    s, f = cfg.schedule, cfg.fmpp
    if s.n_svd < 2 * s.l_svd:
        errors.append(f"schedule: N_svd={s.n_svd} < 2*L_svd={2 * s.l_svd}")
    if f.n_ce < 2 * f.l_ce:
        errors.append(f"fmpp: N_ce={f.n_ce} < 2*L_ce={2 * f.l_ce}")
    if s.t_svd < 1:
        errors.append("schedule: T_svd must be at least 1")
    for name in ("t_trs", "t_svd", "t_int"):
        if getattr(f, name) < 0:
            errors.append(f"fmpp: {name} must be nonnegative")
    for name, mode in (("schedule", s.order_mode), ("fmpp", f.order_mode)):
        if mode not in ("fixed", "mdl"):
            errors.append(f"{name}: order_mode must be 'fixed' or 'mdl', got {mode!r}")
    if cfg.k < 1 or cfg.m < 1:
        errors.append("K and M must be positive")
    if cfg.channel.n_paths < 1:
        errors.append("channel: n_paths must be positive")
    if cfg.v_kmh < 0:
        errors.append("v_kmh must be nonnegative")
    if cfg.n_subframes < 1:
        errors.append("n_subframes must be positive")
    if not cfg.seeds:
        errors.append("at least one seed is required")
    if cfg.l_w < 1:
        errors.append("l_w must be positive")
    bad = [x for x in cfg.schemes if x not in SCHEME_NAMES]
    if bad:
        errors.append(f"unknown schemes {bad}")
    for axis in cfg.sweep:
        if axis not in AXES:
            errors.append(f"unknown sweep axis {axis!r}")
    return errors


def check_sampling_bound(cfg: ScenarioConfig) -> bool:
    """Warn (and return False) when ``T_svd`` exceeds the bound at the configured speed."""
    bound = max_svd_cycle(cfg.v, cfg.grid.f0, cfg.grid.delta_t)
    if cfg.schedule.t_svd > bound.subframes:
        warnings.warn(
            f"T_svd={cfg.schedule.t_svd} subframes exceeds the sampling bound of {bound.subframes} at {cfg.v_kmh} km/h",
            BoundWarning,
            stacklevel=3,
        )
        return False
    return True


def load_config(source=None) -> ScenarioConfig:
    """Parse a YAML scenario from a path, a text string or a mapping.

    Missing keys take the system defaults (3.5 GHz carrier, 30 kHz spacing,
    51 frequency samples, 0.5 ms subframes, a 4x8 dual-polarized array,
    four UE antennas, eight UEs, a 5-subframe SVD cycle, order 3 models on
    7 samples).

    Raises
    ------
    ConfigError
        On YAML syntax errors (with line and column) or failed validation;
        the message lists every violation.
    """
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = source
    else:
        text = source
        looks_like_path = isinstance(source, Path) or (
            isinstance(source, str) and "\n" not in source and (Path(source).is_file() or source.endswith((".yaml", ".yml")))
        )
        if looks_like_path:
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read scenario file {source}: {exc.strerror}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"cannot parse scenario{where}: {getattr(exc, 'problem', exc)}") from None
        data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping at the top level")

    errors = []
    kwargs = {name: _build_section(name, cls, data.get(name), errors) for name, cls in _SECTIONS.items()}
    top = {f.name for f in dataclasses.fields(ScenarioConfig)} - set(_SECTIONS)
    unknown = sorted(set(data) - top - set(_SECTIONS) - {"n_seeds", "seed"})
    if unknown:
        errors.append(f"unknown keys {unknown}")
    for key in top:
        if key in data:
            kwargs[key] = data[key]
    for key in ("snr_db", "schemes", "seeds"):
        if key in kwargs:
            kwargs[key] = _tuple(kwargs[key])
    if "seeds" not in data and ("n_seeds" in data or "seed" in data):
        base = int(data.get("seed", 0))
        kwargs["seeds"] = tuple(range(base, base + int(data.get("n_seeds", 1))))
    if "sweep" in kwargs:
        sweep = kwargs["sweep"] or {}
        if not isinstance(sweep, dict):
            errors.append("sweep must map an axis name to a list of values")
            sweep = {}
        kwargs["sweep"] = {k: list(_tuple(v)) for k, v in sweep.items()}
    try:
        cfg = ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    errors += validate(cfg)
    if errors:
        raise ConfigError("invalid scenario:\n  " + "\n  ".join(errors))
    check_sampling_bound(cfg)
    return cfg
