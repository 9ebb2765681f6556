"""Job configuration: typed flat ``key = value`` text with full round-trip."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .maps import Family, MapSpec
from .storage import content_key

COMMANDS = ("spectrum", "fwl", "performance", "qfield", "classical", "orbits")
LONG_RUNNING_L = 8


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> list:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


@dataclass
class JobConfig:
    command: str = "spectrum"
    family: str = "shift"
    k: int = 1
    l: int = 5
    l_list: list = field(default_factory=list)
    k_list: list = field(default_factory=list)
    npos: int = 32
    npos_list: list = field(default_factory=list)
    j: int = 32
    gamma_c: float = 0.1
    epsilon: float = 1e-3
    floor: float = 1e-2
    rank_tol: float = 1e-8
    tau: int = 0
    grid: int = 243
    seed: int = 0
    n_samples: int = 100_000
    t_max: int = 20
    estimator: str = "population"
    l_max: int = 8
    allow_long: bool = False
    cache_dir: str = ".tribaker-cache"
    out_dir: str = "runs"

    # keys that do not change results are left out of the config hash
    _UNHASHED = ("cache_dir", "out_dir", "allow_long")

    def __post_init__(self):
        self.validate()

    @property
    def ls(self) -> list:
        return list(self.l_list) or [self.l]

    @property
    def ks(self) -> list:
        return list(self.k_list) or [self.k]

    def tau_for(self, l: int) -> int:
        return self.tau if self.tau > 0 else l

    def specs(self) -> list:
        """Every ``MapSpec`` in the (family, k-list, l-list) sweep; ``k > l`` is skipped."""
        out = []
        for l in self.ls:
            for k in self.ks:
                if Family(self.family) is Family.CLOSED:
                    out.append(MapSpec(Family.CLOSED, 0, l))
                    break
                if k <= l:
                    out.append(MapSpec(self.family, k, l))
        return out

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        try:
            Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown family {self.family!r}") from None
        for name in ("gamma_c", "epsilon", "rank_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.floor < 0:
            raise ConfigError("floor must be non-negative")
        for name in ("l", "npos", "j", "grid", "n_samples", "t_max", "l_max"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.estimator not in ("plain", "population"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0 (0 selects the default, tau = l)")
        if any(v < 1 for v in self.ls) or any(v < 1 for v in self.npos_list):
            raise ConfigError("sweep entries must be >= 1")
        if Family(self.family) is not Family.CLOSED:
            if any(v < 1 for v in self.ks):
                raise ConfigError("k must be >= 1")
            if not any(k <= l for k in self.ks for l in self.ls):
                raise ConfigError("no (k, l) pair with k <= l in the sweep")
        if max(self.ls) >= LONG_RUNNING_L and not self.allow_long and self.command != "orbits":
            raise ConfigError(f"l >= {LONG_RUNNING_L} is long-running; pass --allow-long to proceed")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_text(self) -> str:
        lines = []
        for name, value in self.to_dict().items():
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "JobConfig":
        values = parse_text(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "JobConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self._UNHASHED}
        return content_key(d)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(JobConfig)}


def parse_value(name: str, text: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _FIELD_TYPES[name]
    text = text.strip()
    try:
        if kind == "list":
            return _int_list(text)
        if kind == "bool":
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = parse_value(key.replace("-", "_"), value)
    return values
