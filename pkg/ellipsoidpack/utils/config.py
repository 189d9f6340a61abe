"""Configuration management for ellipsoidpack."""

import json
import math
import yaml
from pathlib import Path
from dataclasses import dataclass, fields, asdict, replace
from typing import Optional, Dict, Any, Union

from ellipsoidpack.evolve import A0Policy, EvolveConfig, default_horizon
from ellipsoidpack.utils.seeding import MAX_SEED


LATTICE_CHOICES = ("Zn", "Dn", "E8", "exact2d", "hecke")
SUITE_CHOICES = (
    "symcore",
    "lattice",
    "projector",
    "sampler",
    "evolve",
    "statistics",
    "analysis",
    "all",
)

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def normalize_key(key: str) -> str:
    """Flag spelling to field name: '--dt-max' and 'dt_max' both give 'dt_max'."""
    return key.strip().lstrip("-").replace("-", "_")


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"Expected a boolean, got '{value}'")


def _parse_number_or(keywords: tuple):
    def parse(value: Any) -> Union[float, str]:
        if isinstance(value, str):
            text = value.strip()
            if text.lower() in keywords:
                return text.lower()
            return float(text)
        return float(value)

    return parse


def _parse_optional(kind):
    def parse(value: Any):
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
            return None
        return kind(value)

    return parse


_PARSERS = {
    "n": int,
    "lattice": str,
    "p": _parse_optional(int),
    "seed": int,
    "dt_max": _parse_optional(float),
    "dt_min": _parse_optional(float),
    "eps_contact": float,
    "eta": float,
    "alpha": float,
    "a0": _parse_number_or(("paper", "auto")),
    "a0_margin": float,
    "max_time": _parse_optional(_parse_number_or(("paper",))),
    "renorm_period": int,
    "record_stride": int,
    "count": int,
    "out": _parse_optional(str),
    "suite": str,
    "samples": int,
    "radius": _parse_optional(float),
    "c0": float,
    "t": _parse_optional(float),
    "truncate": _parse_bool,
    "workers": int,
    "verbose": _parse_bool,
    "json_logs": _parse_bool,
}


@dataclass
class RunConfig:
    """Settings shared by every ellipsoidpack command."""

    n: int = 2
    lattice: str = "Zn"  # Zn | Dn | E8 | exact2d | hecke | file:PATH
    p: Optional[int] = None
    seed: int = 0
    dt_max: Optional[float] = None  # default T/2000
    dt_min: Optional[float] = None  # default dt_max * 1e-6
    eps_contact: float = 1e-9
    eta: float = 0.5
    alpha: float = 0.0
    a0: Union[float, str] = "paper"  # number | paper | auto
    a0_margin: float = 0.05
    max_time: Optional[Union[float, str]] = None  # number | paper; default 100 T
    renorm_period: int = 50
    record_stride: int = 1
    count: int = 10
    out: Optional[str] = None
    suite: str = "all"
    samples: int = 10000
    radius: Optional[float] = None
    c0: float = 2.0
    t: Optional[float] = None  # shell-integral time; default T
    truncate: bool = False
    workers: int = 1
    verbose: bool = False
    json_logs: bool = False

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in fields(cls)}

    @classmethod
    def _coerce(cls, data: Dict[str, Any]) -> Dict[str, Any]:
        valid = cls.field_names()
        result: Dict[str, Any] = {}
        for raw_key, value in data.items():
            key = normalize_key(str(raw_key))
            if key not in valid:
                raise ValueError(f"Unknown configuration key: '{raw_key}'")
            try:
                result[key] = _PARSERS[key](value)
            except (TypeError, ValueError) as e:
                raise ValueError(f"Invalid value for '{raw_key}': {value!r} ({e})")
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        Create configuration from dictionary.

        Raises:
            ValueError: On unknown keys or unparseable values
        """
        return cls(**cls._coerce(data))

    @staticmethod
    def _parse_flat(text: str) -> Dict[str, str]:
        data: Dict[str, str] = {}
        for number, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"Line {number}: expected 'key = value', got '{line.strip()}'")
            key, value = stripped.split("=", 1)
            data[key.strip()] = value.strip()
        return data

    @classmethod
    def from_file(cls, config_path: Union[str, Path]) -> "RunConfig":
        """
        Load configuration from YAML, JSON, or flat ``key = value`` text.

        Args:
            config_path: .yml/.yaml, .json, or any other extension for flat text

        Returns:
            RunConfig instance loaded from file

        Raises:
            FileNotFoundError: If config file doesn't exist
            ValueError: If the file is invalid or holds unknown keys
        """
        path = Path(config_path)

        if not path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        ext = path.suffix.lower()

        try:
            with open(path, "r", encoding="utf-8") as f:
                if ext in (".yml", ".yaml"):
                    data = yaml.safe_load(f)
                elif ext == ".json":
                    data = json.load(f)
                else:
                    data = cls._parse_flat(f.read())
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML in config file: {e}")
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in config file: {e}")

        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ValueError("Configuration file must contain a dictionary/object")

        return cls.from_dict(data)

    def merge(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Apply explicitly given settings; None values are ignored."""
        given = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **self._coerce(given))

    def validate(self) -> None:
        """
        Validate configuration.

        Raises:
            ValueError: If a setting is out of range
        """
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.lattice not in LATTICE_CHOICES and not self.lattice.startswith("file:"):
            raise ValueError(
                f"Invalid lattice '{self.lattice}'. Use one of {', '.join(LATTICE_CHOICES)} "
                "or file:PATH"
            )
        if self.lattice.startswith("file:") and not self.lattice[5:]:
            raise ValueError("file: lattice source needs a path")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError(f"Seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.suite not in SUITE_CHOICES:
            raise ValueError(f"Invalid suite '{self.suite}'. Use one of {', '.join(SUITE_CHOICES)}")
        if isinstance(self.a0, str):
            if self.a0 not in ("paper", "auto"):
                raise ValueError(f"a0 must be a number, 'paper' or 'auto', got '{self.a0}'")
        elif not (self.a0 > 0 and math.isfinite(self.a0)):
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if isinstance(self.max_time, str):
            if self.max_time != "paper":
                raise ValueError(f"max_time must be a number or 'paper', got '{self.max_time}'")
        elif self.max_time is not None and not self.max_time > 0:
            raise ValueError(f"max_time must be positive, got {self.max_time}")
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        if self.samples < 2:
            raise ValueError(f"samples must be at least 2, got {self.samples}")
        if self.radius is not None and self.radius < 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.t is not None and not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")

    @property
    def horizon(self) -> float:
        """T = 16 n^-2 log n."""
        return default_horizon(self.n)

    def resolved_max_time(self) -> Optional[float]:
        if self.max_time is None:
            return None
        if self.max_time == "paper":
            return self.horizon
        return float(self.max_time)

    def evolve_config(self) -> EvolveConfig:
        """Resolve a0 and max_time into an EvolveConfig."""
        self.validate()
        a0_value = None if isinstance(self.a0, str) else float(self.a0)
        policy = A0Policy(self.a0) if isinstance(self.a0, str) else A0Policy.PAPER
        return EvolveConfig.for_dimension(
            self.n,
            dt_max=self.dt_max,
            dt_min=self.dt_min,
            max_time=self.resolved_max_time(),
            eps_contact=self.eps_contact,
            eta=self.eta,
            renorm_period=self.renorm_period,
            alpha=self.alpha,
            a0=a0_value,
            a0_policy=policy,
            a0_margin=self.a0_margin,
            record_stride=self.record_stride,
        )

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert configuration to dictionary.

        Returns:
            Dictionary representation of config
        """
        return asdict(self)

    def to_file(self, config_path: Union[str, Path]) -> None:
        """
        Save configuration to YAML, JSON, or flat text (any other extension).

        Raises:
            ValueError: If the file cannot be written
        """
        path = Path(config_path)
        ext = path.suffix.lower()
        data = self.to_dict()

        try:
            with open(path, "w", encoding="utf-8") as f:
                if ext in (".yml", ".yaml"):
                    yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
                elif ext == ".json":
                    json.dump(data, f, indent=2)
                else:
                    for key, value in data.items():
                        if value is not None:
                            f.write(f"{key} = {value}\n")
        except OSError as e:
            raise ValueError(f"Failed to write config file: {e}")
