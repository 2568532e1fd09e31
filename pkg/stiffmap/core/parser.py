import dataclasses
from typing import Any, Dict, Type, TypeVar

import yaml

from .density import DensityRegistry
from .schema import RunConfig, SolverConfig, StiffenConfig, UntangleConfig

T = TypeVar("T")

SECTIONS = {"solver": SolverConfig, "untangle": UntangleConfig, "stiffen": StiffenConfig}


class ConfigLoader:
    @staticmethod
    def load(path: str) -> RunConfig:
        """Read a YAML run configuration.

        Raises:
            FileNotFoundError: path does not exist
            ValueError: unknown section or key, or a value breaking a config invariant
        """
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
        return ConfigLoader.from_dict(data or {})

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> RunConfig:
        if not isinstance(data, dict):
            raise ValueError("Configuration must be a mapping of sections")
        unknown = set(data) - set(SECTIONS) - {"densities"}
        if unknown:
            raise ValueError(f"Unknown configuration section '{sorted(unknown)[0]}'")

        config = RunConfig(
            solver=ConfigLoader._parse_section(data.get('solver'), SolverConfig, 'solver'),
            untangle=ConfigLoader._parse_section(data.get('untangle'), UntangleConfig, 'untangle'),
            stiffen=ConfigLoader._parse_section(data.get('stiffen'), StiffenConfig, 'stiffen'),
            densities={str(k): str(v) for k, v in (data.get('densities') or {}).items()},
        )
        ConfigLoader._validate_integrity(config)
        return config

    @staticmethod
    def _parse_section(data: Any, cls: Type[T], name: str) -> T:
        if data is None:
            return cls()
        if not isinstance(data, dict):
            raise ValueError(f"Section '{name}' must be a mapping")
        known = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"Unknown key '{key}' in section '{name}'")
            default = known[key].default
            if isinstance(default, (int, float)) and not isinstance(default, bool):
                value = ConfigLoader._coerce_number(value, type(default), f"{name}.{key}")
            values[key] = value
        return cls(**values)

    @staticmethod
    def _coerce_number(value: Any, kind: type, where: str):
        if isinstance(value, bool):
            raise ValueError(f"Key '{where}' must be a number, got {value!r}")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"Key '{where}' must be a number, got {value!r}")
        if kind is int:
            if not number.is_integer():
                raise ValueError(f"Key '{where}' must be a whole number, got {value!r}")
            return int(number)
        return number

    @staticmethod
    def _validate_integrity(config: RunConfig):
        """Checks that the stiffening density is built in or declared under 'densities'."""
        builtin = DensityRegistry().names()
        if config.stiffen.density not in builtin and config.stiffen.density not in config.densities:
            raise ValueError(f"stiffen.density '{config.stiffen.density}' is neither built in nor declared")
        for name, class_path in config.densities.items():
            if '.' not in class_path:
                raise ValueError(f"Density '{name}' needs a dotted class path, got '{class_path}'")


def merge_overrides(config: RunConfig, section: str, **overrides: Any) -> RunConfig:
    """Copy of config with the non-None overrides applied to one section."""
    values = {k: v for k, v in overrides.items() if v is not None}
    if not values:
        return config
    updated = dataclasses.replace(getattr(config, section), **values)
    return dataclasses.replace(config, **{section: updated})
