"""Traffic scenarios (one per row of the day/traffic table) and their key-value files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from ..errors import ConfigurationError

BUILTIN_SCENARIOS = ("A", "B", "C-1", "C-2", "C-3")


@dataclass(frozen=True)
class TrafficScenario:
    scenario_id: str
    day: int
    total_ues: int
    active_ues: int
    idle_ues: int
    mean_packet_size: float  # megabits
    mean_interarrival: float = 200.0  # ms
    mean_speed: float = 3.0  # m/s
    episode_length: int = 40
    step_duration: float = 1000.0  # ms

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError("invalid scenario: " + "; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.scenario_id not in ("A", "B", "C"):
            out.append(f"scenario_id must be one of A, B, C (got {self.scenario_id!r})")
        if min(self.total_ues, self.active_ues, self.idle_ues) < 0:
            out.append("UE counts must be non-negative")
        if self.active_ues + self.idle_ues != self.total_ues:
            out.append(f"active_ues + idle_ues ({self.active_ues} + {self.idle_ues}) "
                       f"!= total_ues ({self.total_ues})")
        for name in ("mean_packet_size", "mean_interarrival", "step_duration"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be strictly positive")
        # zero speed is a legal degenerate (static UEs)
        if self.mean_speed < 0:
            out.append("mean_speed must be non-negative")
        if self.episode_length < 1:
            out.append("episode_length must be >= 1")
        return out

    @property
    def tag(self) -> str:
        return self.scenario_id if self.scenario_id != "C" else f"C-{self.day}"

    def replace(self, **changes) -> "TrafficScenario":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrafficScenario)}
_CASTS = {"str": str, "int": int, "float": float}


def parse_scenario(text: str) -> TrafficScenario:
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("scenario file must be a key-value mapping")
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        try:
            kwargs[key] = _CASTS[_FIELD_TYPES[key]](value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{key}: cannot parse {value!r}") from exc
    try:
        return TrafficScenario(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_scenario(name_or_path) -> TrafficScenario:
    """Load a builtin scenario by tag (``"A"``, ``"C-2"``...) or a scenario file by path."""
    key = str(name_or_path)
    if key in BUILTIN_SCENARIOS:
        text = resources.files("lbmarl.scenarios").joinpath(f"{key}.yaml").read_text()
        return parse_scenario(text)
    path = Path(key)
    if not path.is_file():
        raise ConfigurationError(
            f"scenario {key!r} is neither a file nor one of {', '.join(BUILTIN_SCENARIOS)}")
    return parse_scenario(path.read_text())


def dump_scenario(scenario: TrafficScenario) -> str:
    return yaml.safe_dump(dataclasses.asdict(scenario), sort_keys=False)
