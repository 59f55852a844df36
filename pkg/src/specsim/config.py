"""Experiment configuration: one JSON file holds every experiment constant.

The file has four required blocks — ``cluster``, ``workload``, ``policies``,
``seeds`` — plus an optional ``output`` directory. ``workload.rate`` may be a
single arrival rate or a list of rates to sweep. Validation failures raise
:class:`~specsim.errors.ConfigError` naming the offending field with a dotted
path; syntactically broken JSON is reported with its line and column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .policies import POLICY_NAMES
from .regime import WorkloadProfile
from .simulator import ClusterConfig
from .workload import WorkloadSpec

__all__ = [
    "ClusterSettings",
    "WorkloadSettings",
    "PolicySetting",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


@dataclass(frozen=True)
class ClusterSettings:
    machines: int
    gamma: float
    horizon: float
    slot: float = 1.0
    cap: int = 8

    def cluster_config(self, seed: int) -> ClusterConfig:
        return ClusterConfig(machines=self.machines, gamma=self.gamma,
                             horizon=self.horizon, seed=seed, slot=self.slot,
                             cap=self.cap)


@dataclass(frozen=True)
class WorkloadSettings:
    rates: tuple[float, ...]
    shape: float
    tasks_low: int
    tasks_high: int
    mean_low: float
    mean_high: float

    def workload_spec(self, rate: float) -> WorkloadSpec:
        return WorkloadSpec(rate=rate, shape=self.shape,
                            tasks_low=self.tasks_low,
                            tasks_high=self.tasks_high,
                            mean_low=self.mean_low,
                            mean_high=self.mean_high)

    def profile(self, machines: int) -> WorkloadProfile:
        """Representative queueing profile for the regime-cutoff report.

        Uses the midpoint task count and the task law at the midpoint mean,
        and requires a single arrival rate.
        """
        if len(self.rates) != 1:
            raise ConfigError(
                "the regime cutoff needs a single arrival rate, "
                f"got {len(self.rates)}", field="workload.rate")
        mean_mid = 0.5 * (self.mean_low + self.mean_high)
        law = self.workload_spec(self.rates[0]).job_law(mean_mid)
        return WorkloadProfile(
            arrival_rate=self.rates[0],
            mean_tasks=0.5 * (self.tasks_low + self.tasks_high),
            task_law=law,
            machines=machines,
        )


@dataclass(frozen=True)
class PolicySetting:
    """One policy to run; ``label`` names its output files and summary rows.

    The label defaults to the policy name and exists so the same policy can
    appear several times with different parameters (e.g. a sigma sweep).
    """

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.name)


@dataclass(frozen=True)
class ExperimentConfig:
    cluster: ClusterSettings
    workload: WorkloadSettings
    policies: tuple[PolicySetting, ...]
    seeds: tuple[int, ...]
    output: str | None = None


def _check_mapping(value: Any, path: str, allowed: set[str]) -> Mapping:
    if not isinstance(value, dict):
        raise ConfigError(f"expected an object, got {type(value).__name__}",
                          field=path)
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {', '.join(unknown)}; allowed: "
            f"{', '.join(sorted(allowed))}", field=path)
    return value


def _get(mapping: Mapping, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError("required key is missing",
                          field=f"{path}.{key}" if path else key)
    return mapping[key]


def _number(value: Any, path: str, *, minimum: float | None = None,
            exclusive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    out = float(value)
    if minimum is not None:
        if exclusive and out <= minimum:
            raise ConfigError(f"must be > {minimum:g}, got {value!r}",
                              field=path)
        if not exclusive and out < minimum:
            raise ConfigError(f"must be >= {minimum:g}, got {value!r}",
                              field=path)
    return out


def _integer(value: Any, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=path)
    return value


def _pair(value: Any, path: str) -> tuple[Any, Any]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"expected a [low, high] pair, got {value!r}",
                          field=path)
    return value[0], value[1]


def _parse_cluster(raw: Any) -> ClusterSettings:
    block = _check_mapping(raw, "cluster",
                           {"machines", "gamma", "slot", "cap", "horizon"})
    return ClusterSettings(
        machines=_integer(_get(block, "machines", "cluster"),
                          "cluster.machines", minimum=1),
        gamma=_number(_get(block, "gamma", "cluster"), "cluster.gamma",
                      minimum=0.0),
        horizon=_number(_get(block, "horizon", "cluster"), "cluster.horizon",
                        minimum=0.0, exclusive=True),
        slot=_number(block.get("slot", 1.0), "cluster.slot", minimum=0.0,
                     exclusive=True),
        cap=_integer(block.get("cap", 8), "cluster.cap", minimum=1),
    )


def _parse_workload(raw: Any) -> WorkloadSettings:
    block = _check_mapping(raw, "workload",
                           {"rate", "shape", "tasks", "means"})
    rate_raw = _get(block, "rate", "workload")
    if isinstance(rate_raw, list):
        if not rate_raw:
            raise ConfigError("rate list must not be empty",
                              field="workload.rate")
        rates = tuple(_number(r, f"workload.rate[{i}]", minimum=0.0)
                      for i, r in enumerate(rate_raw))
    else:
        rates = (_number(rate_raw, "workload.rate", minimum=0.0),)
    shape = _number(_get(block, "shape", "workload"), "workload.shape",
                    minimum=1.0, exclusive=True)
    t_lo, t_hi = _pair(block.get("tasks", [1, 100]), "workload.tasks")
    tasks_low = _integer(t_lo, "workload.tasks[0]", minimum=1)
    tasks_high = _integer(t_hi, "workload.tasks[1]", minimum=tasks_low)
    m_lo, m_hi = _pair(block.get("means", [1.0, 4.0]), "workload.means")
    mean_low = _number(m_lo, "workload.means[0]", minimum=0.0, exclusive=True)
    mean_high = _number(m_hi, "workload.means[1]", minimum=mean_low)
    return WorkloadSettings(rates=rates, shape=shape, tasks_low=tasks_low,
                            tasks_high=tasks_high, mean_low=mean_low,
                            mean_high=mean_high)


def _parse_policies(raw: Any) -> tuple[PolicySetting, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"expected a list, got {type(raw).__name__}",
                          field="policies")
    if not raw:
        raise ConfigError("at least one policy is required", field="policies")
    settings = []
    seen: dict[str, int] = {}
    for i, entry in enumerate(raw):
        path = f"policies[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"expected an object, got {entry!r}",
                              field=path)
        if "name" not in entry:
            raise ConfigError("required key is missing", field=f"{path}.name")
        name = entry["name"]
        if name not in POLICY_NAMES:
            raise ConfigError(
                f"unknown policy {name!r}; expected one of "
                f"{', '.join(POLICY_NAMES)}", field=f"{path}.name")
        label = entry.get("label", name)
        if not isinstance(label, str) or not label:
            raise ConfigError(f"expected a non-empty string, got {label!r}",
                              field=f"{path}.label")
        if label in seen:
            raise ConfigError(
                f"label {label!r} is already used by policies"
                f"[{seen[label]}]; give repeated policies distinct labels",
                field=f"{path}.label")
        seen[label] = i
        params = {k: v for k, v in entry.items()
                  if k not in ("name", "label")}
        settings.append(PolicySetting(name=name, params=params, label=label))
    return tuple(settings)


def _parse_seeds(raw: Any) -> tuple[int, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"expected a list, got {type(raw).__name__}",
                          field="seeds")
    if not raw:
        raise ConfigError("at least one seed is required", field="seeds")
    return tuple(_integer(s, f"seeds[{i}]", minimum=0)
                 for i, s in enumerate(raw))


def parse_config(text: str, source: str = "config") -> ExperimentConfig:
    """Parse and validate a configuration document.

    ``source`` labels syntax errors (usually the file path).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}"
        ) from None
    top = _check_mapping(raw, "(top level)",
                         {"cluster", "workload", "policies", "seeds",
                          "output"})
    output = top.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError(f"expected a string path, got {output!r}",
                          field="output")
    return ExperimentConfig(
        cluster=_parse_cluster(_get(top, "cluster", "")),
        workload=_parse_workload(_get(top, "workload", "")),
        policies=_parse_policies(_get(top, "policies", "")),
        seeds=_parse_seeds(_get(top, "seeds", "")),
        output=output,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate the configuration file at ``path``."""
    file = Path(path)
    try:
        text = file.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {file}: {exc.strerror}") from None
    return parse_config(text, source=str(file))
