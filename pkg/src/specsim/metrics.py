"""Per-job metric aggregation: empirical CDFs, summary statistics, exports.

A report is built from the finished-job records of one simulation run.
Jobs still unfinished at the horizon are excluded from the per-job
records and CDFs — including them would need an imputation rule — but
they are counted in ``censored`` and the machine-time they consumed is
still charged to ``total_resource``. The utility-minus-resource
aggregate is the scheduling objective −(sum of flowtimes) − (sum of
per-job resource), taken over finished jobs; matched seeds and horizons
keep the censoring treatment identical across policies being compared.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "JobMetrics",
    "MetricsReport",
    "cdf_points",
    "percentile",
]


@dataclass(frozen=True)
class JobMetrics:
    """Outcome of one finished job."""

    ident: int
    arrival: float
    finish: float
    flowtime: float
    resource: float
    tasks: int


def cdf_points(values: Sequence[float]) -> tuple[tuple[float, float], ...]:
    """Empirical CDF of ``values`` at its sorted unique points.

    Each pair is (value, fraction of samples <= value); fractions are
    rank/n so the final ordinate is exactly 1.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cdf_points needs at least one value")
    uniq, counts = np.unique(arr, return_counts=True)
    fracs = np.cumsum(counts) / arr.size
    return tuple((float(v), float(f)) for v, f in zip(uniq, fracs))


def _cdf_percentile(cdf: Sequence[tuple[float, float]], p: float) -> float:
    for value, frac in cdf:
        if frac >= p:
            return value
    return cdf[-1][0]


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated metrics of one simulation run.

    ``jobs`` holds finished jobs sorted by id. Summary statistics are
    None when no job finished; ``total_resource`` always includes the
    resource consumed by censored jobs.
    """

    jobs: tuple[JobMetrics, ...]
    censored: int
    censored_resource: float
    gamma: float
    flowtime_cdf: tuple[tuple[float, float], ...]
    resource_cdf: tuple[tuple[float, float], ...]
    mean_flowtime: float | None
    median_flowtime: float | None
    p80_flowtime: float | None
    p90_flowtime: float | None
    total_resource: float
    utility_minus_resource: float

    @classmethod
    def build(cls, jobs: Iterable[JobMetrics], censored: int,
              censored_resource: float, gamma: float) -> "MetricsReport":
        """Compute every derived field from finished-job records."""
        recs = tuple(sorted(jobs, key=lambda r: r.ident))
        if recs:
            flows = [r.flowtime for r in recs]
            resources = [r.resource for r in recs]
            flow_cdf = cdf_points(flows)
            res_cdf = cdf_points(resources)
            mean = math.fsum(flows) / len(flows)
            median = _cdf_percentile(flow_cdf, 0.5)
            p80 = _cdf_percentile(flow_cdf, 0.8)
            p90 = _cdf_percentile(flow_cdf, 0.9)
            finished_resource = math.fsum(resources)
            utility = -math.fsum(flows) - finished_resource
        else:
            flow_cdf = ()
            res_cdf = ()
            mean = median = p80 = p90 = None
            finished_resource = 0.0
            utility = 0.0
        return cls(
            jobs=recs,
            censored=censored,
            censored_resource=censored_resource,
            gamma=gamma,
            flowtime_cdf=flow_cdf,
            resource_cdf=res_cdf,
            mean_flowtime=mean,
            median_flowtime=median,
            p80_flowtime=p80,
            p90_flowtime=p90,
            total_resource=finished_resource + censored_resource,
            utility_minus_resource=utility,
        )

    # ------------------------------------------------------------------
    # serialization

    def to_json(self) -> str:
        payload = {
            "gamma": self.gamma,
            "jobs": [
                {"id": r.ident, "arrival": r.arrival, "finish": r.finish,
                 "flowtime": r.flowtime, "resource": r.resource,
                 "tasks": r.tasks}
                for r in self.jobs
            ],
            "censored": self.censored,
            "censored_resource": self.censored_resource,
            "flowtime_cdf": [[v, f] for v, f in self.flowtime_cdf],
            "resource_cdf": [[v, f] for v, f in self.resource_cdf],
            "mean_flowtime": self.mean_flowtime,
            "median_flowtime": self.median_flowtime,
            "p80_flowtime": self.p80_flowtime,
            "p90_flowtime": self.p90_flowtime,
            "total_resource": self.total_resource,
            "utility_minus_resource": self.utility_minus_resource,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        """Rebuild a report from its JSON form.

        Derived fields are recomputed from the per-job records, so a
        report serialized by :meth:`to_json` round-trips byte-for-byte.
        """
        payload = json.loads(text)
        jobs = [JobMetrics(ident=j["id"], arrival=j["arrival"],
                           finish=j["finish"], flowtime=j["flowtime"],
                           resource=j["resource"], tasks=j["tasks"])
                for j in payload["jobs"]]
        return cls.build(jobs, payload["censored"],
                         payload["censored_resource"], payload["gamma"])

    def jobs_csv(self, fp) -> None:
        """One row per finished job."""
        writer = csv.writer(fp)
        writer.writerow(["job_id", "arrival", "finish", "flowtime",
                         "resource", "tasks"])
        for r in self.jobs:
            writer.writerow([r.ident, r.arrival, r.finish, r.flowtime,
                             r.resource, r.tasks])

    def cdf_csv(self, fp, metric: str) -> None:
        """CDF of ``metric`` ("flowtime" or "resource") as value,fraction rows."""
        cdf = self._cdf_for(metric)
        writer = csv.writer(fp)
        writer.writerow(["value", "fraction"])
        for value, frac in cdf:
            writer.writerow([value, frac])

    def _cdf_for(self, metric: str) -> tuple[tuple[float, float], ...]:
        if metric == "flowtime":
            return self.flowtime_cdf
        if metric == "resource":
            return self.resource_cdf
        raise ValueError(f"unknown metric {metric!r}; "
                         f"expected 'flowtime' or 'resource'")


def percentile(report: MetricsReport, metric: str, p: float) -> float:
    """Smallest observed value of ``metric`` whose empirical CDF reaches p.

    ``p`` must lie in (0, 1); as p approaches 1 this is the maximum
    observed value. Raises on an empty report.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p}")
    cdf = report._cdf_for(metric)
    if not cdf:
        raise ValueError("percentile of an empty report")
    return _cdf_percentile(cdf, p)
