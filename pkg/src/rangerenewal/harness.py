"""Replicated simulations compared against the limit constants.

Config schema (JSON)::

    {
      "law": {"family": "Mixed", "atomMass": 0.8, "inner": {"family": "ZipfLike", "gamma": 0.5}},
      "epsilon": 1e-12,
      "seed": 1, "replicas": 20,
      "checkpoints": [1000, 10000, 100000, 1000000],
      "ratios": [
        {"name": "RkOverTail2", "k": [2, 3, 4], "rule": "band", "tolerance": 0.05},
        {"name": "RkOverTailK", "k": [2], "rule": "trend", "ceiling": 0.15, "slack": 0.01}
      ],
      "rangeOracle": true,
      "output": {"json": "report.json", "csv": "rows.csv"}
    }

``rule`` is ``band`` (two-sided, |mean - limit| <= tolerance at the last
checkpoint), ``trend`` (each checkpoint mean at most the previous one plus
``slack``, last one at most ``ceiling``) or ``auto`` (trend for zero limits,
band otherwise).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .occupancy import OccupancyCounter, OccupancySpectrum, tail_count
from .samplers import (BLOCK_SIZE, DEFAULT_EPSILON, RegularLaw, SeededStream, build_law,
                       child_seed, family_from_dict)
from .theory import RatioName, expected_range, predict

DEFAULT_CHECKPOINTS = (1000, 10_000, 100_000, 1_000_000)
DEFAULT_TOLERANCE = 0.05
DEFAULT_CEILING = 0.15
DEFAULT_SLACK = 0.01


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RatioSpec:
    name: RatioName
    ks: tuple[int, ...]
    rule: str = "auto"
    tolerance: float = DEFAULT_TOLERANCE
    ceiling: float = DEFAULT_CEILING
    slack: float = DEFAULT_SLACK

    def to_dict(self) -> dict:
        return {"name": self.name.value, "k": list(self.ks), "rule": self.rule,
                "tolerance": self.tolerance, "ceiling": self.ceiling, "slack": self.slack}


@dataclass
class ExperimentConfig:
    law: Mapping
    seed: int = 0
    replicas: int = 1
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    ratios: tuple[RatioSpec, ...] = ()
    epsilon: float = DEFAULT_EPSILON
    range_oracle: bool = True
    json_path: str | None = None
    csv_path: str | None = None

    def __post_init__(self):
        self.checkpoints = tuple(int(c) for c in self.checkpoints)
        if not self.checkpoints or self.checkpoints[0] < 1:
            raise ConfigError("checkpoints must be positive")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        try:
            self.law_obj = build_law(family_from_dict(self.law), self.epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.ratios:
            self.ratios = default_ratios(self.law_obj)
        regime = self.law_obj.regime()
        for r in self.ratios:
            if r.rule not in ("auto", "band", "trend"):
                raise ConfigError(f"unknown rule {r.rule!r}")
            for k in r.ks:
                try:
                    predict(regime, r.name, k)
                except ValueError as exc:
                    raise ConfigError(f"{r.name.value} k={k}: {exc}") from exc

    @classmethod
    def from_dict(cls, data: Mapping) -> ExperimentConfig:
        try:
            ratios = tuple(
                RatioSpec(RatioName(r["name"]), tuple(int(k) for k in _as_list(r.get("k", [1]))),
                          r.get("rule", "auto"), float(r.get("tolerance", DEFAULT_TOLERANCE)),
                          float(r.get("ceiling", DEFAULT_CEILING)), float(r.get("slack", DEFAULT_SLACK)))
                for r in data.get("ratios", ()))
            out = data.get("output", {})
            return cls(law=data["law"], seed=int(data.get("seed", 0)),
                       replicas=int(data.get("replicas", 1)),
                       checkpoints=tuple(data.get("checkpoints", DEFAULT_CHECKPOINTS)),
                       ratios=ratios, epsilon=float(data.get("epsilon", DEFAULT_EPSILON)),
                       range_oracle=bool(data.get("rangeOracle", True)),
                       json_path=out.get("json"), csv_path=out.get("csv"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"law": dict(self.law), "epsilon": self.epsilon, "seed": self.seed,
                "replicas": self.replicas, "checkpoints": list(self.checkpoints),
                "ratios": [r.to_dict() for r in self.ratios], "rangeOracle": self.range_oracle}


def _as_list(x):
    return x if isinstance(x, (list, tuple)) else [x]


def default_ratios(law: RegularLaw) -> tuple[RatioSpec, ...]:
    """Every ratio with a stated limit for the law's regime, k = 1..4."""
    regime = law.regime()
    out = []
    for name in RatioName:
        ks = []
        for k in (1, 2, 3, 4):
            if name in (RatioName.RN_OVER_N, RatioName.RN1_OVER_N) and k > 1:
                break
            try:
                predict(regime, name, k)
            except ValueError:
                continue
            ks.append(k)
        if ks:
            out.append(RatioSpec(name, tuple(ks)))
    return tuple(out)


def ratio_value(spec: OccupancySpectrum, name: RatioName, k: int) -> float:
    """Observed value of a named ratio; NaN when its denominator is zero."""
    if name is RatioName.RN_OVER_N:
        num, den = spec.distinct, spec.n
    elif name is RatioName.RN1_OVER_N:
        num, den = spec.count(1), spec.n
    elif name is RatioName.RK_OVER_RN:
        num, den = spec.count(k), spec.distinct
    elif name is RatioName.RK_OVER_TAIL2:
        num, den = spec.count(k), tail_count(spec, 2)
    else:
        num, den = spec.count(k), tail_count(spec, k)
    return num / den if den else math.nan


# ---------------------------------------------------------------------------
# replicas


@lru_cache(maxsize=8)
def _law(law_json: str, epsilon: float) -> RegularLaw:
    return build_law(family_from_dict(json.loads(law_json)), epsilon)


def run_replica(law: RegularLaw, seed: int, checkpoints) -> tuple[list[OccupancySpectrum], int]:
    """One pass over the stream, snapshotting the spectrum at each checkpoint.

    Returns the snapshots and the number of symbols the sampler produced.
    """
    stream = SeededStream(law, seed)
    counter = OccupancyCounter()
    snaps = []
    done = 0
    for cp in checkpoints:
        while done < cp:
            step = min(cp - done, 1 << 20)
            counter.observe_many(stream.sample_codes(step))
            done += step
        snaps.append(counter.spectrum())
    if stream.position != checkpoints[-1] or stream.generated >= stream.position + BLOCK_SIZE:
        raise RuntimeError("stream was not consumed in a single pass")
    return snaps, stream.generated


def _replica_job(args):
    law_json, epsilon, seed, checkpoints = args
    snaps, drawn = run_replica(_law(law_json, epsilon), seed, checkpoints)
    return [s.to_dict() for s in snaps], drawn


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RR_THREADS", "1")))
    except ValueError:
        return 1


def simulate(config: ExperimentConfig, threads: int | None = None) -> list[list[OccupancySpectrum]]:
    """Per-replica checkpoint spectra, ordered by replica index."""
    threads = _threads() if threads is None else threads
    law_json = json.dumps(config.law, sort_keys=True)
    jobs = [(law_json, config.epsilon, child_seed(config.seed, i), config.checkpoints)
            for i in range(config.replicas)]
    if threads > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=min(threads, config.replicas)) as pool:
            results = list(pool.map(_replica_job, jobs))
    else:
        results = [_replica_job(j) for j in jobs]
    return [[OccupancySpectrum.from_dict(d) for d in snaps] for snaps, _ in results]


# ---------------------------------------------------------------------------
# report


@dataclass
class ConvergenceReport:
    config: dict
    law: dict
    cells: list[dict] = field(default_factory=list)
    rules: list[dict] = field(default_factory=list)
    range_oracle: list[dict] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rules) and all(r["pass"] for r in self.range_oracle)

    def cell(self, n: int, ratio: str, k: int) -> dict:
        for c in self.cells:
            if c["n"] == n and c["ratio"] == ratio and c["k"] == k:
                return c
        raise KeyError((n, ratio, k))

    def to_dict(self) -> dict:
        return {"config": self.config, "law": self.law, "passed": self.passed,
                "cells": self.cells, "rules": self.rules, "rangeOracle": self.range_oracle}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["run_id", "seed", "n", "ratio", "k", "observed", "predicted", "gap"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()


def _mean_std(values):
    a = np.asarray(values, dtype=float)
    mean = float(np.mean(a))
    std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return mean, std


def build_report(config: ExperimentConfig, spectra: list[list[OccupancySpectrum]]) -> ConvergenceReport:
    law = config.law_obj
    regime = law.regime()
    report = ConvergenceReport(config.to_dict(), law.describe())
    seeds = [child_seed(config.seed, i) for i in range(config.replicas)]

    for ci, n in enumerate(config.checkpoints):
        for rs in config.ratios:
            for k in rs.ks:
                pred = predict(regime, rs.name, k).value
                obs = [ratio_value(snaps[ci], rs.name, k) for snaps in spectra]
                for i, o in enumerate(obs):
                    report.rows.append({"run_id": i, "seed": seeds[i], "n": n, "ratio": rs.name.value,
                                        "k": k, "observed": o, "predicted": pred, "gap": abs(o - pred)})
                mean, std = _mean_std(obs)
                report.cells.append({"n": n, "ratio": rs.name.value, "k": k, "mean": mean, "std": std,
                                     "predicted": pred, "gap": abs(mean - pred)})

    for rs in config.ratios:
        for k in rs.ks:
            series = [report.cell(n, rs.name.value, k) for n in config.checkpoints]
            pred = series[-1]["predicted"]
            rule = rs.rule if rs.rule != "auto" else ("trend" if pred == 0.0 else "band")
            means = [c["mean"] for c in series]
            entry = {"ratio": rs.name.value, "k": k, "rule": rule, "predicted": pred, "means": means}
            if rule == "band":
                entry["tolerance"] = rs.tolerance
                entry["pass"] = bool(series[-1]["gap"] <= rs.tolerance)
            else:
                entry["slack"], entry["ceiling"] = rs.slack, rs.ceiling
                steps_ok = all(b <= a + rs.slack for a, b in zip(means, means[1:]))
                entry["pass"] = bool(steps_ok and means[-1] <= rs.ceiling)
            report.rules.append(entry)

    if config.range_oracle:
        for ci, n in enumerate(config.checkpoints):
            mean, std = _mean_std([snaps[ci].distinct for snaps in spectra])
            expected = expected_range(law, n)
            se = std / math.sqrt(config.replicas)
            # R_n is integer valued: when every replica agrees, the standard
            # error is zero but the mean is only resolved to about 3/replicas
            # (rule of three on the chance of an off-by-one replica)
            floor = 3.0 / config.replicas if std == 0.0 else 0.0
            tol = max(4.0 * se, floor, 1e-9 * max(1.0, expected))
            report.range_oracle.append({"n": n, "meanRange": mean, "stdRange": std,
                                        "expectedRange": expected, "standardError": se,
                                        "gap": abs(mean - expected), "tolerance": tol,
                                        "pass": bool(abs(mean - expected) <= tol)})
    return report


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ConvergenceReport:
    return build_report(config, simulate(config, threads))


def write_outputs(report: ConvergenceReport, config: ExperimentConfig) -> None:
    if config.json_path:
        with open(config.json_path, "w") as fh:
            fh.write(report.to_json())
    if config.csv_path:
        with open(config.csv_path, "w", newline="") as fh:
            fh.write(report.to_csv())
