"""Single runs and multi-seed sweeps."""
from __future__ import annotations

import dataclasses
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from egodqn.agent import AgentConfig, DqnAgent, Variant
from egodqn.harness.metrics import (
    AGGREGATE_HEADER,
    SUMMARY_HEADER,
    MetricsLog,
    aggregate_curves,
    auc,
    write_rows,
)

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass
class RunConfig(AgentConfig):
    out: str = "results"
    save_agent: bool = False

    def agent_config(self) -> AgentConfig:
        names = {f.name for f in dataclasses.fields(AgentConfig)}
        return AgentConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})


def run_csv_path(out, variant: Variant, seed: int) -> Path:
    return Path(out) / "runs" / variant.value / f"seed{seed}.csv"


def aggregate_csv_path(out, variant: Variant) -> Path:
    return Path(out) / "aggregate" / f"{variant.value}.csv"


def summary_csv_path(out) -> Path:
    return Path(out) / "summary.csv"


def train(config: AgentConfig, progress=None) -> tuple[MetricsLog, DqnAgent]:
    """Prefill, then ``config.episodes`` training episodes."""
    agent = DqnAgent(config)
    n_prefill = agent.prefill()
    log.debug("%s seed %d: %d prefill episodes", config.variant.value, config.seed, n_prefill)
    metrics = MetricsLog()
    for ep in range(1, config.episodes + 1):
        rec = agent.run_episode(ep, "train")
        metrics.append(rec.episode, rec.ret, rec.steps, rec.mean_loss, rec.epsilon)
        if progress:
            progress(rec)
    return metrics, agent


def run(config: RunConfig, progress=None) -> MetricsLog:
    """Train one (variant, seed) pair and write its run CSV under ``config.out``."""
    metrics, agent = train(config.agent_config(), progress)
    metrics.write_csv(run_csv_path(config.out, config.variant, config.seed))
    if config.save_agent:
        agent.save(Path(config.out) / "agents" / config.variant.value / f"seed{config.seed}", config.episodes)
    return metrics


def _run_job(config: RunConfig):
    try:
        return config.variant, config.seed, run(config), None
    except Exception:  # reported by the sweep, other runs continue
        return config.variant, config.seed, None, traceback.format_exc()


@dataclass
class VariantResult:
    variant: Variant
    seeds: list
    logs: list

    @property
    def curves(self) -> np.ndarray:
        return np.array([m.running_mean() for m in self.logs])

    def mean_curve(self) -> np.ndarray:
        return aggregate_curves(self.curves)[0]

    def final_running_mean(self) -> float:
        return float(self.mean_curve()[-1])

    def running_mean_at(self, episode: int) -> float:
        return float(self.mean_curve()[episode - 1])

    def auc(self) -> float:
        return auc(self.mean_curve())

    def stability(self) -> float:
        return float(np.mean([m.stability() for m in self.logs]))


@dataclass
class SweepReport:
    results: dict
    failures: list

    def summary_rows(self) -> list:
        rows = []
        for v, res in self.results.items():
            try:
                stab = res.stability()
            except ValueError:
                stab = float("nan")
            rows.append([v.value, res.final_running_mean(), res.auc(), stab, len(res.seeds)])
        return rows


def write_aggregates(out, results: dict) -> None:
    for v, res in results.items():
        mean, std = aggregate_curves(res.curves)
        rows = [[i + 1, float(m), float(s), len(res.seeds)] for i, (m, s) in enumerate(zip(mean, std))]
        write_rows(aggregate_csv_path(out, v), AGGREGATE_HEADER, rows)


def collect(out, variants, seeds) -> SweepReport:
    """Load existing run CSVs for every (variant, seed) pair found under ``out``."""
    results, failures = {}, []
    for v in variants:
        logs, ok = [], []
        for s in seeds:
            path = run_csv_path(out, v, s)
            if not path.exists():
                failures.append((v, s, f"missing {path}"))
                continue
            logs.append(MetricsLog.read_csv(path))
            ok.append(s)
        if logs:
            lengths = {len(m) for m in logs}
            if len(lengths) != 1:
                raise ValueError(f"{v.value}: runs have different lengths {sorted(lengths)}")
            results[v] = VariantResult(v, ok, logs)
    return SweepReport(results, failures)


def finalize(out, report: SweepReport) -> SweepReport:
    write_aggregates(out, report.results)
    write_rows(summary_csv_path(out), SUMMARY_HEADER, report.summary_rows())
    if report.failures:
        lines = [f"{v.value} seed {s}:\n{err}\n" for v, s, err in report.failures]
        (Path(out) / "failures.txt").write_text("\n".join(lines), encoding="utf-8")
    return report


def sweep(variants, seeds, overrides=None, out="results", parallel=None, skip_existing=False) -> SweepReport:
    """Run every (variant, seed) pair, then write aggregate and summary CSVs."""
    variants = [v if isinstance(v, Variant) else Variant.parse(v) for v in variants]
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    if not variants:
        raise ValueError("sweep needs at least one variant")
    overrides = dict(overrides or {})
    overrides.pop("variant", None)
    overrides.pop("seed", None)
    jobs = []
    for v in variants:
        for s in seeds:
            if skip_existing and run_csv_path(out, v, s).exists():
                continue
            jobs.append(RunConfig(variant=v, seed=s, out=str(out), **overrides))
    parallel = parallel or os.cpu_count() or 1
    failures = []
    if parallel == 1 or len(jobs) <= 1:
        outcomes = map(_run_job, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=parallel)
        outcomes = pool.map(_run_job, jobs)
    for v, s, metrics, err in outcomes:
        if err is not None:
            log.error("run %s seed %d failed:\n%s", v.value, s, err)
            failures.append((v, s, err))
        else:
            log.info("%s seed %d: final running mean %.3f", v.value, s, metrics.running_mean()[-1])
    if parallel != 1 and len(jobs) > 1:
        pool.shutdown()
    report = collect(out, variants, seeds)
    report.failures = failures + [f for f in report.failures if not any(f[:2] == g[:2] for g in failures)]
    return finalize(out, report)
