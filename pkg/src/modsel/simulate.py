"""Seeded Monte Carlo replay of the testing process under a fixed policy."""
from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ModelSpec, ModselError, ValidationError, Violation, as_profile, reliability, validate_model
from .dp import PolicyTable, _check_policy


@dataclass(frozen=True)
class SimulationConfig:
    runs: int
    seed: int
    scoring_profile: tuple[float, ...]
    histogram_bins: int = 50

    def __post_init__(self):
        bad = []
        if int(self.runs) < 1:
            bad.append(Violation("runs", f"{self.runs} < 1"))
        if int(self.histogram_bins) < 1:
            bad.append(Violation("histogram_bins", f"{self.histogram_bins} < 1"))
        if not 0 <= int(self.seed) < 2**64:
            bad.append(Violation("seed", "must be an unsigned 64-bit integer"))
        if bad:
            raise ValidationError(bad)
        object.__setattr__(self, "scoring_profile", tuple(as_profile(self.scoring_profile).tolist()))


@dataclass(frozen=True)
class SimulationStats:
    mean: float
    variance: float  # population variance (divides by runs)
    bin_edges: np.ndarray
    counts: np.ndarray
    terminal_state_counts: dict
    runs: int
    seed: int
    reliabilities: np.ndarray = field(repr=False)

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.variance / self.runs))


def run_rng(seed: int, run: int) -> np.random.Generator:
    """Independent stream for replication ``run``; depends only on ``(seed, run)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run)])))


def simulate_once(model: ModelSpec, policy: PolicyTable, rng: np.random.Generator, scoring_profile):
    """One pass through the ``T`` testing periods.

    Returns ``(terminal defect counts, delivered reliability under scoring_profile)``.
    """
    x = list(model.N)
    theta = model.theta
    for t in range(model.T):
        i = int(policy.choice[(t, *x)])
        if x[i]:
            x[i] = int(rng.binomial(x[i], 1.0 - theta[i]))
    return tuple(x), reliability(x, scoring_profile, theta)


def _run_block(model, policy, cfg, start, stop):
    states, rel = [], np.empty(stop - start)
    for k, run in enumerate(range(start, stop)):
        x, r = simulate_once(model, policy, run_rng(cfg.seed, run), cfg.scoring_profile)
        states.append(x)
        rel[k] = r
    return states, rel


def simulate_many(model: ModelSpec, policy: PolicyTable, cfg: SimulationConfig, workers: int = 1) -> SimulationStats:
    """Run ``cfg.runs`` replications and summarize the delivered reliability.

    Results do not depend on ``workers``: each run has its own stream and the
    per-run outcomes are aggregated in run order.
    """
    model = validate_model(model)
    _check_policy(policy, model)
    if len(cfg.scoring_profile) != model.m:
        raise ValidationError([Violation("scoring_profile", f"length != m={model.m}")])
    workers = max(1, int(workers))
    bounds = np.linspace(0, cfg.runs, min(workers, cfg.runs) + 1).astype(int)
    blocks = list(zip(bounds[:-1], bounds[1:]))
    if workers == 1:
        parts = [_run_block(model, policy, cfg, a, b) for a, b in blocks]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda ab: _run_block(model, policy, cfg, *ab), blocks))
    states = [s for part in parts for s in part[0]]
    rel = np.concatenate([part[1] for part in parts])
    mean = float(np.sum(rel) / cfg.runs)  # numpy sums pairwise
    variance = float(np.sum((rel - mean) ** 2) / cfg.runs)
    counts, edges = np.histogram(rel, bins=cfg.histogram_bins, range=(0.0, 1.0))
    rel.setflags(write=False)
    return SimulationStats(
        mean=mean,
        variance=variance,
        bin_edges=edges,
        counts=counts,
        terminal_state_counts=dict(sorted(Counter(states).items())),
        runs=cfg.runs,
        seed=cfg.seed,
        reliabilities=rel,
    )


def export_histogram(stats: SimulationStats, path, header: str | None = None) -> Path:
    """Write ``bin_lo,bin_hi,count,frequency`` rows; ``header`` becomes a leading ``#`` comment."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            if header:
                f.write(f"# {header}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count", "frequency"])
            for lo, hi, c in zip(stats.bin_edges[:-1], stats.bin_edges[1:], stats.counts):
                w.writerow([f"{lo:.6g}", f"{hi:.6g}", int(c), f"{c / stats.runs:.6g}"])
    except OSError as e:
        raise SimIOError(f"cannot write histogram to {path}: {e}", path) from e
    return path


class SimIOError(ModselError, OSError):
    def __init__(self, message, path):
        self.path = Path(path)
        super().__init__(message)
