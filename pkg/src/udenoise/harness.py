"""Experiment orchestration: synthetic sources, corruption, metrics, sweeps.

A JSON config describes a clean source, a channel, a loss, pipeline
parameters and sweep lists; ``run_experiment`` produces a CSV of per-run
metric rows plus a JSON summary with per-(n, k) medians.  Outputs are
deterministic: every row derives its random stream from the master seed and
its own row index, so thread scheduling cannot change the results.  Wall
times go to a separate timings file so the main outputs stay byte-identical
across reruns.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import parse_channel_spec
from .denoise import (LossFunction, cumulative_loss, denoise_sliding,
                      denoise_symbolwise, genie_d0, genie_dk)
from .inversion import SupportGrid, empirical_cdf, levy_distance
from .seqio import load_pgm


class HarnessError(ValueError):
    pass


_SOURCE_KINDS = ("constant", "two-point", "periodic", "markov-chain",
                 "image-file")


@dataclass
class ExperimentConfig:
    source: dict
    channel: str
    loss: str = "squared"
    Delta: float = 1.0 / 32.0
    delta: float = 1.0 / 256.0
    bandwidth: str | float = "silverman"
    grid_points: int = 512
    n_values: list = field(default_factory=lambda: [1000])
    k_values: list = field(default_factory=lambda: [0])
    num_seeds: int = 1
    seed: int = 0
    genie_budget: int = 20_000
    output_dir: str = "."
    clip_noisy: bool = False

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise HarnessError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**raw)
        config.validate()
        return config

    def validate(self):
        kind = self.source.get("kind")
        if kind not in _SOURCE_KINDS:
            raise HarnessError(f"unknown source kind {kind!r}")
        if kind == "image-file":
            path = self.source.get("path")
            if not path or not Path(path).exists():
                raise HarnessError(f"image file not found: {path}")
        channel = parse_channel_spec(self.channel)
        a, b = channel.input_range
        if not 0 < self.Delta <= b - a:
            raise HarnessError(f"Delta must lie in (0, {b - a}]")
        if not 0 < self.delta <= 1:
            raise HarnessError("delta must lie in (0, 1]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise HarnessError("seed must be a 64-bit integer")
        if self.loss not in ("squared", "absolute"):
            raise HarnessError(f"unknown loss {self.loss!r}")
        return self


@dataclass
class MetricsRow:
    n: int
    k: int
    seed: int
    rmse_noisy: float
    rmse_denoised: float
    cumulative_loss: float
    genie_benchmark: float
    lp_objective: float
    levy: float
    error: str = ""
    wall_time: float = 0.0

    CSV_FIELDS = ("n", "k", "seed", "rmse-noisy", "rmse-denoised",
                  "cumulative-loss", "genie-benchmark", "lp-objective",
                  "levy", "error")

    def csv_values(self):
        return (self.n, self.k, self.seed,
                _fmt(self.rmse_noisy), _fmt(self.rmse_denoised),
                _fmt(self.cumulative_loss), _fmt(self.genie_benchmark),
                _fmt(self.lp_objective), _fmt(self.levy), self.error)


def _fmt(value):
    return "" if value is None or not np.isfinite(value) else f"{value:.12g}"


# ---------------------------------------------------------------------------
# sources


def make_source(spec):
    """Returns draw(n, rng) -> clean sequence (or image for image-file)."""
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec.get("value", 0.5))
        return lambda n, rng: np.full(n, value)
    if kind == "two-point":
        values = np.asarray(spec.get("values", [0.25, 0.75]), dtype=float)
        p = float(spec.get("p", 0.5))
        if values.size != 2 or not 0 <= p <= 1:
            raise HarnessError("two-point source needs 2 values and p in [0,1]")
        return lambda n, rng: values[(rng.random(n) < p).astype(int)]
    if kind == "periodic":
        pattern = np.asarray(spec.get("pattern", [0.25, 0.75]), dtype=float)
        if pattern.size == 0:
            raise HarnessError("periodic source needs a nonempty pattern")
        return lambda n, rng: np.tile(pattern, n // pattern.size + 1)[:n]
    if kind == "markov-chain":
        states = np.asarray(spec.get("states", [0.25, 0.75]), dtype=float)
        P = np.asarray(spec.get("transition",
                                [[0.9, 0.1], [0.1, 0.9]]), dtype=float)
        if P.shape != (states.size, states.size) or \
                not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
            raise HarnessError("transition matrix must be row-stochastic over "
                               "the states")
        start = np.asarray(spec.get("start", np.full(states.size,
                                                     1.0 / states.size)),
                           dtype=float)

        def draw(n, rng):
            idx = np.empty(n, dtype=int)
            idx[0] = rng.choice(states.size, p=start)
            cdf = np.cumsum(P, axis=1)
            u = rng.random(n)
            for i in range(1, n):
                idx[i] = np.searchsorted(cdf[idx[i - 1]], u[i], side="right")
            return states[idx]

        return draw
    if kind == "image-file":
        image = load_pgm(spec["path"]).astype(float)
        return lambda n, rng: image
    raise HarnessError(f"unknown source kind {kind!r}")


# ---------------------------------------------------------------------------
# corruption and metrics


def row_rng(master_seed, row_index):
    """Independent stream for one row, stable under scheduling order."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(master_seed),
                               spawn_key=(int(row_index),)))


def corrupt_image(image, channel, seed):
    """Per-pixel independent corruption; output stays real-valued."""
    image = np.asarray(image, dtype=float)
    rng = row_rng(seed, 0)
    return channel.sample(image, rng)


def rmse(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise HarnessError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ---------------------------------------------------------------------------
# experiment driver


def _run_row(config, channel, loss, source, row_index, n, k):
    rng = row_rng(config.seed, row_index)
    start = time.perf_counter()
    clean = source(n, rng)
    is_image = clean.ndim == 2
    flat_clean = clean.reshape(-1)
    noisy = channel.sample(clean, rng)
    if config.clip_noisy:
        a, b = channel.input_range
        noisy = np.clip(noisy, a, b)
    flat_noisy = noisy.reshape(-1)
    if k == 0:
        xhat, diag = denoise_symbolwise(
            flat_noisy, channel, loss, config.Delta, config.delta,
            bandwidth=config.bandwidth, grid_points=config.grid_points)
    else:
        xhat, diag = denoise_sliding(
            flat_noisy, channel, loss, k, config.Delta, config.delta,
            bandwidth=config.bandwidth)
    a, b = channel.input_range
    grid = SupportGrid(a=a, b=b, Delta=config.Delta)
    genie, _err = genie_dk(flat_clean, channel, loss, k, grid,
                           budget=config.genie_budget, seed=row_index)
    pmf = diag.pmf
    clean_breaks, clean_heights = empirical_cdf(flat_clean)
    pmf_breaks, pmf_heights = pmf.cdf()
    levy = levy_distance(clean_breaks, clean_heights, pmf_breaks, pmf_heights)
    elapsed = time.perf_counter() - start
    return MetricsRow(
        n=int(flat_clean.size), k=int(k), seed=int(row_index),
        rmse_noisy=rmse(flat_clean, flat_noisy),
        rmse_denoised=rmse(flat_clean, xhat),
        cumulative_loss=cumulative_loss(flat_clean, xhat, loss),
        genie_benchmark=genie,
        lp_objective=diag.lp_objective,
        levy=levy,
        wall_time=elapsed,
    )


def run_experiment(config, threads=1):
    """Execute the sweep and write rows.csv, summary.json and timings.csv in
    the configured output directory.  Returns the list of MetricsRow."""
    config.validate()
    channel = parse_channel_spec(config.channel)
    a, b = channel.input_range
    loss = LossFunction(config.loss, a, b)
    source = make_source(config.source)
    jobs = []
    row_index = 0
    for n in config.n_values:
        for k in config.k_values:
            for _ in range(config.num_seeds):
                jobs.append((row_index, int(n), int(k)))
                row_index += 1

    def work(job):
        idx, n, k = job
        try:
            return _run_row(config, channel, loss, source, idx, n, k)
        except Exception as exc:  # keep the sweep going, record the failure
            return MetricsRow(n=n, k=k, seed=idx, rmse_noisy=np.nan,
                              rmse_denoised=np.nan, cumulative_loss=np.nan,
                              genie_benchmark=np.nan, lp_objective=np.nan,
                              levy=np.nan, error=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    rows.sort(key=lambda r: (r.n, r.k, r.seed))

    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "rows.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricsRow.CSV_FIELDS)
        for row in rows:
            writer.writerow(row.csv_values())
    with open(outdir / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("n", "k", "seed", "wall-time"))
        for row in rows:
            writer.writerow((row.n, row.k, row.seed, f"{row.wall_time:.3f}"))
    summary = _summarize(rows)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows


def _summarize(rows):
    groups = {}
    for row in rows:
        if row.error:
            continue
        groups.setdefault((row.n, row.k), []).append(row)
    summary = {"cells": [], "series": {"excess-loss": [], "levy": []}}
    for (n, k) in sorted(groups):
        cell = groups[(n, k)]
        losses = [r.cumulative_loss for r in cell]
        excess = [r.cumulative_loss - r.genie_benchmark for r in cell]
        levies = [r.levy for r in cell]
        summary["cells"].append({
            "n": n, "k": k, "runs": len(cell),
            "median-cumulative-loss": float(np.median(losses)),
            "median-excess-loss": float(np.median(excess)),
            "median-levy": float(np.median(levies)),
            "median-rmse-denoised": float(np.median(
                [r.rmse_denoised for r in cell])),
        })
        summary["series"]["excess-loss"].append([n, float(np.median(excess))])
        summary["series"]["levy"].append([n, float(np.median(levies))])
    failed = [r for r in rows if r.error]
    summary["failed-rows"] = [{"n": r.n, "k": r.k, "seed": r.seed,
                               "error": r.error} for r in failed]
    return summary
