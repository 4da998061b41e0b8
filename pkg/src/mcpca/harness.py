"""Experiment orchestration: paired comparisons of the three estimators.

One experiment builds the chain, the per-state distributions, and the true
covariance once, then per trial draws a single stationary path and a single
sample stream that all three algorithms consume (full-stream updates,
every-k-th-sample updates, and the offline prefix baseline). Trials are
seeded as mix64(master_seed, 16 + trial); indices 0 and 1 are reserved for
the experiment-wide Bernoulli parameter draw and the assumption-bound
probes. Results are emitted in canonical order, so repeated runs with one
master seed produce byte-identical CSV.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ConfigError
from .markov import analyze_spectrum, make_rho_chain, mixing_profile, sample_path
from .offline import offline_trace
from .seeds import mix64
from .statedist import (BERNOULLI, UNIFORM, draw_path_samples,
                        estimate_assumption_bounds, make_benchmark_states,
                        total_covariance)
from .streaming import (CONSERVATIVE, NOISE_STREAM, PATH_STREAM, PRACTICAL,
                        StepSchedule, checkpoint_grid, conservative_schedule,
                        practical_schedule, run_downsampled_oja, run_oja)

_P_STREAM_INDEX = 0
_BOUNDS_STREAM_INDEX = 1
_TRIAL_BASE = 16

ALGORITHMS = ("oja", "oja_downsampled", "offline")

_INT_FIELDS = {"n_states", "dim", "n_samples", "n_trials", "downsample_k",
               "master_seed", "checkpoint_start"}
_FLOAT_FIELDS = {"alpha", "beta", "delta", "checkpoint_ratio"}
_LISTABLE_FIELDS = {"rho", "sigma_beta"}
_STR_FIELDS = {"base_noise", "schedule"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description; `rho` or `sigma_beta` may hold a
    list of values for sweeps."""

    n_states: int = 10
    dim: int = 50
    rho: float | tuple[float, ...] = 0.2
    sigma_beta: float | tuple[float, ...] = 1.0
    base_noise: str = BERNOULLI
    n_samples: int = 100_000
    n_trials: int = 20
    schedule: str = PRACTICAL
    alpha: float | None = None
    beta: float | None = None
    delta: float = 0.5
    downsample_k: int = 10
    master_seed: int = 20240
    checkpoint_start: int = 100
    checkpoint_ratio: float = 1.25

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.base_noise not in (BERNOULLI, UNIFORM):
            raise ConfigError(f"unknown base_noise {self.base_noise!r}")
        if self.schedule not in (PRACTICAL, CONSERVATIVE):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.downsample_k < 1:
            raise ConfigError("downsample_k must be >= 1")

    def swept_field(self) -> str | None:
        listed = [name for name in _LISTABLE_FIELDS
                  if isinstance(getattr(self, name), tuple)]
        if len(listed) > 1:
            raise ConfigError("at most one of rho/sigma_beta may hold a list")
        return listed[0] if listed else None

    def checkpoints(self) -> np.ndarray:
        return checkpoint_grid(self.n_samples, self.checkpoint_start,
                               self.checkpoint_ratio)


class ResultRow(NamedTuple):
    trial_id: int
    algorithm: str
    checkpoint_n: int
    sin2_error: float
    seed: int


@dataclass(eq=False)
class ResultTable:
    rows: list[ResultRow]
    meta: dict = field(default_factory=dict)

    def sorted(self) -> "ResultTable":
        order = sorted(self.rows, key=lambda r: (r.trial_id, r.algorithm, r.checkpoint_n))
        return ResultTable(rows=order, meta=dict(self.meta))

    def errors_at(self, algorithm: str, checkpoint_n: int) -> np.ndarray:
        """Per-trial errors for one algorithm at one checkpoint, trial order."""
        picked = [(r.trial_id, r.sin2_error) for r in self.rows
                  if r.algorithm == algorithm and r.checkpoint_n == checkpoint_n]
        return np.array([e for _, e in sorted(picked)])

    def mean_curve(self, algorithm: str) -> tuple[np.ndarray, np.ndarray]:
        cps = np.unique([r.checkpoint_n for r in self.rows if r.algorithm == algorithm])
        means = np.array([self.errors_at(algorithm, c).mean() for c in cps])
        return cps, means

    def median_curve(self, algorithm: str) -> tuple[np.ndarray, np.ndarray]:
        cps = np.unique([r.checkpoint_n for r in self.rows if r.algorithm == algorithm])
        meds = np.array([np.median(self.errors_at(algorithm, c)) for c in cps])
        return cps, meds

    def final_checkpoint(self) -> int:
        return max(r.checkpoint_n for r in self.rows)


def _build_schedule(config: ExperimentConfig, chain, spectrum, truth,
                    dist) -> StepSchedule:
    if config.schedule == CONSERVATIVE:
        bounds = estimate_assumption_bounds(
            dist, spectrum.stationary, n_probe=2000,
            seed=mix64(config.master_seed, _BOUNDS_STREAM_INDEX))
        tau = mixing_profile(chain, spectrum).tau_mix(0.25)
        return conservative_schedule(truth.gap, config.delta, tau, bounds.v_bound,
                                bounds.m_bound, truth.lambda1, spectrum.lambda2_abs,
                                alpha=3.0 if config.alpha is None else config.alpha)
    base = practical_schedule(truth.gap, spectrum.lambda2_abs)
    if config.alpha is not None or config.beta is not None:
        base = StepSchedule(
            alpha=base.alpha if config.alpha is None else config.alpha,
            beta=base.beta if config.beta is None else config.beta,
            gap=truth.gap, mode=PRACTICAL)
    return base


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run all three algorithms over n_trials paired sample streams."""
    if config.swept_field() is not None:
        raise ConfigError("run_experiment takes scalar fields; use sweep()")
    rho = float(config.rho)
    sigma_beta = float(config.sigma_beta)
    chain = make_rho_chain(config.n_states, rho)
    spectrum = analyze_spectrum(chain)
    dist = make_benchmark_states(config.n_states, config.dim, sigma_beta,
                             seed=mix64(config.master_seed, _P_STREAM_INDEX),
                             noise=config.base_noise)
    truth = total_covariance(dist, spectrum.stationary)
    schedule = _build_schedule(config, chain, spectrum, truth, dist)
    down_schedule = schedule.downsampled(config.downsample_k)
    cps = config.checkpoints()

    rows: list[ResultRow] = []
    for trial in range(config.n_trials):
        tseed = mix64(config.master_seed, _TRIAL_BASE + trial)
        path = sample_path(chain, spectrum, config.n_samples,
                           mix64(tseed, PATH_STREAM))
        samples = draw_path_samples(
            dist, path, np.random.default_rng(mix64(tseed, NOISE_STREAM)))
        traces = [
            run_oja(path, dist, schedule, cps, truth, tseed, samples=samples),
            run_downsampled_oja(path, dist, down_schedule, config.downsample_k,
                                cps, truth, tseed, samples=samples),
            offline_trace(samples, cps, truth, tseed),
        ]
        crcs = {t.stream_crc for t in traces}
        if len(crcs) != 1:
            raise AssertionError("paired-path invariant broken: stream checksums differ")
        for tr in traces:
            rows += [ResultRow(trial, tr.algorithm, int(c), float(e), tseed)
                     for c, e in zip(tr.checkpoints, tr.errors)]

    meta = {
        "rho": rho,
        "sigma_beta": sigma_beta,
        "base_noise": config.base_noise,
        "n_samples": config.n_samples,
        "n_trials": config.n_trials,
        "master_seed": config.master_seed,
        "lambda1": truth.lambda1,
        "lambda2": truth.lambda2,
        "gap": truth.gap,
        "lambda2_chain_abs": spectrum.lambda2_abs,
        "schedule_mode": schedule.mode,
        "alpha": schedule.alpha,
        "beta": schedule.beta,
        "eta0": schedule.eta0,
        "eta0_exceeds_one": schedule.eta0_exceeds_one,
        "downsample_k": config.downsample_k,
        "kernel_backend": _kernels.BACKEND,
    }
    if dist.base_noise.kind == BERNOULLI:
        meta["bernoulli_p"] = dist.base_noise.p
    table = ResultTable(rows=rows, meta=meta).sorted()
    # medians alongside the mean curves, for outlier-robust comparisons
    n_final = table.final_checkpoint()
    for alg in ALGORITHMS:
        table.meta[f"median_final_{alg}"] = float(
            np.median(table.errors_at(alg, n_final)))
    return table


def sweep(config: ExperimentConfig) -> list[ResultTable]:
    """Expand the single list-valued field into one experiment per value,
    all sharing the master seed (and hence per-trial seeds)."""
    name = config.swept_field()
    if name is None:
        raise ConfigError("sweep needs exactly one list-valued field")
    tables = []
    for value in getattr(config, name):
        scalar = dataclasses.replace(config, **{name: float(value)})
        table = run_experiment(scalar)
        table.meta["swept_field"] = name
        table.meta["swept_value"] = float(value)
        tables.append(table)
    return tables


CSV_HEADER = "trial_id\talgorithm\tcheckpoint_n\tsin2_error\tseed"


def to_csv(table: ResultTable) -> str:
    lines = [CSV_HEADER]
    for r in table.sorted().rows:
        lines.append(f"{r.trial_id}\t{r.algorithm}\t{r.checkpoint_n}"
                     f"\t{r.sin2_error!r}\t{r.seed}")
    return "\n".join(lines) + "\n"


def from_csv(text: str) -> ResultTable:
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("unrecognized CSV header")
    rows = []
    for ln in lines[1:]:
        t, alg, c, e, s = ln.split("\t")
        rows.append(ResultRow(int(t), alg, int(c), float(e), int(s)))
    return ResultTable(rows=rows)


_SVG_COLORS = {"oja": "#1f77b4", "oja_downsampled": "#d62728", "offline": "#2ca02c"}


def to_svg(table: ResultTable) -> str:
    """Log-log mean-error curves, one polyline per algorithm; self-contained
    SVG with axes and tick labels, no external renderer required."""
    algs = sorted({r.algorithm for r in table.rows})
    curves = {}
    for alg in algs:
        cps, means = table.mean_curve(alg)
        curves[alg] = (np.log10(cps), np.log10(np.maximum(means, 1e-300)))
    xs = np.concatenate([c[0] for c in curves.values()])
    ys = np.concatenate([c[1] for c in curves.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    W, H, m = 640.0, 480.0, 60.0

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
        f'viewBox="0 0 {W:.0f} {H:.0f}">',
        f'<rect width="{W:.0f}" height="{H:.0f}" fill="white"/>',
        f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 15:.1f}" text-anchor="middle" '
        f'font-size="14">sample size n (log10)</text>',
        f'<text x="18" y="{H / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {H / 2:.1f})">mean sin&#178; error (log10)</text>',
    ]
    for tick in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{px(tick):.1f}" y="{H - m + 20:.1f}" '
                     f'text-anchor="middle" font-size="11">{tick:.2f}</text>')
    for tick in np.linspace(y0, y1, 5):
        parts.append(f'<text x="{m - 8:.1f}" y="{py(tick) + 4:.1f}" '
                     f'text-anchor="end" font-size="11">{tick:.2f}</text>')
    for j, alg in enumerate(algs):
        lx, ly = curves[alg]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(lx, ly))
        color = _SVG_COLORS.get(alg, "#555555")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{W - m - 150:.1f}" y="{m + 16 * (j + 1):.1f}" '
                     f'font-size="12" fill="{color}">{alg}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit(table: ResultTable, fmt: str, path: str) -> None:
    """Write a table as CSV or as log-log SVG curves."""
    if not table.rows:
        raise ValueError("refusing to emit an empty table")
    if fmt == "csv":
        payload = to_csv(table)
    elif fmt == "svg-lines":
        payload = to_svg(table)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(payload)


def meta_text(table: ResultTable) -> str:
    return "".join(f"{k}={table.meta[k]}\n" for k in sorted(table.meta))


_ALL_FIELDS = (_INT_FIELDS | _FLOAT_FIELDS | _LISTABLE_FIELDS | _STR_FIELDS)


def parse_config(text: str) -> ExperimentConfig:
    """Flat key=value format, '#' comments; unknown keys rejected."""
    values: dict = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _ALL_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_FIELDS:
                values[key] = int(val)
            elif key in _FLOAT_FIELDS:
                values[key] = float(val)
            elif key in _LISTABLE_FIELDS:
                items = [float(v) for v in val.split(",") if v.strip()]
                values[key] = tuple(items) if len(items) > 1 else items[0]
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return ExperimentConfig(**values)


def sign_test_pvalue(wins: int, n: int) -> float:
    """One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2)."""
    if not (0 <= wins <= n):
        raise ValueError("wins must lie in [0, n]")
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n
