"""Replicated convergence studies for MC/QMC/RQMC risk estimation.

The harness runs each configured sampler over a grid of sample sizes,
estimates the p-quantile and expected shortfall on every replication,
aggregates bias and MSE against a truth oracle, and emits a CSV table.
Truth comes from a closed form when the model has one, from explicit
values, or from a large pseudorandom run (``mc_truth``).

Reproducibility contract: a given ``ExperimentConfig`` yields a
byte-identical ``ResultTable`` regardless of thread count.  MC replications
draw from a counter-based generator keyed by (master_seed, stream tag, N,
replication); randomized QMC replication r uses a scramble seed derived
from (master_seed, r).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bits import child_seed
from .errors import ConfigError, WorkLimitError
from .estimators import SampleBatch, order_index, quantile_estimate, shortfall_estimate
from .lowdisc import sobol_points
from .models import Model, model_from_section, parse_sections
from .randomize import KIND_OWEN, KIND_SHIFT, ScrambleSpec, randomize

SAMPLERS = ("mc", "qmc-sobol", "rqmc-owen", "rqmc-shift")

DEFAULT_GRID: Tuple[int, ...] = tuple(2 ** i for i in range(8, 17))
FULL_GRID: Tuple[int, ...] = tuple(2 ** i for i in range(8, 21))

CSV_HEADER = "sampler,N,R,q_mean,q_bias,q_mse,es_mean,es_bias,es_mse,mse_stderr"

# pseudorandom stream tags: MC replications vs truth runs must never collide
_MC_STREAM_TAG = 0x6D63
_TRUTH_STREAM_TAG = 0x74727574

_TRUTH_BLOCK = 1 << 19
_MAX_BRACKET = 1 << 24
_HIST_BINS = 1 << 16

# below this many total draws the smallest grid point sits in the
# pre-asymptotic regime and is dropped from rate fits
RATE_FIT_MIN_DRAWS = 1 << 12

ProgressFn = Optional[Callable[[str], None]]


def _check_level(p: float) -> float:
    if not 0.0 < float(p) < 1.0:
        raise ConfigError(f"p: risk level must lie in (0, 1), got {p}")
    return float(p)


@dataclass(frozen=True)
class TruthSpec:
    """Where the reference (v, c) comes from.

    kind "auto" uses the model's closed form, "explicit" takes the given
    values, "mc" runs a large pseudorandom estimation.
    """

    kind: str = "auto"
    v: Optional[float] = None
    c: Optional[float] = None
    n: int = 10 ** 8
    seed: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("auto", "explicit", "mc"):
            raise ConfigError(f"truth: unknown kind {self.kind!r} (expected auto, explicit or mc)")
        if self.kind == "explicit" and (self.v is None or self.c is None):
            raise ConfigError("truth: explicit truth needs both truth_v and truth_c")


@dataclass(frozen=True)
class TruthResult:
    v: float
    c: float
    v_stderr: float
    c_stderr: float
    source: str
    n: int


@dataclass(frozen=True)
class ExperimentConfig:
    model: Model
    p: float = 0.1
    samplers: Tuple[str, ...] = SAMPLERS
    n_grid: Tuple[int, ...] = DEFAULT_GRID
    replications: int = 100
    master_seed: int = 0
    truth: TruthSpec = TruthSpec()

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _check_level(self.p))
        samplers = tuple(self.samplers)
        if not samplers:
            raise ConfigError("samplers: need at least one sampler")
        seen = set()
        for s in samplers:
            if s not in SAMPLERS:
                raise ConfigError(f"samplers: unknown sampler {s!r} (expected one of: {', '.join(SAMPLERS)})")
            if s in seen:
                raise ConfigError(f"samplers: duplicate sampler {s!r}")
            seen.add(s)
        object.__setattr__(self, "samplers", samplers)
        grid = tuple(int(n) for n in self.n_grid)
        if not grid:
            raise ConfigError("n_grid: need at least one sample size")
        for n in grid:
            if n < 1 or n & (n - 1):
                raise ConfigError(f"n_grid: sample sizes must be powers of 2, got {n}")
        if list(grid) != sorted(set(grid)):
            raise ConfigError("n_grid: sample sizes must be strictly ascending")
        object.__setattr__(self, "n_grid", grid)
        if int(self.replications) < 1:
            raise ConfigError(f"replications: must be >= 1, got {self.replications}")
        object.__setattr__(self, "replications", int(self.replications))
        seed = int(self.master_seed)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("master_seed: must fit in 64 bits")
        object.__setattr__(self, "master_seed", seed)


@dataclass(frozen=True)
class ResultRow:
    sampler: str
    n: int
    r: int
    q_mean: float
    q_bias: float
    q_mse: float
    es_mean: float
    es_bias: float
    es_mse: float
    mse_stderr: float


@dataclass(frozen=True)
class ResultTable:
    rows: Tuple[ResultRow, ...]
    truth: TruthResult

    def for_sampler(self, sampler: str) -> Tuple[ResultRow, ...]:
        return tuple(r for r in self.rows if r.sampler == sampler)

    def to_csv(self) -> str:
        """One row per (sampler, N), 9 significant digits.

        qmc-sobol runs are deterministic: their rows carry R = 1, the mse
        columns hold the squared error of the single run, and mse_stderr
        is 0.
        """
        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(
                "%s,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g"
                % (
                    row.sampler,
                    row.n,
                    row.r,
                    row.q_mean,
                    row.q_bias,
                    row.q_mse,
                    row.es_mean,
                    row.es_bias,
                    row.es_mse,
                    row.mse_stderr,
                )
            )
        return "\n".join(lines) + "\n"


def mc_stream_seed(master_seed: int, n: int, replication: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, _MC_STREAM_TAG, n, replication])


def sample_points(
    sampler: str,
    n: int,
    dim: int,
    seed: int = 0,
    replication: int = 0,
) -> np.ndarray:
    """Generate an (n, dim) batch in [0,1) for the named sampler.

    "mc" draws from a counter-based pseudorandom stream keyed by
    (seed, N, replication); the QMC samplers take the first n points of
    the digital sequence, randomized per the sampler name.
    """
    if n < 1:
        raise ConfigError(f"count: must be >= 1, got {n}")
    if sampler == "mc":
        gen = np.random.Generator(np.random.Philox(mc_stream_seed(seed, n, replication)))
        return gen.random((n, dim))
    if sampler == "qmc-sobol":
        return np.asarray(sobol_points(n, dim).points)
    if sampler in ("rqmc-owen", "rqmc-shift"):
        kind = KIND_OWEN if sampler == "rqmc-owen" else KIND_SHIFT
        spec = ScrambleSpec(kind, seed=child_seed(seed, replication))
        return np.asarray(randomize(sobol_points(n, dim), spec).points)
    raise ConfigError(f"sampler: unknown sampler {sampler!r} (expected one of: {', '.join(SAMPLERS)})")


def resolve_truth(model: Model, p: float, spec: TruthSpec, progress: ProgressFn = None) -> TruthResult:
    p = _check_level(p)
    if spec.kind == "explicit":
        return TruthResult(float(spec.v), float(spec.c), 0.0, 0.0, "explicit", 0)
    if spec.kind == "mc":
        return mc_truth(model, p, spec.n, seed=spec.seed, progress=progress)
    v = model.true_quantile(p)
    c = model.true_shortfall(p)
    if v is None or c is None:
        raise ConfigError(
            "truth: model has no closed form; set truth = mc or give truth_v and truth_c"
        )
    return TruthResult(float(v), float(c), 0.0, 0.0, "closed-form", 0)


def _truth_stream(model: Model, n_truth: int, seed: int, block_size: int):
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, _TRUTH_STREAM_TAG])))
    remaining = n_truth
    while remaining > 0:
        m = min(block_size, remaining)
        yield model.evaluate(gen.random((m, model.dim)))
        remaining -= m


def mc_truth(
    model: Model,
    p: float,
    n_truth: int,
    seed: int = 1,
    block_size: int = _TRUTH_BLOCK,
    progress: ProgressFn = None,
) -> TruthResult:
    """Large-sample pseudorandom reference values for (v, c).

    Two streaming passes over the same counter-based stream: the first
    builds a histogram to bracket the p-quantile, the second selects the
    exact order statistic inside the bracket and accumulates the shortfall
    sums.  If the bracket would not fit in memory (or the quantile falls
    outside the histogram range) the histogram is rebuilt finer over the
    observed range and both passes rerun once.

    ``block_size`` only sets the streaming granularity: the underlying
    stream is identical for any blocking, so v is exactly reproducible and
    c varies only by summation roundoff.
    """
    p = _check_level(p)
    n_truth = int(n_truth)
    if n_truth < 10 ** 6:
        raise ConfigError(f"truth_n: need at least 1e6 samples for a stable bracket, got {n_truth}")
    k = order_index(p, n_truth)
    n_blocks = (n_truth + block_size - 1) // block_size

    def first_pass(lo: float, hi: float, bins: int):
        counts = np.zeros(bins, dtype=np.int64)
        below = 0
        gmin = math.inf
        gmax = -math.inf
        inv_h = bins / (hi - lo)
        for i, x in enumerate(_truth_stream(model, n_truth, seed, block_size)):
            gmin = min(gmin, float(x.min()))
            gmax = max(gmax, float(x.max()))
            idx = np.floor((x - lo) * inv_h).astype(np.int64)
            inside = (idx >= 0) & (idx < bins)
            counts += np.bincount(idx[inside], minlength=bins)
            below += int(np.count_nonzero(idx < 0))
            if progress is not None and (i + 1) % 32 == 0:
                progress(f"truth pass 1: block {i + 1}/{n_blocks}")
        return counts, below, gmin, gmax

    # histogram range from a pilot block; the retry covers the tail case
    # where the quantile escapes it
    pilot = next(_truth_stream(model, min(block_size, n_truth), seed, block_size))
    pmin, pmax = float(pilot.min()), float(pilot.max())
    span = pmax - pmin
    if span <= 0.0:
        span = max(abs(pmin), 1.0)
    lo = pmin - 0.05 * span
    hi = pmax + 0.05 * span
    bins = _HIST_BINS

    for attempt in range(2):
        counts, below, gmin, gmax = first_pass(lo, hi, bins)
        cum = below + np.cumsum(counts)
        hit = int(np.searchsorted(cum, k))
        in_range = below < k <= int(cum[-1]) and hit < bins
        if in_range and counts[hit] <= _MAX_BRACKET:
            break
        if attempt == 1:
            raise WorkLimitError(
                f"quantile bracket holds {int(counts[hit]) if in_range else 'unknown'} values; "
                f"budget is {_MAX_BRACKET}"
            )
        # rebuild finer over the observed range
        width = gmax - gmin
        if width <= 0.0:
            width = max(abs(gmin), 1.0)
        lo = gmin - 1e-9 * width
        hi = gmax + 1e-9 * width
        bins = min(bins * 16, 1 << 22)

    h = (hi - lo) / bins
    bracket_lo = lo + hit * h
    bracket_hi = lo + (hit + 1) * h

    # second pass: exact selection in the bracket plus shortfall moments
    # pivoted at bracket_lo so the sums can be re-centered at v afterwards
    below_cnt = 0
    s1 = 0.0
    s2 = 0.0
    pieces: List[np.ndarray] = []
    for i, x in enumerate(_truth_stream(model, n_truth, seed, block_size)):
        lower = x < bracket_lo
        d = bracket_lo - x[lower]
        below_cnt += int(d.size)
        s1 += float(d.sum())
        s2 += float((d * d).sum())
        pieces.append(x[(x >= bracket_lo) & (x < bracket_hi)].copy())
        if progress is not None and (i + 1) % 32 == 0:
            progress(f"truth pass 2: block {i + 1}/{n_blocks}")
    buffer = np.concatenate(pieces)

    j = k - below_cnt
    if not 1 <= j <= buffer.size:
        raise WorkLimitError("bracket drifted between passes; stream is not reproducible")
    v = float(np.partition(buffer, j - 1)[j - 1])

    shift = v - bracket_lo
    d2 = np.maximum(v - buffer, 0.0)
    total_s1 = (s1 + below_cnt * shift) + float(d2.sum())
    total_s2 = (s2 + 2.0 * shift * s1 + below_cnt * shift * shift) + float((d2 * d2).sum())
    c = v - total_s1 / (p * n_truth)

    mean_pos = total_s1 / n_truth
    var_pos = max(total_s2 / n_truth - mean_pos * mean_pos, 0.0)
    density = counts[hit] / (n_truth * h)
    v_stderr = math.sqrt(p * (1.0 - p) / n_truth) / density
    c_stderr = math.sqrt(var_pos / n_truth) / p
    return TruthResult(v, c, v_stderr, c_stderr, "mc", n_truth)


def run_convergence(
    cfg: ExperimentConfig,
    threads: Optional[int] = None,
    progress: ProgressFn = None,
) -> ResultTable:
    """Run the replicated study and aggregate bias/MSE per (sampler, N).

    Randomized samplers scramble the largest grid size once per
    replication and reuse prefixes for the smaller sizes; randomization is
    pointwise, so each prefix is bit-identical to scrambling that size
    directly with the same seed.
    """
    model = cfg.model
    truth = resolve_truth(model, cfg.p, cfg.truth, progress=progress)
    if progress is not None:
        progress(f"truth ({truth.source}): v={truth.v:.9g} c={truth.c:.9g}")

    grid = cfg.n_grid
    n_max = grid[-1]
    rows: List[ResultRow] = []

    for sampler in cfg.samplers:
        reps = 1 if sampler == "qmc-sobol" else cfg.replications
        est_q = np.empty((reps, len(grid)))
        est_c = np.empty((reps, len(grid)))
        base = None if sampler == "mc" else sobol_points(n_max, model.dim)

        def run_rep(r: int, sampler: str = sampler, base=base, est_q=est_q, est_c=est_c) -> None:
            if sampler == "mc":
                pts = None
            elif sampler == "qmc-sobol":
                pts = base.points
            else:
                kind = KIND_OWEN if sampler == "rqmc-owen" else KIND_SHIFT
                spec = ScrambleSpec(kind, seed=child_seed(cfg.master_seed, r))
                pts = randomize(base, spec).points
            for j, n in enumerate(grid):
                if sampler == "mc":
                    block = sample_points("mc", n, model.dim, seed=cfg.master_seed, replication=r)
                else:
                    block = pts[:n]
                batch = SampleBatch(model.evaluate(block), label=sampler)
                est_q[r, j] = quantile_estimate(batch, cfg.p)
                est_c[r, j] = shortfall_estimate(batch, cfg.p)

        if threads is not None and threads > 1 and reps > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run_rep, range(reps)))
        else:
            for r in range(reps):
                run_rep(r)
        if progress is not None:
            progress(f"{sampler}: {reps} replication(s) done")

        for j, n in enumerate(grid):
            q = est_q[:, j]
            c = est_c[:, j]
            q_sqerr = (q - truth.v) ** 2
            c_sqerr = (c - truth.c) ** 2
            stderr = float(q_sqerr.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
            rows.append(
                ResultRow(
                    sampler=sampler,
                    n=n,
                    r=reps,
                    q_mean=float(q.mean()),
                    q_bias=float(q.mean() - truth.v),
                    q_mse=float(q_sqerr.mean()),
                    es_mean=float(c.mean()),
                    es_bias=float(c.mean() - truth.c),
                    es_mse=float(c_sqerr.mean()),
                    mse_stderr=stderr,
                )
            )
    return ResultTable(tuple(rows), truth)


def fit_rate(ns: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """OLS fit of log2(error) on log2(N); slope is the convergence order."""
    ns_arr = np.asarray(ns, dtype=np.float64)
    err_arr = np.asarray(errors, dtype=np.float64)
    if ns_arr.size != err_arr.size:
        raise ConfigError("fit_rate: ns and errors must have equal length")
    if ns_arr.size < 3:
        raise ConfigError(f"fit_rate: need at least 3 grid points, got {ns_arr.size}")
    if np.any(err_arr <= 0.0) or not np.all(np.isfinite(err_arr)):
        raise ConfigError("fit_rate: errors must be positive and finite for a log-log fit")
    slope, intercept = np.polyfit(np.log2(ns_arr), np.log2(err_arr), 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class RateFit:
    sampler: str
    metric: str
    slope: float
    intercept: float
    ns: Tuple[int, ...]
    excluded: Tuple[int, ...]


def rate_summary(table: ResultTable, metric: str = "q_mse") -> Dict[str, RateFit]:
    """Per-sampler log-log rate fits of one MSE column.

    Leading grid points with fewer than RATE_FIT_MIN_DRAWS total draws
    (R*N) sit visibly above the asymptote and are excluded; exclusions are
    reported in the fit record.
    """
    if metric not in ("q_mse", "es_mse"):
        raise ConfigError(f"metric: expected q_mse or es_mse, got {metric!r}")
    fits: Dict[str, RateFit] = {}
    seen: List[str] = []
    for row in table.rows:
        if row.sampler not in seen:
            seen.append(row.sampler)
    for sampler in seen:
        rows = table.for_sampler(sampler)
        cut = 0
        while cut < len(rows) - 3 and rows[cut].r * rows[cut].n < RATE_FIT_MIN_DRAWS:
            cut += 1
        used = rows[cut:]
        slope, intercept = fit_rate(
            [row.n for row in used], [getattr(row, metric) for row in used]
        )
        fits[sampler] = RateFit(
            sampler=sampler,
            metric=metric,
            slope=slope,
            intercept=intercept,
            ns=tuple(row.n for row in used),
            excluded=tuple(row.n for row in rows[:cut]),
        )
    return fits


_EXPERIMENT_KEYS = {
    "p",
    "samplers",
    "n_grid",
    "replications",
    "master_seed",
    "truth",
    "truth_n",
    "truth_seed",
    "truth_v",
    "truth_c",
}

_SAMPLER_ALIASES = {
    "mc": "mc",
    "sobol": "qmc-sobol",
    "qmc-sobol": "qmc-sobol",
    "owen": "rqmc-owen",
    "rqmc-owen": "rqmc-owen",
    "shift": "rqmc-shift",
    "rqmc-shift": "rqmc-shift",
}


def _parse_grid_tokens(raw: str) -> Tuple[int, ...]:
    def power(token: str) -> int:
        token = token.strip()
        if token.startswith("2^"):
            return 2 ** int(token[2:])
        return int(token)

    grid: List[int] = []
    for token in raw.replace(",", " ").split():
        if ".." in token:
            first, last = token.split("..", 1)
            a, b = power(first), power(last)
            if a < 1 or a & (a - 1) or b < a:
                raise ConfigError(f"n_grid: bad range {token!r}")
            n = a
            while n <= b:
                grid.append(n)
                n *= 2
        else:
            grid.append(power(token))
    return tuple(grid)


def load_experiment(text: str) -> ExperimentConfig:
    """Parse an experiment config: an [experiment] section plus a [model] section.

    A document with only a [model] section runs with the experiment
    defaults (p=0.1, all samplers, N = 2^8..2^16, R=100).
    """
    parser = parse_sections(text)
    if not parser.has_section("model"):
        raise ConfigError("model: experiment config needs a [model] section")
    model = model_from_section(parser["model"])

    kwargs: Dict[str, object] = {}
    truth_kw: Dict[str, object] = {}
    if parser.has_section("experiment"):
        section = parser["experiment"]
        for key in section:
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"{key}: unknown key in [experiment]")
        try:
            if "p" in section:
                kwargs["p"] = float(section["p"])
            if "replications" in section:
                kwargs["replications"] = int(section["replications"])
            if "master_seed" in section:
                kwargs["master_seed"] = int(section["master_seed"], 0)
            if "truth_n" in section:
                truth_kw["n"] = int(float(section["truth_n"]))
            if "truth_seed" in section:
                truth_kw["seed"] = int(section["truth_seed"], 0)
            if "truth_v" in section:
                truth_kw["v"] = float(section["truth_v"])
            if "truth_c" in section:
                truth_kw["c"] = float(section["truth_c"])
        except ValueError as exc:
            raise ConfigError(f"[experiment]: {exc}") from None
        if "samplers" in section:
            names = []
            for token in section["samplers"].replace(",", " ").split():
                alias = _SAMPLER_ALIASES.get(token.strip().lower())
                if alias is None:
                    raise ConfigError(f"samplers: unknown sampler {token!r}")
                names.append(alias)
            kwargs["samplers"] = tuple(names)
        if "n_grid" in section:
            try:
                kwargs["n_grid"] = _parse_grid_tokens(section["n_grid"])
            except ValueError:
                raise ConfigError(f"n_grid: bad value {section['n_grid']!r}") from None
        if "truth" in section:
            truth_kw["kind"] = section["truth"].strip().lower()
        elif "v" in truth_kw or "c" in truth_kw:
            truth_kw["kind"] = "explicit"
    kwargs["truth"] = TruthSpec(**truth_kw)
    return ExperimentConfig(model=model, **kwargs)
