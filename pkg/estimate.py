"""
Normalized levels and the Monte Carlo estimators that tie simulated series to
gamma and theta: empirical gamma, the block (log-ratio) estimator of theta and
the runs estimator.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from config import Config
from errors import CalibrationError, ValidationError
from margins import Margin, NegatedMargin, PowerMargin, RowMaxMargin, get_margin
from mev_core import TauVector
from model_util import ModelSpec
from simulate import SampleMatrix, SeriesConfig, gen_iid_associated, gen_series, joint_df, rng_for

logger = logging.getLogger(__name__)

# replications handed to one worker at a time
CHUNK = 256


@dataclass(frozen=True)
class LevelSet:
    """
    Per-component levels u_{n,j} with n(1 - F_j(u_{n,j})) = tau_j.

    A zero tau_j drops the coordinate: its level is +inf.
    """

    levels: tuple[float, ...]
    n: int
    tau: TauVector

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)

    def to_dict(self) -> dict:
        # dropped coordinates (level +inf) are written as null
        levels = [v if math.isfinite(v) else None for v in self.levels]
        return {"levels": levels, "n": self.n, "tau": list(self.tau.values)}


@dataclass(frozen=True)
class EstimateResult:
    """A point estimate with its standard error and 95% normal confidence interval."""

    estimate: float
    se: float
    reps: int
    block_n: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return self.estimate - Config.CI_Z * self.se, self.estimate + Config.CI_Z * self.se

    def covers(self, value: float) -> bool:
        lo, hi = self.ci95
        return lo <= value <= hi

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "se": self.se,
            "ci95": list(self.ci95),
            "reps": self.reps,
            "block_n": self.block_n,
            "meta": self.meta,
        }


def margin_for(spec: ModelSpec, margin: str, column: int | str) -> Margin:
    """
    Marginal df of a simulated column (1-based) or of the row-maximum series ("rowmax").
    """
    base = get_margin(margin)
    if column == "rowmax":
        if spec.kind == "three_dependent":
            return RowMaxMargin(base)
        if spec.kind == "iid_product":
            return PowerMargin(base, spec.d)
        raise ValidationError(f"No row-maximum margin for model kind {spec.kind!r}.")
    if not isinstance(column, int) or not 1 <= column <= spec.dimension:
        raise ValidationError(f"Column {column!r} outside 1..{spec.dimension}.")
    if spec.kind == "max_ar":
        x_margin = PowerMargin(base, 2)
        return x_margin if column <= spec.p else NegatedMargin(x_margin)
    return base


def _bracket(cdf: Callable, target: float, support: tuple[float, float]) -> tuple[float, float]:
    lo, hi = support
    if not math.isfinite(hi):
        hi = max(1.0, lo + 1.0) if math.isfinite(lo) else 1.0
        for _ in range(2000):
            if cdf(hi) >= target:
                break
            hi = hi * 2 if hi > 0 else hi + 1.0
        else:
            raise ValidationError("Could not bracket the level from above.")
    if not math.isfinite(lo):
        lo = min(-1.0, hi - 1.0)
        for _ in range(2000):
            if cdf(lo) <= target:
                break
            lo = lo * 2 if lo < 0 else lo - 1.0
        else:
            raise ValidationError("Could not bracket the level from below.")
    return lo, hi


def _solve_level(cdf: Callable, target: float, support: tuple[float, float]) -> float:
    """
    Finds u with F(u) = target by bisection.

    Raises:
        ValidationError: if the df is seen decreasing on the bracket
    """
    lo, hi = _bracket(cdf, target, support)
    grid = np.linspace(lo, hi, 257)
    values = np.array([float(cdf(g)) for g in grid])
    if np.any(np.diff(values) < -1e-15):
        raise ValidationError("The marginal df is not monotone on the level bracket.")
    if values[0] > target or values[-1] < target:
        raise ValidationError(f"Target probability {target} is not attained on [{lo}, {hi}].")
    return optimize.bisect(lambda u: float(cdf(u)) - target, lo, hi,
                           xtol=1e-300, rtol=Config.LEVEL_RTOL, maxiter=2000)


def normalized_levels(marginal_cdf: Margin | Callable | Sequence[Margin | Callable], n: int, tau) -> LevelSet:
    """
    Solves n(1 - F_j(u)) = tau_j for every component.

    Args:
        - marginal_cdf: one df shared by every component, or one per component
        - n: block size
        - tau: target intensities, 0 <= tau_j < n (0 drops the coordinate)

    Returns:
        the LevelSet, with analytic inversion where the margin offers one and bisection otherwise
    """
    tau = TauVector.of(tau)
    if n < 1:
        raise ValidationError(f"Block size should be >= 1, got {n}.")
    if isinstance(marginal_cdf, (list, tuple)):
        cdfs = list(marginal_cdf)
        if len(cdfs) != tau.d:
            raise ValidationError(f"{len(cdfs)} margins for a tau vector of dimension {tau.d}.")
    else:
        cdfs = [marginal_cdf] * tau.d

    levels = []
    for cdf, t in zip(cdfs, tau.values):
        if t >= n:
            raise ValidationError(f"tau_j = {t} should be below the block size n = {n}.")
        if t == 0:
            levels.append(math.inf)
            continue
        target = 1.0 - t / n
        if isinstance(cdf, Margin) and cdf.has_ppf:
            levels.append(float(cdf.ppf(target)))
        else:
            support = cdf.support if isinstance(cdf, Margin) else (-math.inf, math.inf)
            func = cdf.cdf if isinstance(cdf, Margin) else cdf
            levels.append(float(_solve_level(func, target, support)))
    return LevelSet(tuple(levels), n, tau)


def _binomial_result(p: float, count: int, scale: float = 1.0, block_n: int | None = None,
                     meta: dict | None = None) -> EstimateResult:
    se = scale * math.sqrt(p * (1 - p) / count)
    return EstimateResult(scale * p, se, count, block_n, meta or {})


def estimate_gamma(iid_sample: SampleMatrix, levels: LevelSet) -> EstimateResult:
    """
    n times the fraction of i.i.d. vectors not below the levels, with binomial SE.
    """
    u = levels.as_array()
    if iid_sample.d != u.size:
        raise ValidationError(f"Sample has {iid_sample.d} columns but {u.size} levels were given.")
    if iid_sample.n == 0:
        raise CalibrationError("Cannot estimate gamma from an empty sample.")
    exceed = np.any(iid_sample.values > u, axis=1)
    p = float(exceed.mean())
    return _binomial_result(p, iid_sample.n, scale=levels.n, block_n=levels.n,
                            meta={"levels": levels.to_dict(), "exceedances": int(exceed.sum())})


def estimate_df(sample: SampleMatrix, x, thin: int = 1) -> EstimateResult:
    """
    Empirical P(X <= x) over the rows, keeping one row in `thin` so rows of an
    m-dependent series can be made independent.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sample.d,):
        raise ValidationError(f"Point should have {sample.d} entries, got shape {x.shape}.")
    if thin < 1:
        raise ValidationError(f"Thinning step should be >= 1, got {thin}.")
    rows = sample.values[::thin]
    if rows.shape[0] == 0:
        raise CalibrationError("No rows to estimate a df from.")
    p = float(np.all(rows <= x, axis=1).mean())
    return _binomial_result(p, rows.shape[0], meta={"thin": thin})


def exceedance_correlation(series: SampleMatrix, level: float, lag: int) -> EstimateResult:
    """
    Sample correlation of the exceedance indicators 1{W_t > level} and 1{W_{t+lag} > level}.

    The SE is Bartlett's, sqrt((1 + 2 sum_{k<lag} r_k^2) / N), i.e. the one of a series
    whose correlations vanish from `lag` on; for lag 1 it is 1/sqrt(N).
    """
    if series.d != 1:
        raise ValidationError("Exceedance correlation needs a univariate series.")
    if lag < 1 or lag >= series.n - 1:
        raise ValidationError(f"Lag {lag} does not fit a series of length {series.n}.")
    ind = (series.column(1) > level).astype(float)

    def corr_at(h: int) -> float:
        a, b = ind[:-h], ind[h:]
        if a.std() == 0 or b.std() == 0:
            raise CalibrationError(f"No variation in exceedances of {level} at lag {h}.")
        return float(np.corrcoef(a, b)[0, 1])

    corr = corr_at(lag)
    shorter = [corr_at(h) for h in range(1, lag)]
    count = series.n - lag
    se = math.sqrt((1 + 2 * sum(r * r for r in shorter)) / count)
    return EstimateResult(corr, se, count, meta={"lag": lag, "level": level, "shorter_lags": shorter})


def _run_reps(work: Callable[[int], bool], reps: int, threads: int) -> np.ndarray:
    """
    Evaluates work(r) for r = 0..reps-1 and returns the outcomes in replication order.

    Workers fill disjoint slices of the output, so any thread count gives the same array.
    """
    out = np.zeros(reps, dtype=bool)

    def fill(start: int) -> None:
        for r in range(start, min(start + CHUNK, reps)):
            out[r] = work(r)

    starts = range(0, reps, CHUNK)
    if threads <= 1:
        for s in starts:
            fill(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    return out


def finite_block_probability(spec: ModelSpec, margin: str, levels: LevelSet) -> float | None:
    """
    Exact P(M_n <= u_n) for the stationary construction, where a closed form exists.

    - iid_product: Q(u)^n
    - max_ar: all Y_1..Y_{n+1} below the X-level and no two consecutive Y below
      the reflected -X level; counted with a two-state transfer matrix
    - three_dependent: not available (None)
    """
    base = get_margin(margin)
    u = levels.as_array()
    n = levels.n
    if spec.kind == "iid_product":
        return joint_df(spec, base, u) ** n
    if spec.kind != "max_ar":
        return None
    top = float(base.cdf(u[:spec.p].min()))
    low = float(base.cdf(-u[spec.p:].min()))
    mid = top - low
    if mid <= 0:
        return 0.0
    step = np.array([[mid, low], [mid, 0.0]])
    start = np.array([mid, low])
    return float(start @ np.linalg.matrix_power(step, n) @ np.ones(2))


def finite_block_theta(spec: ModelSpec, margin: str, levels: LevelSet) -> float | None:
    """log P(M_n <= u_n) / log Q(u_n)^n at finite n, where finite_block_probability is available."""
    p = finite_block_probability(spec, margin, levels)
    if p is None or p <= 0:
        return None
    q = joint_df(spec, get_margin(margin), levels.as_array())
    return math.log(p) / (levels.n * math.log(q))


def estimate_theta_blocks(spec: ModelSpec, cfg: SeriesConfig, tau, block_n: int, reps: int,
                          exact_denominator: bool = True, threads: int | None = None) -> EstimateResult:
    """
    Block estimator theta = log P(M_n <= u_n) / log P(M^_n <= u_n).

    The numerator counts, over `reps` independent stationary blocks of length block_n,
    how often every component maximum stays below its level. The denominator is the
    exact Q(u_n)^n by default, or the same count over i.i.d. blocks.

    Raises:
        CalibrationError: if either probability comes out 0 or 1
    """
    tau = TauVector.of(tau)
    if tau.d != spec.dimension:
        raise ValidationError(f"Tau vector has dimension {tau.d} but the model has dimension {spec.dimension}.")
    if tau.is_zero():
        raise ValidationError("The block estimator needs at least one positive tau entry.")
    if reps < Config.MIN_BLOCK_REPS:
        raise ValidationError(f"The block estimator needs reps >= {Config.MIN_BLOCK_REPS}, got {reps}.")
    threads = threads if threads is not None else Config.threads()
    margins = [margin_for(spec, cfg.margin, j) for j in range(1, spec.dimension + 1)]
    levels = normalized_levels(margins, block_n, tau)
    u = levels.as_array()
    block_cfg = replace(cfg, model=spec, n=block_n)
    logger.info("block estimator: %s, tau=%s, block_n=%d, reps=%d, threads=%d",
                spec.to_dict(), tau.values, block_n, reps, threads)

    def dependent_block(r: int) -> bool:
        sample = gen_series(block_cfg, rng_for(cfg.seed, r))
        return bool(np.all(sample.values.max(axis=0) <= u))

    def iid_block(r: int) -> bool:
        sample = gen_iid_associated(spec, block_n, block_cfg, rng_for(cfg.seed, r, stream=1))
        return bool(np.all(sample.values.max(axis=0) <= u))

    p_dep = float(_run_reps(dependent_block, reps, threads).mean())
    if p_dep in (0.0, 1.0):
        raise CalibrationError(f"P(M_n <= u_n) estimated as {p_dep}; levels are too extreme or too lax "
                               f"for block_n={block_n}.")
    log_dep = math.log(p_dep)
    var_dep = (1 - p_dep) / (p_dep * reps)

    if exact_denominator:
        q = joint_df(spec, cfg.base_margin(), u)
        log_iid = block_n * math.log(q)
        var_iid = 0.0
        p_iid = math.exp(log_iid)
    else:
        p_iid = float(_run_reps(iid_block, reps, threads).mean())
        if p_iid in (0.0, 1.0):
            raise CalibrationError(f"P(M^_n <= u_n) estimated as {p_iid} for block_n={block_n}.")
        log_iid = math.log(p_iid)
        var_iid = (1 - p_iid) / (p_iid * reps)
    if log_iid == 0:
        raise CalibrationError("The i.i.d. block probability is 1; the levels are too lax.")

    estimate = log_dep / log_iid
    se = math.sqrt(var_dep / log_iid ** 2 + log_dep ** 2 * var_iid / log_iid ** 4)
    meta = {
        "levels": levels.to_dict(),
        "p_dep": p_dep,
        "p_iid": p_iid,
        "exact_denominator": exact_denominator,
        "finite_block_theta": finite_block_theta(spec, cfg.margin, levels),
        "seed": cfg.seed,
    }
    return EstimateResult(estimate, se, reps, block_n, meta)


def estimate_theta_runs(series: SampleMatrix, level: float, k: int = Config.RUNS_K) -> EstimateResult:
    """
    Runs estimator: #{t: W_t > level >= max(W_{t+1}, ..., W_{t+k})} / #{t: W_t > level}.

    Only t with a full k-step lookahead are counted. The SE treats clusters (exceedances
    separated by fewer than k+1 steps) as the sampling units of a ratio estimator.

    Raises:
        CalibrationError: if no exceedance is found
    """
    if series.d != 1:
        raise ValidationError("The runs estimator needs a univariate series; use row_maxima for vectors.")
    if k < 1:
        raise ValidationError(f"Run length k should be >= 1, got {k}.")
    if series.n < max(k + 2, Config.MIN_SERIES_LENGTH):
        raise ValidationError(f"Series of length {series.n} is too short for k={k}.")
    w = series.column(1)
    exceed = w > level
    m = series.n - k
    ahead = np.zeros(m, dtype=bool)
    for step in range(1, k + 1):
        ahead |= exceed[step:step + m]
    starts = exceed[:m]
    ends = starts & ~ahead
    count = int(starts.sum())
    if count == 0:
        raise CalibrationError(f"No exceedance of level {level} in a series of length {series.n}.")
    estimate = float(ends.sum()) / count

    # cluster sizes: exceedance times split where the gap exceeds k
    times = np.flatnonzero(starts)
    breaks = np.flatnonzero(np.diff(times) > k) + 1
    sizes = np.diff(np.concatenate([[0], breaks, [times.size]]))
    se = float(math.sqrt(np.sum((1.0 - estimate * sizes) ** 2)) / count)
    meta = {"level": level, "k": k, "exceedances": count, "clusters": int(sizes.size)}
    return EstimateResult(estimate, se, series.n, None, meta)
