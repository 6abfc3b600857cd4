"""
Seeded generators for the stochastic constructions behind the built-in models.

- max_ar: X_n = max(Y_n, Y_{n+1}) and the vector (X_n x p, -X_n x q)
- three_dependent: Z_n = U_n if J_n = 0 else U_{n+1}, and the vector (Z_n, Z_{n+2}, Z_{n+1})
- iid_product: independent margins

Every generator is a pure function of its config and random stream. Streams come
from rng_for(seed, r), so replication r always sees the same numbers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from errors import ValidationError
from margins import Margin, get_margin
from model_util import ModelSpec

logger = logging.getLogger(__name__)

SIMULABLE_KINDS = ("max_ar", "three_dependent", "iid_product")


@dataclass(frozen=True)
class SeriesConfig:
    """
    What to simulate.

    - model: the construction to run
    - margin: base df of Y (max_ar), U (three_dependent) or every coordinate (iid_product)
    - n: series length
    - seed: root seed
    """

    model: ModelSpec
    n: int
    seed: int = 0
    margin: str = "unit_frechet"

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"Series length should be >= 1, got {self.n}.")
        if self.seed < 0:
            raise ValidationError(f"Seed should be a non-negative integer, got {self.seed}.")
        if self.model.kind not in SIMULABLE_KINDS:
            raise ValidationError(f"Model kind {self.model.kind!r} cannot be simulated.")
        get_margin(self.margin)

    def base_margin(self) -> Margin:
        return get_margin(self.margin)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "n": self.n, "seed": self.seed, "margin": self.margin}


@dataclass
class SampleMatrix:
    """
    Simulated observations: rows in time order, one column per component.
    """

    values: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2:
            raise ValidationError(f"A sample matrix is two dimensional, got shape {self.values.shape}.")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("Sample matrices should only hold finite values.")
        if not self.labels:
            self.labels = tuple(f"c{j}" for j in range(1, self.d + 1))
        if len(self.labels) != self.d:
            raise ValidationError(f"{len(self.labels)} labels for {self.d} columns.")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        """The 1-based column j."""
        return self.values[:, j - 1]

    def write_csv(self, path: str | Path) -> None:
        """Header t,c1,...,cd; t counts from 1; 17 significant digits."""
        t = np.arange(1, self.n + 1)
        header = ",".join(["t"] + [f"c{j}" for j in range(1, self.d + 1)])
        np.savetxt(path, np.column_stack([t, self.values]), delimiter=",", header=header, comments="",
                   fmt=["%d"] + ["%.17g"] * self.d)

    @classmethod
    def read_csv(cls, path: str | Path) -> SampleMatrix:
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        if not header or header[0] != "t" or len(header) < 2:
            raise ValidationError(f"{path} does not look like a series CSV (header {header}).")
        d = len(header) - 1
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            return cls(np.empty((0, d)))
        if data.shape[1] != d + 1:
            raise ValidationError(f"{path} has {data.shape[1]} columns, the header names {d + 1}.")
        return cls(data[:, 1:])


def rng_for(seed: int, r: int | None = None, stream: int = 0) -> np.random.Generator:
    """
    The random stream for (seed, replication r); r=None is the stream of a single run.

    `stream` separates families of replications drawn from one seed, e.g. the
    stationary blocks (0) and the i.i.d. blocks (1) of the block estimator.
    """
    if r is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    key = (r,) if stream == 0 else (r, stream)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def gen_max_ar_series(cfg: SeriesConfig, rng: np.random.Generator | None = None) -> SampleMatrix:
    """
    X_1..X_n with X_k = max(Y_k, Y_{k+1}) built from n+1 i.i.d. draws of the base margin.

    Each X_k has df F^2 and neighbours share one Y.
    """
    rng = rng if rng is not None else rng_for(cfg.seed)
    y = cfg.base_margin().sample(rng, cfg.n + 1)
    return SampleMatrix(np.maximum(y[:-1], y[1:]), labels=("X",))


def gen_vector_series_ex31(p: int, q: int, cfg: SeriesConfig,
                           rng: np.random.Generator | None = None) -> SampleMatrix:
    """Rows (X_n repeated p times, -X_n repeated q times)."""
    if p < 1 or q < 1:
        raise ValidationError(f"The max-AR vector needs p >= 1 and q >= 1, got p={p}, q={q}.")
    x = gen_max_ar_series(cfg, rng).column(1)
    values = np.column_stack([x] * p + [-x] * q)
    labels = tuple(f"X{j}" for j in range(1, p + 1)) + tuple(f"-X{j}" for j in range(p + 1, p + q + 1))
    return SampleMatrix(values, labels=labels)


def _z_from(u: np.ndarray, j: np.ndarray) -> np.ndarray:
    # Z_k = U_k if J_k = 0 else U_{k+1}
    return np.where(j == 0, u[..., :-1], u[..., 1:])


def gen_z_series(cfg: SeriesConfig, rng: np.random.Generator | None = None) -> SampleMatrix:
    """The 1-dependent sequence Z_1..Z_n from n+1 draws of U and n fair coins J."""
    rng = rng if rng is not None else rng_for(cfg.seed)
    u = cfg.base_margin().sample(rng, cfg.n + 1)
    j = rng.integers(0, 2, size=cfg.n)
    return SampleMatrix(_z_from(u, j), labels=("Z",))


def gen_three_dependent_series(cfg: SeriesConfig, rng: np.random.Generator | None = None) -> SampleMatrix:
    """
    Rows (Z_n, Z_{n+2}, Z_{n+1}), n = 1..cfg.n.

    Uses n+3 draws of U and n+2 fair coins J, independent of U.
    """
    rng = rng if rng is not None else rng_for(cfg.seed)
    n = cfg.n
    u = cfg.base_margin().sample(rng, n + 3)
    j = rng.integers(0, 2, size=n + 2)
    z = _z_from(u, j)
    return SampleMatrix(np.column_stack([z[:n], z[2:n + 2], z[1:n + 1]]), labels=("Z_n", "Z_n+2", "Z_n+1"))


def gen_iid_associated(spec: ModelSpec, count: int, cfg: SeriesConfig,
                       rng: np.random.Generator | None = None) -> SampleMatrix:
    """
    count i.i.d. vectors, each with the one-dimensional df of the stationary construction.

    Every vector gets its own underlying randomness: a fresh (Y, Y') pair for max_ar,
    fresh U_1..U_4 and J_1..J_3 for three_dependent.
    """
    if spec.kind not in SIMULABLE_KINDS:
        raise ValidationError(f"Model kind {spec.kind!r} cannot be simulated.")
    if count < 0:
        raise ValidationError(f"Vector count should be >= 0, got {count}.")
    rng = rng if rng is not None else rng_for(cfg.seed)
    base = cfg.base_margin()
    if spec.kind == "max_ar":
        x = base.sample(rng, (count, 2)).max(axis=1)
        return SampleMatrix(np.column_stack([x] * spec.p + [-x] * spec.q).reshape(count, spec.p + spec.q))
    if spec.kind == "three_dependent":
        u = base.sample(rng, (count, 4))
        j = rng.integers(0, 2, size=(count, 3))
        z = _z_from(u, j)
        return SampleMatrix(z[:, [0, 2, 1]].reshape(count, 3))
    return SampleMatrix(base.sample(rng, (count, spec.d)).reshape(count, spec.d))


def gen_series(cfg: SeriesConfig, rng: np.random.Generator | None = None) -> SampleMatrix:
    """The stationary vector series a config names."""
    spec = cfg.model
    logger.debug("simulating %s, n=%d, seed=%d", spec.to_dict(), cfg.n, cfg.seed)
    if spec.kind == "max_ar":
        return gen_vector_series_ex31(spec.p, spec.q, cfg, rng)
    if spec.kind == "three_dependent":
        return gen_three_dependent_series(cfg, rng)
    return gen_iid_associated(spec, cfg.n, cfg, rng)


def row_maxima(sample: SampleMatrix) -> SampleMatrix:
    """The univariate series of row maxima, U^X = max over components."""
    return SampleMatrix(sample.values.max(axis=1), labels=("rowmax",))


def joint_df(spec: ModelSpec, margin: Margin, x) -> float:
    """
    Exact df of one vector of the construction at x.

    - max_ar: P(-min x_q <= X <= min x_p) with X ~ F^2
    - three_dependent: T(x) = 1/2 H(x1)H(x2)H(x3) + 1/4 H(x1)H(min(x2,x3)) + 1/4 H(x2)H(min(x1,x3))
    - iid_product: product of the margins
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dimension,):
        raise ValidationError(f"Point should have {spec.dimension} entries, got shape {x.shape}.")
    if spec.kind == "max_ar":
        top, bottom = x[:spec.p].min(), x[spec.p:].min()
        return max(0.0, float(margin.cdf(top)) ** 2 - float(margin.cdf(-bottom)) ** 2)
    if spec.kind == "three_dependent":
        h1, h2, h3 = (float(margin.cdf(v)) for v in x)
        h23 = float(margin.cdf(min(x[1], x[2])))
        h13 = float(margin.cdf(min(x[0], x[2])))
        return 0.5 * h1 * h2 * h3 + 0.25 * h1 * h23 + 0.25 * h2 * h13
    return float(np.prod(margin.cdf(x)))
