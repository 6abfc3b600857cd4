"""
MEV dependence structures.

A model is a stable tail function gamma, an extremal index function theta and the
set of points where theta is known. Everything is evaluated in tau-space,
tau_j = -log F(x_j); a zero entry means the coordinate is dropped.

Index sets handed to this module (partitions, kept coordinates) are 1-based.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from config import Config
from errors import InsufficientModelDataError, ValidationError

logger = logging.getLogger(__name__)

GammaFn = Callable[[np.ndarray], float]
ThetaFn = Callable[[np.ndarray], "float | None"]


def isclose_rel(a: float, b: float, tol: float) -> bool:
    """Relative closeness, |a - b| <= tol * max(|a|, |b|). Two zeros are close."""
    return abs(a - b) <= tol * max(abs(a), abs(b))


@dataclass(frozen=True)
class TauVector:
    """
    A point of marginal exceedance intensities.

    Attributes:
        values: per-coordinate intensities, each finite and >= 0
    """

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValidationError("A tau vector needs at least one coordinate.")
        for v in self.values:
            if not math.isfinite(v):
                raise ValidationError(f"Tau entries should be finite, got {v!r}.")
            if v < 0:
                raise ValidationError(f"Tau entries should be non-negative, got {v!r}.")

    @classmethod
    def of(cls, values: TauVector | Iterable[float]) -> TauVector:
        if isinstance(values, TauVector):
            return values
        try:
            return cls(tuple(float(v) for v in values))
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Could not read a tau vector from {values!r}.") from e

    @classmethod
    def parse(cls, text: str) -> TauVector:
        """Reads the command line form, e.g. "1,1,1"."""
        try:
            return cls.of(float(part) for part in text.split(","))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Could not parse tau vector {text!r}.") from e

    @property
    def d(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    def scaled(self, c: float) -> TauVector:
        return TauVector(tuple(c * v for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class PartitionSpec:
    """
    An ordered split of the coordinates {1, ..., d} into the p-block and the q-block.

    Both blocks are 1-based, strictly increasing, disjoint and non-empty.
    """

    p_indices: tuple[int, ...]
    q_indices: tuple[int, ...]

    def __post_init__(self):
        for name, block in (("p", self.p_indices), ("q", self.q_indices)):
            if len(block) == 0:
                raise ValidationError(f"The {name}-block of a partition should be non-empty.")
            if any(b <= a for a, b in zip(block, block[1:])):
                raise ValidationError(f"Indices of the {name}-block should be strictly increasing: {block}.")
            if block[0] < 1:
                raise ValidationError(f"Partition indices start at 1, got {block}.")
        if set(self.p_indices) & set(self.q_indices):
            raise ValidationError("The two blocks of a partition should be disjoint.")

    @classmethod
    def parse(cls, text: str) -> PartitionSpec:
        """Reads the command line form, e.g. "1,2|3"."""
        halves = text.split("|")
        if len(halves) != 2:
            raise ValidationError(f"A partition looks like '1,2|3', got {text!r}.")
        try:
            p, q = (tuple(int(i) for i in half.split(",") if i.strip()) for half in halves)
        except ValueError as e:
            raise ValidationError(f"Could not parse partition {text!r}.") from e
        return cls(p, q)

    @classmethod
    def canonical(cls, p: int, q: int) -> PartitionSpec:
        """The split {1..p} | {p+1..p+q}."""
        return cls(tuple(range(1, p + 1)), tuple(range(p + 1, p + q + 1)))

    @property
    def d(self) -> int:
        return len(self.p_indices) + len(self.q_indices)

    def validate_for(self, d: int) -> None:
        """Checks that the union of both blocks is exactly {1, ..., d}."""
        if set(self.p_indices) | set(self.q_indices) != set(range(1, d + 1)):
            raise ValidationError(f"Partition {self} does not cover the coordinates 1..{d}.")

    def __str__(self) -> str:
        return ",".join(map(str, self.p_indices)) + "|" + ",".join(map(str, self.q_indices))


@dataclass(frozen=True)
class ThetaDomain:
    """
    Where the extremal index is known.

    Either the whole orthant (`total`), or the rays through a finite list of
    representative points. theta is constant along each ray (homogeneous of order 0).
    """

    total: bool = False
    points: tuple[tuple[tuple[float, ...], float], ...] = ()

    def lookup(self, tau: np.ndarray) -> float | None:
        """
        Returns the theta value of the ray through tau, or None if tau lies on no known ray.

        Complexity:
            O(k*d) for k known rays in dimension d
        """
        for ray, value in self.points:
            if same_ray(tau, np.asarray(ray, dtype=float)):
                return value
        return None

    def restricted(self, keep: Sequence[int], d: int) -> ThetaDomain:
        """The domain of the sub-model on the 1-based coordinates in `keep`."""
        if self.total:
            return ThetaDomain(total=True)
        kept = []
        dropped = [j for j in range(1, d + 1) if j not in keep]
        for ray, value in self.points:
            if all(ray[j - 1] == 0 for j in dropped) and any(ray[j - 1] > 0 for j in keep):
                kept.append((tuple(ray[j - 1] for j in keep), value))
        return ThetaDomain(total=False, points=tuple(kept))

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "points": [{"ray": list(ray), "theta": value} for ray, value in self.points],
        }


def same_ray(a: np.ndarray, b: np.ndarray, rtol: float = Config.CLOSED_FORM_RTOL) -> bool:
    """True iff a = c*b for some c > 0 (same zero pattern, proportional entries)."""
    if a.shape != b.shape:
        return False
    if not np.array_equal(a > 0, b > 0) or not np.any(a > 0):
        return False
    return bool(np.allclose(a / a.max(), b / b.max(), rtol=rtol, atol=rtol))


@dataclass(frozen=True)
class MevModel:
    """
    A limiting MEV dependence structure.

    Attributes:
        dimension: d
        gamma_fn: tau array -> gamma(tau); only ever called with at least one positive entry
        theta_fn: tau array -> theta(tau), or None outside the declared domain
        theta_domain: the declared domain of theta_fn
        label: free text tag
    """

    dimension: int
    gamma_fn: GammaFn = field(compare=False)
    theta_fn: ThetaFn = field(compare=False)
    theta_domain: ThetaDomain = ThetaDomain()
    label: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValidationError("A model needs dimension d >= 1.")

    def describe(self) -> dict:
        return {
            "label": self.label,
            "dimension": self.dimension,
            "theta_domain": self.theta_domain.to_dict(),
        }


def _checked(model: MevModel, tau: TauVector | Iterable[float]) -> TauVector:
    tau = TauVector.of(tau)
    if tau.d != model.dimension:
        raise ValidationError(
            f"Tau vector has dimension {tau.d} but model {model.label!r} has dimension {model.dimension}."
        )
    return tau


def gamma(model: MevModel, tau: TauVector | Iterable[float]) -> float:
    """
    Stable tail dependence value gamma(tau) = -log G at the tau-levels.

    Zero entries are dropped coordinates; gamma of the zero vector is 0.
    """
    tau = _checked(model, tau)
    if tau.is_zero():
        return 0.0
    return float(model.gamma_fn(tau.as_array()))


def theta(model: MevModel, tau: TauVector | Iterable[float]) -> float:
    """
    Multivariate extremal index theta(tau).

    Raises:
        ValidationError: tau is invalid or all zero
        InsufficientModelDataError: tau lies outside the model's theta domain
    """
    tau = _checked(model, tau)
    if tau.is_zero():
        raise ValidationError("theta needs at least one positive tau entry.")
    value = model.theta_fn(tau.as_array())
    if value is None:
        raise InsufficientModelDataError(
            f"Model {model.label!r} does not know theta at tau={tau.values}.", tau=tau
        )
    return float(value)


def attractor_df(model: MevModel, tau: TauVector | Iterable[float]) -> float:
    """G at the tau-levels: the limit df of the associated i.i.d. maxima."""
    return math.exp(-gamma(model, tau))


def limit_df(model: MevModel, tau: TauVector | Iterable[float]) -> float:
    """G^theta at the tau-levels: the limit df of the stationary maxima."""
    tau = _checked(model, tau)
    return math.exp(-theta(model, tau) * gamma(model, tau))


def embed(tau_sub: TauVector | Iterable[float], keep: Sequence[int], d: int) -> TauVector:
    """Places tau_sub into a length-d vector at the 1-based slots in `keep`, zeros elsewhere."""
    tau_sub = TauVector.of(tau_sub)
    keep = _checked_keep(keep, d)
    if tau_sub.d != len(keep):
        raise ValidationError(f"Sub-vector has {tau_sub.d} entries for {len(keep)} kept coordinates.")
    values = [0.0] * d
    for j, v in zip(keep, tau_sub.values):
        values[j - 1] = v
    return TauVector(tuple(values))


def restrict(tau: TauVector | Iterable[float], keep: Sequence[int]) -> TauVector:
    """tau with every coordinate outside `keep` set to zero."""
    tau = TauVector.of(tau)
    keep = _checked_keep(keep, tau.d)
    return TauVector(tuple(v if j + 1 in keep else 0.0 for j, v in enumerate(tau.values)))


def _checked_keep(keep: Iterable[int], d: int) -> tuple[int, ...]:
    keep = tuple(sorted(set(int(j) for j in keep)))
    if len(keep) == 0:
        raise ValidationError("The set of kept coordinates should be non-empty.")
    if keep[0] < 1 or keep[-1] > d:
        raise ValidationError(f"Kept coordinates {keep} fall outside 1..{d}.")
    return keep


def marginalize(model: MevModel, keep: Iterable[int]) -> MevModel:
    """
    The sub-model on the 1-based coordinates in `keep`.

    gamma and theta are the tau_j -> 0+ limits over dropped coordinates, which is
    exactly the parent evaluated with zeros in the dropped slots.
    """
    keep = _checked_keep(keep, model.dimension)
    if keep == tuple(range(1, model.dimension + 1)):
        return model
    d = model.dimension
    index = np.asarray(keep) - 1

    def lift(t: np.ndarray) -> np.ndarray:
        full = np.zeros(d)
        full[index] = t
        return full

    parent_gamma = model.gamma_fn
    parent_theta = model.theta_fn
    return MevModel(
        dimension=len(keep),
        gamma_fn=lambda t: parent_gamma(lift(t)),
        theta_fn=lambda t: parent_theta(lift(t)),
        theta_domain=model.theta_domain.restricted(keep, d),
        label=f"{model.label}[{','.join(map(str, keep))}]",
    )


def copula(model: MevModel, y: Sequence[float]) -> float:
    """D_G(y) = exp(-gamma(-log y)) for y in [0,1]^d."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dimension,):
        raise ValidationError(f"Copula argument should have {model.dimension} entries, got shape {y.shape}.")
    if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
        raise ValidationError(f"Copula arguments should lie in [0,1], got {y.tolist()}.")
    if np.any(y == 0):
        return 0.0
    return attractor_df(model, -np.log(y))


def tau_from_x(x: Sequence[float], margin) -> TauVector:
    """tau_j = -log F(x_j) for an x-space point and a common marginal df F."""
    probs = [float(margin.cdf(v)) for v in x]
    if any(p <= 0 for p in probs):
        raise ValidationError(f"Point {list(x)} lies below the support of the margin.")
    return TauVector(tuple(-math.log(p) for p in probs))


def check_stability(model: MevModel, t: float, y: Sequence[float], tol: float = Config.STABILITY_TOL) -> bool:
    """
    Checks the copula stability equation D_G^t(y) = D_G(y^t) at one point.

    Args:
        - t: positive real
        - y: point in (0,1]^d
        - tol: absolute tolerance on the two probabilities
    """
    if not math.isfinite(t) or t <= 0:
        raise ValidationError(f"Stability exponent t should be positive, got {t!r}.")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(y > 1):
        raise ValidationError(f"Stability points should lie in (0,1]^d, got {y.tolist()}.")
    lhs = copula(model, y) ** t
    rhs = copula(model, y ** t)
    return abs(lhs - rhs) <= tol


def check_homogeneity(model: MevModel, c: float, tau: TauVector | Iterable[float],
                      tol: float = Config.HOMOGENEITY_TOL) -> tuple[bool, bool]:
    """
    Checks gamma(c*tau) = c*gamma(tau) and theta(c*tau) = theta(tau).

    Returns:
        (gamma holds, theta holds)

    Raises:
        InsufficientModelDataError: theta is unknown at tau or c*tau; the gamma
        result is attached as `partial`
    """
    if not math.isfinite(c) or c <= 0:
        raise ValidationError(f"Homogeneity factor c should be positive, got {c!r}.")
    tau = _checked(model, tau)
    scaled = tau.scaled(c)
    gamma_holds = isclose_rel(gamma(model, scaled), c * gamma(model, tau), tol)
    try:
        theta_holds = isclose_rel(theta(model, scaled), theta(model, tau), tol)
    except InsufficientModelDataError as e:
        e.partial = gamma_holds
        raise
    return gamma_holds, theta_holds


def associated(model: MevModel) -> MevModel:
    """The model of the associated i.i.d. vector: same gamma, theta = 1 everywhere."""
    return MevModel(
        dimension=model.dimension,
        gamma_fn=model.gamma_fn,
        theta_fn=lambda t: 1.0,
        theta_domain=ThetaDomain(total=True),
        label=f"{model.label} (associated)",
    )


def perturb_theta(model: MevModel, delta: float) -> MevModel:
    """theta shifted by delta and clipped to [0,1], on the same domain."""
    if delta == 0:
        return model
    inner = model.theta_fn

    def shifted(t: np.ndarray) -> float | None:
        value = inner(t)
        if value is None:
            return None
        return min(1.0, max(0.0, value + delta))

    logger.warning("theta of %s perturbed by %g", model.label, delta)
    domain = replace(
        model.theta_domain,
        points=tuple((ray, min(1.0, max(0.0, v + delta))) for ray, v in model.theta_domain.points),
    )
    return replace(model, theta_fn=shifted, theta_domain=domain, label=f"{model.label} (perturbed)")
