"""
Extremal and pair dependence coefficients, and the independence / total dependence
decisions for two sub-vectors of the theta-adjusted limit Y.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable

from config import Config
from errors import InsufficientModelDataError, ValidationError
from mev_core import (MevModel, PartitionSpec, TauVector, associated, gamma, isclose_rel, limit_df,
                      marginalize, restrict, theta)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class TotalDependenceResult:
    """
    Outcome of the total dependence search.

    The witness is normalized so its largest entry is 1; witness_d is the common
    value gamma*theta = theta_j * tau_j there.
    """

    verdict: Verdict
    witness_tau: tuple[float, ...] | None = None
    witness_d: float | None = None
    necessary_condition: bool | None = None
    theta_consistent: bool | None = None


@dataclass
class CoefficientReport:
    """Every coefficient, bound and verdict for one model + partition (+ reference tau)."""

    model: dict
    partition: str
    tau: tuple[float, ...]
    epsilon_Y: float | None = None
    epsilon_p: float | None = None
    epsilon_q: float | None = None
    pair_epsilon: float | None = None
    theta: float | None = None
    theta_lower: float | None = None
    theta_upper: float | None = None
    df_lower: float | None = None
    df_upper: float | None = None
    limit_df: float | None = None
    verdict_independent: Verdict = Verdict.UNDETERMINED
    verdict_total_dep: Verdict = Verdict.UNDETERMINED
    witness_tau: tuple[float, ...] | None = None
    witness_d: float | None = None
    associated: dict = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict_independent"] = self.verdict_independent.value
        out["verdict_total_dep"] = self.verdict_total_dep.value
        out["tau"] = list(self.tau)
        out["witness_tau"] = None if self.witness_tau is None else list(self.witness_tau)
        return out

    @property
    def undetermined(self) -> bool:
        return Verdict.UNDETERMINED in (self.verdict_independent, self.verdict_total_dep)


def _check_partition(model: MevModel, part: PartitionSpec) -> None:
    part.validate_for(model.dimension)


def _exponent(model: MevModel, tau: TauVector) -> float:
    """theta(tau)*gamma(tau), i.e. -log G^theta at tau; 0 for the zero vector."""
    if tau.is_zero():
        return 0.0
    return theta(model, tau) * gamma(model, tau)


def block_epsilon(model: MevModel, block: Iterable[int]) -> float:
    """Extremal coefficient theta(1)*gamma(1) of the marginal on a 1-based block."""
    sub = marginalize(model, block)
    ones = TauVector((1.0,) * sub.dimension)
    return theta(sub, ones) * gamma(sub, ones)


def extremal_coefficient(model: MevModel) -> float:
    """
    epsilon^Y = theta(1)*gamma(1); the classical extremal coefficient of G when theta = 1.

    Raises:
        InsufficientModelDataError: theta unknown at the unit vector
    """
    return block_epsilon(model, range(1, model.dimension + 1))


def pair_coefficient(model: MevModel, part: PartitionSpec) -> float:
    """epsilon^Y / (epsilon^{Y(p)} + epsilon^{Y(q)}); equals 1 exactly under independence."""
    _check_partition(model, part)
    eps = extremal_coefficient(model)
    eps_p = block_epsilon(model, part.p_indices)
    eps_q = block_epsilon(model, part.q_indices)
    return eps / (eps_p + eps_q)


def _block_exponents(model: MevModel, part: PartitionSpec, tau: TauVector) -> tuple[float, float]:
    return (_exponent(model, restrict(tau, part.p_indices)),
            _exponent(model, restrict(tau, part.q_indices)))


def df_bounds(model: MevModel, part: PartitionSpec, tau) -> tuple[float, float]:
    """
    Lower and upper bounds on limit_df at tau from the two block limit dfs.

    Returns:
        (product of the block dfs, min of the block dfs)
    """
    _check_partition(model, part)
    tau = TauVector.of(tau)
    a, b = _block_exponents(model, part, tau)
    return math.exp(-(a + b)), math.exp(-max(a, b))


def theta_bounds(model: MevModel, part: PartitionSpec, tau) -> tuple[float, float]:
    """
    Bounds on theta(tau): (max of the block exponents, sum of the block exponents) / gamma(tau).
    """
    _check_partition(model, part)
    tau = TauVector.of(tau)
    g = gamma(model, tau)
    if g == 0:
        raise ValidationError("theta bounds need at least one positive tau entry.")
    a, b = _block_exponents(model, part, tau)
    return max(a, b) / g, (a + b) / g


def test_independence(model: MevModel, part: PartitionSpec, tol: float = Config.VERDICT_TOL) -> Verdict:
    """
    Decides independence of Y(p) and Y(q) from the unit vectors alone:
    yes iff theta(1)gamma(1) = theta(1p)gamma(1p) + theta(1q)gamma(1q).
    """
    _check_partition(model, part)
    try:
        eps = extremal_coefficient(model)
        total = block_epsilon(model, part.p_indices) + block_epsilon(model, part.q_indices)
    except InsufficientModelDataError as e:
        logger.debug("independence of %s on %s undetermined: %s", model.label, part, e)
        return Verdict.UNDETERMINED
    verdict = Verdict.YES if isclose_rel(eps, total, tol) else Verdict.NO
    logger.debug("independence of %s on %s: eps=%r, block sum=%r -> %s", model.label, part, eps, total, verdict.value)
    return verdict


def test_total_dependence(model: MevModel, part: PartitionSpec,
                          tol: float = Config.VERDICT_TOL) -> TotalDependenceResult:
    """
    Looks for a witness tau with gamma(tau)theta(tau) = theta_1 tau_1 = ... = theta_d tau_d = d > 0.

    Both sides are homogeneous, so only the ray tau_j = 1/theta_j needs testing.
    The necessary condition on the two block exponents is checked at the same point.

    Complexity:
        O(d) model evaluations
    """
    _check_partition(model, part)
    d = model.dimension
    try:
        axis = [theta(model, restrict(TauVector((1.0,) * d), [j])) for j in range(1, d + 1)]
    except InsufficientModelDataError as e:
        logger.debug("total dependence of %s undetermined, marginal indexes missing: %s", model.label, e)
        return TotalDependenceResult(Verdict.UNDETERMINED)
    if any(a <= 0 for a in axis):
        return TotalDependenceResult(Verdict.UNDETERMINED)

    candidate = TauVector(tuple(1.0 / a for a in axis))
    try:
        full = _exponent(model, candidate)
        block_p, block_q = _block_exponents(model, part, candidate)
    except InsufficientModelDataError as e:
        logger.debug("total dependence of %s undetermined at %s: %s", model.label, candidate.values, e)
        return TotalDependenceResult(Verdict.UNDETERMINED)

    necessary = isclose_rel(block_p, 1.0, tol) and isclose_rel(block_q, 1.0, tol)
    sufficient = isclose_rel(full, 1.0, tol)
    logger.debug("total dependence of %s: candidate=%s full=%r blocks=(%r, %r)",
                 model.label, candidate.values, full, block_p, block_q)
    if not (necessary and sufficient):
        return TotalDependenceResult(Verdict.NO, necessary_condition=necessary)

    scale = 1.0 / max(candidate.values)
    witness = candidate.scaled(scale)
    consistent = isclose_rel(theta(model, witness), 1.0 / gamma(model, witness.scaled(1.0 / scale)), tol)
    return TotalDependenceResult(
        Verdict.YES,
        witness_tau=witness.values,
        witness_d=scale,
        necessary_condition=True,
        theta_consistent=consistent,
    )


def check_conditional(model: MevModel, part: PartitionSpec, tau,
                      tol: float = Config.VERDICT_TOL) -> tuple[Verdict, Verdict]:
    """
    The conditional characterisations at one tau.

    When the associated blocks are independent there (gamma additive), Y-blocks are
    independent iff theta(tau) = (theta_p gamma_p + theta_q gamma_q) / (gamma_p + gamma_q).
    When the associated blocks are totally dependent there (gamma = max of the blocks),
    Y-blocks are totally dependent iff theta(tau) = max(theta_p gamma_p, theta_q gamma_q) / max(gamma_p, gamma_q).
    A criterion whose premise fails at tau is undetermined.

    Returns:
        (independence verdict, total dependence verdict)
    """
    _check_partition(model, part)
    tau = TauVector.of(tau)
    g = gamma(model, tau)
    g_p = gamma(model, restrict(tau, part.p_indices))
    g_q = gamma(model, restrict(tau, part.q_indices))
    if g_p == 0 or g_q == 0:
        raise ValidationError("The conditional criteria need a positive tau entry in both blocks.")
    try:
        t = theta(model, tau)
        a, b = _block_exponents(model, part, tau)
    except InsufficientModelDataError:
        return Verdict.UNDETERMINED, Verdict.UNDETERMINED

    independent = Verdict.UNDETERMINED
    if isclose_rel(g, g_p + g_q, tol):
        independent = Verdict.YES if isclose_rel(t, (a + b) / (g_p + g_q), tol) else Verdict.NO
    total = Verdict.UNDETERMINED
    if isclose_rel(g, max(g_p, g_q), tol):
        total = Verdict.YES if isclose_rel(t, max(a, b) / max(g_p, g_q), tol) else Verdict.NO
    return independent, total


def diagonal_df_exponent_check(model: MevModel, part: PartitionSpec, t: float = 1.0,
                               tol: float = Config.CLOSED_FORM_RTOL) -> bool:
    """
    Checks P(Y <= x) = (G_Y(p)(x) G_Y(q)(x))^pair_epsilon at the diagonal point tau = t*1.
    """
    _check_partition(model, part)
    if not math.isfinite(t) or t <= 0:
        raise ValidationError(f"Diagonal level t should be positive, got {t!r}.")
    diag = TauVector((t,) * model.dimension)
    joint = limit_df(model, diag)
    a, b = _block_exponents(model, part, diag)
    return isclose_rel(joint, math.exp(-(a + b)) ** pair_coefficient(model, part), tol)


def _associated_summary(model: MevModel, part: PartitionSpec) -> dict:
    hat = associated(model)
    eps = extremal_coefficient(hat)
    eps_p = block_epsilon(hat, part.p_indices)
    eps_q = block_epsilon(hat, part.q_indices)
    return {
        "epsilon_Y": eps,
        "epsilon_p": eps_p,
        "epsilon_q": eps_q,
        "pair_epsilon": eps / (eps_p + eps_q),
        "verdict_independent": test_independence(hat, part).value,
        "verdict_total_dep": test_total_dependence(hat, part).verdict.value,
    }


def coefficient_report(model: MevModel, part: PartitionSpec, tau=None,
                       tol: float = Config.VERDICT_TOL) -> CoefficientReport:
    """
    Assembles every coefficient, bound and verdict.

    Values that need theta where the model does not know it are left as None and
    named in `missing`; the verdicts they feed are undetermined.

    Args:
        - model: the model
        - part: partition of its coordinates
        - tau: reference point for the bounds, the unit vector when omitted
        - tol: verdict tolerance
    """
    _check_partition(model, part)
    tau = TauVector.of(tau) if tau is not None else TauVector((1.0,) * model.dimension)
    if tau.d != model.dimension:
        raise ValidationError(f"Tau vector has dimension {tau.d} but the model has dimension {model.dimension}.")
    report = CoefficientReport(model=model.describe(), partition=str(part), tau=tau.values)

    def attempt(name, fn):
        try:
            return fn()
        except InsufficientModelDataError as e:
            logger.info("%s unavailable for %s: %s", name, model.label, e)
            report.missing.append(name)
            return None

    report.epsilon_Y = attempt("epsilon_Y", lambda: extremal_coefficient(model))
    report.epsilon_p = attempt("epsilon_p", lambda: block_epsilon(model, part.p_indices))
    report.epsilon_q = attempt("epsilon_q", lambda: block_epsilon(model, part.q_indices))
    if None not in (report.epsilon_Y, report.epsilon_p, report.epsilon_q):
        report.pair_epsilon = report.epsilon_Y / (report.epsilon_p + report.epsilon_q)
    report.theta = attempt("theta", lambda: theta(model, tau))
    bounds = attempt("theta_bounds", lambda: theta_bounds(model, part, tau))
    if bounds is not None:
        report.theta_lower, report.theta_upper = bounds
    df = attempt("df_bounds", lambda: df_bounds(model, part, tau))
    if df is not None:
        report.df_lower, report.df_upper = df
    report.limit_df = attempt("limit_df", lambda: limit_df(model, tau))

    report.verdict_independent = test_independence(model, part, tol)
    total = test_total_dependence(model, part, tol)
    report.verdict_total_dep = total.verdict
    report.witness_tau = total.witness_tau
    report.witness_d = total.witness_d
    report.associated = _associated_summary(model, part)
    return report
