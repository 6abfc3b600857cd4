"""
All built-in models are defined here.
"""

from __future__ import annotations

import numpy as np

from config import Config
from errors import ValidationError
from mev_core import MevModel, ThetaDomain, perturb_theta
from model_util import register


def _finish(model: MevModel) -> MevModel:
    # hidden sensitivity hook, zero unless the verify suite sets it
    return perturb_theta(model, Config.theta_perturbation())


@register("max_ar")
def max_ar_model(p: int, q: int) -> MevModel:
    """
    Limit structure of the vector (X_n repeated p times, -X_n repeated q times),
    with X_n = max(Y_n, Y_{n+1}) a max-autoregressive sequence.

    gamma(tau) = max over the p-block + max over the q-block
    theta(tau) = (1/2 max over the p-block + max over the q-block) / gamma(tau), everywhere.
    """
    if p < 1 or q < 1:
        raise ValidationError(f"max_ar needs p >= 1 and q >= 1, got p={p}, q={q}.")

    def gamma_fn(t: np.ndarray) -> float:
        return float(t[:p].max() + t[p:].max())

    def theta_fn(t: np.ndarray) -> float:
        top, bottom = float(t[:p].max()), float(t[p:].max())
        return (0.5 * top + bottom) / (top + bottom)

    return _finish(MevModel(
        dimension=p + q,
        gamma_fn=gamma_fn,
        theta_fn=theta_fn,
        theta_domain=ThetaDomain(total=True),
        label=f"max_ar(p={p},q={q})",
    ))


@register("three_dependent")
def three_dependent_model() -> MevModel:
    """
    Limit structure of the 3-dependent vector (Z_n, Z_{n+2}, Z_{n+1}).

    gamma is read off -log G branch by branch. Ties go to the ">=" branches;
    gamma is continuous across them, so the choice does not change the value.
    theta is only known on the diagonal ray, the axis rays and the {1,2} face ray.
    """

    def gamma_fn(t: np.ndarray) -> float:
        t1, t2, t3 = (float(v) for v in t)
        if t1 > t3 and t2 > t3:
            return t1 + t2 + 0.5 * t3
        if t1 > t3 and t3 >= t2:
            return t1 + 0.75 * t2 + 0.75 * t3
        if t3 >= t1 and t2 > t3:
            return 0.75 * t1 + t2 + 0.75 * t3
        return 0.75 * t1 + 0.75 * t2 + t3

    domain = ThetaDomain(total=False, points=(
        ((1.0, 1.0, 1.0), 0.3),
        ((1.0, 0.0, 0.0), 0.75),
        ((0.0, 1.0, 0.0), 0.75),
        ((0.0, 0.0, 1.0), 0.75),
        ((1.0, 1.0, 0.0), 0.375),
    ))

    return _finish(MevModel(
        dimension=3,
        gamma_fn=gamma_fn,
        theta_fn=domain.lookup,
        theta_domain=domain,
        label="three_dependent",
    ))


@register("iid_product")
def iid_product_model(d: int) -> MevModel:
    """Independent margins and no clustering: gamma(tau) = sum of tau, theta = 1."""
    if d < 1:
        raise ValidationError(f"iid_product needs d >= 1, got d={d}.")
    return _finish(MevModel(
        dimension=d,
        gamma_fn=lambda t: float(t.sum()),
        theta_fn=lambda t: 1.0,
        theta_domain=ThetaDomain(total=True),
        label=f"iid_product(d={d})",
    ))
