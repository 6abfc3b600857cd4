import unittest

import numpy as np
from ed_utils.decorators import number

from config import Config
from dependence import theta_bounds
from mev_core import PartitionSpec, theta
from model_util import ModelSpec, build_model


def max_ar_theta(tau: np.ndarray, p: int) -> float:
    top, bottom = tau[:p].max(), tau[p:].max()
    return (0.5 * top + bottom) / (top + bottom)


class TestThetaClosedForms(unittest.TestCase):

    def assertClose(self, actual: float, expected: float, what: str = "") -> None:
        self.assertLessEqual(abs(actual - expected), Config.CLOSED_FORM_RTOL * abs(expected),
                             f"{what}: got {actual!r}, expected {expected!r}")

    @number("3.1")
    def test_three_dependent_unit(self):
        self.assertClose(theta(build_model(ModelSpec("three_dependent")), (1, 1, 1)), 3 / 10)

    @number("3.2")
    def test_max_ar_formula_on_grid(self):
        rng = np.random.default_rng(Config.seed())
        for p, q in [(1, 1), (2, 3), (4, 2)]:
            model = build_model(ModelSpec("max_ar", p=p, q=q))
            for tau in rng.uniform(0.05, 5.0, size=(100, p + q)):
                self.assertClose(theta(model, tau), max_ar_theta(tau, p), f"max_ar({p},{q}) at {tau}")

    @number("3.3")
    def test_max_ar_meets_upper_bound(self):
        rng = np.random.default_rng(Config.seed())
        for p, q in [(1, 1), (2, 3), (4, 2)]:
            model = build_model(ModelSpec("max_ar", p=p, q=q))
            part = PartitionSpec.canonical(p, q)
            for tau in rng.uniform(0.05, 5.0, size=(100, p + q)):
                _, upper = theta_bounds(model, part, tau)
                self.assertClose(upper, max_ar_theta(tau, p), f"upper bound of max_ar({p},{q}) at {tau}")

    @number("3.4")
    def test_three_dependent_meets_lower_bound(self):
        model = build_model(ModelSpec("three_dependent"))
        lower, _ = theta_bounds(model, PartitionSpec.parse("1,2|3"), (1, 1, 1))
        self.assertClose(lower, 3 / 10)
