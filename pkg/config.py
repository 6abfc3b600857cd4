"""
Toolkit configuration.

Defaults are class constants. A few of them can be overridden from the environment.
"""

from __future__ import annotations

import logging
import os

from scipy import stats

from errors import ValidationError


class Config:
    VERSION = "1.0.0"

    # relative tolerance for equality against closed forms
    CLOSED_FORM_RTOL = 1e-10
    # verdict tolerance for closed-form models
    VERDICT_TOL = 1e-9
    HOMOGENEITY_TOL = 1e-12
    STABILITY_TOL = 1e-10
    # bisection tolerance for normalized levels
    LEVEL_RTOL = 1e-12
    # lookahead of the runs estimator
    RUNS_K = 2
    # two-sided 95% normal quantile
    CI_Z = float(stats.norm.ppf(0.975))
    DEFAULT_SEED = 2024
    MIN_SERIES_LENGTH = 4
    MIN_BLOCK_REPS = 100

    THREADS_ENV = "EXTREMALDEP_THREADS"
    LOG_LEVEL_ENV = "EXTREMALDEP_LOG_LEVEL"
    PERTURBATION_ENV = "EXTREMALDEP_THETA_PERTURBATION"
    SEED_ENV = "EXTREMALDEP_SEED"

    @classmethod
    def seed(cls) -> int:
        """Root seed of the seeded test suites: EXTREMALDEP_SEED if set, DEFAULT_SEED otherwise."""
        raw = os.environ.get(cls.SEED_ENV, "").strip()
        if not raw:
            return cls.DEFAULT_SEED
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(f"{cls.SEED_ENV} should be a non-negative integer, got {raw!r}")
        if value < 0:
            raise ValidationError(f"{cls.SEED_ENV} should be a non-negative integer, got {raw!r}")
        return value

    @classmethod
    def threads(cls) -> int:
        """
        Number of worker threads for Monte Carlo replications.

        Returns:
            EXTREMALDEP_THREADS if set, 1 (serial) otherwise.
        """
        raw = os.environ.get(cls.THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(f"{cls.THREADS_ENV} should be a positive integer, got {raw!r}")
        if value < 1:
            raise ValidationError(f"{cls.THREADS_ENV} should be a positive integer, got {raw!r}")
        return value

    @classmethod
    def log_level(cls) -> int:
        raw = os.environ.get(cls.LOG_LEVEL_ENV, "WARNING").strip().upper()
        level = logging.getLevelName(raw)
        if not isinstance(level, int):
            raise ValidationError(f"{cls.LOG_LEVEL_ENV} is not a logging level: {raw!r}")
        return level

    @classmethod
    def theta_perturbation(cls) -> float:
        raw = os.environ.get(cls.PERTURBATION_ENV, "").strip()
        if not raw:
            return 0.0
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"{cls.PERTURBATION_ENV} should be a number, got {raw!r}")
