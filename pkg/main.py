"""
Command line front end.

    python main.py report   --model three_dependent --partition "1,2|3" --tau 1,1,1
    python main.py simulate --model ex32 --n 1000 --seed 7 --out x.csv
    python main.py estimate blocks --model ex31 --p 1 --q 1 --tau 1,0 --block-n 1000 --reps 10000
    python main.py estimate runs --model ex32 --n 1000000 --tau 1 --block-n 1000
    python main.py estimate gamma --model ex32 --n 100000 --tau 1,1,1 --block-n 200
    python main.py verify --seed 2024 --out verify.json

Exit codes: 0 pass, 1 verify suite failure, 2 invalid input or degenerate
Monte Carlo calibration, 3 theta undetermined.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from config import Config
from dependence import coefficient_report
from errors import CalibrationError, InsufficientModelDataError, ValidationError
from estimate import (estimate_gamma, estimate_theta_blocks, estimate_theta_runs, margin_for,
                      normalized_levels)
from mev_core import PartitionSpec, TauVector
from model_util import ALIASES, ModelSpec, build_model, get_models
from simulate import (SampleMatrix, SeriesConfig, gen_iid_associated, gen_series, gen_z_series, row_maxima,
                      rng_for)

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """What produced an output file: command, resolved flags, seed, toolkit version, wall-clock seconds."""

    command: str
    config: dict
    seed: int | None = None
    version: str = Config.VERSION
    duration_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def input_series_kind(path: Path) -> str | None:
    """The --series a CSV was simulated with (vector, z or rowmax), read from its manifest; None without one."""
    manifest = Path(f"{path}.manifest.json")
    if not manifest.exists():
        return None
    try:
        kind = json.loads(manifest.read_text())["config"]["series"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError(f"{manifest} is not a simulate manifest.") from e
    if kind not in ("vector", "z", "rowmax"):
        raise ValidationError(f"{manifest} names an unknown series {kind!r}.")
    return kind


@contextlib.contextmanager
def environment(values: dict[str, str]):
    """Sets environment variables inside the block; previous values (or their absence) are restored after."""
    saved = {key: os.environ.get(key) for key in values}
    os.environ.update(values)
    try:
        yield
    finally:
        for key, old in saved.items():
            if old is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = old


class ExtremalDepCli:
    """One invocation of the toolkit."""

    EXIT_OK = 0
    EXIT_SUITE_FAILED = 1
    EXIT_INVALID = 2
    EXIT_UNDETERMINED = 3

    # verify --suite name -> acceptance group
    SUITES = {
        "closed_form": "1",
        "verdicts": "2",
        "theta": "3",
        "monte_carlo": "4",
        "props": "5",
        "simulators": "6",
    }
    ACCEPTANCE_DIR = "tests/test_acceptance"

    DEFAULT_RUNS_N = 10 ** 6
    DEFAULT_GAMMA_N = 10 ** 5
    DEFAULT_BLOCK_N = 1000
    DEFAULT_REPS = 10 ** 4

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.started = time.perf_counter()

    # HELPERS

    def manifest(self, **extra) -> RunManifest:
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        return RunManifest(
            command=self.args.command if self.args.command != "estimate" else f"estimate {self.args.mode}",
            config=config,
            seed=getattr(self.args, "seed", None),
            duration_s=time.perf_counter() - self.started,
            extra=extra,
        )

    def model_spec(self) -> ModelSpec:
        return ModelSpec(kind=self.args.model, p=self.args.p, q=self.args.q, d=self.args.d)

    def partition(self, spec: ModelSpec) -> PartitionSpec:
        if self.args.partition:
            return PartitionSpec.parse(self.args.partition)
        if spec.kind == "max_ar":
            return PartitionSpec.canonical(spec.p, spec.q)
        raise ValidationError(f"--partition is required for model kind {spec.kind!r}.")

    def tau(self, required: bool = True) -> TauVector | None:
        if self.args.tau is None:
            if required:
                raise ValidationError("--tau is required.")
            return None
        return TauVector.parse(self.args.tau)

    def threads(self) -> int:
        return self.args.threads if self.args.threads is not None else Config.threads()

    def write_json(self, payload: dict) -> None:
        text = json.dumps(payload, indent=2) + "\n"
        if self.args.out:
            Path(self.args.out).write_text(text)
            logger.info("wrote %s", self.args.out)
        else:
            sys.stdout.write(text)

    def series_config(self, spec: ModelSpec, n: int) -> SeriesConfig:
        return SeriesConfig(model=spec, n=n, seed=self.args.seed, margin=self.args.margin)

    # COMMANDS

    def cmd_model_report(self) -> int:
        spec = self.model_spec()
        report = coefficient_report(build_model(spec), self.partition(spec), self.tau(required=False),
                                    tol=self.args.tol)
        payload = report.to_dict()
        payload["manifest"] = self.manifest().to_dict()
        self.write_json(payload)
        if report.undetermined or report.missing:
            logger.warning("theta data missing for %s: %s", spec.kind, report.missing or "verdicts")
            return self.EXIT_UNDETERMINED
        return self.EXIT_OK

    def cmd_simulate(self) -> int:
        if not self.args.out:
            raise ValidationError("simulate needs --out.")
        cfg = self.series_config(self.model_spec(), self.args.n)
        if self.args.series == "z":
            if cfg.model.kind != "three_dependent":
                raise ValidationError("--series z needs the three_dependent model.")
            sample = gen_z_series(cfg)
        elif self.args.series == "rowmax":
            sample = row_maxima(gen_series(cfg))
        else:
            sample = gen_series(cfg)
        out = Path(self.args.out)
        sample.write_csv(out)
        manifest = self.manifest(shape=[sample.n, sample.d], series=cfg.to_dict())
        Path(f"{out}.manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
        logger.info("wrote %d x %d sample to %s", sample.n, sample.d, out)
        return self.EXIT_OK

    def cmd_estimate(self) -> int:
        spec = self.model_spec()
        if self.args.mode == "blocks":
            result = estimate_theta_blocks(
                spec,
                self.series_config(spec, self.args.block_n or self.DEFAULT_BLOCK_N),
                self.tau(),
                block_n=self.args.block_n or self.DEFAULT_BLOCK_N,
                reps=self.args.reps or self.DEFAULT_REPS,
                exact_denominator=not self.args.iid_denominator,
                threads=self.threads(),
            )
        elif self.args.mode == "runs":
            result = self._estimate_runs(spec)
        else:
            result = self._estimate_gamma(spec)
        payload = result.to_dict()
        payload["manifest"] = self.manifest().to_dict()
        self.write_json(payload)
        return self.EXIT_OK

    def _estimate_runs(self, spec: ModelSpec):
        if self.args.input:
            sample = SampleMatrix.read_csv(self.args.input)
            kind = input_series_kind(Path(self.args.input))
        else:
            sample = gen_series(self.series_config(spec, self.args.n or self.DEFAULT_RUNS_N))
            kind = "vector"
        column = self.args.column
        if column is None:
            if sample.d > 1 or kind == "rowmax":
                column = "rowmax"
            elif kind is None and self.args.level is None:
                # a lone column may be a base coordinate, Z or a row maximum
                raise ValidationError(f"{self.args.input} has one column and no simulate manifest; "
                                      f"pass --column (an index or 'rowmax') or --level.")
            else:
                column = 1
        if column != "rowmax":
            try:
                column = int(column)
            except ValueError:
                raise ValidationError(f"--column is a 1-based index or 'rowmax', got {column!r}.")
            if not 1 <= column <= sample.d:
                raise ValidationError(f"Column {column} outside 1..{sample.d}.")
        series = row_maxima(sample) if column == "rowmax" else SampleMatrix(sample.column(column))

        if self.args.level is not None:
            level = self.args.level
            normalization = "given level"
        else:
            block_n = self.args.block_n or self.DEFAULT_BLOCK_N
            margin = margin_for(spec, self.args.margin, column)
            level = normalized_levels(margin, block_n, self.tau()).levels[0]
            normalization = f"{margin.name} at block_n={block_n}"
        result = estimate_theta_runs(series, level, k=self.args.k)
        result.meta["normalization"] = normalization
        result.meta["column"] = column
        if kind is not None:
            result.meta["series"] = kind
        return result

    def _estimate_gamma(self, spec: ModelSpec):
        tau = self.tau()
        if self.args.input:
            sample = SampleMatrix.read_csv(self.args.input)
        else:
            n = self.args.n or self.DEFAULT_GAMMA_N
            sample = gen_iid_associated(spec, n, self.series_config(spec, n), rng_for(self.args.seed))
        margins = [margin_for(spec, self.args.margin, j) for j in range(1, spec.dimension + 1)]
        levels = normalized_levels(margins, self.args.block_n or self.DEFAULT_BLOCK_N, tau)
        return estimate_gamma(sample, levels)

    def cmd_verify(self) -> int:
        # deferred: run_tests discovers the test packages
        from ed_utils.json_test_runner import JSONTestRunner
        from run_tests import load_suite

        groups = None if self.args.suite == "all" else [self.SUITES[self.args.suite]]
        env = {Config.SEED_ENV: str(self.args.seed)}
        if self.args.threads is not None:
            env[Config.THREADS_ENV] = str(self.args.threads)
        if self.args.perturb_theta:
            env[Config.PERTURBATION_ENV] = repr(self.args.perturb_theta)
        with environment(env):
            suite = load_suite(groups, monte_carlo=True, start=self.ACCEPTANCE_DIR)
            runner = JSONTestRunner(stream=io.StringIO(), extra={"suite": self.args.suite})
            runner.run(suite)

        report = runner.json_data
        report["manifest"] = self.manifest().to_dict()
        self.write_json(report)
        summary = report["summary"]
        logger.info("verify %s: %d/%d passed", self.args.suite, summary["passed"], summary["total"])
        return self.EXIT_OK if report["passed"] else self.EXIT_SUITE_FAILED


def _model_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    kinds = sorted(get_models()) + sorted(ALIASES)
    parser.add_argument("--model", choices=kinds, required=required, help="Model kind (ex31 = max_ar, ex32 = three_dependent).")
    parser.add_argument("--p", type=int, help="max_ar: size of the X block.")
    parser.add_argument("--q", type=int, help="max_ar: size of the -X block.")
    parser.add_argument("--d", type=int, help="iid_product: dimension.")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Overrides EXTREMALDEP_LOG_LEVEL.")
    common.add_argument("--threads", type=int, help="Worker threads for replications; overrides EXTREMALDEP_THREADS.")
    common.add_argument("--out", help="Output file; JSON goes to stdout when omitted.")

    parser = argparse.ArgumentParser(prog="main.py", description="Extremal dependence toolkit.")
    commands = parser.add_subparsers(dest="command", required=True)

    report = commands.add_parser("report", parents=[common], help="Coefficients, bounds and verdicts of a model.")
    _model_flags(report)
    report.add_argument("--partition", help="Blocks as '1,2|3'; defaults to the canonical split for max_ar.")
    report.add_argument("--tau", help="Reference tau as '1,1,1'; the unit vector when omitted.")
    report.add_argument("--tol", type=float, default=Config.VERDICT_TOL, help="Verdict tolerance.")
    report.set_defaults(func=ExtremalDepCli.cmd_model_report)

    simulate = commands.add_parser("simulate", parents=[common], help="Write a simulated series to CSV.")
    _model_flags(simulate)
    simulate.add_argument("--n", type=int, required=True)
    simulate.add_argument("--seed", type=int, default=Config.DEFAULT_SEED)
    simulate.add_argument("--margin", default="unit_frechet")
    simulate.add_argument("--series", choices=["vector", "z", "rowmax"], default="vector")
    simulate.set_defaults(func=ExtremalDepCli.cmd_simulate)

    estimate = commands.add_parser("estimate", parents=[common], help="Monte Carlo estimates of theta or gamma.")
    estimate.add_argument("mode", choices=["blocks", "runs", "gamma"])
    _model_flags(estimate)
    estimate.add_argument("--tau")
    estimate.add_argument("--n", type=int, help="Series length (runs) or i.i.d. sample size (gamma).")
    estimate.add_argument("--block-n", type=int)
    estimate.add_argument("--reps", type=int)
    estimate.add_argument("--k", type=int, default=Config.RUNS_K)
    estimate.add_argument("--seed", type=int, default=Config.DEFAULT_SEED)
    estimate.add_argument("--margin", default="unit_frechet")
    estimate.add_argument("--input", help="Read the series (runs) or the i.i.d. sample (gamma) from CSV.")
    estimate.add_argument("--column", help="1-based column for runs, or 'rowmax'.")
    estimate.add_argument("--level", type=float, help="Runs threshold; normalized from --tau and --block-n when omitted.")
    estimate.add_argument("--iid-denominator", action="store_true",
                          help="Simulate i.i.d. blocks instead of using the exact Q^n.")
    estimate.set_defaults(func=ExtremalDepCli.cmd_estimate)

    verify = commands.add_parser("verify", parents=[common], help="Run the acceptance suite.")
    verify.add_argument("--seed", type=int, default=Config.DEFAULT_SEED)
    verify.add_argument("--suite", choices=["all"] + list(ExtremalDepCli.SUITES), default="all")
    verify.add_argument("--perturb-theta", type=float, default=0.0, help=argparse.SUPPRESS)
    verify.set_defaults(func=ExtremalDepCli.cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        level = logging.getLevelName(args.log_level) if args.log_level else Config.log_level()
        logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")
        if args.threads is not None and args.threads < 1:
            raise ValidationError(f"--threads should be a positive integer, got {args.threads}.")
        return args.func(ExtremalDepCli(args))
    except InsufficientModelDataError as e:
        logger.error("%s", e)
        return ExtremalDepCli.EXIT_UNDETERMINED
    except (ValidationError, CalibrationError) as e:
        logger.error("%s", e)
        return ExtremalDepCli.EXIT_INVALID
    except OSError as e:
        logger.error("I/O failure: %s", e)
        return ExtremalDepCli.EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
