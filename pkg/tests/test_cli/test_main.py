from __future__ import annotations

import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
from ed_utils.decorators import hide_errors, monte_carlo, note, number
from ed_utils.json_test_runner import JSONTestRunner
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from config import Config
from main import ExtremalDepCli, main
from run_tests import ROOT, load_suite
from simulate import SampleMatrix

SCHEMAS = {path.name: json.loads(path.read_text()) for path in (ROOT / "schemas").glob("*.schema.json")}
REGISTRY = Registry().with_resources((name, Resource.from_contents(schema)) for name, schema in SCHEMAS.items())


def validator(name: str) -> Draft202012Validator:
    return Draft202012Validator(SCHEMAS[name], registry=REGISTRY)


class CliTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def run_cli(self, *argv: str) -> tuple[int, dict | None]:
        """Runs main() and returns the exit code with the JSON it printed, if any."""
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main(list(argv))
        text = out.getvalue().strip()
        return code, json.loads(text) if text else None


class TestReport(CliTestCase):

    @number("12.1")
    def test_three_dependent(self):
        code, report = self.run_cli("report", "--model", "three_dependent", "--partition", "1,2|3", "--tau", "1,1,1")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(report["verdict_independent"], "no")
        self.assertEqual(report["verdict_total_dep"], "yes")
        self.assertAlmostEqual(report["pair_epsilon"], 0.5, places=10)
        self.assertEqual(report["manifest"]["command"], "report")
        validator("coefficient_report.schema.json").validate(report)

    @number("12.2")
    def test_iid_and_max_ar(self):
        code, report = self.run_cli("report", "--model", "iid_product", "--d", "3", "--partition", "1|2,3")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(report["verdict_independent"], "yes")
        self.assertAlmostEqual(report["pair_epsilon"], 1.0, places=10)

        code, report = self.run_cli("report", "--model", "max_ar", "--p", "2", "--q", "1", "--partition", "1,2|3")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(report["verdict_independent"], "yes")
        # canonical split when --partition is omitted
        code, default = self.run_cli("report", "--model", "ex31", "--p", "2", "--q", "1")
        self.assertEqual(default["partition"], report["partition"])

    @number("12.3")
    def test_theta_outside_domain(self):
        code, report = self.run_cli("report", "--model", "ex32", "--partition", "1,2|3", "--tau", "1,2,3")
        self.assertEqual(code, ExtremalDepCli.EXIT_UNDETERMINED)
        self.assertIsNone(report["theta"])
        self.assertIn("theta", report["missing"])
        validator("coefficient_report.schema.json").validate(report)

    @number("12.4")
    def test_out_file(self):
        path = self.dir / "report.json"
        code, printed = self.run_cli("report", "--model", "ex32", "--partition", "3|1,2", "--out", str(path))
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertIsNone(printed)
        self.assertEqual(json.loads(path.read_text())["partition"], "3|1,2")


class TestSimulate(CliTestCase):

    @number("12.5")
    def test_three_dependent_shape(self):
        path = self.dir / "ex32.csv"
        code, _ = self.run_cli("simulate", "--model", "ex32", "--n", "1000", "--seed", "7", "--out", str(path))
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        sample = SampleMatrix.read_csv(path)
        self.assertEqual((sample.n, sample.d), (1000, 3))
        self.assertEqual(path.read_text().splitlines()[0], "t,c1,c2,c3")

        manifest = json.loads(Path(f"{path}.manifest.json").read_text())
        validator("manifest.schema.json").validate(manifest)
        self.assertEqual(manifest["seed"], 7)
        self.assertEqual(manifest["extra"]["shape"], [1000, 3])

    @number("12.6")
    def test_max_ar_columns(self):
        path = self.dir / "ex31.csv"
        code, _ = self.run_cli("simulate", "--model", "ex31", "--p", "1", "--q", "1", "--n", "10", "--seed", "1",
                               "--out", str(path))
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        sample = SampleMatrix.read_csv(path)
        np.testing.assert_array_equal(sample.column(2), -sample.column(1))

    @number("12.7")
    def test_reruns_are_byte_identical(self):
        first, second = self.dir / "a.csv", self.dir / "b.csv"
        for path in (first, second):
            self.run_cli("simulate", "--model", "ex32", "--n", "500", "--seed", "11", "--out", str(path))
        self.assertEqual(first.read_bytes(), second.read_bytes())

    @number("12.8")
    def test_series_choices(self):
        path = self.dir / "z.csv"
        self.assertEqual(self.run_cli("simulate", "--model", "ex32", "--n", "50", "--series", "z", "--out", str(path))[0],
                         ExtremalDepCli.EXIT_OK)
        self.assertEqual(SampleMatrix.read_csv(path).d, 1)
        code, _ = self.run_cli("simulate", "--model", "ex31", "--p", "1", "--q", "1", "--n", "50", "--series", "z",
                               "--out", str(path))
        self.assertEqual(code, ExtremalDepCli.EXIT_INVALID)


class TestEstimate(CliTestCase):

    @number("12.9")
    def test_runs(self):
        code, result = self.run_cli("estimate", "runs", "--model", "ex32", "--n", "20000", "--tau", "1",
                                    "--block-n", "100", "--seed", "3")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        validator("estimate_result.schema.json").validate(result)
        self.assertEqual(result["meta"]["column"], "rowmax")
        self.assertTrue(0.0 <= result["estimate"] <= 1.0)
        self.assertEqual(result["manifest"]["command"], "estimate runs")

    @number("12.10")
    def test_runs_from_csv(self):
        path = self.dir / "series.csv"
        self.run_cli("simulate", "--model", "ex32", "--n", "2000", "--seed", "4", "--out", str(path))
        code, result = self.run_cli("estimate", "runs", "--model", "ex32", "--input", str(path), "--column", "2",
                                    "--level", "5.0")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(result["meta"]["normalization"], "given level")
        self.assertEqual(result["meta"]["level"], 5.0)
        code, _ = self.run_cli("estimate", "runs", "--model", "ex32", "--input", str(path), "--column", "4",
                               "--level", "5.0")
        self.assertEqual(code, ExtremalDepCli.EXIT_INVALID)

    @number("12.11")
    def test_gamma(self):
        code, result = self.run_cli("estimate", "gamma", "--model", "ex32", "--n", "20000", "--tau", "1,1,1",
                                    "--block-n", "100", "--seed", "5")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        validator("estimate_result.schema.json").validate(result)
        self.assertLessEqual(abs(result["estimate"] - 2.5), 5 * result["se"])

    @number("12.12")
    def test_blocks(self):
        args = ("estimate", "blocks", "--model", "ex31", "--p", "1", "--q", "1", "--tau", "1,0",
                "--block-n", "200", "--reps", "2000", "--seed", "6")
        code, serial = self.run_cli(*args, "--threads", "1")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        validator("estimate_result.schema.json").validate(serial)
        self.assertAlmostEqual(serial["meta"]["finite_block_theta"], 201 / 400, places=9)
        self.assertLessEqual(abs(serial["estimate"] - 0.5), 5 * serial["se"])

        _, parallel = self.run_cli(*args, "--threads", "4")
        self.assertEqual(parallel["estimate"], serial["estimate"])
        self.assertEqual(parallel["se"], serial["se"])


class TestInvalidInput(CliTestCase):

    @number("12.13")
    def test_exit_two(self):
        cases = [
            ("report", "--model", "ex32", "--partition", "1,2|3", "--tau", "1,-1,1"),
            ("report", "--model", "ex32", "--partition", "1,2|2"),
            ("report", "--model", "ex32"),
            ("report", "--model", "max_ar", "--p", "0", "--q", "1"),
            ("simulate", "--model", "ex32", "--n", "10"),
            ("simulate", "--model", "ex32", "--n", "0", "--out", str(self.dir / "x.csv")),
            ("estimate", "blocks", "--model", "ex31", "--p", "1", "--q", "1", "--tau", "1,0", "--reps", "10"),
            ("estimate", "gamma", "--model", "ex32", "--n", "100"),
            ("estimate", "runs", "--model", "ex32", "--input", str(self.dir / "missing.csv"), "--level", "1"),
            ("report", "--model", "ex32", "--partition", "1,2|3", "--threads", "0"),
        ]
        for argv in cases:
            code, _ = self.run_cli(*argv)
            self.assertEqual(code, ExtremalDepCli.EXIT_INVALID, " ".join(argv))

    @number("12.14")
    def test_usage_errors(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as cm:
                main(["report", "--model", "moving_maxima"])
        self.assertEqual(cm.exception.code, 2)


class TestVerify(CliTestCase):

    @number("12.15")
    def test_closed_form_suite(self):
        code, report = self.run_cli("verify", "--suite", "closed_form")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        validator("verify_report.schema.json").validate(report)
        self.assertTrue(report["passed"])
        self.assertEqual(report["suite"], "closed_form")
        self.assertGreater(report["summary"]["total"], 0)
        self.assertTrue(all(case["group"] == "1" for case in report["testcases"]))

    @number("12.16")
    def test_perturbed_theta_fails(self):
        with self.assertLogs(level="WARNING"):
            code, report = self.run_cli("verify", "--suite", "verdicts", "--perturb-theta", "0.1")
        self.assertEqual(code, ExtremalDepCli.EXIT_SUITE_FAILED)
        self.assertFalse(report["passed"])
        self.assertGreater(report["summary"]["failed"], 0)

    @number("12.17")
    def test_suite_filter(self):
        code, report = self.run_cli("verify", "--suite", "props", "--seed", "1")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual({case["group"] for case in report["testcases"]}, {"5"})
        self.assertEqual(report["manifest"]["seed"], 1)


class TestLoadSuite(unittest.TestCase):

    @number("12.18")
    def test_group_filter(self):
        suite = load_suite(["3"], start="tests/test_acceptance")
        names = [t._testMethodName for t in suite]
        self.assertEqual(len(names), 4)

    @number("12.19")
    def test_monte_carlo_filter(self):
        quick = [t._testMethodName for t in load_suite(["4"], start="tests/test_acceptance")]
        self.assertEqual(quick, ["test_finite_block_values_approach_the_limit"])
        full = load_suite(["4"], monte_carlo=True, start="tests/test_acceptance")
        self.assertEqual(full.countTestCases(), 10)


class TestRunsInput(CliTestCase):

    def simulate(self, name: str, series: str) -> Path:
        path = self.dir / name
        code, _ = self.run_cli("simulate", "--model", "ex32", "--n", "20000", "--seed", "3", "--series", series,
                               "--out", str(path))
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        return path

    @number("12.20")
    def test_row_maximum_csv_uses_its_manifest(self):
        path = self.simulate("w.csv", "rowmax")
        args = ("estimate", "runs", "--model", "ex32", "--input", str(path), "--tau", "1", "--block-n", "100")
        code, result = self.run_cli(*args)
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(result["meta"]["column"], "rowmax")
        self.assertEqual(result["meta"]["series"], "rowmax")
        self.assertTrue(result["meta"]["normalization"].startswith("rowmax(unit_frechet)"))
        # P(max > u) = 1/block_n; the base margin would give about 2.5 times as many
        self.assertLess(abs(result["meta"]["exceedances"] - 200), 120)

        code, explicit = self.run_cli(*args, "--column", "rowmax")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(explicit["meta"]["level"], result["meta"]["level"])

        Path(f"{path}.manifest.json").unlink()
        code, _ = self.run_cli(*args)
        self.assertEqual(code, ExtremalDepCli.EXIT_INVALID)
        code, fallback = self.run_cli(*args, "--column", "rowmax")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(fallback["meta"]["level"], result["meta"]["level"])
        self.assertEqual(self.run_cli(*args, "--level", "50")[0], ExtremalDepCli.EXIT_OK)

    @number("12.21")
    def test_z_csv_uses_the_base_margin(self):
        path = self.simulate("z.csv", "z")
        code, result = self.run_cli("estimate", "runs", "--model", "ex32", "--input", str(path), "--tau", "1",
                                    "--block-n", "100")
        self.assertEqual(code, ExtremalDepCli.EXIT_OK)
        self.assertEqual(result["meta"]["column"], 1)
        self.assertEqual(result["meta"]["series"], "z")
        self.assertEqual(result["meta"]["normalization"], "unit_frechet at block_n=100")

    @number("12.22")
    def test_broken_manifest(self):
        path = self.simulate("v.csv", "rowmax")
        Path(f"{path}.manifest.json").write_text("{\"config\": {}}")
        code, _ = self.run_cli("estimate", "runs", "--model", "ex32", "--input", str(path), "--tau", "1")
        self.assertEqual(code, ExtremalDepCli.EXIT_INVALID)


class TestVerifyEnvironment(CliTestCase):

    def setUp(self) -> None:
        super().setUp()
        self.saved = {key: os.environ.get(key) for key in (Config.SEED_ENV, Config.PERTURBATION_ENV)}

    def tearDown(self) -> None:
        for key, value in self.saved.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value
        super().tearDown()

    @number("12.23")
    def test_verify_restores_environment(self):
        os.environ[Config.SEED_ENV] = "99"
        os.environ.pop(Config.PERTURBATION_ENV, None)
        with self.assertLogs(level="WARNING"):
            code, report = self.run_cli("verify", "--suite", "verdicts", "--seed", "5", "--perturb-theta", "0.1")
        self.assertEqual(code, ExtremalDepCli.EXIT_SUITE_FAILED)
        self.assertEqual(report["manifest"]["seed"], 5)
        self.assertEqual(os.environ[Config.SEED_ENV], "99")
        self.assertNotIn(Config.PERTURBATION_ENV, os.environ)


class TestJsonReport(unittest.TestCase):

    @number("12.24")
    def test_tags_shape_records(self):
        class Sample(unittest.TestCase):

            @number("99.1")
            @note("Compared with the finite value.")
            def test_pass(self):
                print("seen")

            @number("99.2")
            @hide_errors("Wrong answer.")
            def test_fail(self):
                self.fail("boom")

            @number("98.1")
            @monte_carlo()
            def test_error(self):
                raise RuntimeError("broken")

        stream = io.StringIO()
        runner = JSONTestRunner(stream=stream, extra={"suite": "sample"})
        result = runner.run(unittest.defaultTestLoader.loadTestsFromTestCase(Sample))
        report = runner.json_data
        self.assertFalse(result.wasSuccessful())
        self.assertEqual(json.loads(stream.getvalue()), report)
        self.assertEqual(report["suite"], "sample")
        self.assertFalse(report["passed"])

        error, passing, failing = report["testcases"]
        self.assertEqual([case["name"].split(":")[0] for case in report["testcases"]], ["98.1", "99.1", "99.2"])
        self.assertTrue(passing["ok"] and passing["passed"])
        self.assertEqual(passing["note"], "Compared with the finite value.")
        self.assertEqual(passing["feedback"], "seen\nCompared with the finite value.")
        self.assertEqual(failing["feedback"], "Wrong answer.")
        self.assertNotIn("note", failing)
        self.assertTrue(error["monte_carlo"])
        self.assertIn("[MC]", error["name"])
        self.assertIn("broken", error["feedback"])
        self.assertTrue(all(case["duration_s"] >= 0 for case in report["testcases"]))

        self.assertEqual(report["summary"]["total"], 3)
        self.assertEqual(report["summary"]["failed"], 2)
        self.assertEqual(report["summary"]["by_group"], {"98": {"total": 1, "failed": 1},
                                                         "99": {"total": 2, "failed": 1}})

    @number("12.25")
    def test_minus_x_row_carries_its_note(self):
        from tests.test_acceptance.test_monte_carlo import TestBlockEstimator
        text = getattr(TestBlockEstimator.test_max_ar_minus_x, note.get_attr_name())
        self.assertIn("1/sqrt(block_n)", text)
