import argparse
import re
import sys
import unittest
from pathlib import Path

from ed_utils.json_test_runner import JSONTestRunner

ROOT = Path(__file__).resolve().parent


def _iter_tests(suite):
    for item in suite:
        if isinstance(item, unittest.TestSuite):
            yield from _iter_tests(item)
        else:
            yield item


def load_suite(groups=None, monte_carlo=False, start="tests") -> unittest.TestSuite:
    """
    Discovers the tests under `start` and keeps the ones tagged @number("<g>.x") for g in groups.

    Args:
        - groups: group numbers as strings, None or empty for every group
        - monte_carlo: keep the tests tagged @monte_carlo()
        - start: directory to discover from, relative to the repository root

    Import failures are kept so they show up as errors.
    """
    discovered = unittest.defaultTestLoader.discover(str(ROOT / start), top_level_dir=str(ROOT))
    kept = unittest.TestSuite()
    for test in _iter_tests(discovered):
        if "FailedTest" in str(type(test)):
            kept.addTest(test)
            continue
        func = getattr(test, test._testMethodName)
        if getattr(func, "__monte_carlo__", None) is True and not monte_carlo:
            continue
        tag = getattr(func, "__number__", "")
        if groups and not any(re.match(rf"^{re.escape(g)}\.", tag) for g in groups):
            continue
        kept.addTest(test)
    return kept


if __name__ == "__main__":

    p = argparse.ArgumentParser()
    p.add_argument(
        "task",
        help=(
            "The test group you'd like to run. "
            "Leave blank for all groups.\n\n"
            "Example: run_tests.py 3\n"
            "Runs the tests with @number('3.x')."
        ),
        default="",
        nargs="?",
    )
    p.add_argument(
        "-m",
        "--monte-carlo",
        help="Also run the seeded Monte Carlo tests (minutes rather than seconds).",
        action="store_true",
    )
    p.add_argument(
        "-j",
        "--json",
        help="Print a JSON report instead of the text one.",
        action="store_true",
    )
    args = p.parse_args()

    suite = load_suite([args.task] if args.task else None, args.monte_carlo)
    if args.json:
        runner = JSONTestRunner(stream=sys.stdout)
    else:
        runner = unittest.runner.TextTestRunner()
    result = runner.run(suite)
    sys.exit(0 if result.wasSuccessful() else 1)
