"""
JSON test runner.

Runs a suite and writes one record per test plus a summary:

    {"testcases": [{"name", "ok", "passed", "group", "feedback", "monte_carlo", "duration_s", "note"?}, ...],
     "summary": {"total", "passed", "failed", "by_group"},
     "passed": bool, **extra}

The tags of ed_utils.decorators shape each record (see REPORT_ORDER there).
"""
from __future__ import annotations

import json
import sys
import time
import unittest

from ed_utils.decorators import REPORT_ORDER


class JSONTestResult(unittest.TestResult):
    """Collects a record per test; with buffering on, a test's output becomes its feedback."""

    def __init__(self, records: list, stream=None, descriptions=True, verbosity=1):
        super().__init__(stream, descriptions, verbosity)
        self.records = records
        self.descriptions = descriptions
        self._started: dict[str, float] = {}

    def startTest(self, test):
        self._started[test.id()] = time.perf_counter()
        super().startTest(test)

    def describe(self, test) -> str:
        doc = test.shortDescription()
        return doc if self.descriptions and doc else str(test)

    def captured_output(self) -> str:
        if not self.buffer or self._stdout_buffer is None:
            return ""
        out = self._stdout_buffer.getvalue()
        err = self._stderr_buffer.getvalue()
        if out and err and not out.endswith("\n"):
            out += "\n"
        return out + err

    def record(self, test, err=None) -> None:
        started = self._started.pop(test.id(), None)
        record = {
            "name": self.describe(test),
            "ok": err is None,
            "duration_s": 0.0 if started is None else time.perf_counter() - started,
        }
        # class and module fixture errors arrive without a test method
        method = getattr(test, getattr(test, "_testMethodName", ""), None)
        output = self.captured_output()
        for tag in REPORT_ORDER:
            tag.change_result(getattr(method, tag.get_attr_name(), None), record, output, err)
        self.records.append(record)

    def addSuccess(self, test):
        super().addSuccess(test)
        self.record(test)

    def addError(self, test, err):
        super().addError(test, err)
        # keep the captured output out of the real stdout
        self._mirrorOutput = False
        self.record(test, err)

    def addFailure(self, test, err):
        super().addFailure(test, err)
        self._mirrorOutput = False
        self.record(test, err)


def summarize(records: list[dict]) -> dict:
    """Totals over all records and per @number group."""
    by_group: dict[str, dict] = {}
    for record in records:
        group = by_group.setdefault(record.get("group", ""), {"total": 0, "failed": 0})
        group["total"] += 1
        group["failed"] += not record["ok"]
    failed = sum(not record["ok"] for record in records)
    return {"total": len(records), "passed": len(records) - failed, "failed": failed, "by_group": by_group}


class JSONTestRunner:
    """
    Runs a suite and dumps its JSON report to `stream`.

    `extra` is merged into the top level of the report (e.g. the suite name).
    After run() the report is also available as `json_data`.
    """

    def __init__(self, stream=sys.stdout, descriptions=True, verbosity=1,
                 failfast=False, buffer=True, extra=None):
        self.stream = stream
        self.descriptions = descriptions
        self.verbosity = verbosity
        self.failfast = failfast
        self.buffer = buffer
        self.extra = dict(extra or {})
        self.json_data: dict = {}

    def run(self, test) -> unittest.TestResult:
        records: list[dict] = []
        result = JSONTestResult(records, self.stream, self.descriptions, self.verbosity)
        unittest.registerResult(result)
        result.failfast = self.failfast
        result.buffer = self.buffer
        result.startTestRun()
        try:
            test(result)
        finally:
            result.stopTestRun()

        records.sort(key=lambda record: record["name"])
        summary = summarize(records)
        self.json_data = {
            **self.extra,
            "testcases": records,
            "summary": summary,
            "passed": summary["failed"] == 0 and summary["total"] > 0,
        }
        json.dump(self.json_data, self.stream, indent=4)
        self.stream.write("\n")
        return result
