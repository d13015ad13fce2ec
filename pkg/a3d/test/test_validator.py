#!/usr/bin/env python3
"""
Tests for the acceptance validator
"""

from a3d.validator import AcceptanceValidator


def test_run_validation_passes(capsys):
    validator = AcceptanceValidator(seed=0)
    assert validator.run_validation()
    assert validator.passed_tests == validator.total_tests == 5
    assert validator.validation_results["LR schedule"] == "PASSED"
    assert "Passed: 5/5" in capsys.readouterr().out


def test_check_records_status():
    validator = AcceptanceValidator()
    test_cases = [
        {"name": "passes", "run": lambda: True, "expected": "PASSED", "description": "true result"},
        {"name": "always fails", "run": lambda: False, "expected": "FAILED", "description": "false result"},
        {"name": "raises", "run": lambda: 1 / 0, "expected": "ERROR", "description": "exception"},
    ]
    for case in test_cases:
        status = validator.check(case["name"], case["run"])
        assert status.startswith(case["expected"]), case["description"]
        assert validator.validation_results[case["name"]] == status

    assert validator.total_tests == 3
    assert validator.passed_tests == 1
