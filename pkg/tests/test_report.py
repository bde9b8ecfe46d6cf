"""
Tests for problem files and JSON reports.

Tests:
- Loading shipped problems and rebuilding them from their canonical form
- Schema errors carry JSON-pointer locations
- Report layout and atomic writes
"""

import json
import logging

import numpy as np
import pytest

from socheck.certify.verdict import verdict
from socheck.core.funcdsl import evaluate
from socheck.errors import ProblemSchemaError
from socheck.harness.report import (
    atomic_write,
    dump_problem,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    read_problem_data,
    report_to_dict,
    report_to_json,
    write_report,
)

REPORT_KEYS = [
    "problem", "point", "feasible", "feasibility", "rank_H", "first_order", "directions", "overall", "mode",
]


class TestProblemFiles:

    def test_load_shipped_problem(self, problems_dir):
        problem = load_problem(problems_dir / "p5.json")
        assert problem.name == "P5"
        assert (problem.n, problem.m, problem.p, problem.k) == (2, 1, 1, 0)
        assert [f.name for f in problem.equalities] == ["h0"]
        np.testing.assert_allclose(problem.directions[0], [-1.0, 0.0])

    def test_file_stem_is_default_name(self, tmp_path):
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps({"n": 1, "objectives": ["v0"]}), encoding="utf-8")
        assert load_problem(path).name == "tiny"

    def test_dump_and_reload(self, problems_dir, tmp_path):
        original = load_problem(problems_dir / "p4.json")
        target = tmp_path / "nested" / "p4.json"
        dump_problem(original, target)
        reloaded = load_problem(target)
        assert problem_to_dict(reloaded) == problem_to_dict(original)
        for f, g in zip(original.objectives, reloaded.objectives):
            assert evaluate(g, [-0.3, 0.7]) == evaluate(f, [-0.3, 0.7])

    def test_schema_error_locations(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "objectives": ["(+ v0"]}), encoding="utf-8")
        with pytest.raises(ProblemSchemaError) as excinfo:
            load_problem(path)
        assert [i.location for i in excinfo.value.issues] == ["/objectives/0"]
        assert "/objectives/0" in str(excinfo.value)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ProblemSchemaError):
            read_problem_data(path)

    def test_unknown_keys_are_logged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="socheck.harness.report"):
            problem = problem_from_dict({"n": 1, "objectives": ["v0"], "colour": "blue"}, name="c")
        assert problem.name == "c"
        assert "/colour" in caplog.text

    def test_c11_flag_propagates(self):
        problem = problem_from_dict({"n": 1, "objectives": ["v0"], "c11_declared": False})
        assert not problem.c11_declared
        assert not problem.objectives[0].declared_c11


class TestReports:

    def test_layout(self, corpus_entry, fast_cfg):
        report = verdict(corpus_entry.problem, corpus_entry.point, fast_cfg)
        data = report_to_dict(report)
        assert list(data) == REPORT_KEYS
        assert data["overall"] == corpus_entry.expected_overall.value
        json.loads(report_to_json(report))

    def test_refuted_direction_entry(self, problems_dir, fast_cfg):
        problem = load_problem(problems_dir / "p5.json")
        data = report_to_dict(verdict(problem, problem.point, fast_cfg))
        refuted = [d for d in data["directions"] if d["refuted"]]
        assert len(refuted) == 1
        assert refuted[0]["d"] == [-1.0, 0.0]
        assert refuted[0]["certificate"] is None
        assert refuted[0]["K_status"] == "converged"
        assert refuted[0]["margin"] == pytest.approx(-1.0, rel=1e-6)

    def test_write_report_leaves_no_temp_files(self, problems_dir, tmp_path, fast_cfg):
        problem = load_problem(problems_dir / "p3.json")
        out = tmp_path / "p3.report.json"
        write_report(verdict(problem, problem.point, fast_cfg), out)
        assert [p.name for p in tmp_path.iterdir()] == ["p3.report.json"]
        assert json.loads(out.read_text(encoding="utf-8"))["overall"] == "CONSISTENT"


class TestAtomicWrite:

    def test_creates_parents_and_replaces(self, tmp_path):
        target = tmp_path / "a" / "b.txt"
        atomic_write(target, "first")
        atomic_write(target, "second")
        assert target.read_text(encoding="utf-8") == "second"
        assert [p.name for p in target.parent.iterdir()] == ["b.txt"]
