"""
Tests for verdict assembly on the corpus and on hand-built problems.
"""

import numpy as np
import pytest

from socheck.certify.verdict import Overall, verdict
from socheck.core.funcdsl import FunctionDef, abs_, var
from socheck.core.problem import ProblemInstance
from socheck.core.settings import CertificateMode
from socheck.errors import InfeasiblePoint
from socheck.harness.corpus import CORPUS_BUILDERS
from socheck.harness.report import report_to_json


def _run(name, cfg, **kwargs):
    entry = CORPUS_BUILDERS[name]()
    return verdict(entry.problem, entry.point, cfg, **kwargs)


class TestCorpusVerdicts:

    def test_expected_overall(self, corpus_entry, fast_cfg):
        report = verdict(corpus_entry.problem, corpus_entry.point, fast_cfg)
        assert report.overall is corpus_entry.expected_overall

    def test_refuting_directions(self, corpus_entry, fast_cfg):
        report = verdict(corpus_entry.problem, corpus_entry.point, fast_cfg)
        refuted = [v.d for v in report.refuting]
        for d in corpus_entry.refuting:
            assert any(np.allclose(r, d / np.linalg.norm(d)) for r in refuted)

    def test_smaller_slack_keeps_verdict(self, corpus_entry, fast_cfg):
        tight = fast_cfg.with_overrides(eta=1e-10)
        report = verdict(corpus_entry.problem, corpus_entry.point, tight)
        assert report.overall is corpus_entry.expected_overall

    def test_corollary_refutations_imply_theorem_refutations(self, corpus_entry, fast_cfg):
        theorem = verdict(corpus_entry.problem, corpus_entry.point, fast_cfg)
        corollary = verdict(
            corpus_entry.problem, corpus_entry.point, fast_cfg.with_overrides(mode=CertificateMode.COROLLARY)
        )
        for v in corollary.refuting:
            assert any(np.allclose(t.d, v.d) for t in theorem.refuting)


class TestQuadraticPair:

    def test_margin_and_noncritical_user_direction(self, fast_cfg):
        report = _run("P2", fast_cfg)
        assert report.overall is Overall.REJECTED
        [refuting] = report.refuting
        np.testing.assert_allclose(refuting.d, [-1.0])
        assert refuting.margin == pytest.approx(-2.0)
        noncritical = [v for v in report.verdicts if not v.critical]
        assert len(noncritical) == 1
        np.testing.assert_allclose(noncritical[0].d, [1.0])

    def test_rejected_in_both_modes(self, fast_cfg):
        cfg = fast_cfg.with_overrides(mode=CertificateMode.COROLLARY)
        assert _run("P2", cfg).overall is Overall.REJECTED

    def test_positive_scaling_keeps_verdict(self, fast_cfg):
        x = var(0)
        problem = ProblemInstance(
            n=1, objectives=[FunctionDef("f0", 1, -4 * x ** 2), FunctionDef("f1", 1, 0.25 * x)]
        )
        assert verdict(problem, [0.0], fast_cfg, [[-1.0]]).overall is Overall.REJECTED


class TestEqualityRefutation:

    def test_margin(self, fast_cfg):
        report = _run("P5", fast_cfg)
        [refuting] = report.refuting
        np.testing.assert_allclose(refuting.d, [-1.0, 0.0])
        assert refuting.margin == pytest.approx(-1.0, rel=1e-6)
        assert refuting.K.points[0][0] == pytest.approx(2.0)

    def test_first_order_multipliers(self, fast_cfg):
        report = _run("P5", fast_cfg)
        assert report.rank_H == 1
        np.testing.assert_allclose(report.first_order.beta, [-0.5], atol=1e-9)

    def test_corollary_mode_does_not_refute(self, fast_cfg):
        cfg = fast_cfg.with_overrides(mode="corollary")
        report = _run("P5", cfg)
        assert report.overall is Overall.CONSISTENT
        assert report.mode is CertificateMode.COROLLARY

    def test_workers_give_same_margins(self, fast_cfg):
        sequential = _run("P5", fast_cfg)
        threaded = _run("P5", fast_cfg.with_overrides(workers=3))
        assert [v.margin for v in threaded.verdicts] == pytest.approx(
            [v.margin for v in sequential.verdicts]
        )


class TestConsistentPoints:

    def test_signed_square_uses_shortcut(self, fast_cfg):
        report = _run("P1", fast_cfg)
        assert report.overall is Overall.CONSISTENT
        assert len(report.verdicts) == 5
        assert all(v.shortcut for v in report.verdicts)

    def test_tradeoff_multipliers(self, fast_cfg):
        report = _run("P3", fast_cfg)
        np.testing.assert_allclose(report.first_order.mu, [0.5, 0.5], atol=1e-9)
        nonzero = [v for v in report.verdicts if np.any(v.d)]
        assert nonzero
        for v in nonzero:
            assert v.margin == pytest.approx(2.0, rel=1e-6)

    def test_rank_deficient_is_degenerate(self, fast_cfg):
        report = _run("P6", fast_cfg)
        assert report.overall is Overall.DEGENERATE
        assert report.rank_H == 0
        assert report.verdicts == []

    def test_nonregular_directions_get_vacuous_certificates(self, fast_cfg):
        x, y = var(0), var(1)
        problem = ProblemInstance(
            n=2, objectives=[FunctionDef("f", 2, y)], equalities=[FunctionDef("h", 2, y - abs_(x))]
        )
        report = verdict(problem, [0.0, 0.0], fast_cfg)
        assert report.overall is Overall.CONSISTENT
        irregular = [v for v in report.verdicts if v.regular is False]
        assert len(irregular) == 2
        assert all(v.certificate.vacuous for v in irregular)


class TestFailures:

    def test_no_first_order_multiplier(self, fast_cfg):
        problem = ProblemInstance(n=1, objectives=[FunctionDef("f", 1, var(0))])
        report = verdict(problem, [0.0], fast_cfg)
        assert report.overall is Overall.REJECTED
        assert report.first_order is None
        assert report.verdicts == []

    def test_infeasible_point(self, fast_cfg):
        entry = CORPUS_BUILDERS["P5"]()
        with pytest.raises(InfeasiblePoint):
            verdict(entry.problem, [0.0, 1.0], fast_cfg)


class TestDeterminism:

    def test_same_seed_gives_identical_report(self, fast_cfg):
        first = report_to_json(_run("P4", fast_cfg.with_overrides(random_dirs=4)))
        second = report_to_json(_run("P4", fast_cfg.with_overrides(random_dirs=4)))
        assert first == second


class TestContinuityChecks:

    def test_kinked_maps_are_checked(self, fast_cfg):
        report = _run("P5", fast_cfg)
        assert [c.function for c in report.continuity] == ["h0"]
        [check] = report.continuity
        assert check.report.c11_consistent
        assert not check.suspicious
        assert 0.0 < check.report.lipschitz_estimate <= 2.0 + 1e-6

    def test_smooth_problems_are_skipped(self, fast_cfg):
        assert _run("P3", fast_cfg).continuity == []

    def test_disabled_continuity_check(self, fast_cfg):
        assert _run("P1", fast_cfg.with_overrides(continuity_samples=0)).continuity == []

    def test_declared_c11_with_gradient_jump_is_reported(self, fast_cfg, caplog):
        x, y = var(0), var(1)
        problem = ProblemInstance(
            n=2,
            objectives=[FunctionDef("f0", 2, y + abs_(x), declared_c11=True)],
            name="jump",
        )
        report = verdict(problem, [0.0, 0.0], fast_cfg)
        [check] = report.continuity
        assert check.suspicious
        assert "declared C^{1,1} but its gradient jumps" in caplog.text
        assert '"declared_c11": true' in report_to_json(report)

    def test_undeclared_jump_is_not_suspicious(self, fast_cfg):
        x, y = var(0), var(1)
        problem = ProblemInstance(
            n=2,
            objectives=[FunctionDef("f0", 2, y + abs_(x), declared_c11=False)],
            name="jump",
        )
        [check] = verdict(problem, [0.0, 0.0], fast_cfg).continuity
        assert not check.report.c11_consistent
        assert not check.suspicious
