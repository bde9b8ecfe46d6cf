"""
Tests for multiplier certificates.

Tests:
- First-order multipliers on the corpus points
- Second-order margins along refuting and non-refuting directions
- Corollary rows built from support intervals
- Independent re-verification of certificates
"""

import numpy as np
import pytest

from socheck.analysis.cones import CriticalDirection, direction_clusters, is_critical
from socheck.analysis.raycalc import ClusterSet
from socheck.analysis.subgrad2 import Interval
from socheck.certify.certificates import (
    MultiplierCertificate,
    first_order_certificate,
    second_order_certificate,
    second_order_search,
    verify_certificate,
)
from socheck.core.funcdsl import FunctionDef, var
from socheck.core.problem import PolyhedronSpec, ProblemInstance
from socheck.core.settings import CertificateMode
from socheck.errors import InfeasiblePoint, PreconditionFailed
from socheck.harness.corpus import CORPUS_BUILDERS


def _search(entry, d, S, mode=CertificateMode.THEOREM, cfg=None):
    direction = is_critical(entry.problem, entry.point, d, cfg)
    K, M = direction_clusters(entry.problem, entry.point, direction.d, cfg)
    return second_order_search(entry.problem, entry.point, direction, S, K, M, mode, cfg, exact=True)


class TestFirstOrder:

    def test_tradeoff_multipliers(self):
        entry = CORPUS_BUILDERS["P3"]()
        cert = first_order_certificate(entry.problem, entry.point)
        np.testing.assert_allclose(cert.mu, [0.5, 0.5], atol=1e-9)
        assert cert.normalization == pytest.approx(1.0)

    def test_equality_multiplier(self):
        entry = CORPUS_BUILDERS["P5"]()
        cert = first_order_certificate(entry.problem, entry.point)
        np.testing.assert_allclose(cert.mu, [0.5], atol=1e-9)
        np.testing.assert_allclose(cert.beta, [-0.5], atol=1e-9)

    def test_constraint_row_unused(self):
        entry = CORPUS_BUILDERS["P4"]()
        cert = first_order_certificate(entry.problem, entry.point)
        np.testing.assert_allclose(cert.mu, [1.0])
        np.testing.assert_allclose(cert.lam, [0.0], atol=1e-12)
        np.testing.assert_allclose(cert.zstar(entry.problem), [0.0], atol=1e-12)

    def test_rank_deficient_gives_beta_only(self):
        entry = CORPUS_BUILDERS["P6"]()
        cert = first_order_certificate(entry.problem, entry.point)
        assert not np.any(cert.mu)
        np.testing.assert_allclose(np.abs(cert.beta), [1.0])

    def test_no_multiplier_for_nonstationary_point(self):
        problem = ProblemInstance(n=1, objectives=[FunctionDef("f", 1, var(0))])
        assert first_order_certificate(problem, [0.0]) is None

    def test_infeasible_point(self):
        entry = CORPUS_BUILDERS["P4"]()
        with pytest.raises(InfeasiblePoint):
            first_order_certificate(entry.problem, [-1.0, 0.0])


class TestSecondOrder:

    def test_quadratic_pair_is_refuted(self):
        entry = CORPUS_BUILDERS["P2"]()
        search = _search(entry, [-1.0], [Interval.point(-2.0), Interval.point(0.0)])
        assert search.refuted
        assert search.margin == pytest.approx(-2.0)
        np.testing.assert_allclose(search.best.mu, [1.0, 0.0], atol=1e-9)

    def test_equality_cluster_refutes(self):
        entry = CORPUS_BUILDERS["P5"]()
        search = _search(entry, [-1.0, 0.0], [Interval.point(0.0)])
        assert search.refuted
        assert search.margin == pytest.approx(-1.0, rel=1e-6)

    def test_opposite_direction_is_certified(self):
        entry = CORPUS_BUILDERS["P5"]()
        search = _search(entry, [1.0, 0.0], [Interval.point(0.0)])
        assert not search.refuted
        assert search.margin == pytest.approx(1.0, rel=1e-6)
        assert verify_certificate(entry.problem, entry.point, search.certificate).is_valid

    def test_corollary_rows_are_coarser(self):
        entry = CORPUS_BUILDERS["P5"]()
        search = _search(entry, [-1.0, 0.0], [Interval.point(0.0)], CertificateMode.COROLLARY)
        assert not search.refuted
        assert search.margin == pytest.approx(1.0)

    def test_corollary_without_equalities_matches_theorem(self):
        entry = CORPUS_BUILDERS["P2"]()
        S = [Interval.point(-2.0), Interval.point(0.0)]
        theorem = _search(entry, [-1.0], S)
        corollary = _search(entry, [-1.0], S, CertificateMode.COROLLARY)
        assert corollary.margin == pytest.approx(theorem.margin)

    def test_positive_scaling_keeps_refutation(self):
        x = var(0)
        problem = ProblemInstance(
            n=1, objectives=[FunctionDef("f0", 1, -3 * x ** 2), FunctionDef("f1", 1, 5 * x)]
        )
        direction = is_critical(problem, [0.0], [-1.0])
        K, M = direction_clusters(problem, [0.0], [-1.0])
        search = second_order_search(
            problem, [0.0], direction, [Interval.point(-6.0), Interval.point(0.0)], K, M
        )
        assert search.refuted

    def test_wrapper_returns_certificate(self):
        entry = CORPUS_BUILDERS["P3"]()
        direction = is_critical(entry.problem, entry.point, [0.0, 1.0])
        K, M = direction_clusters(entry.problem, entry.point, direction.d)
        cert = second_order_certificate(
            entry.problem, entry.point, direction, [Interval.point(2.0)] * 2, K, M
        )
        assert cert.second_order_margin == pytest.approx(2.0)

    def test_support_intervals_required(self):
        entry = CORPUS_BUILDERS["P2"]()
        direction = is_critical(entry.problem, entry.point, [-1.0])
        empty = ClusterSet(0, [np.zeros(0)])
        with pytest.raises(PreconditionFailed):
            second_order_search(entry.problem, entry.point, direction, None, empty, empty)
        with pytest.raises(PreconditionFailed):
            second_order_search(entry.problem, entry.point, direction, [Interval.point(0.0)], empty, empty)

    def test_nonregular_direction_is_vacuous(self):
        entry = CORPUS_BUILDERS["P2"]()
        direction = CriticalDirection(np.array([-1.0]), np.array([0.0, -1.0]), 0.0, regular=False)
        search = second_order_search(
            entry.problem, entry.point, direction, [Interval.point(-2.0), Interval.point(0.0)],
            ClusterSet(0, []), ClusterSet(0, []),
        )
        assert search.certificate.vacuous
        assert not search.refuted
        result = verify_certificate(entry.problem, entry.point, search.certificate)
        assert result.is_valid
        assert result.issues[0].code == "VACUOUS"


class TestVerifyCertificate:

    def _tradeoff(self):
        entry = CORPUS_BUILDERS["P3"]()
        return entry, first_order_certificate(entry.problem, entry.point)

    def test_valid(self):
        entry, cert = self._tradeoff()
        assert verify_certificate(entry.problem, entry.point, cert).is_valid

    def test_broken_stationarity(self):
        entry, _ = self._tradeoff()
        cert = MultiplierCertificate(np.array([1.0, 0.0]), np.zeros(0), np.zeros(0))
        codes = [i.code for i in verify_certificate(entry.problem, entry.point, cert).errors]
        assert codes == ["STATIONARITY"]

    def test_wrong_normalization(self):
        entry, cert = self._tradeoff()
        doubled = MultiplierCertificate(2 * cert.mu, cert.lam, cert.beta)
        codes = [i.code for i in verify_certificate(entry.problem, entry.point, doubled).errors]
        assert codes == ["NORMALIZATION"]

    def test_negative_multiplier(self):
        entry, _ = self._tradeoff()
        cert = MultiplierCertificate(np.array([-0.5, 1.5]), np.zeros(0), np.zeros(0))
        codes = {i.code for i in verify_certificate(entry.problem, entry.point, cert).errors}
        assert "SIGN" in codes

    def test_weight_on_inactive_row(self):
        x = var(0)
        problem = ProblemInstance(
            n=1,
            objectives=[FunctionDef("f", 1, x)],
            qmap=[FunctionDef("g", 1, x)],
            qset=PolyhedronSpec.halfspaces([[1.0], [-1.0]], [1.0, 1.0]),
        )
        cert = MultiplierCertificate(np.array([0.5]), np.array([0.5, 0.0]), np.zeros(0))
        codes = {i.code for i in verify_certificate(problem, [0.0], cert).errors}
        assert "COMPLEMENTARITY" in codes


class TestRefutingMultipliers:

    @pytest.mark.parametrize("name, d, S", [
        ("P2", [-1.0], [Interval.point(-2.0), Interval.point(0.0)]),
        ("P5", [-1.0, 0.0], [Interval.point(0.0)]),
    ])
    def test_refuting_maximizer_passes_verification(self, name, d, S):
        entry = CORPUS_BUILDERS[name]()
        direction = is_critical(entry.problem, entry.point, d)
        search = _search(entry, d, S)
        assert search.refuted
        assert verify_certificate(entry.problem, entry.point, search.best, direction).is_valid

    def test_corollary_pattern_search_keeps_stationarity(self):
        entry = CORPUS_BUILDERS["P5"]()
        direction = is_critical(entry.problem, entry.point, [-1.0, 0.0])
        search = _search(entry, [-1.0, 0.0], [Interval.point(0.0)], CertificateMode.COROLLARY)
        assert search.best.normalization == pytest.approx(1.0)
        np.testing.assert_allclose(search.best.mu, [0.5], atol=1e-9)
        assert verify_certificate(entry.problem, entry.point, search.best, direction).is_valid
