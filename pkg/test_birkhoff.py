#!/usr/bin/env python3
"""
测试 Rota–Baxter 算子与 Birkhoff 分解引擎
"""

import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from birkhoff import (FactorizationSession, RBOperator, certify_operator, check_monotone, check_subadditivity,
                      check_superadditivity, classical_birkhoff_oracle, constant_rb, exp_conjugation_check, factorize,
                      factorize_minus1, factorize_pair, identity_rb, matrix_rb_check, partial_sum_rb, prepare,
                      projection_rb, q_integral_rb, rb_identity_residual, reference_min_rb)
from errors import CertificationError, DomainError
from graph_hopf import (banana_graph, cycle_graph, multigraphs_up_to, path_graph, sequence_edge_count_character,
                        series_power_character)
from thermo_semiring import INF, PointwiseSemiring, residual


K2 = path_graph(1)
P2 = path_graph(2)


class TestOperators(unittest.TestCase):
    """测试算子构造与 RB 恒等式"""

    def test_partial_sum_tropical_action(self):
        T = partial_sum_rb('inf', 4)
        np.testing.assert_array_equal(T([3.0, 1.0, 2.0, 0.0]), [INF, 3.0, 1.0, 1.0])

    def test_partial_sum_classical_shadow(self):
        T = partial_sum_rb(1.0, 3)
        np.testing.assert_allclose(T.classical([1.0, 2.0, 3.0]), [0.0, 1.0, 3.0])

    def test_partial_sum_certified(self):
        for beta in ('inf', 0.5, 3.0):
            check = certify_operator(partial_sum_rb(beta, 5), samples=50)
            self.assertTrue(check.holds, beta)

    def test_q_integral_certified(self):
        for beta in ('inf', 2.0):
            T = q_integral_rb(0.5, beta, order=4)
            self.assertTrue(certify_operator(T, samples=40).holds, beta)

    def test_q_integral_domain(self):
        with self.assertRaises(DomainError):
            q_integral_rb(1.5)
        with self.assertRaises(DomainError):
            q_integral_rb(-0.5, 2.0)
        with self.assertRaises(DomainError):
            q_integral_rb(0.5, 2.0, allow_constant=True)
        with self.assertRaises(DomainError):
            q_integral_rb(0.5, 1.0, K=2, tolerance=1e-9)

    def test_projection_weight_minus_one(self):
        T = projection_rb([1, 0, 1])
        self.assertEqual(T.weight, -1)
        self.assertEqual(T.additivity, 'linear-idempotent')
        self.assertTrue(certify_operator(T, samples=40).holds)
        self.assertTrue(check_superadditivity(T, samples=40).holds)

    def test_projection_predicate_needs_length(self):
        with self.assertRaises(DomainError):
            projection_rb(lambda i: i % 2 == 0)
        T = projection_rb(lambda i: i % 2 == 0, length=4)
        np.testing.assert_array_equal(T([1.0, 2.0, 3.0, 4.0]), [1.0, INF, 3.0, INF])

    def test_non_rb_operator_rejected(self):
        shift = RBOperator('shift', 1.0, PointwiseSemiring(), lambda f: f + 1.0)
        self.assertAlmostEqual(rb_identity_residual(shift, 0.0, 0.0), 1.0)
        with self.assertRaises(CertificationError):
            certify_operator(shift, samples=10)

    def test_reference_and_constant_operators(self):
        r = [0.0, 1.0, 2.0]
        for T in (reference_min_rb(r), constant_rb(r)):
            self.assertEqual(T.weight, -1)
            self.assertTrue(certify_operator(T, samples=40).holds, T.name)
        np.testing.assert_array_equal(reference_min_rb(r)([1.0, 0.5, INF]), [0.0, 0.5, 2.0])

    def test_order_checks(self):
        self.assertTrue(check_monotone(partial_sum_rb('inf', 4), samples=30).holds)
        self.assertTrue(check_subadditivity(projection_rb([1, 0, 1]), samples=30).holds)

    def test_length_checked(self):
        with self.assertRaises(DomainError):
            partial_sum_rb('inf', 3)([1.0, 2.0])

    def test_beta_awareness(self):
        self.assertFalse(partial_sum_rb('inf', 4).beta_aware)
        self.assertTrue(partial_sum_rb(2.0, 4).beta_aware)

    def test_zero_weight_rejected(self):
        with self.assertRaises(DomainError):
            RBOperator('zero', 0.0, PointwiseSemiring(), lambda f: f)


class TestFactorization(unittest.TestCase):
    """测试权 +1 分解"""

    def setUp(self):
        self.psi = sequence_edge_count_character([1, 2, 3, 4])
        self.T = partial_sum_rb('inf', 4)

    def test_golden_path_table(self):
        result = factorize(self.psi, self.T, [K2, P2], samples=30)
        k2, p2 = result.row_for(K2), result.row_for(P2)
        np.testing.assert_array_equal(k2.prepared, [1, 2, 3, 4])
        np.testing.assert_array_equal(k2.minus, [INF, 1, 1, 1])
        np.testing.assert_array_equal(k2.plus, [1, 1, 1, 1])
        np.testing.assert_array_equal(p2.prepared, [2, 3, 4, 5])
        np.testing.assert_array_equal(p2.minus, [INF, 2, 2, 2])
        np.testing.assert_array_equal(p2.plus, [2, 2, 2, 2])

    def test_residuals_vanish(self):
        graphs = [P2, cycle_graph(3), banana_graph(2), K2.disjoint_union(P2)]
        result = factorize(self.psi, self.T, graphs, samples=30)
        for name, value in result.residuals.items():
            self.assertLessEqual(value, 1e-9, name)

    def test_finite_beta_factorization(self):
        T = partial_sum_rb(2.0, 4)
        result = factorize(self.psi, T, [P2, cycle_graph(3), K2.disjoint_union(K2)], samples=30)
        self.assertLessEqual(max(result.residuals.values()), 1e-9)

    def test_path_counts(self):
        session = FactorizationSession(self.psi, self.T)
        self.assertEqual(session.path_counts(K2), (1, 3, 4))
        self.assertEqual(session.path_counts(P2)[0], 7)

    def test_session_characters(self):
        session = FactorizationSession(self.psi, self.T)
        np.testing.assert_array_equal(session.plus_character()(P2), session.plus(P2))
        np.testing.assert_array_equal(session.minus_character()(P2), session.minus(P2))

    def test_weight_mismatch(self):
        with self.assertRaises(DomainError):
            factorize(self.psi, projection_rb([1, 1, 1, 1]), [P2])

    def test_beta_mismatch(self):
        with self.assertRaises(DomainError):
            prepare(self.psi, self.T, P2, beta=2.0)

    def test_series_operator(self):
        T = q_integral_rb(0.5, 'inf', order=4)
        psi = series_power_character([INF, 1.0, 2.0, 3.0, 4.0], T.semiring)
        result = factorize(psi, T, [P2, cycle_graph(3)], samples=20)
        self.assertLessEqual(result.residuals['factorization'], 1e-9)

    def test_table_is_jsonable(self):
        table = factorize(self.psi, self.T, [K2], samples=5).table()
        self.assertEqual(table[0]['graph'], '2v:0-1')
        self.assertEqual(table[0]['prepared'], [1.0, 2.0, 3.0, 4.0])


class TestWeightMinusOne(unittest.TestCase):
    """测试权 −1 分解与算子对"""

    def setUp(self):
        self.psi = sequence_edge_count_character([1, 2, 3])

    def test_projection_factorization(self):
        T = projection_rb([1, 0, 1])
        result = factorize_minus1(self.psi, T, [P2, cycle_graph(3)], samples=30)
        row = result.row_for(P2)
        np.testing.assert_array_equal(row.minus, [2, INF, 6])
        np.testing.assert_array_equal(row.plus, row.prepared)

    def test_needs_infinite_beta(self):
        with self.assertRaises(DomainError):
            factorize_minus1(self.psi, projection_rb([1, 0, 1], beta=1.0), [P2])

    def test_pair_consistency(self):
        T = identity_rb(length=3)
        Ttilde = projection_rb([1, 0, 1])
        result = factorize_pair(self.psi, T, Ttilde, [P2, cycle_graph(3)], samples=20)
        self.assertEqual(result.residuals['consistency'], 0.0)
        self.assertTrue(result.checks['pair_relation'].holds)
        self.assertIn('mixed_identity', result.checks)

    def test_pair_relation_enforced(self):
        T = projection_rb([1, 0, 1])
        Ttilde = identity_rb(length=3)
        with self.assertRaises(CertificationError):
            factorize_pair(self.psi, T, Ttilde, [P2], samples=20)


class TestClassicalComparison(unittest.TestCase):
    """测试指数共轭与经典对照"""

    def test_exp_conjugation(self):
        psi = sequence_edge_count_character([1, 2, 3, 4])
        T = partial_sum_rb(2.0, 4)
        report = exp_conjugation_check(psi, T, 2.0, [P2, cycle_graph(3), banana_graph(2)])
        self.assertTrue(report.passed, report.to_dict())

    def test_exp_conjugation_needs_finite_beta(self):
        psi = sequence_edge_count_character([1, 2, 3])
        with self.assertRaises(DomainError):
            exp_conjugation_check(psi, partial_sum_rb('inf', 3), 'inf', [P2])

    def test_oracle_on_scalars(self):
        # 标量上 R = id 时 φ₋(K2) = φ(K2)
        rows = classical_birkhoff_oracle(lambda g: 2.0 ** g.n_edges, lambda a: a, 1, [K2, P2])
        self.assertAlmostEqual(float(rows[0].minus), 2.0)
        self.assertAlmostEqual(float(rows[1].prepared), 4.0 + 2 * 2.0 * 2.0)

    def test_convergence_bound(self):
        psi = sequence_edge_count_character([1, 2, 3, 4])
        tropical = factorize(psi, partial_sum_rb('inf', 4), [P2], samples=0).row_for(P2)
        for beta in (5.0, 50.0):
            session = FactorizationSession(psi, partial_sum_rb(beta, 4))
            bound = math.log(max(session.path_counts(P2))) / beta
            self.assertLessEqual(residual(session.minus(P2), tropical.minus), bound + 1e-12)


class TestGraphFamilies(unittest.TestCase):
    """在全部小多重图与完整样本量上的检查"""

    @classmethod
    def setUpClass(cls):
        cls.small = multigraphs_up_to(5)
        cls.tiny = [g for g in cls.small if g.n_edges <= 4]
        cls.psi = sequence_edge_count_character([1, 2, 3, 4])

    def test_certification_with_full_samples(self):
        for T in (partial_sum_rb('inf', 5), projection_rb([1, 0, 1, 1, 0])):
            self.assertEqual(certify_operator(T, samples=100).residual, 0.0, T.name)
        for T in (partial_sum_rb(2.0, 5), q_integral_rb(0.5, 2.0, order=4)):
            self.assertLessEqual(certify_operator(T, samples=100).residual, 1e-9, T.name)

    def test_tropical_factorization_is_exact(self):
        result = factorize(self.psi, partial_sum_rb('inf', 4), self.small, samples=0)
        for name, value in result.residuals.items():
            self.assertEqual(value, 0.0, name)

    def test_finite_beta_factorization(self):
        result = factorize(self.psi, partial_sum_rb(2.0, 4), self.small, samples=0)
        for name, value in result.residuals.items():
            self.assertLessEqual(value, 1e-9, name)

    def test_exp_conjugation_on_small_graphs(self):
        for beta in (0.5, 1.0, 2.0):
            report = exp_conjugation_check(self.psi, partial_sum_rb(beta, 4), beta, self.tiny)
            self.assertTrue(report.passed, beta)
            self.assertLessEqual(report.max_residual, 1e-8)


class TestMatrixIdentity(unittest.TestCase):
    """测试矩阵形式的 RB 恒等式"""

    def test_partial_sum_on_constant_sequences(self):
        A = np.array([[1.0, 0.2], [0.2, 0.4]])
        B = np.array([[0.3, 0.0], [0.0, 0.9]])
        report = matrix_rb_check(A, B, partial_sum_rb(1.5, 3), 1.5)
        self.assertLess(report.residual, 1e-8)
        self.assertLessEqual(report.tropical_gap, report.bound + 1e-12)
        self.assertEqual(report.coordinates[0], (INF, INF))

    def test_partial_sum_on_varying_sequences(self):
        rng = np.random.default_rng(5)
        A = np.stack([g @ g.T / 2 for g in rng.normal(size=(3, 2, 2))])
        B = np.stack([g @ g.T / 2 for g in rng.normal(size=(3, 2, 2))])
        T = partial_sum_rb(1.5, 3)
        report = matrix_rb_check(A, B, T, 1.5)
        self.assertLess(report.residual, 1e-8)
        self.assertLessEqual(report.tropical_gap, report.bound + 1e-12)
        constant = matrix_rb_check(A[0], B[0], T, 1.5)
        self.assertGreater(abs(report.coordinates[2][0] - constant.coordinates[2][0]), 1e-6)

    def test_wrong_shadow_detected(self):
        # 含对角线的部分和满足权 −1 而非权 +1 的恒等式
        T = replace(partial_sum_rb(1.5, 3), shadow_matrix=np.tril(np.ones((3, 3))))
        A = np.stack([np.diag([0.2 * k, 1.0]) for k in range(3)])
        report = matrix_rb_check(A, np.eye(2), T, 1.5)
        self.assertGreater(report.residual, 1e-3)

    def test_sequence_length_checked(self):
        with self.assertRaises(DomainError):
            matrix_rb_check(np.stack([np.eye(2)] * 2), np.eye(2), partial_sum_rb(1.5, 3), 1.5)

    def test_rejects_series_operator(self):
        with self.assertRaises(DomainError):
            matrix_rb_check(np.eye(2), np.eye(2), q_integral_rb(0.5, 1.0, order=3), 1.0)


if __name__ == '__main__':
    unittest.main()
