#!/usr/bin/env python3
"""
测试应用：最近邻势、Markov 随机场、多项式可数性与步数计数
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from applications import (InducedFamilyCoproduct, MarkovField, NearestNeighborPotential, StepCountTable,
                          factorize_potential, induced_family, markov_check, neighbors, nn_check, pair_potential,
                          polycount, polycount_character, potential_from_json, stepcount_demo, synthetic_step_table,
                          vertex_cost_potential)
from birkhoff import partial_sum_rb
from errors import CapExceededError, DomainError, ParseError
from graph_hopf import Graph, banana_graph, canonical_form, cycle_graph, path_graph
from thermo_semiring import INF


HOST = path_graph(2)


class TestInducedFamily(unittest.TestCase):
    """测试诱导子图族"""

    def test_family_size(self):
        self.assertEqual(len(induced_family(HOST)), 8)

    def test_vertex_cap(self):
        with self.assertRaises(CapExceededError):
            induced_family(path_graph(4), vertex_cap=4)

    def test_neighbors(self):
        self.assertEqual(neighbors(HOST, 1), frozenset({0, 2}))
        self.assertEqual(neighbors(cycle_graph(1), 0), frozenset())

    def test_coproduct_terms(self):
        scheme = InducedFamilyCoproduct(HOST)
        terms = scheme.terms(HOST)
        self.assertEqual(len(terms), 6)
        for term in terms:
            self.assertEqual(term.left.n_vertices + term.right.n_vertices, 3)
        self.assertEqual(scheme.degree(HOST), 3)


class TestLocality(unittest.TestCase):
    """测试最近邻性质与 Markov 性质"""

    def test_pair_potential_is_nearest_neighbor(self):
        W = pair_potential(HOST, {'default': 0.5}, {'0-1': 2.0, '1-2': -1.0})
        report = nn_check(W)
        self.assertTrue(report.holds)
        self.assertEqual(report.checked, 12)

    def test_global_potential_fails(self):
        W = NearestNeighborPotential(HOST, lambda g: float(g.n_vertices ** 2), 'square')
        report = nn_check(W)
        self.assertFalse(report.holds)
        self.assertIn(([0], 2), report.counterexamples)

    def test_markov_from_potential(self):
        W = pair_potential(HOST, 1.0, 0.7)
        self.assertTrue(markov_check(MarkovField.from_potential(W, 2.0)).holds)

    def test_markov_needs_finite_beta(self):
        with self.assertRaises(DomainError):
            MarkovField.from_potential(vertex_cost_potential(HOST), 'inf')

    def test_nonpositive_field(self):
        pi = MarkovField(HOST, lambda g: 0.0)
        with self.assertRaises(DomainError):
            markov_check(pi)

    def test_potential_json(self):
        W = potential_from_json(HOST, {'vertex_costs': {'default': 1.0}, 'coupling': 2.0})
        self.assertEqual(W(HOST), 3.0 + 4.0)
        self.assertEqual(potential_from_json(HOST, {}).name, 'vertex-cost')
        with self.assertRaises(ParseError):
            potential_from_json(HOST, [1, 2])

    def test_random_potentials_on_small_hosts(self):
        rng = np.random.default_rng(11)
        hosts = [path_graph(n) for n in range(1, 5)] + [cycle_graph(n) for n in (3, 4, 5)]
        hosts += [Graph.from_edges([(0, 1), (0, 2), (0, 3)]),
                  Graph.from_edges([(u, v) for u in range(4) for v in range(u + 1, 4)])]
        for host in hosts:
            costs = {v: float(rng.normal()) for v in host.vertices}
            coupling = {f"{u}-{v}": float(rng.normal()) for u, v in host.edges}
            W = pair_potential(host, costs, coupling)
            self.assertTrue(nn_check(W, 1e-9).holds, host.label())
            for beta in (0.5, 1.0, 3.0):
                self.assertTrue(markov_check(MarkovField.from_potential(W, beta), 1e-9).holds, host.label())
            result = factorize_potential(vertex_cost_potential(host, costs), partial_sum_rb(1.0, 3))
            self.assertTrue(result.vertex_only, host.label())
            self.assertTrue(result.passed, result.to_dict())


class TestPotentialFactorization(unittest.TestCase):
    """测试势的形变分解"""

    def test_vertex_only_potential_stays_markov(self):
        W = vertex_cost_potential(HOST, 1.0)
        result = factorize_potential(W, partial_sum_rb(1.0, 3))
        self.assertTrue(result.vertex_only)
        self.assertTrue(result.passed, result.to_dict())
        self.assertEqual(result.skipped_coordinates['minus'], [0])
        self.assertIn('plus[0]', result.checks)

    def test_minus_part_closed_form(self):
        # 单顶点势下 W₋(A)ₙ = |A|(c − log n / β)
        W = vertex_cost_potential(HOST, 1.0)
        beta = 1.0
        result = factorize_potential(W, partial_sum_rb(beta, 3))
        values = result.minus[HOST.label()]
        self.assertEqual(values[0], INF)
        for n in (1, 2):
            self.assertAlmostEqual(values[n], 3 * (1.0 - math.log(n) / beta), places=9)

    def test_interaction_is_reported(self):
        W = pair_potential(HOST, 0.0, 1.0)
        result = factorize_potential(W, partial_sum_rb(1.0, 2))
        self.assertFalse(result.vertex_only)

    def test_beta_mismatch(self):
        with self.assertRaises(DomainError):
            factorize_potential(vertex_cost_potential(HOST), partial_sum_rb(1.0, 2), beta=2.0)


class TestPolyCount(unittest.TestCase):
    """测试图超曲面补集的多项式可数性"""

    def test_banana(self):
        report = polycount(banana_graph(2), [2, 3, 5, 7])
        self.assertEqual(report.counts, [2, 6, 20, 42])
        self.assertEqual(report.polynomial, 'q**2 - q')
        self.assertEqual(report.psi, 2)
        self.assertEqual(report.verdict, 'consistent with polynomial')

    def test_loop_and_edge(self):
        self.assertEqual(polycount(cycle_graph(1), [2, 3, 5]).polynomial, 'q - 1')
        self.assertEqual(polycount(path_graph(1), [2, 3, 5]).polynomial, 'q')

    def test_disjoint_union_product_law(self):
        graph = banana_graph(2).disjoint_union(cycle_graph(1))
        report = polycount(graph, [2, 3, 5, 7])
        self.assertTrue(report.product_law)
        self.assertEqual(report.psi, 3)
        self.assertEqual(len(report.components), 2)

    def test_polycount_character(self):
        psi = polycount_character([2, 3, 5, 7])
        self.assertEqual(psi.mode, 'max')
        self.assertEqual(psi.value(banana_graph(2)), 2)

    def test_prime_requirements(self):
        with self.assertRaises(DomainError):
            polycount(banana_graph(2), [2, 3, 5])
        with self.assertRaises(DomainError):
            polycount(path_graph(1), [2, 4, 5])
        with self.assertRaises(DomainError):
            polycount(path_graph(1), [2, 2, 3])


class TestStepCounts(unittest.TestCase):
    """测试步数计数特征标"""

    def setUp(self):
        self.table = StepCountTable.from_json({
            'length': 3,
            'entries': [
                {'graph': {'edges': [[0, 1]]}, 'steps': [5, 'inf', 3]},
                {'graph': {'edges': [[0, 1], [1, 2]]}, 'steps': ['inf', 'inf', 'inf']},
            ],
        })

    def test_table_round_trip(self):
        data = self.table.to_json()
        self.assertEqual(data['length'], 3)
        self.assertEqual(data['entries'][0]['steps'], [5.0, 'inf', 3.0])

    def test_disconnected_rejected(self):
        with self.assertRaises(DomainError):
            self.table.set(path_graph(1).disjoint_union(path_graph(1)), [1, 1, 1])

    def test_malformed_json(self):
        with self.assertRaises(ParseError):
            StepCountTable.from_json({'entries': []})

    def test_renormalized_entry(self):
        transcript = stepcount_demo(self.table, [HOST])
        entries = transcript.for_graph(HOST)
        self.assertEqual([e.machine for e in entries], [1, 2, 3])
        last = entries[2]
        self.assertEqual(last.prepared, 8.0)
        self.assertTrue(last.renormalized)
        self.assertEqual(last.subgraph, '2v:0-1')
        self.assertEqual(last.quotient, '2v:0-2')
        self.assertFalse(entries[0].renormalized)
        self.assertEqual(entries[0].prepared, INF)

    def test_localizing_flags(self):
        entries = stepcount_demo(self.table, [HOST]).for_graph(HOST)
        last = entries[2]
        self.assertTrue(last.quotient_finite)
        self.assertFalse(last.history_finite)
        self.assertFalse(last.localizing)
        self.assertFalse(entries[0].localizing)

    def test_localizing_entry(self):
        table = StepCountTable.from_json({
            'length': 3,
            'entries': [
                {'graph': {'edges': [[0, 1]]}, 'steps': [5, 4, 3]},
                {'graph': {'edges': [[0, 1], [1, 2]]}, 'steps': ['inf', 'inf', 'inf']},
            ],
        })
        transcript = stepcount_demo(table, [HOST])
        second = transcript.for_graph(HOST)[1]
        self.assertEqual(second.raw, INF)
        self.assertEqual(second.prepared, 9.0)
        self.assertEqual(second.subgraph, '2v:0-1')
        self.assertTrue(second.renormalized)
        self.assertTrue(second.localizing)
        self.assertTrue(transcript.to_dict()['entries'][1]['localizing'])

    def test_transcript_dict(self):
        data = stepcount_demo(self.table, [HOST]).to_dict()
        self.assertEqual(data['boundary_policy'], 'zero')
        self.assertEqual(data['entries'][0]['raw'], 'inf')

    def test_synthetic_table_is_closed(self):
        table = synthetic_step_table([cycle_graph(3)], length=4, seed=3)
        self.assertIn(canonical_form(banana_graph(2)), table.values)
        self.assertIn(canonical_form(cycle_graph(1)), table.values)
        transcript = stepcount_demo(table, [cycle_graph(3)])
        self.assertEqual(len(transcript.entries), 4)
        for entry in transcript.entries:
            self.assertLessEqual(entry.prepared, entry.raw)


if __name__ == '__main__':
    unittest.main()
