from fractions import Fraction
from itertools import combinations

import numpy as np
from django.test import SimpleTestCase

from lib.graphs import BipartitePair, IndexOutOfRange, PatternGraph, build_classed_graph, mask_from
from lib.regularity import (
    CERTIFIED,
    EPS_MODE,
    LOWER_MODE,
    NO_WITNESS,
    VIOLATION,
    EmptySide,
    EmptySubset,
    ParameterOrderViolation,
    RegularityError,
    RegularityVerdict,
    SideTooLargeForExact,
    SubsetTooSmall,
    check_eps_regular_exact,
    check_lower_regular_exact,
    degree_deviation_report,
    density,
    inherited_regularity_params,
    screen_pair,
    violates,
    witness_search,
)
from lib.streams import RngSpec

EPSILONS = [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)]


def make_pair(matrix):
    matrix = np.asarray(matrix, dtype=int)
    n1, n2 = matrix.shape
    rows = [mask_from(np.flatnonzero(matrix[v]).tolist()) for v in range(n1)]
    return BipartitePair.from_rows(n1, n2, rows)


def make_random_pair(n1, n2, seed, p=0.5):
    return make_pair(np.random.default_rng(seed).random((n1, n2)) < p)


def make_complete_pair(n1, n2):
    return make_pair(np.ones((n1, n2)))


def make_matching_pair(n):
    return make_pair(np.eye(n))


def naive_subpairs(matrix):
    """(k1, k2, edges) for every pair of nonempty subsets, by a plain double loop."""
    n1, n2 = len(matrix), len(matrix[0])
    out = []
    for s1 in range(1, 2 ** n1):
        side1 = [i for i in range(n1) if s1 >> i & 1]
        for s2 in range(1, 2 ** n2):
            side2 = [j for j in range(n2) if s2 >> j & 1]
            edges = sum(matrix[i][j] for i in side1 for j in side2)
            out.append((len(side1), len(side2), edges))
    return out


def naive_is_regular(matrix, subpairs, epsilon, d=None):
    n1, n2 = len(matrix), len(matrix[0])
    p, q = epsilon.numerator, epsilon.denominator
    total = sum(map(sum, matrix))
    for k1, k2, edges in subpairs:
        if k1 * q < p * n1 or k2 * q < p * n2:
            continue
        if d is None:
            if q * abs(edges * n1 * n2 - total * k1 * k2) > p * total * k1 * k2:
                return False
        elif edges * q * d.denominator < (q - p) * d.numerator * k1 * k2:
            return False
    return True


def assert_sound(test, P, epsilon, verdict, d=None):
    if verdict.kind == VIOLATION:
        w = verdict.witness
        test.assertTrue(violates(P, None, epsilon, w.sub1, w.sub2, d))
        test.assertEqual(density(P, None, w.sub1, w.sub2), w.density)


class DensityTests(SimpleTestCase):
    def test_complete(self):
        P = make_complete_pair(3, 4)
        self.assertEqual(density(P, None, 0b111, 0b1111), 1)

    def test_empty(self):
        P = make_pair(np.zeros((3, 3)))
        self.assertEqual(density(P, None, 0b111, 0b111), 0)

    def test_single_edge(self):
        P = make_pair([[1, 0], [0, 0]])
        self.assertEqual(density(P, None, 0b11, 0b11), Fraction(1, 4))

    def test_empty_subset(self):
        with self.assertRaises(EmptySubset):
            density(make_complete_pair(2, 2), None, 0, 0b11)

    def test_subset_outside_side(self):
        with self.assertRaises(IndexOutOfRange):
            density(make_complete_pair(2, 2), None, 0b100, 0b11)

    def test_classed_graph_pair(self):
        G = build_classed_graph(PatternGraph.complete(3), [2, 2, 2], {(1, 3): [(0, 0), (1, 1)]})
        self.assertEqual(density(G, (3, 1), 0b11, 0b11), Fraction(1, 2))
        self.assertEqual(density(G, (1, 2), 0b11, 0b11), 0)


class VerdictTests(SimpleTestCase):
    def test_witness_required_for_violation(self):
        with self.assertRaises(RegularityError):
            RegularityVerdict(VIOLATION)

    def test_acceptance_mode(self):
        self.assertEqual(RegularityVerdict(CERTIFIED).acceptance_mode, 'certified')
        self.assertEqual(RegularityVerdict(NO_WITNESS).acceptance_mode, 'heuristic')


class ExactCheckerTests(SimpleTestCase):
    def test_complete_pair_is_regular(self):
        for epsilon in EPSILONS:
            self.assertEqual(check_eps_regular_exact(make_complete_pair(5, 3), None, epsilon).kind, CERTIFIED)

    def test_empty_pair_is_regular(self):
        verdict = check_eps_regular_exact(make_pair(np.zeros((4, 4))), None, Fraction(1, 2))
        self.assertEqual(verdict.kind, CERTIFIED)
        self.assertGreater(verdict.subsets_examined, 0)

    def test_matching_violates(self):
        P = make_matching_pair(4)
        verdict = check_eps_regular_exact(P, None, Fraction(1, 2))
        self.assertEqual(verdict.kind, VIOLATION)
        self.assertEqual(verdict.witness.reference, Fraction(1, 4))
        assert_sound(self, P, Fraction(1, 2), verdict)

    def test_lower_complete(self):
        verdict = check_lower_regular_exact(make_complete_pair(4, 4), None, Fraction(1, 3), 1)
        self.assertEqual(verdict.kind, CERTIFIED)

    def test_lower_matching_violates(self):
        P = make_matching_pair(4)
        verdict = check_lower_regular_exact(P, None, Fraction(1, 4), Fraction(1, 4))
        self.assertEqual(verdict.kind, VIOLATION)
        assert_sound(self, P, Fraction(1, 4), verdict, Fraction(1, 4))

    def test_empty_side(self):
        with self.assertRaises(EmptySide):
            check_eps_regular_exact(BipartitePair(0, 3, (), (0, 0, 0)), None, Fraction(1, 2))

    def test_side_too_large(self):
        with self.assertRaises(SideTooLargeForExact):
            check_eps_regular_exact(make_complete_pair(15, 2), None, Fraction(1, 2))
        with self.assertRaises(SideTooLargeForExact):
            check_eps_regular_exact(make_complete_pair(5, 5), None, Fraction(1, 2), limit=4)

    def test_classed_graph_pair(self):
        G = build_classed_graph(PatternGraph.named('K2'), [4, 4], {(1, 2): [(i, i) for i in range(4)]})
        self.assertEqual(check_eps_regular_exact(G, (1, 2), Fraction(1, 2)).kind, VIOLATION)

    def test_oracle_equivalence_all_3x3(self):
        for bits in range(2 ** 9):
            matrix = [[bits >> (3 * i + j) & 1 for j in range(3)] for i in range(3)]
            P = make_pair(matrix)
            subpairs = naive_subpairs(matrix)
            for epsilon in EPSILONS:
                verdict = check_eps_regular_exact(P, None, epsilon)
                self.assertEqual(verdict.kind == CERTIFIED, naive_is_regular(matrix, subpairs, epsilon))
                assert_sound(self, P, epsilon, verdict)
                for d in (Fraction(1, 4), Fraction(1, 2)):
                    lower = check_lower_regular_exact(P, None, epsilon, d)
                    self.assertEqual(lower.kind == CERTIFIED, naive_is_regular(matrix, subpairs, epsilon, d))

    def test_oracle_equivalence_random_4x4(self):
        gen = np.random.default_rng(2024)
        for _ in range(2000):
            matrix = (gen.random((4, 4)) < gen.random()).astype(int).tolist()
            P = make_pair(matrix)
            subpairs = naive_subpairs(matrix)
            for epsilon in EPSILONS:
                verdict = check_eps_regular_exact(P, None, epsilon)
                self.assertEqual(verdict.kind == CERTIFIED, naive_is_regular(matrix, subpairs, epsilon))
                for d in (Fraction(1, 4), Fraction(1, 2)):
                    lower = check_lower_regular_exact(P, None, epsilon, d)
                    self.assertEqual(lower.kind == CERTIFIED, naive_is_regular(matrix, subpairs, epsilon, d))

    def test_rectangular_pairs_and_transpose(self):
        for seed in range(40):
            P = make_random_pair(5, 3, seed)
            for epsilon in EPSILONS:
                verdict = check_eps_regular_exact(P, None, epsilon)
                flipped = check_eps_regular_exact(P.transpose(), None, epsilon)
                self.assertEqual(verdict.kind, flipped.kind)
                assert_sound(self, P, epsilon, verdict)
                assert_sound(self, P.transpose(), epsilon, flipped)

    def test_regular_implies_lower_regular(self):
        for seed in range(60):
            P = make_random_pair(4, 5, seed, p=0.7)
            for epsilon in EPSILONS:
                if check_eps_regular_exact(P, None, epsilon).kind == CERTIFIED and P.edge_count:
                    d = Fraction(P.edge_count, P.n1 * P.n2)
                    self.assertEqual(check_lower_regular_exact(P, None, epsilon, d).kind, CERTIFIED)

    def test_monotone_in_epsilon(self):
        for seed in range(60):
            P = make_random_pair(4, 4, seed, p=0.6)
            for small, large in combinations(EPSILONS, 2):
                if check_eps_regular_exact(P, None, small).kind == CERTIFIED:
                    self.assertEqual(check_eps_regular_exact(P, None, large).kind, CERTIFIED)

    def test_large_parameters_use_exact_integers(self):
        epsilon = Fraction(10 ** 12 - 1, 4 * 10 ** 12)
        self.assertEqual(check_eps_regular_exact(make_complete_pair(6, 6), None, epsilon).kind, CERTIFIED)
        self.assertEqual(check_eps_regular_exact(make_matching_pair(6), None, epsilon).kind, VIOLATION)


class WitnessSearchTests(SimpleTestCase):
    def test_finds_matching_witness(self):
        P = make_matching_pair(4)
        verdict = witness_search(P, None, Fraction(1, 2), EPS_MODE, budget=8, rng=RngSpec(5))
        self.assertEqual(verdict.kind, VIOLATION)
        self.assertEqual(check_eps_regular_exact(P, None, Fraction(1, 2)).kind, VIOLATION)
        assert_sound(self, P, Fraction(1, 2), verdict)

    def test_lower_mode(self):
        P = make_matching_pair(6)
        verdict = witness_search(P, None, Fraction(1, 4), LOWER_MODE, d=Fraction(1, 6), budget=4, rng=RngSpec(1))
        self.assertEqual(verdict.kind, VIOLATION)
        assert_sound(self, P, Fraction(1, 4), verdict, Fraction(1, 6))

    def test_complete_pair_has_no_witness(self):
        verdict = witness_search(make_complete_pair(6, 6), None, Fraction(1, 3), budget=5, rng=RngSpec(0))
        self.assertEqual(verdict.kind, NO_WITNESS)
        self.assertIsNone(verdict.witness)

    def test_budget_one_is_legal(self):
        verdict = witness_search(make_random_pair(10, 10, 3), None, Fraction(1, 10), budget=1, rng=RngSpec(9))
        self.assertIn(verdict.kind, (VIOLATION, NO_WITNESS))

    def test_budget_must_be_positive(self):
        with self.assertRaises(RegularityError):
            witness_search(make_complete_pair(2, 2), None, Fraction(1, 2), budget=0)

    def test_deterministic_per_stream(self):
        P = make_random_pair(12, 12, 4, p=0.3)
        first = witness_search(P, None, Fraction(1, 4), budget=6, rng=RngSpec(77))
        second = witness_search(P, None, Fraction(1, 4), budget=6, rng=RngSpec(77))
        self.assertEqual(first, second)

    def test_sound_on_random_pairs(self):
        for seed in range(30):
            P = make_random_pair(8, 7, seed, p=0.4)
            verdict = witness_search(P, None, Fraction(1, 3), budget=4, rng=RngSpec(seed))
            assert_sound(self, P, Fraction(1, 3), verdict)
            if verdict.kind == VIOLATION:
                self.assertEqual(check_eps_regular_exact(P, None, Fraction(1, 3)).kind, VIOLATION)


class ScreenPairTests(SimpleTestCase):
    def test_auto_uses_exact_when_small(self):
        self.assertEqual(screen_pair(make_complete_pair(4, 4), None, Fraction(1, 2)).kind, CERTIFIED)

    def test_auto_falls_back_to_witness_search(self):
        verdict = screen_pair(make_complete_pair(15, 15), None, Fraction(1, 2), rng=RngSpec(1))
        self.assertEqual(verdict.kind, NO_WITNESS)

    def test_lower_mode_when_density_given(self):
        verdict = screen_pair(make_matching_pair(4), None, Fraction(1, 4), d=Fraction(1, 4), mode='exact')
        self.assertEqual(verdict.kind, VIOLATION)

    def test_unknown_mode(self):
        with self.assertRaises(RegularityError):
            screen_pair(make_complete_pair(2, 2), None, Fraction(1, 2), mode='fast')


class DegreeDeviationTests(SimpleTestCase):
    def test_complete_pair(self):
        self.assertEqual(degree_deviation_report(make_complete_pair(4, 5), None, Fraction(1, 4), 1, 0b11111), (0, 0))

    def test_matching_by_hand(self):
        P = make_matching_pair(4)
        self.assertEqual(degree_deviation_report(P, None, Fraction(1, 4), Fraction(1, 4), 0b1111), (0, 0))
        self.assertEqual(degree_deviation_report(P, None, Fraction(1, 4), Fraction(1, 4), 0b0011), (2, 2))

    def test_subset_too_small(self):
        with self.assertRaises(SubsetTooSmall):
            degree_deviation_report(make_matching_pair(4), None, Fraction(1, 2), Fraction(1, 4), 0b1)

    def test_at_most_eps_n_deviating_vertices(self):
        checked = 0
        for seed in range(200):
            gen = np.random.default_rng(seed)
            n1, n2 = int(gen.integers(2, 13)), int(gen.integers(2, 13))
            epsilon = EPSILONS[0] if seed % 2 else EPSILONS[2]
            P = make_complete_pair(n1, n2) if seed % 10 == 0 else make_random_pair(n1, n2, seed, p=0.85)
            if check_eps_regular_exact(P, None, epsilon).kind != CERTIFIED:
                continue
            checked += 1
            d = Fraction(P.edge_count, n1 * n2)
            below, above = degree_deviation_report(P, None, epsilon, d, (1 << n2) - 1)
            bound = epsilon.numerator * n1 // epsilon.denominator
            self.assertLessEqual(below, bound)
            self.assertLessEqual(above, bound)
        self.assertGreater(checked, 0)

    def test_lower_regular_pairs_have_few_low_vertices(self):
        epsilon, d = Fraction(1, 3), Fraction(1, 2)
        for seed in range(60):
            P = make_random_pair(6, 6, seed, p=0.8)
            if check_lower_regular_exact(P, None, epsilon, d).kind != CERTIFIED:
                continue
            below, _ = degree_deviation_report(P, None, epsilon, d, (1 << 6) - 1)
            self.assertLessEqual(below, epsilon.numerator * 6 // epsilon.denominator)


class InheritanceTests(SimpleTestCase):
    def test_params(self):
        self.assertEqual(inherited_regularity_params(Fraction(1, 10), Fraction(1, 2)), Fraction(2, 9))
        epsilon = Fraction(1, 5)
        self.assertEqual(inherited_regularity_params(epsilon, 1), 2 * epsilon / (1 - epsilon))

    def test_order_violation(self):
        with self.assertRaises(ParameterOrderViolation):
            inherited_regularity_params(Fraction(1, 10), Fraction(1, 20))
        with self.assertRaises(ParameterOrderViolation):
            inherited_regularity_params(Fraction(1, 2), Fraction(3, 2))

    def _sub_pairs(self, P, alpha, gen, count):
        min1 = -(-alpha.numerator * P.n1 // alpha.denominator)
        min2 = -(-alpha.numerator * P.n2 // alpha.denominator)
        for _ in range(count):
            side1 = sorted(gen.choice(P.n1, size=int(gen.integers(min1, P.n1 + 1)), replace=False).tolist())
            side2 = sorted(gen.choice(P.n2, size=int(gen.integers(min2, P.n2 + 1)), replace=False).tolist())
            matrix = P.matrix()[np.ix_(side1, side2)]
            yield make_pair(matrix)

    def test_large_subpairs_stay_regular(self):
        epsilon, alpha = Fraction(1, 4), Fraction(1, 2)
        epsilon_prime = inherited_regularity_params(epsilon, alpha)
        gen = np.random.default_rng(8)
        for seed in range(40):
            P = make_random_pair(8, 8, seed, p=0.9) if seed else make_complete_pair(8, 8)
            if check_eps_regular_exact(P, None, epsilon).kind != CERTIFIED:
                continue
            d = Fraction(P.edge_count, 64)
            for sub in self._sub_pairs(P, alpha, gen, 5):
                self.assertEqual(check_eps_regular_exact(sub, None, epsilon_prime).kind, CERTIFIED)
                sub_density = Fraction(sub.edge_count, sub.n1 * sub.n2)
                self.assertTrue((1 - epsilon) * d <= sub_density <= (1 + epsilon) * d)

    def test_large_subpairs_stay_lower_regular(self):
        epsilon, alpha, d = Fraction(1, 4), Fraction(1, 2), Fraction(1, 2)
        epsilon_prime = inherited_regularity_params(epsilon, alpha)
        gen = np.random.default_rng(9)
        for seed in range(40):
            P = make_random_pair(8, 8, seed, p=0.8)
            if check_lower_regular_exact(P, None, epsilon, d).kind != CERTIFIED:
                continue
            for sub in self._sub_pairs(P, alpha, gen, 5):
                self.assertEqual(check_lower_regular_exact(sub, None, epsilon_prime, d).kind, CERTIFIED)
