import json
import os
import tempfile
import unittest

import numpy as np

from veccost.game import *
from tests.base_test_with_games import (
    TestCaseWithGames, A1, B1, C1, C2, E, PHI, EPSILON, THETA,
    brute_pure_nash, brute_pareto, brute_worst_case, brute_moderate, game_document,
)


class ScalarizeTestCase(TestCaseWithGames):

    def test_example_game(self):
        self.assertMatrixEqual(C1, scalarize(A1, B1, THETA))
        self.assertMatrixEqual(C2, scalarize(-np.array(A1), B1, THETA))
        self.assertMatrixEqual(np.transpose(C1), C2)

    def test_identity_weight(self):
        A = self.random_matrix(3, 4)
        B = self.random_matrix(3, 4)
        self.assertMatrixEqual(A, scalarize(A, B, (1, 0)))

    def test_negative_weight(self):
        self.assertMatrixEqual([[5]], scalarize([[1]], [[2]], (-1, 3)))

    def test_linearity(self):
        # Integer entries and weights keep the arithmetic exact
        A = self.random_integer_matrix(4, 5)
        B = self.random_integer_matrix(4, 5)
        w1, w2 = (2, -3), (-1, 4)
        total = scalarize(A, B, (w1[0] + w2[0], w1[1] + w2[1]))
        self.assertMatrixEqual(total, scalarize(A, B, w1) + scalarize(A, B, w2))

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            scalarize(np.zeros((2, 3)), np.zeros((3, 2)), (1, 1))

    def test_invalid_matrices(self):
        for value in ([], [[]], [1, 2, 3], [[1, 2], [3]], [[np.nan]], [[np.inf, 0]]):
            with self.assertRaises(GameException):
                as_cost_matrix(value)


class SecurityTestCase(TestCaseWithGames):

    def test_row_security(self):
        self.assertEqual(Security((3,), 4.0), security_policy_row(C1))
        self.assertEqual(Security((1, 2, 3), 0.0), security_policy_row(np.zeros((3, 3))))
        self.assertEqual(Security((2,), 5.0), security_policy_row([[0, 10], [5, 5]]))

    def test_col_security(self):
        self.assertEqual(Security((3,), 4.0), security_policy_col(C2))
        self.assertEqual(Security((1, 2, 3), 0.0), security_policy_col(np.zeros((3, 3))))
        self.assertEqual(Security((2,), 5.0), security_policy_col([[0, 5], [10, 5]]))

    def test_affine_invariance(self):
        for _ in range(50):
            C = self.random_matrix(5, 4)
            expected = security_policy_row(C).policies
            self.assertPolicies(expected, security_policy_row(2.5 * C - 3.0).policies)
            self.assertPolicies(expected, security_policy_row(0.1 * C + 7.0).policies)


class NashTestCase(TestCaseWithGames):

    def test_example_game(self):
        self.assertEqual((PolicyPair(3, 3),), pure_nash(C1, C2))

    def test_identical_interests(self):
        B = [[0, 1], [1, 2]]
        self.assertEqual(((1, 1),), pure_nash(B, B))

    def test_zero_game(self):
        pairs = pure_nash(np.zeros((2, 3)), np.zeros((2, 3)))
        self.assertEqual([(g, s) for g in (1, 2) for s in (1, 2, 3)], list(pairs))

    def test_oracle(self):
        for _ in range(500):
            X = self.random_matrix(6, 6)
            Y = self.random_matrix(6, 6)
            self.assertEqual(brute_pure_nash(X, Y), pure_nash(X, Y))

    def test_oracle_with_ties(self):
        for _ in range(200):
            X = self.random_integer_matrix(4, 5, -2, 3)
            Y = self.random_integer_matrix(4, 5, -2, 3)
            self.assertEqual(brute_pure_nash(X, Y), pure_nash(X, Y))


class PotentialTestCase(TestCaseWithGames):

    def test_adjusted_example(self):
        perturbation = np.zeros((3, 3))
        perturbation[2] = EPSILON
        adjusted = np.array(A1) + np.array(E) + perturbation
        phi = np.array(PHI) + perturbation
        check = is_exact_potential(adjusted, C2, phi, 1e-6)
        self.assertTrue(check.is_potential)
        self.assertLessEqual(check.residual, 1e-6)

    def test_identical_interests(self):
        for _ in range(20):
            B = self.random_matrix(4, 3)
            self.assertEqual(PotentialCheck(True, 0.0), is_exact_potential(B, B, B, 0))

    def test_single_mismatch(self):
        zero = np.zeros((2, 2))
        check = is_exact_potential([[0, 0], [1, 0]], zero, zero)
        self.assertEqual(PotentialCheck(False, 1.0), check)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            is_exact_potential(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)))


class PairwiseDiffTestCase(TestCaseWithGames):

    def test_single_row(self):
        diffs = pairwise_diffs([[3, 2, 1]])
        self.assertMatrixEqual([[1, 2, 1]], diffs.row_diff)
        self.assertEqual([(1, 2), (1, 3), (2, 3)], diffs.row_pairs)
        self.assertEqual((0, 3), diffs.col_diff.shape)
        self.assertEqual([], diffs.col_pairs)

    def test_constant_matrix(self):
        diffs = pairwise_diffs(np.full((3, 4), 7.0))
        self.assertFalse(diffs.col_diff.any())
        self.assertFalse(diffs.row_diff.any())

    def test_generating_pairs(self):
        X = self.random_matrix(4, 5)
        diffs = pairwise_diffs(X)
        self.assertEqual((6, 5), diffs.col_diff.shape)
        self.assertEqual((4, 10), diffs.row_diff.shape)
        for p, (i, k) in enumerate(diffs.col_pairs):
            self.assertLess(i, k)
            for j in range(5):
                self.assertEqual(X[i - 1, j] - X[k - 1, j], diffs.col_diff[p, j])
        for p, (j, k) in enumerate(diffs.row_pairs):
            self.assertLess(j, k)
            for i in range(4):
                self.assertEqual(X[i, j - 1] - X[i, k - 1], diffs.row_diff[i, p])


class PolicySetTestCase(TestCaseWithGames):

    def test_outcomes(self):
        self.assertEqual((0, 2), evaluate_outcome(A1, B1, (2, 2)))
        self.assertEqual((0, 4), evaluate_outcome(A1, B1, (3, 3)))
        self.assertEqual((0, 0), evaluate_outcome(np.zeros((2, 2)), np.zeros((2, 2)), (2, 1)))

    def test_index_errors(self):
        for pair in ((0, 1), (4, 1), (1, 4), (1.0, 1), (True, 1)):
            with self.assertRaises(PolicyIndexError):
                evaluate_outcome(A1, B1, pair)
        # Also a plain IndexError
        with self.assertRaises(IndexError):
            pareto_set(A1, B1, 0)

    def test_example_sets(self):
        self.assertEqual((1, 2, 3), pareto_set(A1, B1, 3))
        self.assertEqual((1, 2, 3), pareto_set(A1, B1, 2))
        self.assertEqual((1, 3), worst_case_set(A1, B1, 3))
        self.assertEqual((2,), moderate_set(A1, B1, 3))

    def test_small_sets(self):
        column = [[0], [1]]
        self.assertEqual((1,), pareto_set(column, column, 1))
        self.assertEqual((1, 2, 3), worst_case_set(np.ones((3, 2)), np.ones((3, 2)), 2))
        self.assertEqual((1, 2), worst_case_set([[0], [9]], [[9], [0]], 1))
        self.assertEqual((), moderate_set([[1, 2]], [[3, 4]], 2))
        column = [[0], [1], [2]]
        self.assertEqual((1,), pareto_set(column, column, 1))
        self.assertEqual((3,), worst_case_set(column, column, 1))
        self.assertEqual((1,), moderate_set(column, column, 1))

    def test_oracle(self):
        for trial in range(500):
            A = self.random_matrix(6, 6)
            B = self.random_matrix(6, 6)
            sigma = trial % 6 + 1
            self.assertEqual(brute_pareto(A, B, sigma), pareto_set(A, B, sigma))
            self.assertEqual(brute_worst_case(A, B, sigma), worst_case_set(A, B, sigma))
            self.assertEqual(brute_moderate(A, B, sigma), moderate_set(A, B, sigma))

    def test_set_relations(self):
        for trial in range(300):
            A = self.random_integer_matrix(5, 3, 0, 3)
            B = self.random_integer_matrix(5, 3, 0, 3)
            sigma = trial % 3 + 1
            moderate = set(moderate_set(A, B, sigma))
            self.assertLessEqual(moderate, set(pareto_set(A, B, sigma)))
            self.assertFalse(moderate & set(worst_case_set(A, B, sigma)))
            self.assertEqual(brute_pareto(A, B, sigma), pareto_set(A, B, sigma))


class VectorGameTestCase(TestCaseWithGames):

    def test_defaults(self):
        game = VectorGame(A1, B1)
        self.assertMatrixEqual(-np.array(A1), game.A2)
        self.assertMatrixEqual(B1, game.B2)
        self.assertEqual(Weights(1.0, 1.0), game.weights)
        self.assertEqual((3, 3), game.shape)

    def test_scalarized_costs(self):
        self.assertMatrixEqual(C1, self.game.C1)
        self.assertMatrixEqual(C2, self.game.C2)

    def test_zero_sum_violation(self):
        with self.assertRaises(GameException):
            VectorGame(A1, B1, A2=A1)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            VectorGame(A1, [[0, 1], [2, 3]])

    def test_outcome_vectors(self):
        J1, J2 = outcome_vectors(self.game, (3, 3))
        self.assertEqual((0, 4), J1)
        self.assertEqual((0, 4), J2)

    def test_matrices_are_read_only(self):
        with self.assertRaises(ValueError):
            self.game.A1[0, 0] = 1

    def test_scalarized_security(self):
        solution = scalarized_security(self.game)
        self.assertEqual(PolicyPair(3, 3), solution.policies)
        self.assertEqual(4.0, solution.value1)
        self.assertEqual(4.0, solution.value2)
        self.assertTrue(solution.is_nash)

    def test_sweep_weights(self):
        results = dict(sweep_weights(self.game, [(2, 1), (1, 2), (1, 1), (0.5, 0.5)]))
        self.assertEqual((3,), results[Weights(2.0, 1.0)])
        self.assertEqual((1,), results[Weights(1.0, 2.0)])
        self.assertEqual((1, 2, 3), results[Weights(1.0, 1.0)])
        self.assertEqual((1, 2, 3), results[Weights(0.5, 0.5)])

    def test_scalarization_never_isolates_middle_row(self):
        # Integer weights keep the scalarized costs exact
        thetas = [(t1, t2) for t1 in range(31) for t2 in range(31) if t1 + t2 > 0]
        for theta, policies in sweep_weights(self.game, thetas):
            self.assertNotEqual((2,), policies)


class GameFileTestCase(TestCaseWithGames):

    def test_from_dict(self):
        game = VectorGame.from_dict(game_document())
        self.assertMatrixEqual(C1, game.C1)
        self.assertEqual(Weights(2.0, 1.0), game.weights)

    def test_theta_default(self):
        game = VectorGame.from_dict({'A1': A1, 'B1': B1})
        self.assertEqual(Weights(1.0, 1.0), game.weights)

    def test_ragged_array(self):
        with self.assertRaises(GameFileError) as cm:
            VectorGame.from_dict({'A1': [[0, 1], [2]], 'B1': [[0, 1], [2, 3]]})
        self.assertIn('A1 row 2', str(cm.exception))

    def test_invalid_documents(self):
        documents = [
            [],
            {'A1': A1},
            {'B1': B1},
            {'A1': A1, 'B1': B1, 'C1': C1},
            {'A1': [[0, 'x']], 'B1': [[0, 1]]},
            {'A1': [[0, True]], 'B1': [[0, 1]]},
            {'A1': [], 'B1': []},
            {'A1': A1, 'B1': B1, 'theta': [1]},
            {'A1': A1, 'B1': B1, 'theta': 'heavy'},
            {'A1': A1, 'B1': B1, 'A2': A1},
            {'A1': A1, 'B1': [[0, 1], [2, 3]]},
        ]
        for document in documents:
            with self.assertRaises(GameFileError):
                VectorGame.from_dict(document)

    def test_entries_too_large_for_a_float(self):
        with self.assertRaises(GameFileError) as cm:
            VectorGame.from_dict({'A1': [[0, 1], [2, 10 ** 400]], 'B1': B1})
        self.assertIn('A1 row 2', str(cm.exception))
        with self.assertRaises(GameFileError):
            VectorGame.from_dict({'A1': A1, 'B1': B1, 'theta': [-10 ** 400, 1]})
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'game.json')
            with open(path, 'w') as f:
                f.write('{"A1": [[0, %d]], "B1": [[0, 1]]}' % 10 ** 400)
            with self.assertRaises(GameFileError):
                load_game(path)

    def test_round_trip(self):
        game = VectorGame.from_dict(json.loads(json.dumps(self.game.to_dict())))
        self.assertMatrixEqual(self.game.A1, game.A1)
        self.assertMatrixEqual(self.game.B2, game.B2)
        self.assertEqual(self.game.weights, game.weights)

    def test_load_game(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'game.json')
            with open(path, 'w') as f:
                json.dump(game_document(), f)
            self.assertMatrixEqual(C2, load_game(path).C2)
            with open(path, 'w') as f:
                f.write('{"A1": [[0, 1]')
            with self.assertRaises(GameFileError):
                load_game(path)
