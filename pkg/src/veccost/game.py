"""
Dense cost-matrix primitives for two-player games in which both players minimize.

Player 1 picks rows and player 2 picks columns. Every index accepted or returned
by this module is 1-based; `PolicyPair(2, 3)` means the second row and the third
column. Set-valued results are sorted tuples and always contain every tie.
"""
from __future__ import annotations

import json
import logging
import math
from collections import namedtuple
from itertools import combinations
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .utils import VecCostException, comma_join

logger = logging.getLogger("veccost")

Weights = namedtuple("Weights", "theta1 theta2")
PolicyPair = namedtuple("PolicyPair", "gamma sigma")
Security = namedtuple("Security", "policies value")
PotentialCheck = namedtuple("PotentialCheck", "is_potential residual")
PairwiseDiff = namedtuple("PairwiseDiff", "col_diff row_diff col_pairs row_pairs")
ScalarizedSolution = namedtuple(
    "ScalarizedSolution", "policies value1 value2 is_nash C1 C2"
)

MatrixLike = Union[np.ndarray, Sequence[Sequence[float]]]


class GameException(VecCostException):
    """
    Raised when a game or one of its matrices is malformed.
    """


class DimensionError(GameException, ValueError):
    """
    Raised when matrices that must share a shape do not.
    """


class PolicyIndexError(GameException, IndexError):
    """
    Raised when a 1-based policy index is outside the action set.
    """


class GameFileError(GameException, ValueError):
    """
    Raised when a game document cannot be parsed.
    """


def as_cost_matrix(values: MatrixLike, name: str = "matrix") -> np.ndarray:
    """
    Converts `values` into a read-only float64 matrix with at least one row and one
    column and finite entries.
    """
    try:
        matrix = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise DimensionError("%s is not a numeric matrix: %s" % (name, e))
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionError(
            "%s must be a non-empty 2-D matrix, got shape %s" % (name, matrix.shape)
        )
    if not np.all(np.isfinite(matrix)):
        raise GameException("%s has non-finite entries" % name)
    matrix.setflags(write=False)
    return matrix


def _same_shape(*named):
    shapes = {name: m.shape for name, m in named}
    if len(set(shapes.values())) > 1:
        raise DimensionError(
            "Shape mismatch: %s" % comma_join(("%s%s" % (n, s) for n, s in shapes.items()))
        )


def _check_index(index, size: int, name: str) -> int:
    """
    Validates a 1-based index and returns its 0-based position.
    """
    if isinstance(index, (bool, np.bool_)) or not isinstance(index, (int, np.integer)):
        raise PolicyIndexError("%s must be an integer, got %r" % (name, index))
    if not 1 <= index <= size:
        raise PolicyIndexError("%s=%d is out of range 1..%d" % (name, index, size))
    return int(index) - 1


def _one_based(mask: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) + 1 for i in np.flatnonzero(mask))


def scalarize(A: MatrixLike, B: MatrixLike, w: Iterable[float]) -> np.ndarray:
    """
    Combines two cost matrices into `theta1 * A + theta2 * B`.
    """
    A = as_cost_matrix(A, "A")
    B = as_cost_matrix(B, "B")
    _same_shape(("A", A), ("B", B))
    theta1, theta2 = Weights(*w)
    return as_cost_matrix(theta1 * A + theta2 * B, "scalarized matrix")


def security_policy_row(C: MatrixLike) -> Security:
    """
    Returns every row minimizing the worst-case (row-wise maximum) cost of player 1,
    with the attained value.
    """
    C = as_cost_matrix(C, "C")
    worst = C.max(axis=1)
    value = worst.min()
    return Security(_one_based(worst == value), float(value))


def security_policy_col(C: MatrixLike) -> Security:
    """
    Returns every column minimizing the worst-case (column-wise maximum) cost of
    player 2, with the attained value.
    """
    C = as_cost_matrix(C, "C")
    worst = C.max(axis=0)
    value = worst.min()
    return Security(_one_based(worst == value), float(value))


def pure_nash(C1: MatrixLike, C2: MatrixLike) -> tuple[PolicyPair, ...]:
    """
    Enumerates the pure Nash equilibria: cells where player 1 cannot lower C1 by
    changing rows and player 2 cannot lower C2 by changing columns. The result is in
    lexicographic order.
    """
    C1 = as_cost_matrix(C1, "C1")
    C2 = as_cost_matrix(C2, "C2")
    _same_shape(("C1", C1), ("C2", C2))
    best_rows = C1 <= C1.min(axis=0, keepdims=True)
    best_cols = C2 <= C2.min(axis=1, keepdims=True)
    return tuple(PolicyPair(int(i) + 1, int(j) + 1) for i, j in np.argwhere(best_rows & best_cols))


def potential_residual(B1: MatrixLike, B2: MatrixLike, phi: MatrixLike) -> float:
    """
    Returns the largest mismatch between a unilateral cost difference and the
    matching difference of `phi`. Player 1 deviations compare rows within a
    column, player 2 deviations compare columns within a row.
    """
    B1 = as_cost_matrix(B1, "B1")
    B2 = as_cost_matrix(B2, "B2")
    phi = as_cost_matrix(phi, "phi")
    _same_shape(("B1", B1), ("B2", B2), ("phi", phi))
    # phi is a potential iff B1 - phi is constant down each column
    # and B2 - phi is constant along each row
    residual1 = np.ptp(B1 - phi, axis=0).max()
    residual2 = np.ptp(B2 - phi, axis=1).max()
    return float(max(residual1, residual2))


def is_exact_potential(
    B1: MatrixLike, B2: MatrixLike, phi: MatrixLike, tol: float = 0.0
) -> PotentialCheck:
    """
    Checks whether `phi` is an exact potential for the game `(B1, B2)` within `tol`.
    """
    assert tol >= 0, "tol must be non-negative"
    residual = potential_residual(B1, B2, phi)
    return PotentialCheck(residual <= tol, residual)


def pairwise_diffs(X: MatrixLike) -> PairwiseDiff:
    """
    Returns every pairwise difference within the columns and within the rows of X.

    - `col_diff[p, j] = X[i, j] - X[k, j]` for the p-th pair `(i, k)` with `i < k`,
      shape `(n*(n-1)/2, m)`.
    - `row_diff[i, p] = X[i, j] - X[i, k]` for the p-th pair `(j, k)` with `j < k`,
      shape `(n, m*(m-1)/2)`.

    Pairs are listed 1-based in lexicographic order.
    """
    X = as_cost_matrix(X, "X")
    n, m = X.shape
    col_pairs = list(combinations(range(n), 2))
    row_pairs = list(combinations(range(m), 2))
    if col_pairs:
        first, second = np.array(col_pairs).T
        col_diff = X[first, :] - X[second, :]
    else:
        col_diff = np.zeros((0, m))
    if row_pairs:
        first, second = np.array(row_pairs).T
        row_diff = X[:, first] - X[:, second]
    else:
        row_diff = np.zeros((n, 0))
    return PairwiseDiff(
        col_diff,
        row_diff,
        [(i + 1, k + 1) for i, k in col_pairs],
        [(j + 1, k + 1) for j, k in row_pairs],
    )


def evaluate_outcome(A: MatrixLike, B: MatrixLike, p: Iterable[int]) -> tuple[float, float]:
    """
    Returns the outcome vector `(A(gamma, sigma), B(gamma, sigma))`.
    """
    A = as_cost_matrix(A, "A")
    B = as_cost_matrix(B, "B")
    _same_shape(("A", A), ("B", B))
    gamma, sigma = PolicyPair(*p)
    i = _check_index(gamma, A.shape[0], "gamma")
    j = _check_index(sigma, A.shape[1], "sigma")
    return float(A[i, j]), float(B[i, j])


def _column(A: MatrixLike, B: MatrixLike, sigma: int) -> tuple[np.ndarray, np.ndarray]:
    A = as_cost_matrix(A, "A")
    B = as_cost_matrix(B, "B")
    _same_shape(("A", A), ("B", B))
    j = _check_index(sigma, A.shape[1], "sigma")
    return A[:, j], B[:, j]


def pareto_set(A: MatrixLike, B: MatrixLike, sigma: int) -> tuple[int, ...]:
    """
    Returns player 1's policies whose outcome against `sigma` is not dominated:
    no other row is at least as good in both costs and strictly better in one.
    """
    a, b = _column(A, B, sigma)
    # dominates[k, i]: row k dominates row i
    no_worse = (a[:, None] <= a[None, :]) & (b[:, None] <= b[None, :])
    better = (a[:, None] < a[None, :]) | (b[:, None] < b[None, :])
    dominated = (no_worse & better).any(axis=0)
    return _one_based(~dominated)


def worst_case_set(A: MatrixLike, B: MatrixLike, sigma: int) -> tuple[int, ...]:
    """
    Returns player 1's policies that maximize at least one of the two costs against `sigma`.
    """
    a, b = _column(A, B, sigma)
    return _one_based((a == a.max()) | (b == b.max()))


def moderate_set(A: MatrixLike, B: MatrixLike, sigma: int) -> tuple[int, ...]:
    """
    Returns the Pareto-optimal policies that are not worst-case for either cost.
    The result may be empty.
    """
    worst = set(worst_case_set(A, B, sigma))
    return tuple(g for g in pareto_set(A, B, sigma) if g not in worst)


class VectorGame:
    """
    A two-player game with two costs per player: a competitive zero-sum pair
    `(A1, A2 = -A1)` and a second pair `(B1, B2)`, plus the scalarization weights
    both players know.
    """

    def __init__(
        self,
        A1: MatrixLike,
        B1: MatrixLike,
        A2: MatrixLike = None,
        B2: MatrixLike = None,
        weights: Iterable[float] = (1.0, 1.0),
    ):
        """
        - `A1`, `B1`: player 1's costs, rows index player 1's actions.
        - `A2`: player 2's competitive cost, defaults to `-A1`; must satisfy `A1 + A2 = 0`.
        - `B2`: player 2's second cost, defaults to `B1`.
        - `weights`: `(theta1, theta2)` used when a player scalarizes.
        """
        self.A1 = as_cost_matrix(A1, "A1")
        self.B1 = as_cost_matrix(B1, "B1")
        self.A2 = as_cost_matrix(-self.A1 if A2 is None else A2, "A2")
        self.B2 = as_cost_matrix(self.B1 if B2 is None else B2, "B2")
        _same_shape(("A1", self.A1), ("B1", self.B1), ("A2", self.A2), ("B2", self.B2))
        if np.any(self.A1 + self.A2 != 0):
            raise GameException(
                "A1 + A2 must be zero, max |A1 + A2| = %r" % float(np.abs(self.A1 + self.A2).max())
            )
        theta = tuple(float(t) for t in weights)
        if len(theta) != 2 or not np.all(np.isfinite(theta)):
            raise GameException("weights must be two finite numbers, got %r" % (weights,))
        self.weights = Weights(*theta)

    def __repr__(self):
        return "<VectorGame %dx%d theta=(%r, %r)>" % (self.n, self.m, *self.weights)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A1.shape

    @property
    def n(self) -> int:
        return self.A1.shape[0]

    @property
    def m(self) -> int:
        return self.A1.shape[1]

    @property
    def C1(self) -> np.ndarray:
        return scalarize(self.A1, self.B1, self.weights)

    @property
    def C2(self) -> np.ndarray:
        return scalarize(self.A2, self.B2, self.weights)

    def outcome_vectors(self, p: Iterable[int]) -> tuple[tuple[float, float], tuple[float, float]]:
        """
        Returns `(J1, J2)`, each player's pair of costs at the policy pair `p`.
        """
        return evaluate_outcome(self.A1, self.B1, p), evaluate_outcome(self.A2, self.B2, p)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "VectorGame":
        """
        Builds a game from a game document: keys `A1`, `B1` (required), `A2`, `B2`
        and `theta` (optional). Raises `GameFileError` naming the offending key and row.
        """
        if not isinstance(data, dict):
            raise GameFileError("A game document must be a JSON object")
        unknown = set(data) - {"A1", "B1", "A2", "B2", "theta", "description"}
        if unknown:
            raise GameFileError("Unknown keys in game document: %s" % comma_join(sorted(unknown)))
        matrices = {}
        for key in ("A1", "B1", "A2", "B2"):
            if key not in data:
                if key in ("A1", "B1"):
                    raise GameFileError("Game document is missing %s" % key)
                continue
            matrices[key] = _parse_rows(data[key], key)
        theta = data.get("theta", [1.0, 1.0])
        if (
            not isinstance(theta, list)
            or len(theta) != 2
            or not all(_is_number(t) and _is_finite(t) for t in theta)
        ):
            raise GameFileError("theta must be a list of two numbers, got %r" % (theta,))
        try:
            return cls(weights=theta, **matrices)
        except GameException as e:
            raise GameFileError(str(e))

    def to_dict(self) -> dict[str, Any]:
        return dict(
            A1=self.A1.tolist(),
            B1=self.B1.tolist(),
            A2=self.A2.tolist(),
            B2=self.B2.tolist(),
            theta=list(self.weights),
        )


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_finite(value) -> bool:
    try:
        return math.isfinite(float(value))
    except OverflowError:
        return False


def _parse_rows(rows, key: str) -> list[list[float]]:
    if not isinstance(rows, list) or not rows:
        raise GameFileError("%s must be a non-empty list of rows" % key)
    width = None
    for number, row in enumerate(rows, start=1):
        if not isinstance(row, list) or not row:
            raise GameFileError("%s row %d must be a non-empty list of numbers" % (key, number))
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GameFileError(
                "%s row %d has %d entries, expected %d (ragged array)"
                % (key, number, len(row), width)
            )
        for value in row:
            if not _is_number(value) or not _is_finite(value):
                raise GameFileError("%s row %d has a non-numeric entry %r" % (key, number, value))
    return rows


def load_game(path) -> VectorGame:
    """
    Reads a game document from a JSON file.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GameFileError("%s is not valid JSON: %s" % (path, e))
    game = VectorGame.from_dict(data)
    logger.debug("Loaded %r from %s", game, path)
    return game


def outcome_vectors(game: VectorGame, p: Iterable[int]):
    """
    Returns both players' outcome vectors `(J1, J2)` at the policy pair `p`.
    """
    return game.outcome_vectors(p)


def scalarized_security(game: VectorGame) -> ScalarizedSolution:
    """
    Solves the scalarized game: each player plays the lowest-indexed security policy
    of its weighted cost. Reports whether the resulting pair is a pure Nash equilibrium.
    """
    C1, C2 = game.C1, game.C2
    row = security_policy_row(C1)
    col = security_policy_col(C2)
    pair = PolicyPair(row.policies[0], col.policies[0])
    return ScalarizedSolution(pair, row.value, col.value, pair in pure_nash(C1, C2), C1, C2)


def sweep_weights(game: VectorGame, thetas: Iterable[Iterable[float]]):
    """
    Returns `(weights, security policies of player 1)` for every weight pair in
    `thetas`, showing which rows scalarization can reach at all.
    """
    results = []
    for theta in thetas:
        w = Weights(*(float(t) for t in theta))
        results.append((w, security_policy_row(scalarize(game.A1, game.B1, w)).policies))
    return results


__all__ = [
    "Weights",
    "PolicyPair",
    "Security",
    "PotentialCheck",
    "PairwiseDiff",
    "ScalarizedSolution",
    "GameException",
    "DimensionError",
    "PolicyIndexError",
    "GameFileError",
    "VectorGame",
    "as_cost_matrix",
    "scalarize",
    "security_policy_row",
    "security_policy_col",
    "pure_nash",
    "potential_residual",
    "is_exact_potential",
    "pairwise_diffs",
    "evaluate_outcome",
    "pareto_set",
    "worst_case_set",
    "moderate_set",
    "load_game",
    "outcome_vectors",
    "scalarized_security",
    "sweep_weights",
]
