"""
Minimal-norm adjustment of player 1's competitive cost so that a chosen policy pair
becomes the unique minimum of an exact potential, and the policy selection built on it.

Given `A1` and the opponent's scalarized cost `C2`, the adjusted game `(A1 + E, C2)`
must admit a potential `phi` with `phi(r, c) = 0` and `phi >= epsilon` everywhere
else. Row differences of `phi` must equal those of `C2` and column differences of
`A1 + E` must equal those of `phi`, so

    phi(i, j) = C2(i, j) + t_i        E(i, j) = C2(i, j) - A1(i, j) + t_i + s_j

for row offsets `t` and column offsets `s`. Pinning `phi(r, c) = 0` fixes
`t_r = -C2(r, c)`, the positivity of `phi` becomes a lower bound on every other
`t_i`, and minimizing the Frobenius norm of `E` is a bound-constrained least squares
problem in `n + m - 1` variables.
"""
from __future__ import annotations

import logging
import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Iterable, Optional

import numpy as np

from .game import (
    MatrixLike,
    PolicyPair,
    Weights,
    _check_index,
    _same_shape,
    as_cost_matrix,
    is_exact_potential,
    moderate_set,
    pairwise_diffs,
    pure_nash,
    scalarize,
    security_policy_col,
    security_policy_row,
)
from .utils import VecCostException, comma_join, dumps

logger = logging.getLogger("veccost")

DEFAULT_EPSILON = 1e-6
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10000
POTENTIAL_TOL = 1e-6

RowCondition = namedtuple("RowCondition", "j k d_rj required_sign satisfied")
Candidate = namedtuple("Candidate", "r status frob_norm_sq")
SolverOutput = namedtuple("SolverOutput", "t s objective sweeps kkt_residual")
ErrorBounds = namedtuple(
    "ErrorBounds",
    "norm_a norm_b gamma_a gamma_b deviation_a deviation_b holds_a holds_b "
    "relaxed_holds_a relaxed_holds_b",
)


class AdjustmentException(VecCostException):
    """
    Base class for cost adjustment errors.
    """


class InfeasibleTarget(AdjustmentException):
    """
    Raised when no finite error matrix puts the potential's minimum at `(r, c)`:
    column `c` is not the strict minimum of row `r` of `C2`.
    """

    def __init__(self, r: int, c: int, violating_columns: list[int]):
        self.r = r
        self.c = c
        self.violating_columns = violating_columns
        super().__init__(
            "Target (%d, %d) is infeasible: C2(%d, j) - C2(%d, %d) < epsilon for j in {%s}"
            % (r, c, r, r, c, comma_join(violating_columns, stringify=True))
        )


class ConvergenceError(AdjustmentException):
    """
    Raised when the coordinate descent solver does not reach the requested accuracy.
    """

    def __init__(self, objective: float, kkt_residual: float, sweeps: int):
        self.objective = objective
        self.kkt_residual = kkt_residual
        self.sweeps = sweeps
        super().__init__(
            "Solver did not converge after %d sweeps (objective %r, KKT residual %r)"
            % (sweeps, objective, kkt_residual)
        )


class AdjustmentStatus(Enum):
    SOLVED = "solved"
    INFEASIBLE = "infeasible"


class SelectionMethod(Enum):
    ADJUSTED = "adjusted"
    SCALARIZED_FALLBACK = "scalarized-fallback"


class AdjustmentProblem:
    """
    Inputs of one adjustment: player 1's cost `A1`, player 2's scalarized cost `C2`,
    the 1-based target `(r, c)` and the positivity margin `epsilon`.
    """

    def __init__(
        self, A1: MatrixLike, C2: MatrixLike, r: int, c: int, epsilon: float = DEFAULT_EPSILON
    ):
        self.A1 = as_cost_matrix(A1, "A1")
        self.C2 = as_cost_matrix(C2, "C2")
        _same_shape(("A1", self.A1), ("C2", self.C2))
        _check_index(r, self.A1.shape[0], "r")
        _check_index(c, self.A1.shape[1], "c")
        numeric = isinstance(epsilon, (int, float, np.floating)) and not isinstance(epsilon, bool)
        if not (numeric and math.isfinite(epsilon) and epsilon > 0):
            raise ValueError("epsilon must be a positive finite number, got %r" % (epsilon,))
        self.r = int(r)
        self.c = int(c)
        self.epsilon = float(epsilon)

    def __repr__(self):
        return "<AdjustmentProblem %dx%d target=(%d, %d) epsilon=%r>" % (
            *self.A1.shape,
            self.r,
            self.c,
            self.epsilon,
        )


class ReducedProblem:
    """
    The bound-constrained least squares problem

        minimize  sum_ij (M(i, j) + t_i + s_j)^2
        s.t.      t_r = fixed_t,  t_i >= lower[i] for i != r,  s free

    whose optimum is the squared Frobenius norm of the error matrix.
    `r` is 0-based here; `lower[r]` is unused and set to `fixed_t`.
    """

    def __init__(self, M: np.ndarray, r: int, fixed_t: float, lower: np.ndarray):
        self.M = M
        self.r = r
        self.fixed_t = fixed_t
        self.lower = lower

    @property
    def shape(self) -> tuple[int, int]:
        return self.M.shape

    def free_rows(self) -> np.ndarray:
        mask = np.ones(self.M.shape[0], dtype=bool)
        mask[self.r] = False
        return mask

    def residual(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """
        Returns the error matrix `M + t + s` for the given offsets.
        """
        return self.M + t[:, None] + s[None, :]

    def objective(self, t: np.ndarray, s: np.ndarray) -> float:
        return float(np.square(self.residual(t, s)).sum())

    def kkt_residual(self, t: np.ndarray, s: np.ndarray) -> float:
        """
        Returns the largest violation of the first-order optimality conditions: the
        magnitude of every free partial derivative, and for offsets resting on their
        lower bound only the negative part of the derivative.
        """
        R = self.residual(t, s)
        grad_t = 2.0 * R.sum(axis=1)
        grad_s = 2.0 * R.sum(axis=0)
        free = self.free_rows()
        at_bound = free & (t <= self.lower)
        interior = free & ~at_bound
        violations = [np.abs(grad_s), np.abs(grad_t[interior]), np.maximum(0.0, -grad_t[at_bound])]
        return float(max((v.max() for v in violations if v.size), default=0.0))


class AdjustmentResult:
    """
    The outcome of `adjust_costs`. When `status` is solved, `E` is the error matrix,
    `phi` the potential of `(A1 + E, C2)` and `frob_norm_sq` the squared Frobenius
    norm of `E`. When infeasible, the matrices are `None` and `violating_columns`
    lists the columns of row `r` that break the strict minimum.
    """

    def __init__(
        self,
        r: int,
        c: int,
        status: AdjustmentStatus,
        E: Optional[np.ndarray] = None,
        phi: Optional[np.ndarray] = None,
        frob_norm_sq: Optional[float] = None,
        t: Optional[np.ndarray] = None,
        s: Optional[np.ndarray] = None,
        sweeps: int = 0,
        violating_columns: Iterable[int] = (),
    ):
        self.r = r
        self.c = c
        self.status = status
        self.E = E
        self.phi = phi
        self.frob_norm_sq = frob_norm_sq
        self.t = t
        self.s = s
        self.sweeps = sweeps
        self.violating_columns = list(violating_columns)

    def __repr__(self):
        if self.solved:
            return "<AdjustmentResult (%d, %d) solved |E|^2=%r>" % (
                self.r,
                self.c,
                self.frob_norm_sq,
            )
        return "<AdjustmentResult (%d, %d) infeasible>" % (self.r, self.c)

    @property
    def target(self) -> PolicyPair:
        return PolicyPair(self.r, self.c)

    @property
    def solved(self) -> bool:
        return self.status is AdjustmentStatus.SOLVED

    @property
    def frob_norm(self) -> Optional[float]:
        return None if self.frob_norm_sq is None else math.sqrt(self.frob_norm_sq)

    def adjusted_cost(self, A1: MatrixLike) -> np.ndarray:
        """
        Returns `A1 + E`.
        """
        assert self.solved, "Only a solved adjustment has an error matrix"
        return as_cost_matrix(as_cost_matrix(A1, "A1") + self.E, "A1 + E")

    def to_dict(self) -> dict[str, Any]:
        return dict(
            status=self.status,
            r=self.r,
            c=self.c,
            E=self.E,
            phi=self.phi,
            frob_norm_sq=self.frob_norm_sq,
            violating_columns=self.violating_columns,
        )


class SelectionResult:
    """
    The policy pair chosen by `select_policy`, how it was chosen, and every adjustment
    attempted on the way.
    """

    def __init__(
        self,
        gamma: int,
        sigma: int,
        method: SelectionMethod,
        best: Optional[AdjustmentResult],
        candidates_tried: list[Candidate],
        security_consistent: Optional[bool] = None,
    ):
        self.gamma = gamma
        self.sigma = sigma
        self.method = method
        self.best = best
        self.candidates_tried = candidates_tried
        self.security_consistent = security_consistent

    def __repr__(self):
        return "<SelectionResult (%d, %d) %s>" % (self.gamma, self.sigma, self.method.value)

    @property
    def policies(self) -> PolicyPair:
        return PolicyPair(self.gamma, self.sigma)

    @property
    def adjusted(self) -> bool:
        return self.method is SelectionMethod.ADJUSTED

    def to_dict(self) -> dict[str, Any]:
        return dict(
            gamma=self.gamma,
            sigma=self.sigma,
            method=self.method,
            security_consistent=self.security_consistent,
            candidates_tried=[c._asdict() for c in self.candidates_tried],
            best=self.best,
        )


def _violating_columns(C2: np.ndarray, r0: int, c0: int, epsilon: float) -> list[int]:
    row = C2[r0]
    margin = row - row[c0]
    bad = margin < epsilon
    bad[c0] = False
    return [int(j) + 1 for j in np.flatnonzero(bad)]


def feasible_minimum(C2: MatrixLike, r: int, c: int, epsilon: float = DEFAULT_EPSILON) -> bool:
    """
    Checks whether a finite error matrix can place the potential's unique minimum at
    `(r, c)`: every other entry of row `r` of `C2` must exceed `C2(r, c)` by at least
    `epsilon`.
    """
    C2 = as_cost_matrix(C2, "C2")
    r0 = _check_index(r, C2.shape[0], "r")
    c0 = _check_index(c, C2.shape[1], "c")
    assert epsilon > 0, "epsilon must be positive"
    return not _violating_columns(C2, r0, c0, epsilon)


def row_conditions(
    C2: MatrixLike, r: int, c: int, epsilon: float = DEFAULT_EPSILON
) -> list[RowCondition]:
    """
    Lists the sign conditions on the row differences of `C2` in row `r` that involve
    column `c`: for a pair `(j, k)` with `j < k`, `d_rj = C2(r, j) - C2(r, k)` must be
    positive when `k = c` and negative when `j = c`, so that column `c` is the strict
    minimum of the row. A condition is satisfied only if the difference clears zero by
    `epsilon`.
    """
    C2 = as_cost_matrix(C2, "C2")
    r0 = _check_index(r, C2.shape[0], "r")
    _check_index(c, C2.shape[1], "c")
    diffs = pairwise_diffs(C2)
    conditions = []
    for p, (j, k) in enumerate(diffs.row_pairs):
        if c not in (j, k):
            continue
        d = float(diffs.row_diff[r0, p])
        if k == c:
            conditions.append(RowCondition(j, k, d, 1, d >= epsilon))
        else:
            conditions.append(RowCondition(j, k, d, -1, d <= -epsilon))
    return conditions


def feasible_targets(C2: MatrixLike, epsilon: float = DEFAULT_EPSILON) -> list[PolicyPair]:
    """
    Returns every target `(r, c)` that admits an adjustment, in row order. A row
    contributes at most one target, its strict minimum.
    """
    C2 = as_cost_matrix(C2, "C2")
    targets = []
    for r0, row in enumerate(C2):
        c0 = int(np.argmin(row))
        if not _violating_columns(C2, r0, c0, epsilon):
            targets.append(PolicyPair(r0 + 1, c0 + 1))
    return targets


def reduce(p: AdjustmentProblem) -> ReducedProblem:
    """
    Rewrites an adjustment problem as a bound-constrained least squares problem in
    the row offsets `t` and column offsets `s`. Raises `InfeasibleTarget` if no
    offsets can satisfy the positivity constraints.
    """
    r0, c0 = p.r - 1, p.c - 1
    violating = _violating_columns(p.C2, r0, c0, p.epsilon)
    if violating:
        raise InfeasibleTarget(p.r, p.c, violating)
    fixed_t = -float(p.C2[r0, c0])
    lower = p.epsilon - p.C2.min(axis=1)
    lower[r0] = fixed_t
    return ReducedProblem(p.C2 - p.A1, r0, fixed_t, lower)


def solve_reduced(
    q: ReducedProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> SolverOutput:
    """
    Minimizes the reduced problem by block coordinate descent. Each sweep sets every
    free row offset to its exact clamped 1-D minimizer given `s` (rows are independent
    of each other), then every column offset to its exact minimizer given `t`. Stops
    when the KKT residual is at most `tol` scaled by the magnitude of `M`.

    Raises `ConvergenceError` after `max_iter` sweeps.
    """
    assert tol > 0, "tol must be positive"
    M = q.M
    n, m = M.shape
    free = q.free_rows()
    # tol is relative: the KKT bound is tol * max(1, max|M|), not tol itself
    threshold = tol * max(1.0, float(np.abs(M).max()))
    t = np.maximum(q.lower, 0.0)
    t[q.r] = q.fixed_t
    s = -(M + t[:, None]).mean(axis=0)
    residual = q.kkt_residual(t, s)
    sweeps = 0
    while residual > threshold:
        if sweeps >= max_iter:
            raise ConvergenceError(q.objective(t, s), residual, sweeps)
        t[free] = np.maximum(q.lower[free], -(M[free] + s[None, :]).mean(axis=1))
        s = -(M + t[:, None]).mean(axis=0)
        sweeps += 1
        residual = q.kkt_residual(t, s)
    objective = q.objective(t, s)
    logger.debug(
        "Reduced %dx%d problem solved in %d sweeps, objective %r, KKT residual %r",
        n,
        m,
        sweeps,
        objective,
        residual,
    )
    return SolverOutput(t, s, objective, sweeps, residual)


def adjust_costs(
    p: AdjustmentProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> AdjustmentResult:
    """
    Finds the minimal-norm error matrix `E` for which `(A1 + E, C2)` is an exact
    potential game whose potential is zero at the target and at least `epsilon`
    elsewhere. An infeasible target gives an infeasible result; solver failure
    raises `ConvergenceError`.
    """
    try:
        q = reduce(p)
    except InfeasibleTarget as e:
        logger.debug("%s", e)
        return AdjustmentResult(
            p.r, p.c, AdjustmentStatus.INFEASIBLE, violating_columns=e.violating_columns
        )
    out = solve_reduced(q, tol, max_iter)
    E = q.residual(out.t, out.s)
    phi = p.C2 + out.t[:, None]
    phi[q.r, p.c - 1] = 0.0
    E.setflags(write=False)
    phi.setflags(write=False)
    return AdjustmentResult(
        p.r,
        p.c,
        AdjustmentStatus.SOLVED,
        E=E,
        phi=phi,
        frob_norm_sq=float(np.square(E).sum()),
        t=out.t,
        s=out.s,
        sweeps=out.sweeps,
    )


def adjustment_diagnostics(
    A1: MatrixLike, C2: MatrixLike, result: AdjustmentResult
) -> dict[str, Any]:
    """
    Checks a solved adjustment: the potential residual of `(A1 + E, C2, phi)`, whether
    `phi` has its unique minimum at the target, whether the target is a pure Nash
    equilibrium of the adjusted game, and whether the target row is a security policy
    of `A1 + E`.
    """
    if not result.solved:
        return dict(
            potential_residual=None,
            potential_ok=False,
            unique_minimum=False,
            nash=False,
            security_consistent=False,
        )
    adjusted = result.adjusted_cost(A1)
    C2 = as_cost_matrix(C2, "C2")
    check = is_exact_potential(adjusted, C2, result.phi, POTENTIAL_TOL)
    minima = np.argwhere(result.phi == result.phi.min())
    unique = len(minima) == 1 and tuple(minima[0] + 1) == tuple(result.target)
    return dict(
        potential_residual=check.residual,
        potential_ok=check.is_potential,
        unique_minimum=bool(unique),
        nash=result.target in pure_nash(adjusted, C2),
        security_consistent=result.r in security_policy_row(adjusted).policies,
    )


def report(A1: MatrixLike, C2: MatrixLike, result: AdjustmentResult) -> str:
    """
    Serializes an adjustment as the JSON report written by `veccost adjust`.
    """
    data = result.to_dict()
    data["residuals"] = adjustment_diagnostics(A1, C2, result)
    return dumps(data)


def select_policy(
    A1: MatrixLike,
    B1: MatrixLike,
    C2: MatrixLike,
    w: Iterable[float],
    epsilon: float = DEFAULT_EPSILON,
    max_workers: Optional[int] = None,
) -> SelectionResult:
    """
    Chooses player 1's policy against an opponent who plays a security policy of `C2`.

    Every moderate policy (Pareto-optimal, never worst-case) against that column is
    tried as a target; the solved target with the smallest error norm wins, ties going
    to the lower row. Player 1 then plays a security policy of the adjusted cost
    `A1 + E`: the target row when it is one, otherwise the lowest-indexed one, with
    `security_consistent` set to false. When no target can be solved, player 1 falls
    back to a security policy of its scalarized cost `scalarize(A1, B1, w)`.

    With `max_workers` > 1 the candidates are solved on a thread pool; the choice does
    not depend on completion order.
    """
    A1 = as_cost_matrix(A1, "A1")
    B1 = as_cost_matrix(B1, "B1")
    C2 = as_cost_matrix(C2, "C2")
    _same_shape(("A1", A1), ("B1", B1), ("C2", C2))
    w = Weights(*w)
    sigma = security_policy_col(C2).policies[0]
    rows = moderate_set(A1, B1, sigma)
    problems = [AdjustmentProblem(A1, C2, r, sigma, epsilon) for r in rows]
    if max_workers and max_workers > 1 and len(problems) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(adjust_costs, problems))
    else:
        results = [adjust_costs(p) for p in problems]

    candidates = [Candidate(res.r, res.status, res.frob_norm_sq) for res in results]
    best = None
    for res in results:
        logger.info(
            "Adjustment target (%d, %d): %s%s",
            res.r,
            res.c,
            res.status.value,
            " |E|^2=%r" % res.frob_norm_sq if res.solved else "",
        )
        if res.solved and (best is None or res.frob_norm_sq < best.frob_norm_sq):
            best = res

    if best is not None:
        security = security_policy_row(best.adjusted_cost(A1)).policies
        consistent = best.r in security
        gamma = best.r if consistent else security[0]
        if not consistent:
            logger.warning(
                "Target row %d is not a security policy of the adjusted cost (sigma=%d), "
                "playing row %d",
                best.r,
                sigma,
                gamma,
            )
        return SelectionResult(gamma, sigma, SelectionMethod.ADJUSTED, best, candidates, consistent)

    if not rows:
        logger.warning("No moderate policy against sigma=%d, falling back to scalarization", sigma)
    gamma = security_policy_row(scalarize(A1, B1, w)).policies[0]
    return SelectionResult(gamma, sigma, SelectionMethod.SCALARIZED_FALLBACK, None, candidates)


def error_bounds(
    A1: MatrixLike,
    B1: MatrixLike,
    C2: MatrixLike,
    target: Iterable[int],
    epsilon: float = DEFAULT_EPSILON,
) -> ErrorBounds:
    """
    Measures how far the target's outcome is from the best outcome of each single
    cost against the target column.

    Adjusts `A1` and `B1` separately towards the target and reports both error norms,
    the rows `gamma_a` and `gamma_b` minimizing column `c` of `A1` and of `B1` (lowest
    index), the deviations `A1(r, c) - A1(gamma_a, c)` and `B1(r, c) - B1(gamma_b, c)`,
    and whether each deviation is within its error norm. The `relaxed_holds_*` flags compare
    against `sqrt(2)` times the norm, a bound that follows from the target being a
    Nash equilibrium of the adjusted game.

    Raises `InfeasibleTarget` when the target cannot be reached.
    """
    r, c = PolicyPair(*target)
    A1 = as_cost_matrix(A1, "A1")
    B1 = as_cost_matrix(B1, "B1")
    _same_shape(("A1", A1), ("B1", B1))
    values = []
    for X in (A1, B1):
        result = adjust_costs(AdjustmentProblem(X, C2, r, c, epsilon))
        if not result.solved:
            raise InfeasibleTarget(r, c, result.violating_columns)
        gamma = int(np.argmin(X[:, c - 1])) + 1
        deviation = float(X[r - 1, c - 1] - X[gamma - 1, c - 1])
        norm = result.frob_norm
        values.append((norm, gamma, deviation, deviation <= norm, deviation <= math.sqrt(2) * norm))
    # values holds one tuple per cost; ErrorBounds interleaves them field by field
    bounds = ErrorBounds(*(v for pair in zip(*values) for v in pair))
    if not (bounds.holds_a and bounds.holds_b):
        logger.warning(
            "Outcome deviation exceeds the error norm at target (%d, %d): %r", r, c, bounds
        )
    return bounds


__all__ = [
    "DEFAULT_EPSILON",
    "RowCondition",
    "Candidate",
    "SolverOutput",
    "ErrorBounds",
    "AdjustmentException",
    "InfeasibleTarget",
    "ConvergenceError",
    "AdjustmentStatus",
    "SelectionMethod",
    "AdjustmentProblem",
    "ReducedProblem",
    "AdjustmentResult",
    "SelectionResult",
    "feasible_minimum",
    "row_conditions",
    "feasible_targets",
    "reduce",
    "solve_reduced",
    "adjust_costs",
    "adjustment_diagnostics",
    "report",
    "select_policy",
    "error_bounds",
]
