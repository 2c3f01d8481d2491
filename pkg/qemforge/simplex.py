"""
Two-phase primal simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x = b, x >= 0`` on a dense numpy tableau. The last
row of the tableau holds reduced costs, the last column the right-hand side.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DecompositionError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgramResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int


class SimplexTableau:
    def __init__(self, table, basis, tol):
        self.table = table
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    @property
    def m(self):
        return self.table.shape[0] - 1

    def pivot(self, i, j):
        table = self.table
        table[i] /= table[i, j]
        column = table[:, j].copy()
        column[i] = 0.0
        table -= np.outer(column, table[i])
        self.basis[i] = j
        self.iterations += 1

    def bland_primal_step(self, n_columns):
        costs = self.table[-1, :n_columns]
        entering = np.flatnonzero(costs < -self.tol)
        if entering.size == 0:
            return OPTIMAL
        j = entering[0]
        column = self.table[:-1, j]
        rows = np.flatnonzero(column > self.tol)
        if rows.size == 0:
            return UNBOUNDED
        ratios = self.table[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        # Bland: leave with the smallest basic variable index
        i = min(ties, key=lambda row: self.basis[row])
        self.pivot(i, j)
        return "go_on"

    def bland_primal(self, n_columns, max_iterations):
        for _ in range(max_iterations):
            status = self.bland_primal_step(n_columns)
            if status != "go_on":
                return status
        msg = f"Simplex did not converge within {max_iterations} pivots"
        raise DecompositionError(msg)

    def pivot_out_artificials(self, n_columns):
        """Drive artificial variables out of the basis; drop rows that turn out redundant."""
        keep = []
        for i in range(self.m):
            if self.basis[i] < n_columns:
                keep.append(i)
                continue
            candidates = np.flatnonzero(np.abs(self.table[i, :n_columns]) > self.tol)
            if candidates.size:
                self.pivot(i, candidates[0])
                keep.append(i)
        rows = [*keep, self.m]
        self.table = self.table[rows]
        self.basis = [self.basis[i] for i in keep]

    def solution(self, n_columns):
        x = np.zeros(n_columns)
        for i, var in enumerate(self.basis):
            if var < n_columns:
                x[var] = self.table[i, -1]
        return x


def linprog_simplex(c, a_eq, b_eq, tol=1e-9, max_iterations=50_000):
    """
    Minimize ``c.x`` subject to ``a_eq x = b_eq`` and ``x >= 0``.

    Returns a :class:`LinearProgramResult`; ``status`` is ``optimal``,
    ``infeasible`` or ``unbounded``.
    """
    c = np.asarray(c, dtype=float)
    a_eq = np.array(a_eq, dtype=float)
    b_eq = np.array(b_eq, dtype=float)
    m, n = a_eq.shape
    if c.shape != (n,) or b_eq.shape != (m,):
        msg = f"Inconsistent LP shapes: c {c.shape}, A {a_eq.shape}, b {b_eq.shape}"
        raise ValueError(msg)

    negative = b_eq < 0
    a_eq[negative] *= -1
    b_eq[negative] *= -1

    # phase 1: minimize the sum of artificials
    table = np.zeros((m + 1, n + m + 1))
    table[:m, :n] = a_eq
    table[:m, n : n + m] = np.eye(m)
    table[:m, -1] = b_eq
    table[-1, :n] = -a_eq.sum(axis=0)
    table[-1, -1] = -b_eq.sum()
    tableau = SimplexTableau(table, list(range(n, n + m)), tol)
    tableau.bland_primal(n, max_iterations)
    if -tableau.table[-1, -1] > tol * max(1.0, float(b_eq.sum())):
        return LinearProgramResult(np.zeros(n), np.inf, INFEASIBLE, tableau.iterations)
    tableau.pivot_out_artificials(n)

    # phase 2 on the original columns
    table = np.hstack([tableau.table[:, :n], tableau.table[:, -1:]])
    table[-1] = 0.0
    table[-1, :n] = c
    for i, var in enumerate(tableau.basis):
        table[-1] -= c[var] * table[i]
    tableau.table = table
    status = tableau.bland_primal(n, max_iterations)
    if status == UNBOUNDED:
        return LinearProgramResult(np.zeros(n), -np.inf, UNBOUNDED, tableau.iterations)
    x = tableau.solution(n)
    return LinearProgramResult(x, float(c @ x), OPTIMAL, tableau.iterations)
