"""Earth mover's distance between signatures via a two-phase revised
simplex on the balanced transportation problem.

The linear program has one column per (supply, demand) pair and
``U + V + 1`` equality rows: the V demand rows, the U supply rows, and a
redundant total-mass row, in that order.  Every structural column has
exactly three ones.  Because the system has rank ``U + V - 1``, phase I
may leave artificial variables in the basis at zero level; they are
barred from re-entering and become inert once no structural column can
replace them.  The dual vector recovered from the final basis splits
into per-demand prices, per-supply prices, and a constant offset whose
weighted sum reproduces the objective exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_matrix, check_prob_vector

ENTER_TOL = 1e-10          # reduced-cost optimality threshold
RATIO_TOL = 1e-11          # pivot-element threshold in the ratio test
DEGENERATE_TOL = 1e-12     # step sizes below this count as degenerate
REFACTOR_EVERY = 50        # rebuild the basis inverse from scratch


class SimplexIterationError(RuntimeError):
    """Pivot cap exceeded; carries the best solution reached so far."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class TransportProblem:
    """Costs, right-hand side, and shape of the balanced transport LP."""

    costs: np.ndarray     # (U*V,) row-major: supply index major
    rhs: np.ndarray       # (U+V+1,) = demand masses, supply masses, total
    n_supply: int
    n_demand: int

    @property
    def n_rows(self) -> int:
        return self.n_supply + self.n_demand + 1

    @property
    def n_cols(self) -> int:
        return self.n_supply * self.n_demand

    def constraint_matrix(self) -> np.ndarray:
        """Dense 0/1 matrix with three ones per column."""
        u, v = self.n_supply, self.n_demand
        a = np.zeros((self.n_rows, u * v))
        for j in range(u * v):
            a[j % v, j] = 1.0          # demand row
            a[v + j // v, j] = 1.0     # supply row
            a[u + v, j] = 1.0          # total row
        return a


@dataclass
class EmdSolution:
    """Optimal flow plus the price decomposition of the objective."""

    flow: np.ndarray            # (U, V) nonnegative
    objective: float
    demand_prices: np.ndarray   # (V,)
    supply_prices: np.ndarray   # (U,)
    price_offset: float
    basis: np.ndarray           # variable index per basis row
    basis_inverse: np.ndarray   # (m, m)


@dataclass
class SimplexBasis:
    indices: np.ndarray
    inverse: np.ndarray


def build_problem(p, q, costs) -> TransportProblem:
    """Assemble the LP for supplies ``p``, demands ``q``, cost matrix ``costs``."""
    p = check_prob_vector(p)
    q = check_prob_vector(q)
    d = check_matrix(costs, shape=(p.size, q.size))
    if abs(p.sum() - q.sum()) > 1e-9:
        raise ValueError("supply and demand masses are unbalanced")
    rhs = np.concatenate([q, p, [1.0]])
    return TransportProblem(d.ravel().astype(float), rhs, p.size, q.size)


class _Tableau:
    """Revised simplex state with an explicit basis inverse."""

    def __init__(self, prob: TransportProblem):
        self.prob = prob
        m, n = prob.n_rows, prob.n_cols
        u, v = prob.n_supply, prob.n_demand
        self.m, self.n = m, n
        self.u_of = np.repeat(np.arange(u), v)
        self.v_of = np.tile(np.arange(v), u)
        self.basis = np.arange(n, n + m)      # all-artificial start
        self.inverse = np.eye(m)
        self.xb = prob.rhs.astype(float).copy()
        self.in_basis = np.zeros(n, dtype=bool)
        self.pivots = 0
        self.degenerate_pivots = 0
        self.use_bland = False
        self.bland_after = 2 * (u + v)

    # -- columns -----------------------------------------------------------
    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j >= self.n:                       # artificial: unit column
            col[j - self.n] = 1.0
        else:
            col[self.v_of[j]] = 1.0
            col[self.prob.n_demand + self.u_of[j]] = 1.0
            col[self.m - 1] = 1.0
        return col

    def basis_costs(self, phase: int) -> np.ndarray:
        cb = np.zeros(self.m)
        for i, b in enumerate(self.basis):
            if b >= self.n:
                cb[i] = 1.0 if phase == 1 else 0.0
            elif phase == 2:
                cb[i] = self.prob.costs[b]
        return cb

    def duals(self, phase: int) -> np.ndarray:
        return self.basis_costs(phase) @ self.inverse

    def reduced_costs(self, phase: int, y: np.ndarray) -> np.ndarray:
        """Structural reduced costs c_j - y . A_j via the three-ones layout."""
        z = y[self.v_of] + y[self.prob.n_demand + self.u_of] + y[self.m - 1]
        if phase == 1:
            return -z
        return self.prob.costs - z

    # -- pivoting ----------------------------------------------------------
    def pivot(self, j: int, trace=None, phase: int = 0) -> None:
        y = self.inverse @ self.column(j)
        rows = np.nonzero(y > RATIO_TOL)[0]
        if rows.size == 0:
            raise RuntimeError("unbounded pivot in a bounded transport problem")
        ratios = self.xb[rows] / y[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + 1e-12]
        if self.use_bland:
            r = ties[np.argmin(self.basis[ties])]
        else:
            # prefer kicking artificials out, then the lowest variable index
            r = ties[np.argmax(self.basis[ties])]
        theta = self.xb[r] / y[r]
        leaving = self.basis[r]
        if trace is not None:
            trace.write(
                f"phase {phase} pivot {self.pivots}: enter {self._name(j)} "
                f"leave {self._name(leaving)} step {theta:.6g}\n"
            )
        self.xb -= theta * y
        self.xb[r] = theta
        np.clip(self.xb, 0.0, None, out=self.xb)
        piv = y[r]
        self.inverse[r] /= piv
        for k in range(self.m):
            if k != r and y[k] != 0.0:
                self.inverse[k] -= y[k] * self.inverse[r]
        if leaving < self.n:
            self.in_basis[leaving] = False
        self.in_basis[j] = True
        self.basis[r] = j
        self.pivots += 1
        if theta <= DEGENERATE_TOL:
            self.degenerate_pivots += 1
            if self.degenerate_pivots > self.bland_after:
                self.use_bland = True
        if self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def pivot_in_row(self, j: int, r: int) -> None:
        """Degenerate exchange at a zero-level row (artificial drive-out)."""
        y = self.inverse @ self.column(j)
        piv = y[r]
        if abs(piv) <= RATIO_TOL:
            raise RuntimeError("pivot element vanished during drive-out")
        leaving = self.basis[r]
        self.inverse[r] /= piv
        for k in range(self.m):
            if k != r and y[k] != 0.0:
                self.inverse[k] -= y[k] * self.inverse[r]
        if leaving < self.n:
            self.in_basis[leaving] = False
        self.in_basis[j] = True
        self.basis[r] = j
        self.xb = self.inverse @ self.prob.rhs
        np.clip(self.xb, 0.0, None, out=self.xb)

    def refactor(self) -> None:
        b = np.column_stack([self.column(j) for j in self.basis])
        self.inverse = np.linalg.solve(b, np.eye(self.m))
        self.xb = self.inverse @ self.prob.rhs
        np.clip(self.xb, 0.0, None, out=self.xb)

    def _name(self, j: int) -> str:
        if j >= self.n:
            return f"art{j - self.n}"
        return f"x({self.u_of[j]},{self.v_of[j]})"


def _run_phase(tab: _Tableau, phase: int, max_pivots: int, trace=None) -> None:
    while True:
        y = tab.duals(phase)
        r = tab.reduced_costs(phase, y)
        r[tab.in_basis] = 0.0
        eligible = np.nonzero(r < -ENTER_TOL)[0]
        if eligible.size == 0:
            return
        if tab.use_bland:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmin(r[eligible])])
        if tab.pivots >= max_pivots:
            raise SimplexIterationError(
                f"pivot cap {max_pivots} exceeded in phase {phase}",
                best=_solution_from(tab),
            )
        tab.pivot(j, trace=trace, phase=phase)


def _drive_out_artificials(tab: _Tableau) -> None:
    """Replace zero-level basic artificials with structural columns where a
    nonzero pivot exists; rows with none are redundant and stay inert."""
    for r in range(tab.m):
        if tab.basis[r] < tab.n:
            continue
        row = tab.inverse[r]
        alpha = row[tab.v_of] + row[tab.prob.n_demand + tab.u_of] + row[tab.m - 1]
        alpha[tab.in_basis] = 0.0
        j = int(np.argmax(np.abs(alpha)))
        if abs(alpha[j]) > 1e-9:
            tab.pivot_in_row(j, r)


def _phase1(prob: TransportProblem, max_pivots: int, trace=None) -> _Tableau:
    tab = _Tableau(prob)
    _run_phase(tab, 1, max_pivots, trace=trace)
    infeas = sum(tab.xb[i] for i in range(tab.m) if tab.basis[i] >= tab.n)
    if infeas > 1e-9:
        raise RuntimeError(
            f"phase I ended with residual infeasibility {infeas:.3e}"
        )
    _drive_out_artificials(tab)
    return tab


def initial_bfs(prob: TransportProblem, trace=None) -> SimplexBasis:
    """Feasible starting basis from phase I (artificials driven out where
    possible; the two redundant rows keep theirs at zero level)."""
    tab = _phase1(prob, max_pivots=max(10 * prob.n_cols, 10 * prob.n_rows),
                  trace=trace)
    return SimplexBasis(tab.basis.copy(), tab.inverse.copy())


def _solution_from(tab: _Tableau) -> EmdSolution:
    prob = tab.prob
    u, v = prob.n_supply, prob.n_demand
    y = tab.duals(2)
    flow = np.zeros((u, v))
    for i, b in enumerate(tab.basis):
        if b < tab.n:
            flow[tab.u_of[b], tab.v_of[b]] = tab.xb[i]
    flow = np.clip(flow, 0.0, None)
    objective = float((prob.costs * flow.ravel()).sum())
    return EmdSolution(
        flow=flow,
        objective=objective,
        demand_prices=y[:v].copy(),
        supply_prices=y[v: v + u].copy(),
        price_offset=float(y[-1]),
        basis=tab.basis.copy(),
        basis_inverse=tab.inverse.copy(),
    )


def simplex_solve(prob: TransportProblem, basis: SimplexBasis | None = None,
                  max_pivots: int | None = None, trace=None) -> EmdSolution:
    """Optimise the transport LP; returns flow, objective, and prices.

    Iterates until every reduced cost is >= -1e-10.  Dantzig entering rule
    with Bland's rule engaged after ``2(U+V)`` degenerate pivots; the basis
    inverse is refactorised every 50 pivots.  Exceeding the pivot cap
    (default ``10*U*V``) raises :class:`SimplexIterationError` carrying the
    best basis found.
    """
    if max_pivots is None:
        max_pivots = max(10 * prob.n_cols, 10 * prob.n_rows)
    if basis is None:
        tab = _phase1(prob, max_pivots, trace=trace)
    else:
        tab = _Tableau(prob)
        tab.basis = basis.indices.copy()
        tab.inverse = basis.inverse.copy()
        tab.in_basis[:] = False
        for b in tab.basis:
            if b < tab.n:
                tab.in_basis[b] = True
        tab.xb = tab.inverse @ prob.rhs
        np.clip(tab.xb, 0.0, None, out=tab.xb)
    _run_phase(tab, 2, max_pivots, trace=trace)
    return _solution_from(tab)


def emd(p, q, costs, trace=None) -> EmdSolution:
    """Earth mover's distance between mass vectors ``p`` and ``q`` under
    the given ground-distance matrix."""
    return simplex_solve(build_problem(p, q, costs), trace=trace)
