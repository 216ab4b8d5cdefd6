"""Linear programming core.

A small, self-contained LP toolkit: a builder type with named variables and
labeled constraints, a dense bounded-variable two-phase revised simplex with
Bland's rule (deterministic: identical inputs give identical outputs), dual
extraction by constraint label, post-solve optimality certificates, and exact
dual multiplicity ranges computed over the optimal dual face.

Conventions
-----------
* ``sense`` is ``"max"`` or ``"min"``; bounds may be ``+-math.inf``.
* Reported duals are oriented for the problem as stated: for a ``max``
  problem a binding ``<=`` row has a nonnegative dual.
* ``EPS`` (1e-7) is the feasibility/certificate tolerance; pivoting uses a
  tighter internal tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import LpNumericalError

EPS = 1e-7
_PIVOT_EPS = 1e-9
_RATIO_TIE = 1e-12

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_OPS = ("<=", "==", ">=")


class LinearProgram:
    """Mutable LP builder with named variables and labeled constraints."""

    def __init__(self, name: str = "lp", sense: str = "max"):
        if sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
        self.name = name
        self.sense = sense
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: list[float] = []
        self._rows: list[tuple[str, dict[str, float], str, float]] = []
        self._labels: set[str] = set()

    # -- construction ------------------------------------------------------

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf,
                     objective: float = 0.0) -> int:
        """Add a variable with bounds ``lb <= x <= ub``; returns its index."""
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        if lb > ub:
            raise ValueError(f"variable {name!r} has lb {lb} > ub {ub}")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(objective))
        return self._index[name]

    def add_constraint(self, label: str, coeffs: dict[str, float], op: str,
                       rhs: float) -> None:
        """Add a labeled row ``sum(coeffs[name] * x[name]) op rhs``."""
        if op not in _OPS:
            raise ValueError(f"op must be one of {_OPS}, got {op!r}")
        if label in self._labels:
            raise ValueError(f"duplicate constraint label {label!r}")
        for name in coeffs:
            if name not in self._index:
                raise ValueError(f"constraint {label!r} uses unknown variable {name!r}")
        self._labels.add(label)
        self._rows.append((label, dict(coeffs), op, float(rhs)))

    # -- introspection -----------------------------------------------------

    @property
    def n_variables(self) -> int:
        return len(self._names)

    @property
    def n_constraints(self) -> int:
        return len(self._rows)

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(self._names)

    @property
    def constraint_labels(self) -> tuple[str, ...]:
        return tuple(r[0] for r in self._rows)

    def bounds(self, name: str) -> tuple[float, float]:
        j = self._index[name]
        return self._lb[j], self._ub[j]

    def objective_coefficient(self, name: str) -> float:
        return self._obj[self._index[name]]


@dataclass(frozen=True)
class CertificateReport:
    """Residuals of the four optimality certificates for one solve."""

    primal_residual: float
    dual_residual: float
    complementarity_residual: float
    duality_gap: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return (self.primal_residual <= self.tolerance
                and self.dual_residual <= self.tolerance
                and self.complementarity_residual <= self.tolerance
                and self.duality_gap <= self.tolerance)


@dataclass(frozen=True)
class LpSolution:
    """Result of one solve: status, objective in the stated sense, primal
    values by variable name, duals by constraint label."""

    status: str
    objective: float
    primal: dict[str, float]
    duals: dict[str, float]
    certificate: CertificateReport | None = None


# ---------------------------------------------------------------------------
# standardization: internal minimization with equality rows and slack columns
# ---------------------------------------------------------------------------

class _Standard:
    """Internal min-form arrays: min c.x s.t. A x = b, lb <= x <= ub, where
    columns [0, n) are the user's variables and [n, n+m) are row slacks."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_variables
        m = lp.n_constraints
        self.n = n
        self.m = m
        sign = -1.0 if lp.sense == "max" else 1.0
        self.c = np.concatenate([sign * np.asarray(lp._obj, dtype=float),
                                 np.zeros(m)])
        self.lb = np.concatenate([np.asarray(lp._lb, dtype=float), np.zeros(m)])
        self.ub = np.concatenate([np.asarray(lp._ub, dtype=float), np.zeros(m)])
        self.b = np.zeros(m)
        A = np.zeros((m, n + m))
        for i, (_label, coeffs, op, rhs) in enumerate(lp._rows):
            for name, coef in coeffs.items():
                A[i, lp._index[name]] += coef
            A[i, n + i] = 1.0
            self.b[i] = rhs
            if op == "<=":
                self.lb[n + i], self.ub[n + i] = 0.0, math.inf
            elif op == ">=":
                self.lb[n + i], self.ub[n + i] = -math.inf, 0.0
            # "==": slack fixed at [0, 0]
        self.A = A
        self.sign = sign


def _initial_point(std: _Standard) -> tuple[np.ndarray, np.ndarray]:
    """Nonbasic start: each column at a finite bound, free columns at 0."""
    total = std.n + std.m
    x = np.zeros(total)
    state = np.full(total, _AT_LOWER, dtype=np.int8)
    for j in range(total):
        if std.lb[j] > -math.inf:
            x[j] = std.lb[j]
            state[j] = _AT_LOWER
        elif std.ub[j] < math.inf:
            x[j] = std.ub[j]
            state[j] = _AT_UPPER
        else:
            x[j] = 0.0
            state[j] = _FREE
    return x, state


def _factor(A: np.ndarray, basis: np.ndarray):
    B = A[:, basis]
    lu, piv = lu_factor(B, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(1.0, float(np.max(np.abs(B))) if B.size else 1.0)
    if not np.all(np.isfinite(lu)) or (diag.size and float(np.min(diag)) < 1e-12 * scale):
        raise LpNumericalError("singular basis matrix")
    return lu, piv


def _run_phase(std: _Standard, A: np.ndarray, c: np.ndarray, lb: np.ndarray,
               ub: np.ndarray, x: np.ndarray, state: np.ndarray,
               basis: np.ndarray, max_iter: int) -> tuple[str, np.ndarray]:
    """Iterate to optimality for cost vector c. Returns (status, duals)."""
    m = len(basis)
    total = A.shape[1]
    iters = 0
    while True:
        iters += 1
        if iters > max_iter:
            raise LpNumericalError(
                f"simplex exceeded {max_iter} iterations (possible cycling)")
        if m:
            lu = _factor(A, basis)
            y = lu_solve(lu, c[basis], trans=1, check_finite=False)
        else:
            y = np.zeros(0)
        rc = c - A.T @ y if m else c.copy()
        # entering variable: Bland's rule, lowest eligible index
        q = -1
        sigma = 0.0
        for j in range(total):
            if state[j] == _BASIC or lb[j] == ub[j]:
                continue
            r = rc[j]
            if state[j] == _AT_LOWER and r < -_PIVOT_EPS:
                q, sigma = j, 1.0
                break
            if state[j] == _AT_UPPER and r > _PIVOT_EPS:
                q, sigma = j, -1.0
                break
            if state[j] == _FREE and abs(r) > _PIVOT_EPS:
                q, sigma = j, (1.0 if r < 0 else -1.0)
                break
        if q < 0:
            return OPTIMAL, y
        w = lu_solve(lu, A[:, q], check_finite=False) if m else np.zeros(0)
        # ratio test: own bound flip vs first blocking basic column
        if lb[q] > -math.inf and ub[q] < math.inf:
            t_best = ub[q] - lb[q]
        else:
            t_best = math.inf
        r_best = -1
        for k in range(m):
            wk = sigma * w[k]
            jk = basis[k]
            if wk > _PIVOT_EPS:
                if lb[jk] == -math.inf:
                    continue
                tk = (x[jk] - lb[jk]) / wk
            elif wk < -_PIVOT_EPS:
                if ub[jk] == math.inf:
                    continue
                tk = (ub[jk] - x[jk]) / (-wk)
            else:
                continue
            if tk < 0.0:
                tk = 0.0
            if tk < t_best - _RATIO_TIE:
                t_best, r_best = tk, k
            elif tk <= t_best + _RATIO_TIE and (r_best == -1 or jk < basis[r_best]):
                t_best, r_best = min(t_best, tk), k
        if not math.isfinite(t_best):
            return UNBOUNDED, y
        # apply the step
        if m:
            x[basis] -= sigma * t_best * w
        x[q] += sigma * t_best
        if r_best == -1:
            # entering column travels to its opposite bound; basis unchanged
            if sigma > 0:
                x[q] = ub[q]
                state[q] = _AT_UPPER
            else:
                x[q] = lb[q]
                state[q] = _AT_LOWER
        else:
            leave = basis[r_best]
            if sigma * w[r_best] > 0:
                x[leave] = lb[leave]
                state[leave] = _AT_LOWER
            else:
                x[leave] = ub[leave]
                state[leave] = _AT_UPPER
            basis[r_best] = q
            state[q] = _BASIC


def _feasible_start_basis(std: _Standard, x: np.ndarray,
                          state: np.ndarray) -> np.ndarray | None:
    """If the nonbasic start satisfies every row once slacks take their
    natural activity values, place those slacks, build a deterministic basis
    (lowest-index usable pivot per row, interior slacks forced basic), and
    return it. Returns None when the start is infeasible."""
    n, m = std.n, std.m
    total = n + m
    want = std.b - std.A[:, :n] @ x[:n]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(std.b))) if m else 1.0)
    forced: list[int] = []
    for i in range(m):
        lo, hi = std.lb[n + i], std.ub[n + i]
        si = float(want[i])
        if si < lo - tol or si > hi + tol:
            return None
        si = min(max(si, lo), hi)
        if si > lo + tol and si < hi - tol:
            x[n + i] = si
            forced.append(i)  # interior value: this slack must be basic
        elif si - lo <= hi - si:
            x[n + i] = lo
            state[n + i] = _AT_LOWER
        else:
            x[n + i] = hi
            state[n + i] = _AT_UPPER
    basis = np.full(m, -1, dtype=int)
    W = std.A.copy()
    for i in forced:
        basis[i] = n + i
        state[n + i] = _BASIC
    for i in range(m):
        if basis[i] >= 0:
            continue
        pivot = -1
        for j in range(total):
            if state[j] == _BASIC:
                continue
            if abs(W[i, j]) > _PIVOT_EPS:
                pivot = j
                break
        if pivot < 0:
            pivot = n + i  # dependent row: its own slack, basic at a bound
        basis[i] = pivot
        state[pivot] = _BASIC
        W[i] = W[i] / W[i, pivot]
        for k in range(m):
            if k != i and W[k, pivot]:
                W[k] = W[k] - W[k, pivot] * W[i]
    return basis


def _drive_out_artificials(A: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                           state: np.ndarray, basis: np.ndarray,
                           n_real: int) -> None:
    """Replace basic artificial columns (all at value zero after a feasible
    phase 1) with the lowest-index real column having a usable pivot."""
    m = len(basis)
    for k in range(m):
        if basis[k] < n_real:
            continue
        lu = _factor(A, basis)
        ek = np.zeros(m)
        ek[k] = 1.0
        z = lu_solve(lu, ek, trans=1, check_finite=False)
        row = z @ A[:, :n_real]
        entered = False
        for j in range(n_real):
            if state[j] == _BASIC:
                continue
            if abs(row[j]) > _PIVOT_EPS:
                art = basis[k]
                basis[k] = j
                state[j] = _BASIC
                state[art] = _AT_LOWER
                entered = True
                break
        if not entered:
            # redundant row: pin the artificial in place at zero
            lb[basis[k]] = 0.0
            ub[basis[k]] = 0.0


def _solve_reference(lp: LinearProgram) -> tuple[str, np.ndarray, np.ndarray]:
    """Two-phase bounded simplex. Returns (status, x, internal duals)."""
    std = _Standard(lp)
    total = std.n + std.m
    m = std.m
    x, state = _initial_point(std)
    max_iter = 50 * (total + m)
    if m == 0:
        basis = np.zeros(0, dtype=int)
        status, y = _run_phase(std, std.A, std.c, std.lb, std.ub, x, state,
                               basis, max_iter)
        return status, x[:std.n], y
    x2, state2 = x.copy(), state.copy()
    basis0 = _feasible_start_basis(std, x2, state2)
    if basis0 is not None:
        # the start already satisfies every row: no phase 1 needed
        status, y = _run_phase(std, std.A, std.c, std.lb, std.ub, x2, state2,
                               basis0, max_iter)
        return status, x2[:std.n], y
    residual = std.b - std.A @ x
    art_sign = np.where(residual >= 0, 1.0, -1.0)
    A1 = np.hstack([std.A, np.diag(art_sign)])
    lb1 = np.concatenate([std.lb, np.zeros(m)])
    ub1 = np.concatenate([std.ub, np.full(m, math.inf)])
    x1 = np.concatenate([x, np.abs(residual)])
    state1 = np.concatenate([state, np.full(m, _BASIC, dtype=np.int8)])
    basis = np.arange(total, total + m)
    c1 = np.concatenate([np.zeros(total), np.ones(m)])
    status, _y = _run_phase(std, A1, c1, lb1, ub1, x1, state1, basis, max_iter)
    if status != OPTIMAL:
        raise LpNumericalError("phase 1 terminated abnormally")
    scale = max(1.0, float(np.max(np.abs(std.b))) if m else 1.0)
    if float(x1[total:].sum()) > EPS * scale:
        return INFEASIBLE, x1[:std.n], np.zeros(m)
    _drive_out_artificials(A1, lb1, ub1, state1, basis, total)
    # artificials are pinned at zero and priced out for phase 2
    lb1[total:] = 0.0
    ub1[total:] = 0.0
    c2 = np.concatenate([std.c, np.zeros(m)])
    status, y = _run_phase(std, A1, c2, lb1, ub1, x1, state1, basis, max_iter)
    return status, x1[:std.n], y


_BACKENDS = {"reference": _solve_reference}


def check_certificates(lp: LinearProgram, solution: LpSolution,
                       tolerance: float = EPS) -> CertificateReport:
    """Verify primal feasibility, dual feasibility, complementary slackness,
    and strong duality for an optimal (primal, dual) pair."""
    std = _Standard(lp)
    n, m = std.n, std.m
    x = np.array([solution.primal[name] for name in lp.variable_names], dtype=float)
    y_user = np.array([solution.duals[label] for label in lp.constraint_labels],
                      dtype=float)
    y = std.sign * y_user  # internal min-form duals
    # recover slack values from row activities
    slack = std.b - std.A[:, :n] @ x if m else np.zeros(0)
    xe = np.concatenate([x, slack])
    scale = max(1.0, float(np.max(np.abs(xe))) if xe.size else 1.0,
                float(np.max(np.abs(std.b))) if m else 1.0)
    lo = np.where(np.isfinite(std.lb), std.lb, -np.inf)
    hi = np.where(np.isfinite(std.ub), std.ub, np.inf)
    primal_res = 0.0
    for j in range(n + m):
        primal_res = max(primal_res, lo[j] - xe[j], xe[j] - hi[j])
    rc = std.c - std.A.T @ y if m else std.c.copy()
    dual_res = 0.0
    comp_res = 0.0
    dual_obj = float(std.b @ y) if m else 0.0
    for j in range(n + m):
        r = float(rc[j])
        # internal min form: positive rc must rest on a finite lower bound,
        # negative rc on a finite upper bound
        if r > 0:
            if std.lb[j] == -math.inf:
                dual_res = max(dual_res, r)
            else:
                comp_res = max(comp_res, r * (xe[j] - std.lb[j]) / scale)
                dual_obj += r * std.lb[j]
        elif r < 0:
            if std.ub[j] == math.inf:
                dual_res = max(dual_res, -r)
            else:
                comp_res = max(comp_res, -r * (std.ub[j] - xe[j]) / scale)
                dual_obj += r * std.ub[j]
    primal_obj = float(std.c[:n] @ x)
    gap = abs(primal_obj - dual_obj) / max(1.0, abs(primal_obj))
    return CertificateReport(
        primal_residual=float(primal_res) / scale,
        dual_residual=float(dual_res),
        complementarity_residual=float(comp_res),
        duality_gap=float(gap),
        tolerance=tolerance,
    )


def solve(lp: LinearProgram, backend: str = "reference") -> LpSolution:
    """Solve the LP. Status is ``optimal``, ``infeasible`` or ``unbounded``;
    optimal solves carry duals by label and a verified certificate report."""
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; have {sorted(_BACKENDS)}")
    status, x, y = _BACKENDS[backend](lp)
    if status != OPTIMAL:
        return LpSolution(status=status, objective=math.nan, primal={}, duals={})
    std_sign = -1.0 if lp.sense == "max" else 1.0
    primal = {name: float(x[j]) for j, name in enumerate(lp.variable_names)}
    duals = {label: float(std_sign * y[i])
             for i, label in enumerate(lp.constraint_labels)}
    objective = float(np.dot(np.asarray(lp._obj, dtype=float), x))
    solution = LpSolution(status=OPTIMAL, objective=objective, primal=primal,
                          duals=duals)
    report = check_certificates(lp, solution)
    if not report.ok:
        raise LpNumericalError(
            f"optimality certificates failed for {lp.name!r}: {report}")
    return LpSolution(status=OPTIMAL, objective=objective, primal=primal,
                      duals=duals, certificate=report)


def dual_range(lp: LinearProgram, solution: LpSolution,
               label: str) -> tuple[float, float]:
    """Exact multiplicity range of one constraint's dual over the optimal dual
    face (dual feasibility plus dual objective equal to the primal optimum).

    Both endpoints are attained by optimal dual solutions; the published dual
    lies inside the returned interval.
    """
    if solution.status != OPTIMAL:
        raise ValueError("dual_range requires an optimal solution")
    if label not in lp.constraint_labels:
        raise ValueError(f"unknown constraint label {label!r}")
    lo = _dual_face_extremum(lp, solution, label, "min")
    hi = _dual_face_extremum(lp, solution, label, "max")
    point = solution.duals[label]
    if not (lo - EPS <= point <= hi + EPS):
        raise LpNumericalError(
            f"published dual {point} for {label!r} outside computed range "
            f"[{lo}, {hi}]")
    return lo, hi


def _dual_face_extremum(lp: LinearProgram, solution: LpSolution, label: str,
                        direction: str) -> float:
    # Build the dual face in max orientation; for a min primal the face of
    # the negated-objective max problem has every dual negated, so query the
    # mirrored extremum and negate back.
    #
    # The face is expressed in the row duals alone. Every point of it is an
    # optimal dual, so it is complementary to the known optimal primal x*:
    # the multiplier of a bound x* does not sit on must vanish. That pins,
    # per column, which side of the reduced cost c_j - y.a_j is admissible
    # (at lower bound: <= 0, at upper: >= 0, interior or free: = 0, fixed:
    # unrestricted) and makes the surviving multiplier an affine function of
    # y, so the bound terms of the dual objective fold into the
    # strong-duality row instead of needing multiplier variables.
    mirrored = lp.sense == "min"
    sgn = -1.0 if mirrored else 1.0
    z_star = sgn * solution.objective
    face = LinearProgram(name=f"{lp.name}:dualface:{label}:{direction}",
                         sense="min" if (direction == "min") != mirrored else "max")
    for lab, _coeffs, op, _rhs in lp._rows:
        if op == "<=":
            ylb, yub = 0.0, math.inf
        elif op == ">=":
            ylb, yub = -math.inf, 0.0
        else:
            ylb, yub = -math.inf, math.inf
        obj = 1.0 if lab == label else 0.0
        face.add_variable(f"y[{lab}]", lb=ylb, ub=yub, objective=obj)
    cols: dict[str, dict[str, float]] = {name: {} for name in lp.variable_names}
    strong: dict[str, float] = {}
    for lab, coeffs, _op, rhs in lp._rows:
        if rhs:
            strong[f"y[{lab}]"] = rhs
        for name, coef in coeffs.items():
            cols[name][f"y[{lab}]"] = cols[name].get(f"y[{lab}]", 0.0) + coef
    shift = 0.0
    for name in lp.variable_names:
        vlb, vub = lp.bounds(name)
        x_j = solution.primal[name]
        c_j = sgn * lp.objective_coefficient(name)
        a_j = cols[name]
        if vlb == vub:
            anchor, op = vlb, None
        elif vub < math.inf and x_j >= vub - 1e-9:
            anchor, op = vub, "<="
        elif vlb > -math.inf and x_j <= vlb + 1e-9:
            anchor, op = vlb, ">="
        else:
            anchor, op = 0.0, "=="
        if op is not None:
            face.add_constraint(f"stationarity[{name}]", dict(a_j), op, c_j)
        if anchor:
            # surviving multiplier: +/-(y.a_j - c_j); its bound term
            # anchor * multiplier becomes anchor * (c_j - y.a_j)
            shift += anchor * c_j
            for ylab, coef in a_j.items():
                strong[ylab] = strong.get(ylab, 0.0) - anchor * coef
    face.add_constraint("strong_duality", strong, "==", z_star - shift)
    sol = solve(face)
    if sol.status != OPTIMAL:
        raise LpNumericalError(
            f"dual face for {lp.name!r} is {sol.status}; cannot range {label!r}")
    return sgn * sol.objective


def write_lp_text(lp: LinearProgram) -> str:
    """Render the LP as readable text (objective, rows, bounds)."""
    out = [f"\\ {lp.name}"]
    out.append("maximize" if lp.sense == "max" else "minimize")
    out.append("  " + (_linear_text(
        {n: lp.objective_coefficient(n) for n in lp.variable_names
         if lp.objective_coefficient(n)}) or "0"))
    out.append("subject to")
    for label, coeffs, op, rhs in lp._rows:
        op_txt = {"<=": "<=", "==": "=", ">=": ">="}[op]
        out.append(f"  {label}: {_linear_text(coeffs) or '0'} {op_txt} {_num(rhs)}")
    out.append("bounds")
    for name in lp.variable_names:
        vlb, vub = lp.bounds(name)
        if vlb == -math.inf and vub == math.inf:
            out.append(f"  {name} free")
        elif vlb == vub:
            out.append(f"  {name} = {_num(vlb)}")
        else:
            left = "-inf" if vlb == -math.inf else _num(vlb)
            right = "+inf" if vub == math.inf else _num(vub)
            out.append(f"  {left} <= {name} <= {right}")
    out.append("end")
    return "\n".join(out) + "\n"


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _linear_text(coeffs: dict[str, float]) -> str:
    parts: list[str] = []
    for name, coef in coeffs.items():
        if coef == 0:
            continue
        sign = "-" if coef < 0 else ("+" if parts else "")
        mag = abs(coef)
        term = name if mag == 1 else f"{_num(mag)} {name}"
        parts.append(f"{sign} {term}" if parts else f"{sign}{term}".lstrip())
    return " ".join(parts)
