"""Mixed-integer linear programming kernel.

A generic minimization MILP: continuous/binary/integer variables with bounds,
sparse linear constraints, solved exactly by a bounded-variable two-phase
revised primal simplex (Dantzig pricing, Bland's rule after a degeneracy
streak) wrapped in depth-first branch and bound. Branching is deterministic:
the lowest-index fractional discrete variable, floor branch explored first,
so identical models always produce identical solutions.

The simplex keeps a dense basis inverse that is refactorized periodically;
constraint matrices at the scale of this package (a few thousand columns,
under a thousand rows) stay comfortably dense.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

LE, EQ, GE = "<=", "=", ">="

FEAS_TOL = 1e-6          # feasibility / integrality tolerance on reported solutions
GAP_TOL = 1e-6           # absolute optimality gap tolerance
_PIVOT_TOL = 1e-9
_DUAL_TOL = 1e-7
_BLAND_THRESHOLD = 60    # consecutive degenerate pivots before Bland's rule
_REFACTOR_EVERY = 128

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap_limit"


class InvalidBounds(Exception):
    pass


class NumericalFailure(Exception):
    """Simplex stalled beyond its safeguards (singular basis, cycling)."""


@dataclass(frozen=True)
class VarRef:
    index: int
    kind: str
    lo: float
    hi: float
    name: str


@dataclass(frozen=True)
class LinearConstraint:
    coeffs: tuple[tuple[int, float], ...]   # (variable index, coefficient)
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MilpModel:
    name: str = "model"
    variables: list[VarRef] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    # optional crash values: simplex parks these variables at the finite bound
    # nearest the hint, which lets builders hand over a feasible start basis
    start_hints: dict[int, float] = field(default_factory=dict)

    def add_variable(self, kind: str, lo: float = 0.0, hi: float = np.inf, name: str = "") -> VarRef:
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if not lo <= hi:
            raise InvalidBounds(f"variable {name or len(self.variables)}: lo {lo} > hi {hi}")
        if not (np.isfinite(lo) or np.isfinite(hi)):
            raise InvalidBounds(f"variable {name!r}: at least one finite bound is required")
        ref = VarRef(index=len(self.variables), kind=kind, lo=float(lo), hi=float(hi),
                     name=name or f"v{len(self.variables)}")
        self.variables.append(ref)
        return ref

    def add_constraint(self, coeffs, sense: str, rhs: float, name: str = "") -> None:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown sense {sense!r}")
        seen: dict[int, float] = {}
        for ref, coef in coeffs:
            idx = ref.index if isinstance(ref, VarRef) else int(ref)
            if not 0 <= idx < len(self.variables):
                raise ValueError(f"constraint {name!r} references undeclared variable {idx}")
            if not np.isfinite(coef):
                raise ValueError(f"constraint {name!r}: non-finite coefficient")
            if idx in seen:
                raise ValueError(f"constraint {name!r}: duplicate variable {idx}")
            seen[idx] = float(coef)
        self.constraints.append(LinearConstraint(
            coeffs=tuple(sorted(seen.items())), sense=sense, rhs=float(rhs), name=name))

    def set_objective(self, coeffs, constant: float = 0.0) -> None:
        self.objective = {}
        for ref, coef in coeffs:
            idx = ref.index if isinstance(ref, VarRef) else int(ref)
            self.objective[idx] = self.objective.get(idx, 0.0) + float(coef)
        self.objective_constant = float(constant)

    def num_variables(self) -> int:
        return len(self.variables)

    def num_constraints(self) -> int:
        return len(self.constraints)


@dataclass
class MilpSolution:
    status: str
    objective: float | None
    values: np.ndarray | None
    gap: float
    nodes: int = 0

    def value(self, ref: VarRef) -> float:
        return float(self.values[ref.index])

    def __getitem__(self, ref: VarRef) -> float:
        return self.value(ref)


def check_solution(model: MilpModel, values: np.ndarray, tol: float = FEAS_TOL) -> list[str]:
    """Independently re-evaluate every constraint, bound and integrality
    requirement against an assignment; returns violation descriptions."""
    violations = []
    for ref in model.variables:
        x = values[ref.index]
        if x < ref.lo - tol or x > ref.hi + tol:
            violations.append(f"bound {ref.name}: {x} outside [{ref.lo}, {ref.hi}]")
        if ref.kind in (BINARY, INTEGER) and abs(x - round(x)) > tol:
            violations.append(f"integrality {ref.name}: {x}")
    for con in model.constraints:
        lhs = sum(coef * values[idx] for idx, coef in con.coeffs)
        if con.sense == LE and lhs > con.rhs + tol:
            violations.append(f"{con.name or 'row'}: {lhs} > {con.rhs}")
        elif con.sense == GE and lhs < con.rhs - tol:
            violations.append(f"{con.name or 'row'}: {lhs} < {con.rhs}")
        elif con.sense == EQ and abs(lhs - con.rhs) > tol:
            violations.append(f"{con.name or 'row'}: {lhs} != {con.rhs}")
    return violations


# ---------------------------------------------------------------------------
# LP standard form
# ---------------------------------------------------------------------------

class _StandardForm:
    """min c.x  s.t.  E x = b,  lo <= x <= hi, slacks and artificials included.

    Columns are ordered [structurals | slacks | artificials]. The matrix is
    built once per model and reused across branch-and-bound nodes (only the
    structural bounds change between nodes).
    """

    def __init__(self, model: MilpModel):
        n = len(model.variables)
        m = len(model.constraints)
        slack_rows = [i for i, con in enumerate(model.constraints) if con.sense != EQ]
        n_slack = len(slack_rows)
        total = n + n_slack + m
        E = np.zeros((m, total))
        b = np.empty(m)
        for i, con in enumerate(model.constraints):
            for idx, coef in con.coeffs:
                E[i, idx] = coef
            b[i] = con.rhs
        for s, i in enumerate(slack_rows):
            E[i, n + s] = 1.0 if model.constraints[i].sense == LE else -1.0
        # artificial columns are filled per solve (sign depends on the residual)
        self.E = E
        self.b = b
        self.n = n
        self.n_slack = n_slack
        self.m = m
        self.total = total
        self.art_start = n + n_slack
        c = np.zeros(total)
        for idx, coef in model.objective.items():
            c[idx] = coef
        self.c = c
        self.base_lo = np.full(total, 0.0)
        self.base_hi = np.full(total, np.inf)
        for ref in model.variables:
            self.base_lo[ref.index] = ref.lo
            self.base_hi[ref.index] = ref.hi
        self.slack_of_row = np.full(m, -1, dtype=np.int64)
        for s, i in enumerate(slack_rows):
            self.slack_of_row[i] = n + s
        self.hints = dict(model.start_hints)
        # sparse views of the non-artificial block: CSR of E^T for pricing,
        # CSC arrays for cheap single-column extraction in the ratio test
        csc = sp.csc_matrix(E[:, : self.art_start])
        self.col_ptr = csc.indptr
        self.col_rows = csc.indices
        self.col_vals = csc.data
        self.ET_csr = csc.T.tocsr()


class _LpResult:
    __slots__ = ("status", "objective", "x")

    def __init__(self, status, objective=None, x=None):
        self.status = status
        self.objective = objective
        self.x = x


def _solve_lp(sf: _StandardForm, lo: np.ndarray, hi: np.ndarray) -> _LpResult:
    """Two-phase bounded-variable revised simplex on the standard form."""
    m, total, art0 = sf.m, sf.total, sf.art_start
    E, b = sf.E, sf.b

    lo = np.concatenate([lo, np.zeros(sf.n_slack + m)])
    hi = np.concatenate([hi, np.full(sf.n_slack + m, np.inf)])
    if np.any(lo[: sf.n] > hi[: sf.n] + 1e-12):
        return _LpResult(INFEASIBLE)

    # Park every non-artificial column at a finite bound (hint-aware), then
    # crash a diagonal basis: slacks absorb whatever residual they can and
    # artificials pick up the rest.
    x = np.where(np.isfinite(lo), lo, hi)
    for idx, hint in sf.hints.items():
        l, h = lo[idx], hi[idx]
        target = min(max(hint, l), h)
        if np.isfinite(h) and abs(h - target) < abs(target - l):
            x[idx] = h
        elif np.isfinite(l):
            x[idx] = l
    x[art0:] = 0.0
    residual = b - E[:, : sf.n] @ x[: sf.n]

    basis = np.empty(m, dtype=np.int64)
    in_basis = np.zeros(total, dtype=bool)
    need_phase1 = False
    for i in range(m):
        s = sf.slack_of_row[i]
        coef = E[i, s] if s >= 0 else 0.0
        if s >= 0 and residual[i] * coef >= 0.0:
            x[s] = residual[i] / coef
            basis[i] = s
            E[i, art0 + i] = 1.0
        else:
            if s >= 0:
                x[s] = 0.0
            E[i, art0 + i] = 1.0 if residual[i] >= 0 else -1.0
            x[art0 + i] = abs(residual[i])
            basis[i] = art0 + i
            if x[art0 + i] > 1e-10:
                need_phase1 = True
    in_basis[basis] = True
    diag = np.array([E[i, basis[i]] for i in range(m)])
    B_inv = np.diag(1.0 / diag) if m else np.zeros((0, 0))

    c_phase1 = np.zeros(total)
    c_phase1[art0:] = 1.0
    cscale = max(1.0, float(np.max(np.abs(sf.c))) if sf.c.size else 1.0)
    c_phase2 = sf.c / cscale

    def run_phase(c: np.ndarray, phase: int) -> str:
        nonlocal B_inv
        degenerate_streak = 0
        since_refactor = 0
        max_iter = 2000 + 40 * (m + total)
        c_head = c[:art0]
        y = c[basis] @ B_inv  # maintained incrementally between refactorizations
        for _ in range(max_iter):
            # artificial columns never re-enter; price the sparse block only
            d = c_head - sf.ET_csr.dot(y)
            nb = ~in_basis[:art0]
            at_lo = nb & (np.abs(x[:art0] - lo[:art0]) <= np.abs(x[:art0] - hi[:art0]))
            can_move = lo[:art0] < hi[:art0]
            elig_up = nb & at_lo & can_move & (d < -_DUAL_TOL)
            elig_dn = nb & ~at_lo & can_move & (d > _DUAL_TOL)
            eligible = elig_up | elig_dn
            if not eligible.any():
                return "optimal"
            if degenerate_streak > _BLAND_THRESHOLD:
                j = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if elig_up[j] else -1.0

            lo_col, hi_col = sf.col_ptr[j], sf.col_ptr[j + 1]
            w = B_inv[:, sf.col_rows[lo_col:hi_col]] @ sf.col_vals[lo_col:hi_col]
            step_basic = direction * w
            xb, lob, hib = x[basis], lo[basis], hi[basis]
            t_best = hi[j] - lo[j]  # bound flip span (may be inf)
            leave_pos = -1
            dec = step_basic > _PIVOT_TOL
            inc = step_basic < -_PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios = np.full(m, np.inf)
                ratios[dec] = (xb[dec] - lob[dec]) / step_basic[dec]
                ratios[inc] = (xb[inc] - hib[inc]) / step_basic[inc]
            ratios[~np.isfinite(ratios)] = np.inf
            ratios[ratios < 0] = 0.0
            pos = int(np.argmin(ratios)) if m else -1
            if pos >= 0 and ratios[pos] < t_best:
                # deterministic tie-break: smallest basic variable index
                tied = np.flatnonzero(ratios <= ratios[pos] + 1e-12)
                pos = int(tied[np.argmin(basis[tied])])
                t_best = ratios[pos]
                leave_pos = pos
            if not np.isfinite(t_best):
                return "unbounded"

            x[basis] = xb - t_best * step_basic
            x[j] = x[j] + direction * t_best
            degenerate_streak = degenerate_streak + 1 if t_best <= 1e-10 else 0

            if leave_pos < 0:
                continue  # bound flip, basis unchanged
            leaving = basis[leave_pos]
            pivot = w[leave_pos]
            if abs(pivot) < _PIVOT_TOL:
                B_inv = _refactorize(E, basis)
                w = B_inv[:, sf.col_rows[lo_col:hi_col]] @ sf.col_vals[lo_col:hi_col]
                pivot = w[leave_pos]
                if abs(pivot) < _PIVOT_TOL:
                    raise NumericalFailure("pivot element vanished after refactorization")
            # snap the leaving variable onto the bound it reached
            x[leaving] = lo[leaving] if step_basic[leave_pos] > 0 else hi[leaving]
            in_basis[leaving] = False
            in_basis[j] = True
            basis[leave_pos] = j
            row = B_inv[leave_pos] / pivot
            B_inv -= np.outer(w, row)
            B_inv[leave_pos] = row
            y = y + d[j] * row
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                B_inv = _refactorize(E, basis)
                _recompute_basics(E, b, x, basis, in_basis, B_inv)
                y = c[basis] @ B_inv
                since_refactor = 0
        raise NumericalFailure("simplex iteration limit exceeded")

    if need_phase1:
        status = run_phase(c_phase1, phase=1)
        if status != "optimal":
            raise NumericalFailure("phase 1 reported unbounded")
        B_inv = _refactorize(E, basis)
        _recompute_basics(E, b, x, basis, in_basis, B_inv)
        if float(np.abs(x[art0:]).sum()) > 1e-7 * max(1.0, float(np.max(np.abs(b))) if m else 1.0):
            return _LpResult(INFEASIBLE)
    # pin artificials to zero for phase 2 (basic ones stay, at value 0)
    lo[art0:] = 0.0
    hi[art0:] = 0.0
    x[art0:] = np.clip(x[art0:], 0.0, None)

    status = run_phase(c_phase2, phase=2)
    if status == "unbounded":
        return _LpResult(UNBOUNDED)
    B_inv = _refactorize(E, basis)
    _recompute_basics(E, b, x, basis, in_basis, B_inv)
    xs = x[: sf.n].copy()
    np.clip(xs, lo[: sf.n], hi[: sf.n], out=xs)
    return _LpResult(OPTIMAL, float(sf.c[: sf.n] @ xs), xs)


def _refactorize(E: np.ndarray, basis: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(E[:, basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular basis: {exc}") from None


def _recompute_basics(E, b, x, basis, in_basis, B_inv) -> None:
    x_nb = x.copy()
    x_nb[basis] = 0.0
    x[basis] = B_inv @ (b - E @ x_nb)


# ---------------------------------------------------------------------------
# Bound-tightening presolve (the only presolve the kernel performs)
# ---------------------------------------------------------------------------

def _tighten_bounds(model: MilpModel, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Iterated activity-based bound tightening. Returns False on proven
    infeasibility. Bounds of discrete variables are rounded inward."""
    rows = []
    for con in model.constraints:
        idx = np.fromiter((i for i, _ in con.coeffs), dtype=np.int64, count=len(con.coeffs))
        coef = np.fromiter((c for _, c in con.coeffs), dtype=np.float64, count=len(con.coeffs))
        rows.append((idx, coef, con.sense, con.rhs))
    discrete = np.array([ref.kind in (BINARY, INTEGER) for ref in model.variables])

    for _ in range(8):
        changed = False
        for idx, coef, sense, rhs in rows:
            if idx.size == 0:
                continue
            l, h = lo[idx], hi[idx]
            term_min = np.where(coef > 0, coef * l, coef * h)
            term_max = np.where(coef > 0, coef * h, coef * l)
            min_act, max_act = term_min.sum(), term_max.sum()
            if sense in (LE, EQ) and np.isfinite(min_act):
                # a_j x_j <= rhs - (min activity of the rest)
                rest = rhs - (min_act - term_min)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ub = np.where(coef > 0, rest / coef, np.inf)
                    lb = np.where(coef < 0, rest / coef, -np.inf)
                changed |= _apply_bounds(idx, lb, ub, lo, hi, discrete)
            if sense in (GE, EQ) and np.isfinite(max_act):
                rest = rhs - (max_act - term_max)
                with np.errstate(divide="ignore", invalid="ignore"):
                    lb = np.where(coef > 0, rest / coef, -np.inf)
                    ub = np.where(coef < 0, rest / coef, np.inf)
                changed |= _apply_bounds(idx, lb, ub, lo, hi, discrete)
        if np.any(lo > hi + 1e-9):
            return False
        if not changed:
            break
    return True


def _apply_bounds(idx, lb, ub, lo, hi, discrete) -> bool:
    changed = False
    d = discrete[idx]
    ub = np.where(d & np.isfinite(ub), np.floor(ub + 1e-9), ub)
    lb = np.where(d & np.isfinite(lb), np.ceil(lb - 1e-9), lb)
    tighter_hi = ub < hi[idx] - 1e-12
    tighter_lo = lb > lo[idx] + 1e-12
    if tighter_hi.any():
        hi[idx[tighter_hi]] = ub[tighter_hi]
        changed = True
    if tighter_lo.any():
        lo[idx[tighter_lo]] = lb[tighter_lo]
        changed = True
    return changed


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------

def solve(model: MilpModel, gap_tol: float = GAP_TOL,
          max_nodes: int | None = None, time_limit: float | None = None) -> MilpSolution:
    """Solve the MILP exactly (status `optimal`) unless a node or time budget
    interrupts the search, in which case the best incumbent and proven gap
    are returned with status `gap_limit`."""
    sf = _StandardForm(model)
    lo0, hi0 = sf.base_lo[: sf.n].copy(), sf.base_hi[: sf.n].copy()
    if not _tighten_bounds(model, lo0, hi0):
        return MilpSolution(INFEASIBLE, None, None, np.inf)

    discrete = [ref.index for ref in model.variables if ref.kind in (BINARY, INTEGER)]
    deadline = None if time_limit is None else time.monotonic() + time_limit

    root = _solve_lp(sf, lo0, hi0)
    if root.status != OPTIMAL:
        return MilpSolution(root.status, None, None, np.inf, nodes=1)

    incumbent = None
    incumbent_obj = np.inf
    if discrete:
        for mode in ("nearest", "ceil"):
            guess = _rounding_incumbent(sf, lo0, hi0, discrete, root.x, mode)
            if guess is not None and guess[1] < incumbent_obj - 1e-12:
                incumbent, incumbent_obj = guess

    # stack entries: (lo, hi, parent LP bound); floor branch pushed last so it
    # is explored first (depth-first)
    stack = [(lo0, hi0, root.objective)]
    nodes = 0
    budget_hit = False
    while stack:
        if (max_nodes is not None and nodes >= max_nodes) or (
                deadline is not None and time.monotonic() > deadline):
            budget_hit = True
            break
        lo, hi, parent_bound = stack.pop()
        if parent_bound >= incumbent_obj - 1e-9:
            continue
        nodes += 1
        res = root if nodes == 1 else _solve_lp(sf, lo, hi)
        if res.status == UNBOUNDED:
            return MilpSolution(UNBOUNDED, None, None, np.inf, nodes=nodes)
        if res.status != OPTIMAL or res.objective >= incumbent_obj - 1e-9:
            continue
        frac = _first_fractional(res.x, discrete)
        if frac is None:
            incumbent, incumbent_obj = res.x, res.objective
            continue
        j, xj = frac
        lo_ceil, hi_floor = lo.copy(), hi.copy()
        hi_floor[j] = np.floor(xj)
        lo_ceil[j] = np.floor(xj) + 1.0
        stack.append((lo_ceil, hi, res.objective))
        stack.append((lo, hi_floor, res.objective))

    if incumbent is None:
        if budget_hit:
            return MilpSolution(GAP_LIMIT, None, None, np.inf, nodes=nodes)
        return MilpSolution(INFEASIBLE, None, None, np.inf, nodes=nodes)

    values = incumbent.copy()
    for j in discrete:
        values[j] = round(values[j])
    objective = float(sf.c[: sf.n] @ values) + model.objective_constant
    # relaxation bound sanity: the root LP can never exceed the integer optimum
    if root.objective > objective - model.objective_constant + 1e-6 * max(
            1.0, abs(objective)):
        raise NumericalFailure("LP relaxation bound exceeds the integer objective")
    if budget_hit:
        open_bounds = [entry[2] for entry in stack]
        bound = min(open_bounds) if open_bounds else incumbent_obj
        gap = max(0.0, objective - model.objective_constant - bound)
        status = GAP_LIMIT if gap > gap_tol else OPTIMAL
    else:
        gap, status = 0.0, OPTIMAL
    bad = check_solution(model, values)
    if bad:
        raise NumericalFailure("solution failed the independent feasibility check: " + bad[0])
    return MilpSolution(status, objective, values, gap, nodes=nodes)


def _first_fractional(x: np.ndarray, discrete: list[int]):
    for j in discrete:
        if abs(x[j] - round(x[j])) > FEAS_TOL:
            return j, x[j]
    return None


def _rounding_incumbent(sf, lo, hi, discrete, relaxed, mode="nearest"):
    """Fix each discrete variable to a rounding of its relaxation value and
    re-optimize the continuous rest; a cheap deterministic incumbent. The
    `ceil` probe buys capacity generously, which is often the feasible side."""
    lo_fix, hi_fix = lo.copy(), hi.copy()
    for j in discrete:
        value = round(relaxed[j]) if mode == "nearest" else np.ceil(relaxed[j] - FEAS_TOL)
        r = np.clip(value, lo[j], hi[j])
        lo_fix[j] = hi_fix[j] = r
    res = _solve_lp(sf, lo_fix, hi_fix)
    if res.status == OPTIMAL:
        return res.x, res.objective
    return None


# ---------------------------------------------------------------------------
# LP-format model dump (for cross-checks against external solvers)
# ---------------------------------------------------------------------------

def write_lp(model: MilpModel, path) -> None:
    def term(coef: float, name: str, first: bool) -> str:
        sign = "-" if coef < 0 else ("" if first else "+")
        return f"{sign} {abs(coef):.12g} {name} "

    names = [ref.name.replace(" ", "_") for ref in model.variables]
    out = [f"\\ {model.name}", "Minimize", " obj:"]
    line = "  "
    terms = sorted(model.objective.items())
    for pos, (idx, coef) in enumerate(terms):
        line += term(coef, names[idx], pos == 0)
        if len(line) > 200:
            out.append(line)
            line = "  "
    if model.objective_constant:
        line += term(model.objective_constant, "", not terms).rstrip() + " "
    out.append(line)
    out.append("Subject To")
    for i, con in enumerate(model.constraints):
        line = f" c{i}:" if not con.name else f" {con.name.replace(' ', '_')}:"
        for pos, (idx, coef) in enumerate(con.coeffs):
            line += " " + term(coef, names[idx], pos == 0).strip()
            if len(line) > 200:
                out.append(line)
                line = "  "
        op = {LE: "<=", GE: ">=", EQ: "="}[con.sense]
        out.append(f"{line} {op} {con.rhs:.12g}")
    out.append("Bounds")
    for ref in model.variables:
        lo = "-inf" if not np.isfinite(ref.lo) else f"{ref.lo:.12g}"
        hi = "+inf" if not np.isfinite(ref.hi) else f"{ref.hi:.12g}"
        out.append(f" {lo} <= {names[ref.index]} <= {hi}")
    binaries = [names[r.index] for r in model.variables if r.kind == BINARY]
    if binaries:
        out.append("Binary")
        out.extend(f" {n}" for n in binaries)
    generals = [names[r.index] for r in model.variables if r.kind == INTEGER]
    if generals:
        out.append("General")
        out.extend(f" {n}" for n in generals)
    out.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
