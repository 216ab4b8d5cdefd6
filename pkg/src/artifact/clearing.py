"""Market clearing formulations.

Four clearings over the same bid structure: ``ideal`` (one LP across the
whole horizon), ``split_end_level`` (per interval, storage steered to a
target end level), ``split_penalty`` (per interval, the target replaced by a
price on leftover energy), and ``vlb`` (per interval, previously stored
energy offered back through virtual load bids priced from a value ledger).

Sign conventions: storage injection is charge-positive in MW; prices are
EUR/MWh (balance-row duals divided by delta_t). ``ClearingResult.objective``
is the raw LP objective including penalty/virtual-bid terms; dispatch-based
social welfare lives in :mod:`artifact.metrics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import lp as lpmod
from .errors import InfeasibleError, LpNumericalError, ScenarioError
from .model import IntervalSpec, StorageSpec, ValueLedger

_ZERO_SNAP = 1e-9


def _clean(v: float) -> float:
    return 0.0 if abs(v) < _ZERO_SNAP else float(v)


@dataclass(frozen=True)
class ClearingResult:
    """Dispatch, storage trajectory and prices from one clearing LP.

    Per-period collections are indexed 0..n_periods-1; dispatch is stored as
    one mapping per period from participant id to MW. Fields that do not
    apply to a mode are None. ``storage_injection`` is the net charge in MW
    (for vlb: intra charge minus total bucket discharge).
    """

    mode: str
    delta_t: float
    n_periods: int
    load_dispatch: tuple[dict[str, float], ...]
    gen_dispatch: tuple[dict[str, float], ...]
    storage_injection: tuple[float, ...]
    prices: tuple[float, ...]
    objective: float
    initial_content: float
    final_content: float
    price_ranges: tuple[tuple[float, float], ...] | None = None
    level: tuple[float, ...] | None = None
    intra_charge: tuple[float, ...] | None = None
    intra_level: tuple[float, ...] | None = None
    inter_discharge: tuple[tuple[float, ...], ...] | None = None
    inter_level: tuple[tuple[float, ...], ...] | None = None
    bucket_prices: tuple[float, ...] | None = None
    bucket_quantities: tuple[float, ...] | None = None
    bucket_births: tuple[int, ...] | None = None
    lp: lpmod.LinearProgram | None = field(default=None, repr=False, compare=False)
    lp_solution: lpmod.LpSolution | None = field(default=None, repr=False,
                                                 compare=False)

    def load(self, load_id: str) -> tuple[float, ...]:
        """Dispatch of one load across periods (0 where it has no bid)."""
        return tuple(d.get(load_id, 0.0) for d in self.load_dispatch)

    def gen(self, gen_id: str) -> tuple[float, ...]:
        """Dispatch of one generator across periods (0 where it has no bid)."""
        return tuple(d.get(gen_id, 0.0) for d in self.gen_dispatch)

    @property
    def total_inter_discharge(self) -> tuple[float, ...]:
        """Per-bucket discharged energy, MWh, summed over periods."""
        if self.inter_discharge is None:
            return ()
        return tuple(self.delta_t * sum(row) for row in self.inter_discharge)


def _add_bid_variables(prog: lpmod.LinearProgram, interval: IntervalSpec,
                       dt: float, offset: int) -> None:
    T = interval.grid.n_periods
    for ld in interval.loads:
        for t in range(T):
            prog.add_variable(f"d[{ld.id},{offset + t + 1}]", 0.0,
                              ld.max_quantity[t], objective=dt * ld.utility[t])
    for g in interval.generators:
        for t in range(T):
            prog.add_variable(f"p[{g.id},{offset + t + 1}]", 0.0,
                              g.max_quantity[t], objective=-dt * g.cost[t])


def _balance_coeffs(interval: IntervalSpec, t: int, offset: int) -> dict[str, float]:
    coeffs = {f"d[{ld.id},{offset + t + 1}]": 1.0 for ld in interval.loads}
    for g in interval.generators:
        coeffs[f"p[{g.id},{offset + t + 1}]"] = -1.0
    return coeffs


def _extract_dispatch(sol: lpmod.LpSolution, interval: IntervalSpec,
                      offset: int) -> tuple[list[dict[str, float]],
                                            list[dict[str, float]]]:
    T = interval.grid.n_periods
    loads = [{ld.id: _clean(sol.primal[f"d[{ld.id},{offset + t + 1}]"])
              for ld in interval.loads} for t in range(T)]
    gens = [{g.id: _clean(sol.primal[f"p[{g.id},{offset + t + 1}]"])
             for g in interval.generators} for t in range(T)]
    return loads, gens


def _prices_and_ranges(prog: lpmod.LinearProgram, sol: lpmod.LpSolution,
                       n_periods: int, dt: float, compute_ranges: bool):
    prices = tuple(_clean(sol.duals[f"balance[{t + 1}]"] / dt)
                   for t in range(n_periods))
    if not compute_ranges:
        return prices, None
    ranges = []
    for t in range(n_periods):
        lo, hi = lpmod.dual_range(prog, sol, f"balance[{t + 1}]")
        ranges.append((_clean(lo / dt), _clean(hi / dt)))
    return prices, tuple(ranges)


def _solve_or_raise(prog: lpmod.LinearProgram, requirement: str) -> lpmod.LpSolution:
    sol = lpmod.solve(prog)
    if sol.status == lpmod.INFEASIBLE:
        raise InfeasibleError(
            f"{prog.name}: no feasible dispatch satisfies the {requirement} "
            "requirement", stage=requirement)
    if sol.status == lpmod.UNBOUNDED:
        raise LpNumericalError(f"{prog.name}: unexpectedly unbounded")
    return sol


def clear_split(interval: IntervalSpec, storage: StorageSpec, e_init: float,
                compute_ranges: bool = True, name: str = "split") -> ClearingResult:
    """Clear one interval with the storage steered to its target end level."""
    T, dt = interval.grid.n_periods, interval.grid.delta_t
    prog = lpmod.LinearProgram(name=name, sense="max")
    _add_bid_variables(prog, interval, dt, 0)
    for t in range(T):
        prog.add_variable(f"pC[{t + 1}]", -math.inf, math.inf)
    for t in range(T):
        prog.add_variable(f"e[{t + 1}]", 0.0, storage.capacity)
    for t in range(T):
        coeffs = _balance_coeffs(interval, t, 0)
        coeffs[f"pC[{t + 1}]"] = 1.0
        prog.add_constraint(f"balance[{t + 1}]", coeffs, "==", 0.0)
    for t in range(T):
        coeffs = {f"e[{t + 1}]": 1.0, f"pC[{t + 1}]": -dt}
        if t:
            coeffs[f"e[{t}]"] = -1.0
        prog.add_constraint(f"level[{t + 1}]", coeffs, "==",
                            e_init if t == 0 else 0.0)
    prog.add_constraint("end_level", {f"e[{T}]": 1.0}, "==", interval.end_level)
    sol = _solve_or_raise(prog, "end_level")
    loads, gens = _extract_dispatch(sol, interval, 0)
    prices, ranges = _prices_and_ranges(prog, sol, T, dt, compute_ranges)
    level = tuple(_clean(sol.primal[f"e[{t + 1}]"]) for t in range(T))
    return ClearingResult(
        mode="split_end_level", delta_t=dt, n_periods=T,
        load_dispatch=tuple(loads), gen_dispatch=tuple(gens),
        storage_injection=tuple(_clean(sol.primal[f"pC[{t + 1}]"])
                                for t in range(T)),
        prices=prices, price_ranges=ranges, level=level,
        objective=sol.objective, initial_content=float(e_init),
        final_content=level[-1], lp=prog, lp_solution=sol)


def clear_split_penalty(interval: IntervalSpec, storage: StorageSpec,
                        e_init: float, compute_ranges: bool = True,
                        name: str = "split_penalty") -> ClearingResult:
    """Clear one interval with leftover stored energy priced at the
    interval's penalty price instead of a fixed end level."""
    if interval.penalty_price is None:
        raise ScenarioError("split_penalty clearing requires penalty_price")
    T, dt = interval.grid.n_periods, interval.grid.delta_t
    prog = lpmod.LinearProgram(name=name, sense="max")
    _add_bid_variables(prog, interval, dt, 0)
    for t in range(T):
        prog.add_variable(f"pC[{t + 1}]", -math.inf, math.inf)
    for t in range(T):
        # the final level carries the penalty term in the objective
        obj = -interval.penalty_price if t == T - 1 else 0.0
        prog.add_variable(f"e[{t + 1}]", 0.0, storage.capacity, objective=obj)
    for t in range(T):
        coeffs = _balance_coeffs(interval, t, 0)
        coeffs[f"pC[{t + 1}]"] = 1.0
        prog.add_constraint(f"balance[{t + 1}]", coeffs, "==", 0.0)
    for t in range(T):
        coeffs = {f"e[{t + 1}]": 1.0, f"pC[{t + 1}]": -dt}
        if t:
            coeffs[f"e[{t}]"] = -1.0
        prog.add_constraint(f"level[{t + 1}]", coeffs, "==",
                            e_init if t == 0 else 0.0)
    sol = _solve_or_raise(prog, "storage_level")
    loads, gens = _extract_dispatch(sol, interval, 0)
    prices, ranges = _prices_and_ranges(prog, sol, T, dt, compute_ranges)
    level = tuple(_clean(sol.primal[f"e[{t + 1}]"]) for t in range(T))
    return ClearingResult(
        mode="split_penalty", delta_t=dt, n_periods=T,
        load_dispatch=tuple(loads), gen_dispatch=tuple(gens),
        storage_injection=tuple(_clean(sol.primal[f"pC[{t + 1}]"])
                                for t in range(T)),
        prices=prices, price_ranges=ranges, level=level,
        objective=sol.objective, initial_content=float(e_init),
        final_content=level[-1], lp=prog, lp_solution=sol)


def clear_ideal(storage: StorageSpec, intervals: tuple[IntervalSpec, ...],
                compute_ranges: bool = True,
                name: str = "ideal") -> ClearingResult:
    """Clear the whole horizon in one LP with perfect foresight. The end
    level binds only at the final period, using the last interval's target."""
    if not intervals:
        raise ScenarioError("clear_ideal requires at least one interval")
    dts = {iv.grid.delta_t for iv in intervals}
    if len(dts) > 1:
        raise ScenarioError("clear_ideal requires a shared delta_t")
    dt = intervals[0].grid.delta_t
    total = sum(iv.grid.n_periods for iv in intervals)
    prog = lpmod.LinearProgram(name=name, sense="max")
    offset = 0
    for iv in intervals:
        _add_bid_variables(prog, iv, dt, offset)
        offset += iv.grid.n_periods
    for t in range(total):
        prog.add_variable(f"pC[{t + 1}]", -math.inf, math.inf)
    for t in range(total):
        prog.add_variable(f"e[{t + 1}]", 0.0, storage.capacity)
    offset = 0
    for iv in intervals:
        for t in range(iv.grid.n_periods):
            coeffs = _balance_coeffs(iv, t, offset)
            coeffs[f"pC[{offset + t + 1}]"] = 1.0
            prog.add_constraint(f"balance[{offset + t + 1}]", coeffs, "==", 0.0)
        offset += iv.grid.n_periods
    for t in range(total):
        coeffs = {f"e[{t + 1}]": 1.0, f"pC[{t + 1}]": -dt}
        if t:
            coeffs[f"e[{t}]"] = -1.0
        prog.add_constraint(f"level[{t + 1}]", coeffs, "==",
                            storage.initial_energy if t == 0 else 0.0)
    prog.add_constraint("end_level", {f"e[{total}]": 1.0}, "==",
                        intervals[-1].end_level)
    sol = _solve_or_raise(prog, "end_level")
    loads: list[dict[str, float]] = []
    gens: list[dict[str, float]] = []
    offset = 0
    for iv in intervals:
        ld, gd = _extract_dispatch(sol, iv, offset)
        loads.extend(ld)
        gens.extend(gd)
        offset += iv.grid.n_periods
    prices, ranges = _prices_and_ranges(prog, sol, total, dt, compute_ranges)
    level = tuple(_clean(sol.primal[f"e[{t + 1}]"]) for t in range(total))
    return ClearingResult(
        mode="ideal", delta_t=dt, n_periods=total,
        load_dispatch=tuple(loads), gen_dispatch=tuple(gens),
        storage_injection=tuple(_clean(sol.primal[f"pC[{t + 1}]"])
                                for t in range(total)),
        prices=prices, price_ranges=ranges, level=level,
        objective=sol.objective, initial_content=storage.initial_energy,
        final_content=level[-1], lp=prog, lp_solution=sol)


def dispatch_welfare(result: ClearingResult, interval: IntervalSpec,
                     t_offset: int = 0) -> float:
    """Utility minus cost of the dispatched quantities over the interval's
    periods, times delta_t."""
    dt = result.delta_t
    total = 0.0
    for t in range(interval.grid.n_periods):
        row_l = result.load_dispatch[t_offset + t]
        row_g = result.gen_dispatch[t_offset + t]
        for ld in interval.loads:
            total += dt * ld.utility[t] * row_l.get(ld.id, 0.0)
        for g in interval.generators:
            total -= dt * g.cost[t] * row_g.get(g.id, 0.0)
    return total


def slice_ideal(result: ClearingResult,
                intervals: tuple[IntervalSpec, ...]) -> list[ClearingResult]:
    """Cut a whole-horizon ideal result into per-interval views aligned with
    ``intervals``; each slice's objective is its own dispatch welfare."""
    slices = []
    offset = 0
    prev_content = result.initial_content
    for iv in intervals:
        T = iv.grid.n_periods
        sl = slice(offset, offset + T)
        level = result.level[sl]
        piece = ClearingResult(
            mode="ideal", delta_t=result.delta_t, n_periods=T,
            load_dispatch=result.load_dispatch[sl],
            gen_dispatch=result.gen_dispatch[sl],
            storage_injection=result.storage_injection[sl],
            prices=result.prices[sl],
            price_ranges=None if result.price_ranges is None
            else result.price_ranges[sl],
            level=level,
            objective=dispatch_welfare(result, iv, offset),
            initial_content=prev_content,
            final_content=level[-1])
        slices.append(piece)
        prev_content = level[-1]
        offset += T
    return slices


def clear_vlb(interval: IntervalSpec, storage: StorageSpec,
              ledger: ValueLedger, compute_ranges: bool = True,
              name: str = "vlb") -> ClearingResult:
    """Clear one interval with stored energy offered back through virtual
    load bids priced by the ledger. The returned solution is post-processed
    so no period both charges fresh energy and discharges a bucket."""
    T, dt = interval.grid.n_periods, interval.grid.delta_t
    buckets = ledger.buckets
    V = len(buckets)
    prog = lpmod.LinearProgram(name=name, sense="max")
    _add_bid_variables(prog, interval, dt, 0)
    for t in range(T):
        prog.add_variable(f"pCa[{t + 1}]", -math.inf, math.inf)
    for t in range(T):
        # intra level may dip negative mid-interval while buckets hold
        # energy; the final level must be nonnegative on its own
        lb = 0.0 if t == T - 1 else -math.inf
        prog.add_variable(f"ea[{t + 1}]", lb, math.inf)
    for v, bucket in enumerate(buckets):
        for t in range(T):
            prog.add_variable(f"pD[{v + 1},{t + 1}]", 0.0, math.inf,
                              objective=-dt * bucket.price)
    for v in range(V):
        for t in range(T):
            prog.add_variable(f"ee[{v + 1},{t + 1}]", 0.0, math.inf)
    for t in range(T):
        coeffs = _balance_coeffs(interval, t, 0)
        coeffs[f"pCa[{t + 1}]"] = 1.0
        for v in range(V):
            coeffs[f"pD[{v + 1},{t + 1}]"] = -1.0
        prog.add_constraint(f"balance[{t + 1}]", coeffs, "==", 0.0)
    for t in range(T):
        coeffs = {f"ea[{t + 1}]": 1.0, f"pCa[{t + 1}]": -dt}
        if t:
            coeffs[f"ea[{t}]"] = -1.0
        prog.add_constraint(f"intra[{t + 1}]", coeffs, "==", 0.0)
    for v, bucket in enumerate(buckets):
        for t in range(T):
            coeffs = {f"ee[{v + 1},{t + 1}]": 1.0, f"pD[{v + 1},{t + 1}]": dt}
            if t:
                coeffs[f"ee[{v + 1},{t}]"] = -1.0
            prog.add_constraint(f"inter[{v + 1},{t + 1}]", coeffs, "==",
                                bucket.quantity if t == 0 else 0.0)
    for t in range(T):
        coeffs = {f"ea[{t + 1}]": 1.0}
        for v in range(V):
            coeffs[f"ee[{v + 1},{t + 1}]"] = 1.0
        prog.add_constraint(f"capacity_lo[{t + 1}]", dict(coeffs), ">=", 0.0)
        prog.add_constraint(f"capacity_hi[{t + 1}]", dict(coeffs), "<=",
                            storage.capacity)
    end_coeffs = {f"ea[{T}]": 1.0}
    for v in range(V):
        end_coeffs[f"ee[{v + 1},{T}]"] = 1.0
    prog.add_constraint("end_level", end_coeffs, ">=", interval.end_level)
    sol = _solve_or_raise(prog, "end_level")
    loads, gens = _extract_dispatch(sol, interval, 0)
    prices, ranges = _prices_and_ranges(prog, sol, T, dt, compute_ranges)
    intra_charge = tuple(_clean(sol.primal[f"pCa[{t + 1}]"]) for t in range(T))
    intra_level = tuple(_clean(sol.primal[f"ea[{t + 1}]"]) for t in range(T))
    inter_discharge = tuple(
        tuple(_clean(sol.primal[f"pD[{v + 1},{t + 1}]"]) for t in range(T))
        for v in range(V))
    inter_level = tuple(
        tuple(_clean(sol.primal[f"ee[{v + 1},{t + 1}]"]) for t in range(T))
        for v in range(V))
    injection = tuple(
        _clean(intra_charge[t] - sum(row[t] for row in inter_discharge))
        for t in range(T))
    result = ClearingResult(
        mode="vlb", delta_t=dt, n_periods=T,
        load_dispatch=tuple(loads), gen_dispatch=tuple(gens),
        storage_injection=injection,
        prices=prices, price_ranges=ranges,
        intra_charge=intra_charge, intra_level=intra_level,
        inter_discharge=inter_discharge, inter_level=inter_level,
        bucket_prices=tuple(b.price for b in buckets),
        bucket_quantities=tuple(b.quantity for b in buckets),
        bucket_births=tuple(b.birth_interval for b in buckets),
        objective=sol.objective, initial_content=ledger.total,
        final_content=_clean(intra_level[-1]
                             + sum(row[-1] for row in inter_level)),
        lp=prog, lp_solution=sol)
    from .storage_ledger import remove_simultaneous  # cycle: ledger ops consume results
    return remove_simultaneous(result)


def replace_result(result: ClearingResult, **changes) -> ClearingResult:
    """dataclasses.replace with the non-compared LP fields preserved."""
    return replace(result, **changes)
