"""Market data model and the scenario document format.

Units throughout the package: power in MW, energy in MWh, prices and
utilities in EUR/MWh, ``delta_t`` in hours.

A scenario document is a JSON object with fields::

    {
      "storage": {"capacity": 2.5, "initial_energy": 0.0},
      "mode": "vlb",
      "discount_rate": 0.0,
      "initial_ledger": [{"price": 5.0, "quantity": 1.0, "birth_interval": 1}],
      "intervals": [
        {"delta_t": 1.0, "n_periods": 1,
         "loads": [{"id": "l1", "utility": [12.0], "max": [3.0]}],
         "generators": [{"id": "g1", "cost": [2.0], "max": [2.0]}],
         "end_level": 0.0,
         "penalty_price": 2.0}
      ]
    }

``parse_scenario`` and ``serialize_scenario`` round-trip exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace  # noqa: F401  (replace is part of the public convenience surface)

from .errors import ScenarioError

MODES = ("ideal", "split_end_level", "split_penalty", "vlb")

#: tolerance below which stored energy counts as zero (MWh)
MODEL_EPS = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time discretization of one market interval."""

    n_periods: int
    delta_t: float


@dataclass(frozen=True)
class LoadBid:
    """Price-taking load: per-period marginal utility and quantity cap."""

    id: str
    utility: tuple[float, ...]
    max_quantity: tuple[float, ...]


@dataclass(frozen=True)
class GeneratorBid:
    """Price-taking generator: per-period marginal cost and capacity."""

    id: str
    cost: tuple[float, ...]
    max_quantity: tuple[float, ...]


@dataclass(frozen=True)
class StorageSpec:
    """The single storage system: energy capacity and the initial content
    used by the ideal/split modes (vlb derives content from the ledger)."""

    capacity: float
    initial_energy: float


@dataclass(frozen=True)
class IntervalSpec:
    """One market interval: bids, target end level, optional penalty price."""

    grid: TimeGrid
    loads: tuple[LoadBid, ...]
    generators: tuple[GeneratorBid, ...]
    end_level: float
    penalty_price: float | None = None


@dataclass(frozen=True)
class ValueBucket:
    """A slice of stored energy remembered at the price it was bought."""

    price: float
    quantity: float
    birth_interval: int


@dataclass(frozen=True)
class ValueLedger:
    """Stored-energy value ledger, kept sorted by (price, birth_interval)."""

    buckets: tuple[ValueBucket, ...] = ()

    @property
    def total(self) -> float:
        return sum(b.quantity for b in self.buckets)

    @staticmethod
    def from_buckets(buckets) -> "ValueLedger":
        """Build a ledger: merge buckets equal in price and birth interval,
        drop empties, sort by (price, birth_interval)."""
        merged: dict[tuple[float, int], float] = {}
        for b in buckets:
            key = (float(b.price), int(b.birth_interval))
            merged[key] = merged.get(key, 0.0) + float(b.quantity)
        out = [ValueBucket(price=p, quantity=q, birth_interval=bi)
               for (p, bi), q in merged.items() if q > MODEL_EPS]
        out.sort(key=lambda b: (b.price, b.birth_interval))
        return ValueLedger(buckets=tuple(out))


@dataclass(frozen=True)
class Scenario:
    """A full multi-interval run description."""

    storage: StorageSpec
    intervals: tuple[IntervalSpec, ...]
    mode: str
    discount_rate: float = 0.0
    initial_ledger: ValueLedger = field(default_factory=ValueLedger)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}: missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {value!r}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ScenarioError(f"{path}: expected a string, got {value!r}")
    return value


def _array(value, path: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"{path}: expected an array, got {value!r}")
    return value


def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{path}: expected an object, got {value!r}")
    return value


def _numbers(value, path: str) -> tuple[float, ...]:
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(_array(value, path)))


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises :class:`ScenarioError` with a position for syntax errors, or with
    one diagnostic per violated invariant for semantic errors.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    root = _object(raw, "$")
    sto = _object(_need(root, "storage", "$"), "storage")
    storage = StorageSpec(
        capacity=_number(_need(sto, "capacity", "storage"), "storage.capacity"),
        initial_energy=_number(_need(sto, "initial_energy", "storage"),
                               "storage.initial_energy"),
    )
    mode = _string(_need(root, "mode", "$"), "mode")
    discount = _number(root.get("discount_rate", 0.0), "discount_rate")
    buckets = []
    for i, b in enumerate(_array(root.get("initial_ledger", []), "initial_ledger")):
        bp = f"initial_ledger[{i}]"
        bo = _object(b, bp)
        buckets.append(ValueBucket(
            price=_number(_need(bo, "price", bp), f"{bp}.price"),
            quantity=_number(_need(bo, "quantity", bp), f"{bp}.quantity"),
            birth_interval=_integer(_need(bo, "birth_interval", bp),
                                    f"{bp}.birth_interval"),
        ))
    intervals = []
    for i, item in enumerate(_array(_need(root, "intervals", "$"), "intervals")):
        path = f"intervals[{i}]"
        obj = _object(item, path)
        grid = TimeGrid(
            n_periods=_integer(_need(obj, "n_periods", path), f"{path}.n_periods"),
            delta_t=_number(_need(obj, "delta_t", path), f"{path}.delta_t"),
        )
        loads = []
        for j, ld in enumerate(_array(_need(obj, "loads", path), f"{path}.loads")):
            lp = f"{path}.loads[{j}]"
            lo = _object(ld, lp)
            loads.append(LoadBid(
                id=_string(_need(lo, "id", lp), f"{lp}.id"),
                utility=_numbers(_need(lo, "utility", lp), f"{lp}.utility"),
                max_quantity=_numbers(_need(lo, "max", lp), f"{lp}.max"),
            ))
        gens = []
        for j, gd in enumerate(_array(_need(obj, "generators", path),
                                      f"{path}.generators")):
            gp = f"{path}.generators[{j}]"
            go = _object(gd, gp)
            gens.append(GeneratorBid(
                id=_string(_need(go, "id", gp), f"{gp}.id"),
                cost=_numbers(_need(go, "cost", gp), f"{gp}.cost"),
                max_quantity=_numbers(_need(go, "max", gp), f"{gp}.max"),
            ))
        penalty = obj.get("penalty_price")
        intervals.append(IntervalSpec(
            grid=grid,
            loads=tuple(loads),
            generators=tuple(gens),
            end_level=_number(_need(obj, "end_level", path), f"{path}.end_level"),
            penalty_price=None if penalty is None
            else _number(penalty, f"{path}.penalty_price"),
        ))
    scenario = Scenario(
        storage=storage,
        intervals=tuple(intervals),
        mode=mode,
        discount_rate=discount,
        initial_ledger=ValueLedger.from_buckets(buckets),
    )
    diagnostics = validate_scenario(scenario)
    if diagnostics:
        raise ScenarioError(
            f"invalid scenario ({len(diagnostics)} problem(s)): "
            + "; ".join(diagnostics),
            diagnostics=diagnostics,
        )
    return scenario


def serialize_scenario(scenario: Scenario) -> str:
    """Render a scenario as a JSON document; inverse of ``parse_scenario``."""
    doc = {
        "storage": {
            "capacity": scenario.storage.capacity,
            "initial_energy": scenario.storage.initial_energy,
        },
        "mode": scenario.mode,
        "discount_rate": scenario.discount_rate,
        "initial_ledger": [
            {"price": b.price, "quantity": b.quantity,
             "birth_interval": b.birth_interval}
            for b in scenario.initial_ledger.buckets
        ],
        "intervals": [
            _interval_doc(iv) for iv in scenario.intervals
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _interval_doc(iv: IntervalSpec) -> dict:
    doc: dict = {
        "delta_t": iv.grid.delta_t,
        "n_periods": iv.grid.n_periods,
        "loads": [
            {"id": ld.id, "utility": list(ld.utility), "max": list(ld.max_quantity)}
            for ld in iv.loads
        ],
        "generators": [
            {"id": g.id, "cost": list(g.cost), "max": list(g.max_quantity)}
            for g in iv.generators
        ],
        "end_level": iv.end_level,
    }
    if iv.penalty_price is not None:
        doc["penalty_price"] = iv.penalty_price
    return doc


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _finite(x: float) -> bool:
    return math.isfinite(x)


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return one diagnostic per violated invariant (empty when valid)."""
    out: list[str] = []
    sto = scenario.storage
    if not _finite(sto.capacity) or sto.capacity < 0:
        out.append("storage.capacity: must be a finite nonnegative energy")
    if not _finite(sto.initial_energy) or sto.initial_energy < 0:
        out.append("storage.initial_energy: must be a finite nonnegative energy")
    elif _finite(sto.capacity) and sto.initial_energy > sto.capacity + MODEL_EPS:
        out.append("storage.initial_energy: exceeds storage.capacity")
    if scenario.mode not in MODES:
        out.append(f"mode: must be one of {', '.join(MODES)}")
    if not (_finite(scenario.discount_rate)
            and 0.0 <= scenario.discount_rate < 1.0):
        out.append("discount_rate: must lie in [0, 1)")
    for i, b in enumerate(scenario.initial_ledger.buckets):
        path = f"initial_ledger[{i}]"
        if not _finite(b.price) or b.price <= 0:
            out.append(f"{path}.price: must be a finite positive price")
        if not _finite(b.quantity) or b.quantity <= 0:
            out.append(f"{path}.quantity: must be a finite positive energy")
    total = scenario.initial_ledger.total
    if _finite(sto.capacity) and total > sto.capacity + MODEL_EPS:
        out.append("initial_ledger: total stored energy exceeds storage.capacity")
    if not scenario.intervals:
        out.append("intervals: at least one interval is required")
    ids_seen: set[str] = set()
    for i, iv in enumerate(scenario.intervals):
        path = f"intervals[{i}]"
        n = iv.grid.n_periods
        if n < 1:
            out.append(f"{path}.n_periods: must be at least 1")
        if not _finite(iv.grid.delta_t) or iv.grid.delta_t <= 0:
            out.append(f"{path}.delta_t: must be a positive duration")
        for j, ld in enumerate(iv.loads):
            out.extend(_check_bid(f"{path}.loads[{j}]", ld.id, ld.utility,
                                  ld.max_quantity, "utility", n))
        for j, g in enumerate(iv.generators):
            out.extend(_check_bid(f"{path}.generators[{j}]", g.id, g.cost,
                                  g.max_quantity, "cost", n))
        interval_ids = [b.id for b in iv.loads] + [b.id for b in iv.generators]
        for pid in interval_ids:
            if pid == "storage":
                out.append(f"{path}: participant id 'storage' is reserved")
        dup = {pid for pid in interval_ids if interval_ids.count(pid) > 1}
        for pid in sorted(dup):
            out.append(f"{path}: duplicate participant id {pid!r}")
        ids_seen.update(interval_ids)
        if not _finite(iv.end_level) or iv.end_level < 0:
            out.append(f"{path}.end_level: must be a finite nonnegative energy")
        elif _finite(sto.capacity) and iv.end_level > sto.capacity + MODEL_EPS:
            out.append(f"{path}.end_level: exceeds storage.capacity")
        if iv.penalty_price is not None and not _finite(iv.penalty_price):
            out.append(f"{path}.penalty_price: must be finite")
        if scenario.mode == "split_penalty" and iv.penalty_price is None:
            out.append(f"{path}.penalty_price: required in split_penalty mode")
    if scenario.mode == "ideal" and scenario.intervals:
        dts = {iv.grid.delta_t for iv in scenario.intervals}
        if len(dts) > 1:
            out.append("intervals: ideal mode requires a shared delta_t")
    return out


def _check_bid(path: str, pid: str, prices: tuple[float, ...],
               quantities: tuple[float, ...], price_field: str,
               n_periods: int) -> list[str]:
    out = []
    if not pid:
        out.append(f"{path}.id: must be nonempty")
    if len(prices) != n_periods:
        out.append(f"{path}.{price_field}: expected {n_periods} entries, "
                   f"got {len(prices)}")
    if len(quantities) != n_periods:
        out.append(f"{path}.max: expected {n_periods} entries, "
                   f"got {len(quantities)}")
    for k, v in enumerate(prices):
        if not _finite(v):
            out.append(f"{path}.{price_field}[{k}]: must be finite")
    for k, v in enumerate(quantities):
        if not _finite(v) or v < 0:
            out.append(f"{path}.max[{k}]: must be finite and nonnegative")
    return out
