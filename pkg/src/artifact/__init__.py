"""Market clearing engine for single-interval energy markets with one
non-merchant storage system.

Submodules: ``model`` (scenario types and documents), ``lp`` (bounded
simplex and dual ranges), ``clearing`` (the four clearing formulations),
``storage_ledger`` (inter-storage value accounting), ``runner`` (scenario
sequencing), ``metrics`` (surpluses, cycles, audits), ``cli`` (command
line and report emitters). The names below are the stable public surface.
"""

from __future__ import annotations

from .clearing import (
    ClearingResult,
    clear_ideal,
    clear_split,
    clear_split_penalty,
    clear_vlb,
    dispatch_welfare,
    slice_ideal,
)
from .errors import (
    EngineError,
    InfeasibleError,
    LpNumericalError,
    ScenarioError,
    SimultaneityError,
    ValuationError,
)
from .metrics import (
    CycleReport,
    SurplusLine,
    cost_recovery_audit,
    detect_cycles,
    participant_surpluses,
    social_welfare,
)
from .model import (
    MODES,
    GeneratorBid,
    IntervalSpec,
    LoadBid,
    Scenario,
    StorageSpec,
    TimeGrid,
    ValueBucket,
    ValueLedger,
    parse_scenario,
    serialize_scenario,
    validate_scenario,
)
from .runner import ScenarioRun, run_scenario
from .storage_ledger import (
    ValuationSplit,
    apply_discount,
    apply_net_discharge,
    assign_charge_values,
    remove_simultaneous,
    update_ledger,
)

__version__ = "0.1.0"

__all__ = [
    "ClearingResult",
    "CycleReport",
    "EngineError",
    "GeneratorBid",
    "InfeasibleError",
    "IntervalSpec",
    "LoadBid",
    "LpNumericalError",
    "MODES",
    "Scenario",
    "ScenarioError",
    "ScenarioRun",
    "SimultaneityError",
    "StorageSpec",
    "SurplusLine",
    "TimeGrid",
    "ValuationError",
    "ValuationSplit",
    "ValueBucket",
    "ValueLedger",
    "apply_discount",
    "apply_net_discharge",
    "assign_charge_values",
    "clear_ideal",
    "clear_split",
    "clear_split_penalty",
    "clear_vlb",
    "cost_recovery_audit",
    "detect_cycles",
    "dispatch_welfare",
    "parse_scenario",
    "participant_surpluses",
    "remove_simultaneous",
    "run_scenario",
    "serialize_scenario",
    "slice_ideal",
    "social_welfare",
    "update_ledger",
    "validate_scenario",
    "__version__",
]
