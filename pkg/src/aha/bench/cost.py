"""Total cost of ownership: compute dollars plus storage dollars.

Desk-scale runs measure wall-clock seconds and bytes on this machine and
convert them with the published cloud rates; what the harness reports and
compares are cost RATIOS normalized to the raw-storage solution, never
absolute-dollar claims.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import SchemaError

COMPUTE_DOLLARS_PER_HOUR = 0.96
STORAGE_DOLLARS_PER_GB_MONTH = 0.15


@dataclass(frozen=True)
class CostRates:
    compute_dollars_per_hour: float = COMPUTE_DOLLARS_PER_HOUR
    storage_dollars_per_gb_month: float = STORAGE_DOLLARS_PER_GB_MONTH


def cost_model(
    compute_hours: float,
    storage_gb_months: float,
    rates: CostRates = CostRates(),
) -> float:
    """Linear and monotone in both arguments."""
    if compute_hours < 0 or storage_gb_months < 0:
        raise SchemaError("cost model takes non-negative usage")
    return (
        rates.compute_dollars_per_hour * compute_hours
        + rates.storage_dollars_per_gb_month * storage_gb_months
    )


@dataclass
class SolutionCost:
    """Measured usage and derived dollars for one solution."""

    kind: str
    compute_seconds: float
    stored_bytes: int
    storage_months: float = 1.0
    rates: CostRates = field(default_factory=CostRates)

    @property
    def compute_hours(self) -> float:
        return self.compute_seconds / 3600.0

    @property
    def storage_gb_months(self) -> float:
        return self.stored_bytes / 2**30 * self.storage_months

    @property
    def dollars(self) -> float:
        return cost_model(self.compute_hours, self.storage_gb_months, self.rates)


def normalize_costs(costs: Mapping[str, SolutionCost]) -> dict[str, float]:
    """Each solution's dollars divided by the raw-storage solution's.

    store_raw is the reference, so its normalized cost is exactly 1.0.
    """
    if "store_raw" not in costs:
        raise SchemaError("normalization needs a store_raw reference cost")
    reference = costs["store_raw"].dollars
    if reference <= 0:
        raise SchemaError("store_raw reference cost must be positive")
    return {kind: cost.dollars / reference for kind, cost in costs.items()}
