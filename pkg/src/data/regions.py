"""
Reference figures for the 14 participating DataCo regions

Order counts and leave-one-out sensitivities as published alongside the
federated demand-forecasting results. Reference values only: they depend on
preprocessing that is not reproduced here.
"""

from typing import Dict, NamedTuple, Optional


class RegionReference(NamedTuple):
    continent: str
    orders: int
    sensitivity: float


REGION_REFERENCE: Dict[str, RegionReference] = {
    "Central America": RegionReference("North America", 28341, 0.0185),
    "Western Europe": RegionReference("Europe", 27109, 0.0356),
    "South America": RegionReference("South America", 14935, 0.0227),
    "South Asia": RegionReference("Asia", 7731, 0.0526),
    "Oceania": RegionReference("Australia/Oceania", 10148, 0.0268),
    "Southeast Asia": RegionReference("Asia", 9539, 0.0651),
    "Eastern Asia": RegionReference("Asia", 7280, 0.0515),
    "West of USA": RegionReference("North America", 7993, 0.0163),
    "Southern Europe": RegionReference("Europe", 9431, 0.0607),
    "East of USA": RegionReference("North America", 6915, 0.0093),
    "South of USA": RegionReference("North America", 4045, 0.0204),
    "US Center": RegionReference("North America", 5887, 0.0195),
    "West Africa": RegionReference("Africa", 3696, 0.0138),
    "North Africa": RegionReference("Africa", 3232, 0.0184),
}


def reference_sensitivity(region: str) -> Optional[float]:
    """Published sensitivity of a region, or None for unknown regions"""
    entry = REGION_REFERENCE.get(region)
    return entry.sensitivity if entry else None
