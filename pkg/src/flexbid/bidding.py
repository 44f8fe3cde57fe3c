"""Exclusive-group construction and award disaggregation.

Per-scenario dispatches are summed into aggregate MW block bids, priced
either truthfully (value of served load) or at the exchange's maximum
admissible bid price, and collected into an exclusive group.  The
ledger built alongside records every resource's schedule per scenario,
so disaggregating a cleared award is a lookup plus a convex
combination — no further optimization.

This module owns the kW-to-MW boundary: resources compute in kW,
everything market-facing is MW.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AlphaOutOfRange, EmptyInput, TooManyBids
from .thermal import DispatchResult

KW_PER_MW = 1000.0


@dataclass(frozen=True)
class BlockBid:
    """A full-horizon power profile (MW, positive = consumption) at one price (EUR)."""

    profile: np.ndarray
    price: float


@dataclass(frozen=True)
class ExclusiveGroup:
    """Block bids of which the auction may accept at most one in total."""

    bids: list[BlockBid]
    max_bids: int = 24

    def __post_init__(self):
        if not self.bids:
            raise EmptyInput("exclusive group needs at least one bid")
        if len(self.bids) > self.max_bids:
            raise TooManyBids(
                f"exclusive group holds {len(self.bids)} bids, cap is {self.max_bids}"
            )


@dataclass(frozen=True)
class PricingMode:
    """How block bids are priced: truthful valuation or the exchange cap."""

    kind: str  # "truthful" | "mabp"
    price_cap: float = 4000.0  # EUR/MWh, maximum admissible bid price
    voll: float = 10000.0  # EUR/MWh, value of served load (truthful)

    def __post_init__(self):
        if self.kind not in ("truthful", "mabp"):
            raise ValueError(f"unknown pricing mode {self.kind!r}")
        if self.price_cap <= 0:
            raise ValueError("price_cap must be positive")

    @classmethod
    def truthful(cls, voll: float = 10000.0) -> "PricingMode":
        return cls(kind="truthful", voll=voll)

    @classmethod
    def mabp(cls, price_cap: float = 4000.0) -> "PricingMode":
        return cls(kind="mabp", price_cap=price_cap)


@dataclass
class BidLedger:
    """Book-keeping that turns a cleared award back into resource schedules.

    per_scenario_kw[s][r] is resource r's schedule under scenario s;
    aggregate_mw[s] the summed profile actually bid; bid_scenarios maps
    each submitted (deduplicated) bid to the scenarios that produced it,
    ascending.
    """

    resource_ids: list[str]
    per_scenario_kw: list[dict[str, np.ndarray]]
    aggregate_mw: list[np.ndarray]
    scenario_price: list[float]
    bid_scenarios: list[list[int]] = field(default_factory=list)

    def bid_schedule_kw(self, bid_index: int) -> dict[str, np.ndarray]:
        """Per-resource schedules behind one submitted bid.

        Merged duplicate bids use the lowest contributing scenario; the
        aggregates are identical by construction even where individual
        schedules differ.
        """
        s = self.bid_scenarios[bid_index][0]
        return self.per_scenario_kw[s]


def build_exclusive_group(
    schedules: Sequence[Mapping[str, DispatchResult]],
    mode: PricingMode,
    max_bids: int = 24,
    dt: float = 1.0,
) -> tuple[ExclusiveGroup, BidLedger]:
    """Aggregate per-scenario dispatches into an exclusive group.

    schedules holds one mapping resource id -> DispatchResult per
    scenario; every scenario must cover the same resources.  Scenarios
    whose aggregate profiles coincide exactly are merged into a single
    bid, freeing bid slots at no cost.  Raises TooManyBids when the
    distinct profiles exceed max_bids and EmptyInput when there is
    nothing to aggregate.
    """
    if not schedules:
        raise EmptyInput("no scenario schedules supplied")
    resource_ids = sorted(schedules[0].keys())
    if not resource_ids:
        raise EmptyInput("scenarios contain no resources")
    for s, per_resource in enumerate(schedules):
        if sorted(per_resource.keys()) != resource_ids:
            raise EmptyInput(f"scenario {s} covers a different resource set")

    horizon = len(schedules[0][resource_ids[0]].schedule)
    energy_total_kwh = sum(schedules[0][r].energy for r in resource_ids)

    per_scenario_kw: list[dict[str, np.ndarray]] = []
    aggregate_mw: list[np.ndarray] = []
    prices: list[float] = []
    for per_resource in schedules:
        kw = {r: np.asarray(per_resource[r].schedule, dtype=float) for r in resource_ids}
        agg = np.zeros(horizon)
        for r in resource_ids:
            agg += kw[r]
        agg /= KW_PER_MW
        per_scenario_kw.append(kw)
        aggregate_mw.append(agg)
        if mode.kind == "truthful":
            prices.append(mode.voll * dt * float(agg.sum()))
        else:
            prices.append(mode.price_cap * energy_total_kwh / KW_PER_MW)

    # merge identical profiles; scenario order keeps the output deterministic
    bids: list[BlockBid] = []
    bid_scenarios: list[list[int]] = []
    seen: dict[bytes, int] = {}
    for s, agg in enumerate(aggregate_mw):
        key = np.ascontiguousarray(agg).tobytes()
        if key in seen:
            bid_scenarios[seen[key]].append(s)
        else:
            seen[key] = len(bids)
            bids.append(BlockBid(profile=agg, price=prices[s]))
            bid_scenarios.append([s])
    if len(bids) > max_bids:
        raise TooManyBids(
            f"{len(bids)} distinct profiles exceed the {max_bids}-bid cap; reduce S"
        )

    ledger = BidLedger(
        resource_ids=resource_ids,
        per_scenario_kw=per_scenario_kw,
        aggregate_mw=aggregate_mw,
        scenario_price=prices,
        bid_scenarios=bid_scenarios,
    )
    return ExclusiveGroup(bids=bids, max_bids=max_bids), ledger


def disaggregate(ledger: BidLedger, acceptance: np.ndarray) -> dict[str, np.ndarray]:
    """Per-resource kW schedules implementing an acceptance vector.

    Each resource receives the acceptance-weighted convex combination of
    its own scenario schedules, which stays feasible because each
    building's constraint set is convex.  All-zero acceptance yields
    all-zero schedules; the caller decides the fallback.
    """
    alpha = np.asarray(acceptance, dtype=float)
    if alpha.shape != (len(ledger.bid_scenarios),):
        raise AlphaOutOfRange(
            f"acceptance vector has length {alpha.shape}, "
            f"expected {len(ledger.bid_scenarios)}"
        )
    if alpha.min(initial=0.0) < -1e-9 or alpha.max(initial=0.0) > 1.0 + 1e-9:
        raise AlphaOutOfRange(f"acceptance rates outside [0, 1]: {alpha}")
    if alpha.sum() > 1.0 + 1e-9:
        raise AlphaOutOfRange(f"acceptance rates sum to {alpha.sum()} > 1")

    horizon = ledger.aggregate_mw[0].shape[0] if ledger.aggregate_mw else 0
    out = {r: np.zeros(horizon) for r in ledger.resource_ids}
    for j, a in enumerate(alpha):
        if a == 0.0:
            continue
        schedules = ledger.bid_schedule_kw(j)
        for r in ledger.resource_ids:
            out[r] += a * schedules[r]
    return out


def write_bids(
    path: str | Path,
    group: ExclusiveGroup,
    day: date,
    mode: PricingMode,
) -> None:
    """Serialize an exclusive group to the exchange-facing bids.json."""
    payload = {
        "day": day.isoformat(),
        "max_bids": group.max_bids,
        "pricing_mode": mode.kind,
        "bids": [
            {"profile_mw": [float(x) for x in bid.profile], "price_eur": bid.price}
            for bid in group.bids
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_bids(path: str | Path) -> tuple[ExclusiveGroup, dict]:
    """Load bids.json back into an ExclusiveGroup plus its header fields."""
    payload = json.loads(Path(path).read_text())
    bids = [
        BlockBid(profile=np.array(b["profile_mw"], dtype=float), price=float(b["price_eur"]))
        for b in payload["bids"]
    ]
    header = {k: payload[k] for k in ("day", "max_bids", "pricing_mode")}
    return ExclusiveGroup(bids=bids, max_bids=int(payload["max_bids"])), header
