"""The three repartition policies, applied slot by slot.

Static splits production along fixed coefficients and loses whatever a
participant cannot absorb. Default dynamic follows the grid operator's
rule of splitting proportionally to consumption. Custom dynamic is a
priority waterfall serving the most valuable participant first. All
three conserve energy exactly in integer Wh.
"""

from __future__ import annotations

from datetime import datetime
from typing import Mapping, Sequence

from cscshare import kernels
from cscshare.model import (
    AllocationPolicy,
    CustomDynamicPolicy,
    DefaultDynamicPolicy,
    Kind,
    KorVector,
    Participant,
    SlotAllocation,
    SlotSeries,
    StaticPolicy,
    TariffBook,
)


def _canonical(consumption: Mapping[str, int]) -> tuple[list[str], list[int]]:
    ids = sorted(consumption)
    return ids, [consumption[i] for i in ids]


def allocate_static(
    production: int,
    consumption: Mapping[str, int],
    kors: KorVector,
    slot_start: datetime | None = None,
) -> SlotAllocation:
    """Split one slot along fixed coefficients, capped at consumption.

    Shares are rounded by largest remainder so they sum exactly to
    production before capping; the capped-off excess is not reallocated
    and ends up as surplus.
    """
    if kors.participant_ids() != set(consumption):
        raise ValueError("repartition vector does not cover the consumption keys")
    ids, values = _canonical(consumption)
    shares, surplus = kernels.static_shares(
        production, [kors.coefficient(i) for i in ids], values
    )
    return SlotAllocation(
        production=production,
        consumption=consumption,
        self_consumed=dict(zip(ids, shares)),
        surplus_to_grid=surplus,
        slot_start=slot_start,
    )


def allocate_default_dynamic(
    production: int,
    consumption: Mapping[str, int],
    slot_start: datetime | None = None,
) -> SlotAllocation:
    """Split one slot proportionally to consumption (the DSO default).

    With zero total consumption there is nothing to allocate and the full
    production goes to the grid.
    """
    ids, values = _canonical(consumption)
    shares, surplus = kernels.proportional_shares(production, values)
    return SlotAllocation(
        production=production,
        consumption=consumption,
        self_consumed=dict(zip(ids, shares)),
        surplus_to_grid=surplus,
        slot_start=slot_start,
    )


def allocate_custom_dynamic(
    production: int,
    consumption: Mapping[str, int],
    order: Sequence[str],
    slot_start: datetime | None = None,
) -> SlotAllocation:
    """Serve participants in priority order, each up to its consumption."""
    order = list(order)
    if sorted(order) != sorted(consumption):
        raise ValueError("priority order is not a permutation of the consumption keys")
    shares, surplus = kernels.waterfall_shares(production, [consumption[i] for i in order])
    return SlotAllocation(
        production=production,
        consumption=consumption,
        self_consumed=dict(zip(order, shares)),
        surplus_to_grid=surplus,
        slot_start=slot_start,
    )


def derive_priority_order(
    participants: Sequence[Participant], book: TariffBook
) -> list[str]:
    """Rank participants by the value of their self-consumed kWh.

    Highest effective rate (tariff plus avoided uplifts) first; ties break
    lexicographically on id so the order is reproducible.
    """
    return sorted(
        (p.id for p in participants),
        key=lambda pid: (-book.effective_value_eur_per_kwh(pid), pid),
    )


def allocate_series(
    policy: AllocationPolicy,
    production: SlotSeries,
    consumptions: Sequence[SlotSeries],
) -> list[SlotAllocation]:
    """Run one policy over a whole series, slot by slot.

    Every consumption series must cover exactly the production slot set;
    a missing or extra slot would silently shift energy between buildings,
    so the first mismatch is a hard error.
    """
    if production.kind is not Kind.PRODUCTION:
        raise ValueError(f"series {production.meter_id} is not a production series")
    prod_slots = production.slot_starts()
    maps: dict[str, dict[datetime, int]] = {}
    for s in consumptions:
        if s.kind is not Kind.CONSUMPTION:
            raise ValueError(f"series {s.meter_id} is not a consumption series")
        if s.meter_id in maps:
            raise ValueError(f"duplicate consumption series for {s.meter_id}")
        theirs = s.slot_starts()
        if theirs != prod_slots:
            mismatch = _first_mismatch(prod_slots, theirs)
            raise ValueError(
                f"slot set of {s.meter_id} does not match production: "
                f"first mismatch at {mismatch.isoformat()}"
            )
        maps[s.meter_id] = s.as_map()

    if isinstance(policy, StaticPolicy):
        per_slot = lambda p, c, ts: allocate_static(p, c, policy.kors, ts)
    elif isinstance(policy, DefaultDynamicPolicy):
        per_slot = allocate_default_dynamic
    elif isinstance(policy, CustomDynamicPolicy):
        per_slot = lambda p, c, ts: allocate_custom_dynamic(p, c, policy.order, ts)
    else:
        raise TypeError(f"unknown policy {policy!r}")

    out = []
    for ts, prod in production.slots:
        consumption = {mid: m[ts] for mid, m in maps.items()}
        out.append(per_slot(prod, consumption, ts))
    return out


def _first_mismatch(expected: Sequence[datetime], got: Sequence[datetime]) -> datetime:
    have = set(got)
    for ts in expected:
        if ts not in have:
            return ts
    want = set(expected)
    for ts in got:
        if ts not in want:
            return ts
    # same sets, different order; SlotSeries ordering makes this unreachable
    return expected[0]
