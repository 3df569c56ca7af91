"""Shared fixtures and helpers."""

from __future__ import annotations

from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal

import pytest

from cscshare.model import Community, Participant

TZ = timezone(timedelta(hours=2))
DAY = date(2022, 5, 4)


def slot_ts(k: int, day: date = DAY) -> datetime:
    """Timestamp of day slot k (0..47)."""
    minutes = k * 30
    return datetime.combine(day, time(minutes // 60, minutes % 60), tzinfo=TZ)


def make_buildings() -> tuple[Participant, Participant, Participant]:
    """The demo community: host building, neighbour, business centre."""
    return (
        Participant(
            id="b1",
            tariff_eur_per_kwh=Decimal("0.13"),
            grid_uplift_pct=Decimal(28),
            tax_uplift_pct=Decimal(38),
            priority_rank=1,
        ),
        Participant(
            id="b2",
            tariff_eur_per_kwh=Decimal("0.13"),
            grid_uplift_pct=Decimal(0),
            tax_uplift_pct=Decimal(38),
            priority_rank=2,
        ),
        Participant(
            id="b4",
            tariff_eur_per_kwh=Decimal("0.11"),
            priority_rank=3,
        ),
    )


@pytest.fixture
def buildings():
    return make_buildings()


@pytest.fixture
def community(buildings):
    return Community(
        participants=buildings,
        production_meter="pv1",
        feed_in_eur_per_kwh=Decimal("0.06"),
    )
