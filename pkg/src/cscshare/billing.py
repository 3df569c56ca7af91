"""Self-consumption rate and savings over a settlement window.

Money is exact all the way through: integer Wh sums convert to kWh by an
exact decimal shift and multiply finite decimal rates, so every figure in
a report is an exact product. Rounding half-even to cents happens only
when a report is rendered.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_EVEN, localcontext
from typing import Mapping, Sequence

from cscshare.model import Community, DateRange, Participant, SlotAllocation

CENT = Decimal("0.01")
_PCT_PLACES = Decimal("0.01")
_SCR_PLACES = Decimal("0.000001")


def eur_str(amount: Decimal) -> str:
    """Render an amount in EUR, rounded half-even to cents."""
    return str(amount.quantize(CENT, rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class ScrReport:
    """Self-consumption rate: community-consumed share of production."""

    self_consumed_total: int
    production_total: int
    window: DateRange | None = None

    def __post_init__(self):
        if not 0 <= self.self_consumed_total <= max(self.production_total, 0):
            raise ValueError("self-consumed total outside [0, production total]")
        if self.production_total < 0:
            raise ValueError("negative production total")

    @property
    def defined(self) -> bool:
        return self.production_total > 0

    @property
    def scr(self) -> float | None:
        """Fraction in [0, 1], or None when nothing was produced."""
        if not self.defined:
            return None
        return self.self_consumed_total / self.production_total

    def scr_decimal(self) -> Decimal | None:
        if not self.defined:
            return None
        with localcontext() as ctx:
            ctx.prec = 28
            return Decimal(self.self_consumed_total) / Decimal(self.production_total)

    def scr_text(self) -> str:
        if not self.defined:
            return "undefined"
        return str(self.scr_decimal().quantize(_SCR_PLACES, rounding=ROUND_HALF_EVEN))

    def to_json_dict(self) -> dict:
        return {
            "scr": self.scr_text(),
            "self_consumed_wh": self.self_consumed_total,
            "production_wh": self.production_total,
            "window": str(self.window) if self.window else None,
        }


@dataclass(frozen=True)
class SavingsReport:
    """Per-building, feed-in and total savings for a window, in EUR."""

    per_participant: Mapping[str, Decimal]
    feed_in: Decimal
    total: Decimal
    window: DateRange | None = None

    def __post_init__(self):
        object.__setattr__(self, "per_participant", dict(self.per_participant))
        if sum(self.per_participant.values(), Decimal(0)) + self.feed_in != self.total:
            raise ValueError("savings total does not equal parts plus feed-in")

    def to_json_dict(self) -> dict:
        return {
            "per_participant_eur": {
                pid: eur_str(v) for pid, v in sorted(self.per_participant.items())
            },
            "feed_in_eur": eur_str(self.feed_in),
            "total_eur": eur_str(self.total),
            "window": str(self.window) if self.window else None,
        }


def _in_window(
    allocations: Sequence[SlotAllocation], window: DateRange | None
) -> list[SlotAllocation]:
    if window is None:
        return list(allocations)
    out = []
    for a in allocations:
        if a.slot_start is None:
            raise ValueError("allocation without slot_start cannot be windowed")
        if window.contains(a.slot_start):
            out.append(a)
    return out


def compute_scr(
    allocations: Sequence[SlotAllocation], window: DateRange | None = None
) -> ScrReport:
    """Aggregate the self-consumption rate over a window.

    SCR is undefined (not 0 or 1) when the window holds no production.
    """
    selected = _in_window(allocations, window)
    return ScrReport(
        self_consumed_total=sum(a.total_self_consumed for a in selected),
        production_total=sum(a.production for a in selected),
        window=window,
    )


def compute_savings(
    allocations: Sequence[SlotAllocation],
    participants: Sequence[Participant],
    community: Community,
    window: DateRange | None = None,
) -> SavingsReport:
    """Value the allocations of a window against the tariff book.

    Each building's self-consumed kWh avoid its supply tariff plus its
    avoided grid-fee and tax percentages; the surplus earns the feed-in
    rate. Investment costs are out of scope.
    """
    by_id = {p.id: p for p in participants}
    selected = _in_window(allocations, window)

    wh_per_participant: dict[str, int] = {}
    surplus_wh = 0
    for a in selected:
        surplus_wh += a.surplus_to_grid
        for pid, wh in a.self_consumed.items():
            wh_per_participant[pid] = wh_per_participant.get(pid, 0) + wh

    with localcontext() as ctx:
        ctx.prec = 60  # plenty for exact Wh x rate products
        per_participant: dict[str, Decimal] = {}
        for pid, wh in sorted(wh_per_participant.items()):
            p = by_id.get(pid)
            if p is None:
                raise ValueError(f"unknown participant id {pid!r} in allocations")
            kwh = Decimal(wh) / 1000
            per_participant[pid] = kwh * p.effective_value_eur_per_kwh
        feed_in = (Decimal(surplus_wh) / 1000) * community.feed_in_eur_per_kwh
        total = sum(per_participant.values(), Decimal(0)) + feed_in
    return SavingsReport(
        per_participant=per_participant, feed_in=feed_in, total=total, window=window
    )


@dataclass(frozen=True)
class PolicyRow:
    policy: str
    scr: ScrReport
    savings: SavingsReport


@dataclass(frozen=True)
class PairwiseDiff:
    """Relative difference of a against base b, in percent: (a-b)/b x 100."""

    policy_a: str
    policy_b: str
    scr_rel_diff_pct: Decimal | None
    savings_rel_diff_pct: Decimal | None


@dataclass(frozen=True)
class PolicyComparison:
    rows: tuple[PolicyRow, ...]
    pairwise: tuple[PairwiseDiff, ...]
    window: DateRange | None

    def participant_columns(self) -> list[str]:
        ids: set[str] = set()
        for row in self.rows:
            ids.update(row.savings.per_participant)
        return sorted(ids)

    def to_csv_rows(self) -> list[list[str]]:
        ids = self.participant_columns()
        header = ["policy", "scr", "savings_total_eur"]
        header += [f"savings_{pid}_eur" for pid in ids]
        header += ["feed_in_eur"]
        out = [header]
        for row in self.rows:
            line = [row.policy, row.scr.scr_text(), eur_str(row.savings.total)]
            line += [
                eur_str(row.savings.per_participant.get(pid, Decimal(0))) for pid in ids
            ]
            line += [eur_str(row.savings.feed_in)]
            out.append(line)
        return out

    def to_json_dict(self) -> dict:
        return {
            "window": str(self.window) if self.window else None,
            "policies": {
                row.policy: {
                    "scr": row.scr.to_json_dict(),
                    "savings": row.savings.to_json_dict(),
                }
                for row in self.rows
            },
            "pairwise_rel_diff_pct": [
                {
                    "policy_a": d.policy_a,
                    "policy_b": d.policy_b,
                    "scr": _pct_text(d.scr_rel_diff_pct),
                    "savings": _pct_text(d.savings_rel_diff_pct),
                }
                for d in self.pairwise
            ],
        }


def _pct_text(value: Decimal | None) -> str | None:
    if value is None:
        return None
    return str(value.quantize(_PCT_PLACES, rounding=ROUND_HALF_EVEN))


def _rel_diff(a: Decimal | None, b: Decimal | None) -> Decimal | None:
    if a is None or b is None or b == 0:
        return None
    with localcontext() as ctx:
        ctx.prec = 28
        return (a - b) / b * 100


def compare_policies(
    reports: Mapping[str, tuple[ScrReport, SavingsReport]]
) -> PolicyComparison:
    """Build the cross-policy table with pairwise relative differences.

    All reports must cover the same window; comparing figures computed on
    different data would be meaningless, so that is a hard error.
    """
    if not reports:
        raise ValueError("nothing to compare")
    windows = {
        (scr.window, savings.window) for scr, savings in reports.values()
    }
    if len(windows) != 1:
        raise ValueError("mismatched windows across policy reports")
    (window_pair,) = windows
    if window_pair[0] != window_pair[1]:
        raise ValueError("scr and savings reports cover different windows")

    rows = tuple(
        PolicyRow(policy=name, scr=reports[name][0], savings=reports[name][1])
        for name in sorted(reports)
    )
    pairwise = []
    for a in rows:
        for b in rows:
            if a.policy == b.policy:
                continue
            pairwise.append(
                PairwiseDiff(
                    policy_a=a.policy,
                    policy_b=b.policy,
                    scr_rel_diff_pct=_rel_diff(a.scr.scr_decimal(), b.scr.scr_decimal()),
                    savings_rel_diff_pct=_rel_diff(a.savings.total, b.savings.total),
                )
            )
    return PolicyComparison(rows=rows, pairwise=tuple(pairwise), window=window_pair[0])
