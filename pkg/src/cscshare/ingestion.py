"""Meter data ingestion and scenario transformations.

Reads the meter CSV format, normalizes each meter class to the common
30-minute Wh grid, and applies the two scenario adjustments: the PV
emulation gain and the flat data-centre load. The two French meter
classes differ in what they report:

  linky    per-reading active energy in Wh (1 Wh resolution)
  sme_smi  cumulative energy index in kWh (1 kWh resolution) and
           10-minute average extracted power in kW (1 kW resolution)

Missing slots are reported as errors, never zero-filled: a silently
zero-filled consumption slot would change every allocation downstream.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from decimal import Decimal, ROUND_HALF_EVEN, localcontext
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from cscshare.model import (
    DateRange,
    Kind,
    KorVector,
    SlotSeries,
    SLOT_MINUTES,
    as_decimal,
    parse_timestamp,
)

CSV_HEADER = ["meter_id", "meter_class", "timestamp", "quantity_kind", "value"]


class MeterClass(str, Enum):
    LINKY = "linky"
    SME_SMI = "sme_smi"


class QuantityKind(str, Enum):
    ENERGY_WH = "energy_wh"
    ENERGY_KWH_INDEX = "energy_kwh_index"
    POWER_KW_10MIN = "power_kw_10min"


# Which quantity each meter class can report.
_CLASS_KINDS = {
    MeterClass.LINKY: {QuantityKind.ENERGY_WH},
    MeterClass.SME_SMI: {QuantityKind.ENERGY_KWH_INDEX, QuantityKind.POWER_KW_10MIN},
}


@dataclass(frozen=True)
class RawMeterRecord:
    """One reading as it came off the meter, before normalization."""

    meter_id: str
    meter_class: MeterClass
    timestamp: datetime
    quantity_kind: QuantityKind
    value: int | Decimal

    def __post_init__(self):
        if self.quantity_kind not in _CLASS_KINDS[self.meter_class]:
            raise ValueError(
                f"{self.meter_class.value} meters do not report {self.quantity_kind.value}"
            )
        if self.value < 0:
            raise ValueError("meter values are never negative in this model")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class IngestResult:
    records: list[RawMeterRecord] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def ingest_csv(source: str | Path | TextIO) -> IngestResult:
    """Parse a meter CSV.

    A malformed header is a hard error; a malformed row is collected into
    the error report with its line number and skipped.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _ingest_stream(fh)
    return _ingest_stream(source)


def ingest_csv_text(text: str) -> IngestResult:
    return _ingest_stream(io.StringIO(text))


def _ingest_stream(stream: TextIO) -> IngestResult:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty input: missing CSV header") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise ValueError(f"malformed header {header!r}, expected {','.join(CSV_HEADER)}")

    result = IngestResult()
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            result.records.append(_parse_row(row))
        except ValueError as exc:
            result.errors.append(RowError(line, str(exc)))
    return result


def _parse_row(row: Sequence[str]) -> RawMeterRecord:
    if len(row) != 5:
        raise ValueError(f"expected 5 fields, got {len(row)}")
    meter_id, klass, ts_text, kind_text, value_text = (cell.strip() for cell in row)
    if not meter_id:
        raise ValueError("empty meter_id")
    try:
        meter_class = MeterClass(klass)
    except ValueError:
        raise ValueError(f"unknown meter_class {klass!r}") from None
    try:
        kind = QuantityKind(kind_text)
    except ValueError:
        raise ValueError(f"unknown quantity_kind {kind_text!r}") from None
    ts = parse_timestamp(ts_text)

    value: int | Decimal
    if kind in (QuantityKind.ENERGY_WH, QuantityKind.ENERGY_KWH_INDEX):
        try:
            value = int(value_text)
        except ValueError:
            unit = "Wh" if kind is QuantityKind.ENERGY_WH else "kWh"
            raise ValueError(f"energy must be an integer {unit} count, got {value_text!r}") from None
        if value < 0:
            raise ValueError("negative energy")
    else:
        try:
            value = Decimal(value_text)
        except ArithmeticError:
            raise ValueError(f"bad power value {value_text!r}") from None
        if value < 0:
            raise ValueError("negative power")
    return RawMeterRecord(meter_id, meter_class, ts, kind, value)


def _slot_floor(ts: datetime) -> datetime:
    return ts.replace(minute=(ts.minute // SLOT_MINUTES) * SLOT_MINUTES, second=0, microsecond=0)


def _round_half_even(x: Fraction) -> int:
    q, r = divmod(x.numerator, x.denominator)
    half = Fraction(1, 2)
    frac = Fraction(r, x.denominator)
    if frac > half:
        return q + 1
    if frac < half:
        return q
    return q if q % 2 == 0 else q + 1


def normalize_to_slots(
    records: Iterable[RawMeterRecord], kind: Kind = Kind.CONSUMPTION
) -> SlotSeries:
    """Convert one meter's raw readings to a 30-minute Wh series.

    Linky Wh readings within a slot are summed. SME/SMI 10-minute powers
    need all three samples of a slot, at the 0/10/20-minute marks, and
    convert as mean kW x 0.5 h x 1000. SME/SMI kWh index readings must sit
    on consecutive slot boundaries; each index delta x 1000 becomes the
    energy of the slot it opens.

    A slot with fewer samples than its class expects is a gap error; a
    mix of meter ids, classes or quantity kinds is a hard error.
    """
    records = sorted(records, key=lambda r: r.timestamp)
    if not records:
        raise ValueError("no records to normalize")
    meter_ids = {r.meter_id for r in records}
    if len(meter_ids) > 1:
        raise ValueError(f"records mix meter ids: {sorted(meter_ids)}")
    classes = {r.meter_class for r in records}
    if len(classes) > 1:
        raise ValueError("records mix meter classes")
    kinds = {r.quantity_kind for r in records}
    if len(kinds) > 1:
        raise ValueError("records mix quantity kinds; normalize one basis at a time")
    meter_id = records[0].meter_id
    quantity = records[0].quantity_kind

    for prev, cur in zip(records, records[1:]):
        if cur.timestamp == prev.timestamp:
            raise ValueError(f"{meter_id}: duplicate reading at {cur.timestamp.isoformat()}")

    if quantity is QuantityKind.ENERGY_WH:
        slots = _slots_from_wh(meter_id, records)
    elif quantity is QuantityKind.POWER_KW_10MIN:
        slots = _slots_from_power(meter_id, records)
    else:
        slots = _slots_from_index(meter_id, records)
    return SlotSeries(meter_id=meter_id, kind=kind, slots=tuple(slots))


def _grid(first: datetime, last: datetime) -> list[datetime]:
    step = timedelta(minutes=SLOT_MINUTES)
    out = [first]
    while out[-1] < last:
        out.append(out[-1] + step)
    return out


def _slots_from_wh(meter_id, records) -> list[tuple[datetime, int]]:
    per_slot: dict[datetime, int] = {}
    for r in records:
        slot = _slot_floor(r.timestamp)
        per_slot[slot] = per_slot.get(slot, 0) + int(r.value)
    grid = _grid(min(per_slot), max(per_slot))
    for slot in grid:
        if slot not in per_slot:
            raise ValueError(f"{meter_id}: gap at {slot.isoformat()}")
    return [(slot, per_slot[slot]) for slot in grid]


def _slots_from_power(meter_id, records) -> list[tuple[datetime, int]]:
    per_slot: dict[datetime, list[Decimal]] = {}
    for r in records:
        ts = r.timestamp
        if ts.minute % 10 or ts.second or ts.microsecond:
            raise ValueError(
                f"{meter_id}: power sample at {ts.isoformat()} is not on a 10-minute boundary"
            )
        per_slot.setdefault(_slot_floor(ts), []).append(Decimal(r.value))
    grid = _grid(min(per_slot), max(per_slot))
    out = []
    for slot in grid:
        samples = per_slot.get(slot, [])
        if len(samples) < 3:
            raise ValueError(
                f"{meter_id}: gap at {slot.isoformat()} "
                f"({len(samples)}/3 ten-minute power samples)"
            )
        # mean kW x 0.5 h x 1000 Wh/kWh == sum_kW x 500 / 3
        energy = _round_half_even(Fraction(sum(samples)) * 500 / 3)
        out.append((slot, energy))
    return out


def _slots_from_index(meter_id, records) -> list[tuple[datetime, int]]:
    if len(records) < 2:
        raise ValueError(f"{meter_id}: index series needs at least two readings")
    step = timedelta(minutes=SLOT_MINUTES)
    for r in records:
        ts = r.timestamp
        if ts.minute % SLOT_MINUTES or ts.second or ts.microsecond:
            raise ValueError(
                f"{meter_id}: index reading at {ts.isoformat()} is not on a slot boundary"
            )
    out = []
    for prev, cur in zip(records, records[1:]):
        expected = prev.timestamp + step
        if cur.timestamp != expected:
            raise ValueError(f"{meter_id}: gap at {expected.isoformat()}")
        delta = int(cur.value) - int(prev.value)
        if delta < 0:
            raise ValueError(
                f"{meter_id}: index decreases at {cur.timestamp.isoformat()}"
            )
        out.append((prev.timestamp, delta * 1000))
    return out


def apply_pv_gain(series: SlotSeries, gain) -> SlotSeries:
    """Scale a production series by the PV emulation gain.

    Each slot energy is multiplied and rounded half-even to integer Wh,
    which keeps conservation drift unbiased over long series.
    """
    if series.kind is not Kind.PRODUCTION:
        raise ValueError("pv gain applies to production series only")
    gain = as_decimal(gain, "gain")
    if gain <= 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    with localcontext() as ctx:
        ctx.prec = 60  # keep the products exact before rounding
        values = [
            int((Decimal(e) * gain).to_integral_value(rounding=ROUND_HALF_EVEN))
            for e in series.values()
        ]
    return series.replace_values(values)


def add_constant_load(series: SlotSeries, power_kw) -> SlotSeries:
    """Add a flat load (e.g. a data centre) to a consumption series.

    power_kw x 0.5 h x 1000 extra Wh per 30-minute slot, rounded half-even
    when the power is not a multiple of 2 W.
    """
    if series.kind is not Kind.CONSUMPTION:
        raise ValueError("constant load applies to consumption series only")
    power_kw = as_decimal(power_kw, "power")
    if power_kw < 0:
        raise ValueError(f"power must be >= 0 kW, got {power_kw}")
    extra = int((power_kw * 500).to_integral_value(rounding=ROUND_HALF_EVEN))
    return series.replace_values([e + extra for e in series.values()])


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario transformations applied between ingestion and allocation."""

    pv_gain: Decimal = Decimal(1)
    datacentre_load_kw: Decimal = Decimal(0)
    include_datacentre: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pv_gain", as_decimal(self.pv_gain, "pv_gain"))
        object.__setattr__(
            self,
            "datacentre_load_kw",
            as_decimal(self.datacentre_load_kw, "datacentre_load_kw"),
        )
        if self.pv_gain <= 0:
            raise ValueError("pv_gain must be > 0")
        if self.datacentre_load_kw < 0:
            raise ValueError("datacentre_load_kw must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        """Load from a flat key=value file ('#' starts a comment)."""
        values: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"scenario config: bad line {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in ("pv_gain", "datacentre_load_kw", "include_datacentre"):
                raise ValueError(f"scenario config: unknown key {key!r}")
            values[key] = value.strip()
        kwargs = {}
        if "pv_gain" in values:
            kwargs["pv_gain"] = Decimal(values["pv_gain"])
        if "datacentre_load_kw" in values:
            kwargs["datacentre_load_kw"] = Decimal(values["datacentre_load_kw"])
        if "include_datacentre" in values:
            kwargs["include_datacentre"] = _parse_bool(values["include_datacentre"])
        return cls(**kwargs)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def derive_static_kors(
    history: Iterable[SlotSeries] | Mapping[str, SlotSeries],
    window: DateRange,
    decimals: int = 4,
) -> KorVector:
    """Derive static coefficients from consumption history over a window.

    Each participant's share of the total consumption is rounded to the
    given number of decimals and the vector is renormalized by largest
    remainder, so the coefficients sum to exactly 1 even when the rounded
    shares alone would not.
    """
    if isinstance(history, Mapping):
        series_list = list(history.values())
    else:
        series_list = list(history)
    totals: dict[str, int] = {}
    covered: dict[str, bool] = {}
    for s in series_list:
        totals[s.meter_id] = totals.get(s.meter_id, 0) + s.total_wh(window)
        has_data = any(window.contains(ts) for ts in s.slot_starts())
        covered[s.meter_id] = covered.get(s.meter_id, False) or has_data
    if not totals:
        raise ValueError("no history series given")
    for pid, has_data in sorted(covered.items()):
        if not has_data:
            raise ValueError(f"participant {pid} has no data in window {window}")
    grand = sum(totals.values())
    if grand == 0:
        raise ValueError(f"no consumption in window {window}")

    scale = 10**decimals
    ids = sorted(totals)
    base = {}
    rem = {}
    for pid in ids:
        exact = Fraction(totals[pid] * scale, grand)
        base[pid] = int(exact)  # floor, exact is non-negative
        rem[pid] = exact - base[pid]
    deficit = scale - sum(base.values())
    for pid in sorted(ids, key=lambda p: (-rem[p], p))[:deficit]:
        base[pid] += 1
    return KorVector({pid: base[pid] / scale for pid in ids})
