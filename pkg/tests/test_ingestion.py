"""CSV ingestion, grid normalization and scenario transformations."""

import io
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from cscshare.ingestion import (
    MeterClass,
    QuantityKind,
    RawMeterRecord,
    ScenarioConfig,
    add_constant_load,
    apply_pv_gain,
    derive_static_kors,
    ingest_csv,
    normalize_to_slots,
)
from cscshare.model import DateRange, Kind, SlotSeries

from conftest import DAY, slot_ts

HEADER = "meter_id,meter_class,timestamp,quantity_kind,value\n"


def ten_min_ts(slot: int, sample: int):
    from datetime import timedelta

    return slot_ts(slot) + timedelta(minutes=10 * sample)


class TestIngestCsv:
    def test_direct_parse(self):
        result = ingest_csv(io.StringIO(
            HEADER + "pv01,linky,2022-05-04T10:00:00+02:00,energy_wh,1250\n"
        ))
        assert result.ok
        (record,) = result.records
        assert record.meter_id == "pv01"
        assert record.meter_class is MeterClass.LINKY
        assert record.quantity_kind is QuantityKind.ENERGY_WH
        assert record.value == 1250

    def test_negative_energy_collected_as_row_error(self):
        result = ingest_csv(io.StringIO(
            HEADER + "pv01,linky,2022-05-04T10:00:00+02:00,energy_wh,-5\n"
        ))
        assert not result.records
        (err,) = result.errors
        assert err.line == 2
        assert "negative energy" in err.message

    def test_empty_file_with_header(self):
        result = ingest_csv(io.StringIO(HEADER))
        assert result.ok and result.records == []

    def test_malformed_header_is_hard_error(self):
        with pytest.raises(ValueError, match="header"):
            ingest_csv(io.StringIO("meter,when,value\n"))

    def test_class_kind_mismatch_is_row_error(self):
        result = ingest_csv(io.StringIO(
            HEADER + "m1,linky,2022-05-04T10:00:00+02:00,power_kw_10min,6\n"
        ))
        assert not result.records
        assert "do not report" in result.errors[0].message

    def test_bad_rows_reported_with_line_numbers(self):
        result = ingest_csv(io.StringIO(
            HEADER
            + "m1,linky,2022-05-04T10:00:00+02:00,energy_wh,100\n"
            + "m1,linky,not-a-time,energy_wh,100\n"
            + "m1,linky,2022-05-04T11:00:00+02:00,energy_wh,abc\n"
        ))
        assert len(result.records) == 1
        assert [e.line for e in result.errors] == [3, 4]


class TestNormalize:
    def _power_records(self, kws_by_slot):
        records = []
        for slot, kws in kws_by_slot.items():
            for i, kw in enumerate(kws):
                records.append(RawMeterRecord(
                    "m1", MeterClass.SME_SMI, ten_min_ts(slot, i),
                    QuantityKind.POWER_KW_10MIN, Decimal(kw),
                ))
        return records

    def test_sme_power_six_kw_slot(self):
        series = normalize_to_slots(self._power_records({20: [6, 6, 6]}))
        assert series.values() == (3000,)  # 6 kW x 0.5 h

    def test_sme_power_zero(self):
        series = normalize_to_slots(self._power_records({20: [0, 0, 0]}))
        assert series.values() == (0,)

    def test_sme_power_fractional_mean_rounds(self):
        # (1+2+2)/3 kW x 500 = 833.33 Wh
        series = normalize_to_slots(self._power_records({20: [1, 2, 2]}))
        assert series.values() == (833,)

    def test_sme_power_missing_sample_is_gap(self):
        with pytest.raises(ValueError, match="gap at .*10:00.*2/3"):
            normalize_to_slots(self._power_records({20: [6, 6]}))

    def test_sme_power_off_boundary_sample_rejected(self):
        record = RawMeterRecord(
            "m1", MeterClass.SME_SMI,
            slot_ts(20).replace(minute=5),
            QuantityKind.POWER_KW_10MIN, Decimal(6),
        )
        with pytest.raises(ValueError, match="10-minute boundary"):
            normalize_to_slots([record])

    def test_linky_sum_within_slot(self):
        records = [
            RawMeterRecord("m1", MeterClass.LINKY, slot_ts(20).replace(minute=m),
                           QuantityKind.ENERGY_WH, v)
            for m, v in [(0, 100), (10, 200), (20, 300)]
        ]
        series = normalize_to_slots(records)
        assert series.values() == (600,)

    def test_linky_interior_gap_detected(self):
        records = [
            RawMeterRecord("m1", MeterClass.LINKY, slot_ts(k), QuantityKind.ENERGY_WH, 100)
            for k in (20, 22)
        ]
        with pytest.raises(ValueError, match="gap at .*10:30"):
            normalize_to_slots(records)

    def test_index_deltas_times_1000(self):
        records = [
            RawMeterRecord("m1", MeterClass.SME_SMI, slot_ts(k),
                           QuantityKind.ENERGY_KWH_INDEX, v)
            for k, v in [(20, 100), (21, 103), (22, 103)]
        ]
        series = normalize_to_slots(records)
        assert series.values() == (3000, 0)
        assert series.slot_starts() == (slot_ts(20), slot_ts(21))

    def test_index_regression_rejected(self):
        records = [
            RawMeterRecord("m1", MeterClass.SME_SMI, slot_ts(k),
                           QuantityKind.ENERGY_KWH_INDEX, v)
            for k, v in [(20, 100), (21, 99)]
        ]
        with pytest.raises(ValueError, match="decreases"):
            normalize_to_slots(records)

    def test_mixed_meter_classes_hard_error(self):
        records = [
            RawMeterRecord("m1", MeterClass.LINKY, slot_ts(20), QuantityKind.ENERGY_WH, 1),
            RawMeterRecord("m1", MeterClass.SME_SMI, slot_ts(21),
                           QuantityKind.ENERGY_KWH_INDEX, 1),
        ]
        with pytest.raises(ValueError, match="mix meter classes"):
            normalize_to_slots(records)

    def test_mixed_meter_ids_hard_error(self):
        records = [
            RawMeterRecord("m1", MeterClass.LINKY, slot_ts(20), QuantityKind.ENERGY_WH, 1),
            RawMeterRecord("m2", MeterClass.LINKY, slot_ts(21), QuantityKind.ENERGY_WH, 1),
        ]
        with pytest.raises(ValueError, match="mix meter ids"):
            normalize_to_slots(records)

    @given(values=st.lists(st.integers(0, 10**6), min_size=1, max_size=96))
    def test_linky_normalization_conserves_energy(self, values):
        from datetime import timedelta

        records = [
            RawMeterRecord("m1", MeterClass.LINKY, slot_ts(0) + timedelta(minutes=30 * k),
                           QuantityKind.ENERGY_WH, v)
            for k, v in enumerate(values)
        ]
        series = normalize_to_slots(records)
        assert sum(series.values()) == sum(values)


class TestPvGain:
    def _production(self, values):
        return SlotSeries("pv", Kind.PRODUCTION,
                          tuple((slot_ts(k), v) for k, v in enumerate(values)))

    def test_published_gain(self):
        series = apply_pv_gain(self._production([1000]), Decimal("25.48"))
        assert series.values() == (25480,)

    def test_gain_one_is_identity(self):
        src = self._production([0, 3, 17, 123456])
        assert apply_pv_gain(src, Decimal(1)).values() == src.values()

    def test_half_even_rounding(self):
        # 3 x 25.48 = 76.44 -> 76
        assert apply_pv_gain(self._production([3]), Decimal("25.48")).values() == (76,)
        # 250 x 0.006 = 1.5 -> 2 is half-up; half-even gives 2 as well (even)
        assert apply_pv_gain(self._production([250]), Decimal("0.006")).values() == (2,)
        # 250 x 0.01 = 2.5 -> 2 under half-even
        assert apply_pv_gain(self._production([250]), Decimal("0.01")).values() == (2,)

    def test_non_positive_gain_rejected(self):
        for gain in (Decimal(0), Decimal(-1)):
            with pytest.raises(ValueError, match="> 0"):
                apply_pv_gain(self._production([1]), gain)

    def test_consumption_series_rejected(self):
        series = SlotSeries("b1", Kind.CONSUMPTION, ((slot_ts(0), 1),))
        with pytest.raises(ValueError, match="production"):
            apply_pv_gain(series, Decimal(2))

    @given(
        values=st.lists(st.integers(0, 10**6), min_size=1, max_size=48),
        gain_a=st.decimals(min_value="0.01", max_value="100", places=2),
        gain_b=st.decimals(min_value="0.01", max_value="100", places=2),
    )
    def test_gain_monotonicity(self, values, gain_a, gain_b):
        if gain_a > gain_b:
            gain_a, gain_b = gain_b, gain_a
        src = self._production(values)
        low = apply_pv_gain(src, gain_a).values()
        high = apply_pv_gain(src, gain_b).values()
        assert all(a <= b for a, b in zip(low, high))


class TestConstantLoad:
    def _consumption(self, values):
        return SlotSeries("b4", Kind.CONSUMPTION,
                          tuple((slot_ts(k), v) for k, v in enumerate(values)))

    def test_hundred_kw_adds_50kwh_per_slot(self):
        series = add_constant_load(self._consumption([0, 2000]), Decimal(100))
        assert series.values() == (50000, 52000)

    def test_zero_is_identity(self):
        src = self._consumption([5, 10])
        assert add_constant_load(src, Decimal(0)).values() == src.values()

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            add_constant_load(self._consumption([1]), Decimal(-1))


class TestScenarioConfig:
    def test_from_file(self, tmp_path):
        path = tmp_path / "scenario.cfg"
        path.write_text(
            "# comment\npv_gain = 25.48\ndatacentre_load_kw = 100\ninclude_datacentre = true\n"
        )
        cfg = ScenarioConfig.from_file(path)
        assert cfg.pv_gain == Decimal("25.48")
        assert cfg.datacentre_load_kw == Decimal(100)
        assert cfg.include_datacentre is True

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "scenario.cfg"
        path.write_text("panels = 12\n")
        with pytest.raises(ValueError, match="unknown key"):
            ScenarioConfig.from_file(path)

    def test_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.pv_gain == 1 and not cfg.include_datacentre


class TestDeriveStaticKors:
    def _history(self, totals):
        out = []
        for pid, total in totals.items():
            out.append(SlotSeries(pid, Kind.CONSUMPTION, ((slot_ts(10), total),)))
        return out

    def test_first_scenario_proportions(self):
        history = self._history({"b1": 4245, "b2": 5039, "b4": 716})
        kors = derive_static_kors(history, DateRange.single_day(DAY))
        assert kors.entries == {"b1": 0.4245, "b2": 0.5039, "b4": 0.0716}

    def test_second_scenario_proportions(self):
        history = self._history({"b1": 944, "b2": 1120, "b4": 7936})
        kors = derive_static_kors(history, DateRange.single_day(DAY))
        assert kors.entries == {"b1": 0.0944, "b2": 0.112, "b4": 0.7936}

    def test_equal_totals_give_equal_split(self):
        kors = derive_static_kors(self._history({"a": 7, "b": 7, "c": 7}),
                                  DateRange.single_day(DAY))
        assert abs(sum(kors.entries.values()) - 1) < 1e-9
        assert all(abs(v - 1 / 3) <= 1e-4 for v in kors.entries.values())

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError, match="no consumption in window"):
            derive_static_kors(self._history({"a": 0, "b": 0}), DateRange.single_day(DAY))

    def test_participant_without_window_data_rejected(self):
        from datetime import date

        history = self._history({"a": 5})
        history.append(
            SlotSeries("b", Kind.CONSUMPTION, ((slot_ts(10, date(2021, 1, 1)), 5),))
        )
        with pytest.raises(ValueError, match="no data in window"):
            derive_static_kors(history, DateRange.single_day(DAY))

    @given(totals=st.lists(st.integers(0, 10**9), min_size=1, max_size=9))
    def test_output_always_sums_to_one(self, totals):
        if sum(totals) == 0:
            return
        history = self._history({f"p{i}": t for i, t in enumerate(totals)})
        kors = derive_static_kors(history, DateRange.single_day(DAY))
        assert abs(sum(kors.entries.values()) - 1) <= 1e-9
