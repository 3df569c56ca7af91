"""Orchestration: load data and config, run policies, emit reports.

A run is all-or-nothing: every output is staged next to the target
directory and moved into place only after the whole computation
succeeded, so downstream figure scripts never see half-written files.
Identical inputs produce byte-identical output trees, audit chain
included.
"""

from __future__ import annotations

import csv
import json
import shutil
import tempfile
from dataclasses import dataclass, field
from datetime import timedelta
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Sequence

from cscshare.allocation import allocate_series, derive_priority_order
from cscshare.billing import (
    PolicyComparison,
    SavingsReport,
    ScrReport,
    compare_policies,
    compute_savings,
    compute_scr,
)
from cscshare.ingestion import ScenarioConfig, add_constant_load, apply_pv_gain, ingest_csv, normalize_to_slots
from cscshare.ledger import KOR_COUNTING_POINT, Ledger, write_ledger
from cscshare.model import (
    Community,
    CustomDynamicPolicy,
    DateRange,
    DefaultDynamicPolicy,
    Kind,
    KorVector,
    Participant,
    SlotAllocation,
    SlotSeries,
    StaticPolicy,
    TariffBook,
    as_decimal,
    validate_community,
)

POLICY_NAMES = ("static", "static33", "default-dynamic", "custom-dynamic")


@dataclass(frozen=True)
class RunConfig:
    meter_csvs: tuple[Path, ...]
    community_file: Path
    out_dir: Path
    policies: tuple[str, ...]
    scenario_file: Path | None = None
    kors: Mapping[str, float] | None = None
    priority_order: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.policies:
            raise ValueError("at least one policy must be selected")
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ValueError(f"unknown policies {unknown}; choose from {POLICY_NAMES}")
        if len(set(self.policies)) != len(self.policies):
            raise ValueError("duplicate policy selection")


@dataclass
class RunResult:
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    comparison: PolicyComparison | None = None


def load_run_config(
    path: str | Path,
    out_override: str | Path | None = None,
    policy_filter: Sequence[str] | None = None,
) -> RunConfig:
    """Read a run-config JSON file; relative paths resolve against it."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base = path.parent

    def _resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    meter_csvs = raw.get("meter_csvs")
    if not meter_csvs:
        raise ValueError("run config: meter_csvs is required")
    community = raw.get("community")
    if not community:
        raise ValueError("run config: community is required")

    policies = tuple(raw.get("policies", POLICY_NAMES))
    if policy_filter:
        missing = [p for p in policy_filter if p not in policies]
        if missing:
            raise ValueError(f"--policy {missing} not in configured policies {policies}")
        policies = tuple(p for p in policies if p in set(policy_filter))

    out_dir = out_override or raw.get("out_dir")
    if not out_dir:
        raise ValueError("run config: out_dir is required (or pass --out)")
    out_dir = Path(out_dir)
    if not out_dir.is_absolute() and out_override is None:
        out_dir = base / out_dir

    kors = raw.get("kors")
    if isinstance(kors, str):
        with open(_resolve(kors), "r", encoding="utf-8") as fh:
            kors = json.load(fh)
    if kors is not None:
        kors = {str(k): float(v) for k, v in kors.items()}

    priority_order = raw.get("priority_order")
    if priority_order is not None:
        priority_order = tuple(str(p) for p in priority_order)

    scenario = raw.get("scenario")
    return RunConfig(
        meter_csvs=tuple(_resolve(p) for p in meter_csvs),
        community_file=_resolve(community),
        out_dir=out_dir,
        policies=policies,
        scenario_file=_resolve(scenario) if scenario else None,
        kors=kors,
        priority_order=priority_order,
    )


def load_community(path: str | Path) -> tuple[Community, str | None]:
    """Load the community and tariff file.

    Returns the community plus the optional meter the data-centre load
    attaches to. Rates may be JSON numbers or strings; both parse exactly.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh, parse_float=Decimal)
    try:
        participants = tuple(
            Participant(
                id=str(entry["id"]),
                tariff_eur_per_kwh=as_decimal(entry["tariff_eur_per_kwh"], "tariff"),
                grid_uplift_pct=as_decimal(entry.get("grid_uplift_pct", 0), "grid uplift"),
                tax_uplift_pct=as_decimal(entry.get("tax_uplift_pct", 0), "tax uplift"),
                priority_rank=int(entry["priority_rank"]),
            )
            for entry in raw["participants"]
        )
        community = Community(
            participants=participants,
            production_meter=str(raw["production_meter"]),
            feed_in_eur_per_kwh=as_decimal(raw["feed_in_eur_per_kwh"], "feed-in rate"),
        )
    except KeyError as exc:
        raise ValueError(f"community file {path}: missing key {exc}") from None
    datacentre_meter = raw.get("datacentre_meter")
    return community, str(datacentre_meter) if datacentre_meter else None


def _ingest_meters(paths: Sequence[Path]) -> dict[str, list]:
    by_meter: dict[str, list] = {}
    findings: list[str] = []
    for path in paths:
        result = ingest_csv(path)
        findings.extend(f"{path.name}:{e}" for e in result.errors)
        for record in result.records:
            by_meter.setdefault(record.meter_id, []).append(record)
    if findings:
        raise ValueError("meter CSV errors:\n" + "\n".join(str(f) for f in findings))
    return by_meter


def _build_policies(
    config: RunConfig, community: Community, book: TariffBook
):
    ids = community.participant_ids()
    policies = []
    for name in config.policies:
        if name == "static":
            if config.kors is None:
                raise ValueError("static policy requires a 'kors' entry in the run config")
            policies.append(StaticPolicy(KorVector(config.kors), name="static"))
        elif name == "static33":
            policies.append(StaticPolicy(KorVector.equal(ids), name="static33"))
        elif name == "default-dynamic":
            policies.append(DefaultDynamicPolicy())
        else:
            order = config.priority_order or tuple(
                derive_priority_order(community.participants, book)
            )
            policies.append(CustomDynamicPolicy(order=order))
    return policies


def _build_ledger(
    production: SlotSeries,
    consumptions: Mapping[str, SlotSeries],
    allocations_by_policy: Mapping[str, Sequence[SlotAllocation]],
    static_coefficients: Mapping[str, Mapping[str, float]],
) -> Ledger:
    """Appends are ordered by slot, then meters, then policy name."""
    ledger = Ledger()
    cons_maps = {pid: s.as_map() for pid, s in consumptions.items()}
    policy_names = sorted(allocations_by_policy)
    by_policy_slot = {
        name: {a.slot_start: a for a in allocs}
        for name, allocs in allocations_by_policy.items()
    }
    for ts, produced in production.slots:
        ledger.append(
            {"kind": "production", "energy_wh": produced},
            counting_point_key=production.meter_id,
            timestamp=ts,
        )
        for pid in sorted(cons_maps):
            ledger.append(
                {"kind": "consumption", "energy_wh": cons_maps[pid][ts]},
                counting_point_key=pid,
                timestamp=ts,
            )
        for name in policy_names:
            allocation = by_policy_slot[name][ts]
            payload = {
                "policy": name,
                "self_consumed_wh": {
                    pid: allocation.self_consumed[pid]
                    for pid in sorted(allocation.self_consumed)
                },
                "surplus_wh": allocation.surplus_to_grid,
            }
            if name in static_coefficients:
                payload["coefficients"] = {
                    pid: str(c) for pid, c in sorted(static_coefficients[name].items())
                }
            ledger.append(payload, counting_point_key=KOR_COUNTING_POINT, timestamp=ts)
    return ledger


def _allocation_csv_rows(
    allocations: Sequence[SlotAllocation], participant_ids: Sequence[str]
) -> list[list]:
    header = ["slot_start", "production_wh"]
    header += [f"consumption_{pid}_wh" for pid in participant_ids]
    header += [f"self_consumed_{pid}_wh" for pid in participant_ids]
    header += ["surplus_wh"]
    rows = [header]
    for a in allocations:
        row = [a.slot_start.isoformat(), a.production]
        row += [a.consumption[pid] for pid in participant_ids]
        row += [a.self_consumed[pid] for pid in participant_ids]
        row += [a.surplus_to_grid]
        rows.append(row)
    return rows


def _write_csv(path: Path, rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def run(config: RunConfig) -> RunResult:
    """Execute one configured run; see the module docstring for semantics.

    Raises ValueError on validation problems and OSError on I/O failure;
    the CLI maps those to exit codes 1 and 2.
    """
    community, datacentre_meter = load_community(config.community_file)
    book = TariffBook.from_community(community)
    scenario = (
        ScenarioConfig.from_file(config.scenario_file)
        if config.scenario_file
        else ScenarioConfig()
    )

    by_meter = _ingest_meters(config.meter_csvs)
    ids = community.participant_ids()
    series: list[SlotSeries] = []
    production = None
    consumptions: dict[str, SlotSeries] = {}
    for meter_id, records in sorted(by_meter.items()):
        kind = Kind.PRODUCTION if meter_id == community.production_meter else Kind.CONSUMPTION
        normalized = normalize_to_slots(records, kind=kind)
        if meter_id == community.production_meter:
            production = normalized
        else:
            consumptions[meter_id] = normalized

    if production is not None:
        production = apply_pv_gain(production, scenario.pv_gain)
    if scenario.include_datacentre:
        if not datacentre_meter or datacentre_meter not in consumptions:
            raise ValueError(
                "scenario includes the data centre but the community file names "
                "no matching datacentre_meter"
            )
        consumptions[datacentre_meter] = add_constant_load(
            consumptions[datacentre_meter], scenario.datacentre_load_kw
        )

    series = ([production] if production is not None else []) + [
        consumptions[p] for p in sorted(consumptions)
    ]
    needs_kors = "static" in config.policies
    report = validate_community(
        community, series, kors=config.kors if needs_kors else None
    )
    if not report.ok:
        raise ValueError("validation failed:\n" + "\n".join(report.findings))
    assert production is not None  # validate_community reported it otherwise

    first = min(ts.date() for ts in production.slot_starts())
    last = max(ts.date() for ts in production.slot_starts())
    window = DateRange(first, last + timedelta(days=1))

    policies = _build_policies(config, community, book)
    consumption_list = [consumptions[pid] for pid in ids]

    allocations_by_policy: dict[str, list[SlotAllocation]] = {}
    reports: dict[str, tuple[ScrReport, SavingsReport]] = {}
    static_coefficients: dict[str, dict[str, float]] = {}
    for policy in policies:
        allocations = allocate_series(policy, production, consumption_list)
        allocations_by_policy[policy.name] = allocations
        reports[policy.name] = (
            compute_scr(allocations, window),
            compute_savings(allocations, community.participants, community, window),
        )
        if isinstance(policy, StaticPolicy):
            static_coefficients[policy.name] = dict(policy.kors.entries)

    comparison = compare_policies(reports)
    ledger = _build_ledger(
        production, consumptions, allocations_by_policy, static_coefficients
    )

    # Stage everything, then move into place.
    config.out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=config.out_dir.parent))
    try:
        emitted: list[str] = []
        ordered_ids = sorted(ids)
        for name in sorted(reports):
            scr_report, savings_report = reports[name]
            _write_json(
                staging / f"{name}_report.json",
                {
                    "policy": name,
                    "scr": scr_report.to_json_dict(),
                    "savings": savings_report.to_json_dict(),
                },
            )
            emitted.append(f"{name}_report.json")
            _write_csv(
                staging / f"{name}_allocations.csv",
                _allocation_csv_rows(allocations_by_policy[name], ordered_ids),
            )
            emitted.append(f"{name}_allocations.csv")
        _write_csv(staging / "comparison.csv", comparison.to_csv_rows())
        emitted.append("comparison.csv")
        _write_json(staging / "comparison.json", comparison.to_json_dict())
        emitted.append("comparison.json")
        write_ledger(ledger, staging / "audit.log")
        emitted.append("audit.log")

        config.out_dir.mkdir(parents=True, exist_ok=True)
        files = []
        for name in emitted:
            target = config.out_dir / name
            (staging / name).replace(target)
            files.append(target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    return RunResult(out_dir=config.out_dir, files=files, comparison=comparison)
