"""Command-line surface: generate, allocate, bid, clear, simulate, report.

Commands operate on a workspace directory holding the instance CSVs and
a campaign.json with file paths and campaign settings.  Precedence for
every setting is CLI flag > campaign.json > built-in default.  Errors
exit nonzero; --json-errors switches the message to a JSON object on
stderr for machine consumption.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import json
import logging
import sys
from datetime import date, timedelta
from pathlib import Path

import click

from .bidding import read_bids, write_bids
from .clearing import clear
from .errors import FlexbidError, GridMismatch, SchemaError
from .grid import allocate_buildings
from .ingest import ingest, write_alloc
from .simulate import (
    CampaignConfig,
    CampaignReport,
    day_bids,
    day_inputs,
    efficiency_vs_bids,
    run_campaign,
    write_report_csv,
    write_schedules_csv,
)
from .synthetic import SyntheticSpec, generate_instance, generate_synthetic

log = logging.getLogger(__name__)

# history the scenario engine sees before the first delivery day
WARMUP_DAYS = 10

FILE_DEFAULTS = {
    "buildings": "buildings.csv",
    "weather": "weather.csv",
    "prices": "prices.csv",
    "profiles": "profiles.csv",
    "nodes": "nodes.csv",
    "edges": "edges.csv",
    "alloc": "alloc.json",
}
REQUIRED_FILES = ("buildings", "weather", "prices", "profiles")


def guarded(fn):
    """Turn domain errors into clean nonzero exits (JSON on request)."""

    @functools.wraps(fn)
    def inner(**kwargs):
        try:
            fn(**kwargs)
        except (FlexbidError, ValueError, OSError) as exc:
            if kwargs.get("json_errors"):
                click.echo(
                    json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                    err=True,
                )
            else:
                click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return inner


def _load_workspace(workdir: str, config_path: str | None) -> tuple[dict, Path]:
    """Return (campaign.json contents, directory paths are relative to)."""
    cfg_file = Path(config_path) if config_path else Path(workdir) / "campaign.json"
    if cfg_file.exists():
        return json.loads(cfg_file.read_text()), cfg_file.parent
    return {}, Path(workdir)


def _resolve_paths(raw: dict, base: Path) -> dict[str, Path | None]:
    names = dict(FILE_DEFAULTS)
    names.update(raw.get("paths", {}))
    paths = {key: base / rel for key, rel in names.items()}
    out: dict[str, Path | None] = {
        key: (p if p.exists() else None) for key, p in paths.items()
    }
    missing = [key for key in REQUIRED_FILES if out[key] is None]
    if missing:
        raise SchemaError(
            f"missing instance files under {base}: "
            + ", ".join(str(paths[key]) for key in missing)
        )
    return out


def _load_bundle(paths: dict[str, Path | None]):
    return ingest(
        paths["buildings"], paths["weather"], paths["prices"], paths["profiles"],
        nodes=paths["nodes"], edges=paths["edges"], alloc=paths["alloc"],
    )


def _campaign_config(raw: dict, **overrides) -> CampaignConfig:
    """Merge campaign.json settings with CLI overrides (None = not given)."""
    body = dict(raw.get("campaign", {}))
    for key, val in overrides.items():
        if val is not None:
            body[key] = val
    if "start" not in body:
        raise ValueError("no campaign start date; pass --start or provide campaign.json")
    body.setdefault("days", 1)
    return CampaignConfig.from_dict(body)


def _echo_summary(report: CampaignReport) -> None:
    eta_w = report.eta_weighted
    click.echo(
        f"{len(report.days)} days, {report.n_flexible} heat pumps: "
        f"inflexible {report.tc_inf_total:.2f} EUR, "
        f"cleared {report.tc_cleared_total:.2f} EUR, "
        f"optimal {report.tc_opt_total:.2f} EUR"
    )
    click.echo(
        f"savings {report.savings_eur:.2f} EUR "
        f"({report.savings_per_hp_eur:.2f} EUR per heat pump), "
        f"efficiency {'n/a' if eta_w is None else f'{eta_w:.4f}'}"
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose: bool):
    """Flexibility aggregation and block-bid simulation toolkit."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="directory for the generated instance")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--buildings", "n_buildings", type=int, default=30, show_default=True)
@click.option("--share", type=float, default=30.0, show_default=True,
              help="heat-pump share in percent")
@click.option("--days", "n_days", type=int, default=40, show_default=True,
              help="calendar days including forecast warm-up")
@click.option("--volatility", type=float, default=1.0, show_default=True,
              help="price-surprise scale; 0 gives flat-forecast days")
@click.option("--start", type=click.DateTime(["%Y-%m-%d"]), default="2025-01-01",
              show_default=True)
@click.option("--branching", type=int, default=3, show_default=True,
              help="feeder arms off the substation")
@click.option("--depth", type=int, default=3, show_default=True,
              help="nodes per feeder arm")
@click.option("--json-errors", is_flag=True)
@guarded
def generate(out_dir, seed, n_buildings, share, n_days, volatility, start,
             branching, depth, json_errors):
    """Write a synthetic instance plus a ready-to-run campaign.json."""
    spec = SyntheticSpec(
        n_buildings=n_buildings, hp_share_pct=share, start=start.date(),
        n_days=n_days, seed=seed, volatility=volatility,
        branching=branching, depth=depth,
    )
    out = Path(out_dir)
    files = generate_synthetic(spec, out)
    warm = min(WARMUP_DAYS, n_days - 1)
    campaign = CampaignConfig(
        start=spec.start + timedelta(days=warm), days=n_days - warm, seed=seed,
    )
    payload = {
        "paths": {key: p.name for key, p in files.items()},
        "campaign": campaign.to_dict(),
        "synthetic": spec.to_dict(),
    }
    cfg_path = out / "campaign.json"
    cfg_path.write_text(json.dumps(payload, indent=2) + "\n")
    for key in sorted(files):
        click.echo(f"wrote {files[key]}")
    click.echo(f"wrote {cfg_path}")


@main.command()
@click.argument("workdir", type=click.Path(file_okay=False, exists=True), default=".")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="where to write the assignment (default: alloc.json in the workspace)")
@click.option("--json-errors", is_flag=True)
@guarded
def allocate(workdir, config_path, out_path, json_errors):
    """Assign buildings to feeder nodes, distance-minimal and capacity-aware."""
    raw, base = _load_workspace(workdir, config_path)
    paths = _resolve_paths(raw, base)
    bundle = _load_bundle(paths)
    if bundle.network is None:
        raise GridMismatch("allocation needs nodes.csv and edges.csv")
    alloc = allocate_buildings(bundle.buildings, bundle.network)
    target = Path(out_path) if out_path else \
        base / raw.get("paths", {}).get("alloc", FILE_DEFAULTS["alloc"])
    write_alloc(target, alloc)
    click.echo(
        f"assigned {len(alloc)} buildings across "
        f"{len(set(alloc.values()))} nodes -> {target}"
    )


def _day_from(day_str: str | None, cfg: CampaignConfig) -> date:
    return date.fromisoformat(day_str) if day_str else cfg.start


@main.command("bid")
@click.argument("workdir", type=click.Path(file_okay=False, exists=True), default=".")
@click.option("--date", "day_str", default=None,
              help="delivery day YYYY-MM-DD (default: first campaign day)")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--scenarios", type=int, default=None, help="price scenarios per day")
@click.option("--max-bids", type=int, default=None)
@click.option("--mode", type=click.Choice(["unbundled", "integrated"]), default=None)
@click.option("--pricing", type=click.Choice(["truthful", "mabp"]), default=None)
@click.option("--facets", type=int, default=None)
@click.option("--forecaster", type=click.Choice(["column", "naive"]), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json-errors", is_flag=True)
@guarded
def bid_command(workdir, day_str, config_path, seed, scenarios, max_bids, mode,
                pricing, facets, forecaster, out_path, json_errors):
    """Build one day's exclusive group of block bids and write bids.json."""
    raw, base = _load_workspace(workdir, config_path)
    cfg = _campaign_config(
        raw, seed=seed, scenarios=scenarios, max_bids=max_bids, mode=mode,
        pricing=pricing, facets=facets, forecaster=forecaster,
    )
    bundle = _load_bundle(_resolve_paths(raw, base))
    day = _day_from(day_str, cfg)
    alloc = bundle.alloc
    if cfg.mode == "integrated" and alloc is None:
        if bundle.network is None:
            raise GridMismatch("integrated mode needs the network files")
        alloc = allocate_buildings(bundle.buildings, bundle.network)
    inputs = day_inputs(cfg, bundle, day, alloc=alloc)
    group, _ = day_bids(cfg, inputs)
    target = Path(out_path) if out_path else base / f"bids_{day.isoformat()}.json"
    write_bids(target, group, day, cfg.pricing_mode)
    click.echo(f"{len(group.bids)} bids for {day} -> {target}")


@main.command("clear")
@click.argument("workdir", type=click.Path(file_okay=False, exists=True), default=".")
@click.option("--date", "day_str", default=None,
              help="delivery day (default: taken from the bids file)")
@click.option("--bids", "bids_path", type=click.Path(dir_okay=False), default=None,
              help="bids.json to clear (default: bids_<date>.json in the workspace)")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json-errors", is_flag=True)
@guarded
def clear_command(workdir, day_str, bids_path, config_path, out_path, json_errors):
    """Clear a bids.json against the realized prices of its delivery day."""
    raw, base = _load_workspace(workdir, config_path)
    if bids_path is None:
        if day_str is None:
            raise ValueError("pass --date or --bids to locate the bids file")
        bids_path = base / f"bids_{day_str}.json"
    group, header = read_bids(bids_path)
    day = date.fromisoformat(day_str if day_str else header["day"])
    bundle = _load_bundle(_resolve_paths(raw, base))
    if day not in bundle.realized:
        raise GridMismatch(f"prices data does not cover {day}")
    outcome = clear(group, bundle.realized[day])
    payload = {"day": day.isoformat(), "accepted_index": outcome.accepted_index}
    payload.update(outcome.to_dict())
    target = Path(out_path) if out_path else base / f"outcome_{day.isoformat()}.json"
    target.write_text(json.dumps(payload, indent=2) + "\n")
    if outcome.accepted_index is None:
        click.echo(f"no bid accepted for {day} -> {target}")
    else:
        click.echo(
            f"accepted bid {outcome.accepted_index} of {len(group.bids)} "
            f"(payment {outcome.payment:.2f} EUR) -> {target}"
        )


@main.command("simulate")
@click.argument("workdir", type=click.Path(file_okay=False, exists=True), default=".")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--start", default=None, help="first delivery day YYYY-MM-DD")
@click.option("--days", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--scenarios", type=int, default=None)
@click.option("--max-bids", type=int, default=None)
@click.option("--mode", type=click.Choice(["unbundled", "integrated"]), default=None)
@click.option("--pricing", type=click.Choice(["truthful", "mabp"]), default=None)
@click.option("--facets", type=int, default=None)
@click.option("--forecaster", type=click.Choice(["column", "naive"]), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="output directory (default: the workspace)")
@click.option("--json-errors", is_flag=True)
@guarded
def simulate_command(workdir, config_path, start, days, seed, scenarios, max_bids,
                     mode, pricing, facets, forecaster, out_dir, json_errors):
    """Run the rolling campaign; write report.csv, schedules.csv, summary.json."""
    raw, base = _load_workspace(workdir, config_path)
    cfg = _campaign_config(
        raw, start=start, days=days, seed=seed, scenarios=scenarios,
        max_bids=max_bids, mode=mode, pricing=pricing, facets=facets,
        forecaster=forecaster,
    )
    bundle = _load_bundle(_resolve_paths(raw, base))
    report = run_campaign(cfg, bundle)
    out = Path(out_dir) if out_dir else base
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", report)
    write_schedules_csv(out / "schedules.csv", report)
    summary = {
        "mode": cfg.mode,
        "pricing": cfg.pricing,
        "days": len(report.days),
        "failed_days": len(report.failures),
        "n_flexible": report.n_flexible,
        "tc_inf_eur": report.tc_inf_total,
        "tc_cleared_eur": report.tc_cleared_total,
        "tc_opt_eur": report.tc_opt_total,
        "savings_eur": report.savings_eur,
        "savings_per_hp_eur": report.savings_per_hp_eur,
        "eta_weighted": report.eta_weighted,
        "eta_mean": report.eta_mean,
        "shed_kwh": report.shed_kwh_total,
        "runtime_dispatch_s": report.runtime_total("dispatch"),
        "runtime_clearing_s": report.runtime_total("clearing"),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _echo_summary(report)
    click.echo(f"wrote {out / 'report.csv'}, {out / 'schedules.csv'}, {out / 'summary.json'}")
    if report.failures:
        for day, msg in report.failures:
            click.echo(f"failed {day}: {msg}", err=True)
        sys.exit(1)


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


@main.command("report")
@click.argument("workdir", type=click.Path(file_okay=False, exists=True), default=".")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--days", type=int, default=None, help="campaign length for the sweeps")
@click.option("--scenarios", type=int, default=None)
@click.option("--mode", type=click.Choice(["unbundled", "integrated"]), default=None)
@click.option("--bids", "bids_csv", default="1,2,4,8,16,24", show_default=True,
              help="bid budgets to sweep")
@click.option("--shares", "shares_csv", default="15,30,45,60", show_default=True,
              help="heat-pump shares to sweep (synthetic workspaces only)")
@click.option("--volatilities", "vols_csv", default="0.5,1.0,1.5,2.0",
              show_default=True, help="price-volatility scales to sweep")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--json-errors", is_flag=True)
@guarded
def report_command(workdir, config_path, days, scenarios, mode, bids_csv,
                   shares_csv, vols_csv, out_dir, json_errors):
    """Emit the trend tables: efficiency and runtime vs bid budget and
    heat-pump share, and savings vs price volatility."""
    raw, base = _load_workspace(workdir, config_path)
    cfg = _campaign_config(raw, days=days, scenarios=scenarios, mode=mode)
    bundle = _load_bundle(_resolve_paths(raw, base))
    out = Path(out_dir) if out_dir else base
    out.mkdir(parents=True, exist_ok=True)
    written = []

    b_values = sorted({int(tok) for tok in bids_csv.split(",") if tok.strip()})
    usable = [b for b in b_values if b <= cfg.s_count]
    if usable != b_values:
        click.echo(
            f"note: dropping bid budgets beyond the {cfg.s_count}-scenario count",
            err=True,
        )
    rows = efficiency_vs_bids(cfg, bundle, b_values=usable)
    _write_rows(
        out / "efficiency-vs-bids.csv",
        ["max_bids", "eta", "tc_cleared_eur", "tc_inf_eur", "tc_opt_eur"],
        [[r["max_bids"], _fmt(r["eta"]), _fmt(r["tc_cleared_eur"]),
          _fmt(r["tc_inf_eur"]), _fmt(r["tc_opt_eur"])] for r in rows],
    )
    _write_rows(
        out / "runtime-vs-bids.csv",
        ["max_bids", "clearing_s"],
        [[r["max_bids"], _fmt(r["clearing_s"])] for r in rows],
    )
    written += ["efficiency-vs-bids.csv", "runtime-vs-bids.csv"]

    if "synthetic" in raw:
        base_spec = SyntheticSpec.from_dict(raw["synthetic"])

        share_rows, share_runtime = [], []
        for share in [float(tok) for tok in shares_csv.split(",") if tok.strip()]:
            spec = dataclasses.replace(base_spec, hp_share_pct=share)
            rep = run_campaign(cfg, generate_instance(spec))
            share_rows.append([
                _fmt(share), rep.n_flexible, _fmt(rep.eta_weighted),
                _fmt(rep.eta_mean), _fmt(rep.savings_eur),
                _fmt(rep.savings_per_hp_eur), _fmt(rep.shed_kwh_total),
            ])
            share_runtime.append([
                _fmt(share), rep.n_flexible,
                _fmt(rep.runtime_total("dispatch")), _fmt(rep.runtime_total("clearing")),
            ])
        _write_rows(
            out / "efficiency-vs-share.csv",
            ["share_pct", "n_hps", "eta_weighted", "eta_mean", "savings_eur",
             "savings_per_hp_eur", "shed_kwh"],
            share_rows,
        )
        _write_rows(
            out / "runtime-vs-share.csv",
            ["share_pct", "n_hps", "dispatch_s", "clearing_s"],
            share_runtime,
        )
        written += ["efficiency-vs-share.csv", "runtime-vs-share.csv"]

        vol_rows = []
        for vol in [float(tok) for tok in vols_csv.split(",") if tok.strip()]:
            spec = dataclasses.replace(base_spec, volatility=vol)
            rep = run_campaign(cfg, generate_instance(spec))
            for d in rep.days:
                vol_rows.append([
                    _fmt(vol), d.day.isoformat(), _fmt(d.price_std),
                    _fmt(d.tc_inf - d.tc_cleared),
                    _fmt((d.tc_inf - d.tc_cleared) / max(1, rep.n_flexible)),
                ])
        _write_rows(
            out / "savings-vs-volatility.csv",
            ["volatility", "date", "price_std_eur_mwh", "savings_eur",
             "savings_per_hp_eur"],
            vol_rows,
        )
        written.append("savings-vs-volatility.csv")
    else:
        click.echo(
            "note: no synthetic section in campaign.json; skipping the share "
            "and volatility sweeps", err=True,
        )

    for name in written:
        click.echo(f"wrote {out / name}")


if __name__ == "__main__":
    main()
