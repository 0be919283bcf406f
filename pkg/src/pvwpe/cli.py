"""Command-line front end: ``pvwpe analyze | tune | synth | profile``.

Exit status is 0 on success, 2 when ``analyze`` flags at least one site
and 1 on any error. Outputs are staged in a scratch directory and moved
into ``--out`` only once every file has been written, so a failed run
leaves nothing behind.
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import shutil
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .detector import (
    analyze_region,
    localize_region,
    parse_rule,
    summarize_generation,
)
from .ingest import CleaningPolicy, CurtailmentPolicy, group_by_region, load_csv, prepare, write_long_csv
from .profiler import (
    WindowSpec,
    hyperparameter_sweep,
    profile_all,
    write_profiles_csv,
    write_sweep_csv,
)
from .report import build_report, write_histogram_csv
from .synth import (
    default_fleet_spec,
    faults_to_json,
    fleet_spec_from_dict,
    generate_fleet,
    generate_fleets,
    regional_fleet_specs,
)
from .wpe import ContractError, EmbeddingConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("pvwpe")

EXIT_OK, EXIT_ERROR, EXIT_ANOMALIES = 0, 1, 2

DEFAULTS = {
    "input": [],
    "format": "long",
    "sidecar": None,
    "interval_minutes": 5,
    "max_missing": 200,
    "curtailment_screen": True,
    "out": ".",
    "workers": min(4, os.cpu_count() or 1),
    "verbose": 0,
    "plots": False,
    "d": 6,
    "tau": 3,
    "window": "3 months",
    "stride": "1 day",
    "rule": "fixed_threshold(0.8)",
    "method": "pearson",
    "band": 2.0,
    "regions": [],
    "leave_one_out": False,
    "d_values": "3,4,5,6,7",
    "tau_values": "1,2,3",
    "spec": None,
    "preset": "default",
}

_UNITS = {
    "sample": None, "samples": None,
    "minute": 60, "minutes": 60, "min": 60,
    "hour": 3600, "hours": 3600, "h": 3600,
    "day": 86400, "days": 86400, "d": 86400,
    "week": 7 * 86400, "weeks": 7 * 86400,
    "month": 30 * 86400, "months": 30 * 86400,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2, which is reserved for "anomalies found"
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_duration(text, interval_seconds: int) -> int:
    """Window length in samples: ``"3 months"`` is 90 days of samples, a bare int is samples."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    m = re.fullmatch(r"\s*(\d+)\s*([A-Za-z]*)\s*", str(text))
    if not m or m.group(2).lower() not in _UNITS | {"": None}:
        raise ContractError(f"cannot read duration {text!r}")
    n, unit = int(m.group(1)), m.group(2).lower()
    seconds = _UNITS.get(unit)
    if seconds is None:
        return n
    total = n * seconds
    if total % interval_seconds:
        raise ContractError(f"duration {text!r} is not a whole number of samples")
    return total // interval_seconds


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ContractError(f"expected a comma-separated list of integers, got {text!r}") from None


def _str_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="pvwpe", description="WPE profiling and anomaly detection for PV fleets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--config", metavar="FILE", help="TOML file; flags override it")
    common.add_argument("--out", metavar="DIR", help="output directory (default: .)")
    common.add_argument("-v", "--verbose", action="count", help="more log output")

    data = _Parser(add_help=False, argument_default=S)
    data.add_argument("input", nargs="*", help="generation CSV file(s)")
    data.add_argument("--format", choices=("long", "wide"))
    data.add_argument("--sidecar", metavar="CSV", help="site_id,postcode file for wide input")
    data.add_argument("--interval-minutes", type=int)
    data.add_argument("--max-missing", type=int, help="exclude series with more gaps (default 200)")
    data.add_argument("--no-curtailment-screen", dest="curtailment_screen", action="store_false")
    data.add_argument("--workers", type=int)

    emb = _Parser(add_help=False, argument_default=S)
    emb.add_argument("--d", type=int, help="embedding dimension (default 6)")
    emb.add_argument("--tau", type=int, help="time delay in samples (default 3)")
    emb.add_argument("--window", help='window length, e.g. "3 months" or 25920 (samples)')
    emb.add_argument("--stride", help='window step, e.g. "1 day" (default)')

    p = sub.add_parser("analyze", parents=[common, data, emb], argument_default=S,
                       help="profile, detect and report")
    p.add_argument("--rule", help='"fixed_threshold(0.8)" (default) or "iqr_outlier"')
    p.add_argument("--method", choices=("pearson", "spearman"))
    p.add_argument("--band", type=float, help="localisation band in regional std devs")
    p.add_argument("--regions", help="comma-separated postcode ranges, e.g. 5000-5100,5540")
    p.add_argument("--leave-one-out", action="store_true")
    p.add_argument("--plots", action="store_true", help="also render PNG figures")

    sub.add_parser("profile", parents=[common, data, emb], argument_default=S,
                   help="write WPE profiles only")

    p = sub.add_parser("tune", parents=[common, data], argument_default=S,
                       help="whole-series WPE sweep over (d, tau)")
    p.add_argument("--d-values", help="default 3,4,5,6,7")
    p.add_argument("--tau-values", help="default 1,2,3")
    p.add_argument("--plots", action="store_true")

    p = sub.add_parser("synth", parents=[common], argument_default=S,
                       help="write a synthetic fleet and its fault list")
    p.add_argument("--spec", metavar="FILE", help="TOML fleet spec")
    p.add_argument("--preset", choices=("default", "regional"),
                   help="built-in fleet when no spec is given")
    return parser


def _read_config(path: str, command: str) -> dict:
    """Flat keys apply to every command; a ``[command]`` table overrides them."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    base = Path(path).resolve().parent
    out = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    out.update(doc.get(command, {}))
    unknown = sorted(set(out) - set(DEFAULTS))
    if unknown:
        raise ContractError(f"{path}: unknown keys {', '.join(unknown)}")
    # relative paths in a config file are relative to that file
    for key in ("sidecar", "spec", "out"):
        if isinstance(out.get(key), str):
            out[key] = str(base / out[key])
    if "input" in out:
        out["input"] = [str(base / p) for p in _str_list(out["input"])]
    return out


def resolve_options(argv: list[str] | None) -> argparse.Namespace:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    cfg = dict(DEFAULTS)
    if "config" in args:
        cfg.update(_read_config(args.pop("config"), command))
    if args.get("input") == []:
        args.pop("input")
    cfg.update(args)
    cfg["command"] = command
    return argparse.Namespace(**cfg)


# -- output staging ----------------------------------------------------------

class Outputs:
    """Collects writers and runs them into ``out`` all-or-nothing."""

    def __init__(self, out: str):
        self.out = Path(out)
        self._jobs: list[tuple[str, Callable[[Path], None]]] = []

    def add(self, name: str, writer: Callable[[Path], None]) -> None:
        self._jobs.append((name, writer))

    def commit(self) -> list[Path]:
        self.out.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=".pvwpe-", dir=self.out))
        try:
            for name, writer in self._jobs:
                writer(stage / name)
            done = []
            for name, _ in self._jobs:
                os.replace(stage / name, self.out / name)
                done.append(self.out / name)
            return done
        finally:
            shutil.rmtree(stage, ignore_errors=True)


def _safe_id(region_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", region_id)


# -- commands ----------------------------------------------------------------

def _load(opts):
    if not opts.input:
        raise ContractError("no input file given")
    for p in opts.input:
        if not Path(p).is_file():
            raise ContractError(f"input file {p} does not exist")
    if opts.sidecar is not None and not Path(opts.sidecar).is_file():
        raise ContractError(f"sidecar file {opts.sidecar} does not exist")
    interval = np.timedelta64(int(opts.interval_minutes) * 60, "s")
    series = []
    for p in opts.input:
        series.extend(load_csv(p, opts.format, interval=interval, sidecar=opts.sidecar))
    ids = [s.site_id for s in series]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ContractError(f"site ids appear in more than one input: {', '.join(dup)}")
    screen = CurtailmentPolicy() if opts.curtailment_screen else None
    result = prepare(series, CleaningPolicy(max_missing=int(opts.max_missing)), screen)
    for e in result.excluded:
        log.warning("excluded %s (%s): %s", e.site_id, e.reason, e.detail)
    if not result.series:
        raise ContractError("no series left after cleaning")
    log.info("loaded %d series, excluded %d", len(series), len(result.excluded))
    return result


def _embedding(opts):
    cfg = EmbeddingConfig(int(opts.d), int(opts.tau))
    secs = int(opts.interval_minutes) * 60
    win = WindowSpec(parse_duration(opts.window, secs), parse_duration(opts.stride, secs))
    if win.width < cfg.span:
        raise ContractError(f"window of {win.width} samples is shorter than one embedding vector")
    return cfg, win


def cmd_profile(opts) -> int:
    cfg, win = _embedding(opts)
    data = _load(opts)
    profiles = profile_all(data.series, cfg, win, workers=int(opts.workers))
    outs = Outputs(opts.out)
    outs.add("profiles.csv", lambda p: write_profiles_csv(profiles, p))
    outs.commit()
    return EXIT_OK


def cmd_analyze(opts) -> int:
    cfg, win = _embedding(opts)
    rule = parse_rule(opts.rule)
    if opts.band <= 0:
        raise ContractError("band must be positive")
    data = _load(opts)
    by_id = {s.site_id: s for s in data.series}
    groups, unmatched = group_by_region(data.series, _str_list(opts.regions))
    if not groups:
        raise ContractError("no site falls in any region")
    all_profiles, reports, analyses = [], [], []
    for g in groups:
        members = [by_id[i] for i in g.site_ids]
        if len(members) < rule.min_sites:
            raise ContractError(
                f"region {g.region_id} has {len(members)} sites; {rule.name} needs {rule.min_sites}")
        profiles = profile_all(members, cfg, win, workers=int(opts.workers))
        analysis = analyze_region(g.region_id, profiles, rule, method=opts.method,
                                  leave_one_out=bool(opts.leave_one_out))
        locs = localize_region(analysis, float(opts.band))
        reports.append(build_report(analysis, locs, summarize_generation(members)))
        analyses.append(analysis)
        all_profiles.extend(profiles)

    outs = Outputs(opts.out)
    outs.add("profiles.csv", lambda p: write_profiles_csv(all_profiles, p))
    for rep in reports:
        outs.add(f"region_{_safe_id(rep.region_id)}.json",
                 lambda p, rep=rep: p.write_text(rep.to_json()))
    outs.add("correlation_hist.csv", lambda p: write_histogram_csv(reports, p))
    if opts.plots:
        from . import plotting

        for a, rep in zip(analyses, reports):
            rid = _safe_id(a.region_id)
            outs.add(f"region_{rid}_profiles.png", lambda p, a=a: plotting.plot_profiles(a, p))
            outs.add(f"region_{rid}_hist.png", lambda p, r=rep: plotting.plot_histogram(r, p))
    outs.commit()

    flagged = [s for rep in reports for s in rep.anomalous]
    for s in flagged:
        log.warning("anomalous site: %s", s)
    return EXIT_ANOMALIES if flagged else EXIT_OK


def cmd_tune(opts) -> int:
    grid = [EmbeddingConfig(d, t) for d in _int_list(opts.d_values) for t in _int_list(opts.tau_values)]
    if not grid:
        raise ContractError("empty (d, tau) grid")
    data = _load(opts)
    result = hyperparameter_sweep(data.series, grid)
    outs = Outputs(opts.out)
    outs.add("sweep.csv", lambda p: write_sweep_csv(result, p))
    if opts.plots:
        from . import plotting

        outs.add("sweep.png", lambda p: plotting.plot_sweep(result, p))
    outs.commit()
    return EXIT_OK


def cmd_synth(opts) -> int:
    if opts.spec is not None:
        with open(opts.spec, "rb") as fh:
            spec = fleet_spec_from_dict(tomllib.load(fh))
        series, faults = generate_fleet(spec), list(spec.faults)
    elif opts.preset == "regional":
        specs = regional_fleet_specs()
        series, faults = generate_fleets(specs), [f for s in specs for f in s.faults]
    else:
        spec = default_fleet_spec()
        series, faults = generate_fleet(spec), list(spec.faults)
    outs = Outputs(opts.out)
    outs.add("fleet.csv", lambda p: write_long_csv(series, p))
    outs.add("faults.json", lambda p: p.write_text(faults_to_json(faults)))
    outs.commit()
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "profile": cmd_profile, "tune": cmd_tune, "synth": cmd_synth}


def main(argv: list[str] | None = None) -> int:
    try:
        opts = resolve_options(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ContractError, tomllib.TOMLDecodeError) as exc:
        print(f"pvwpe: error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    level = logging.WARNING - 10 * min(int(opts.verbose or 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[opts.command](opts)
    except (OSError, ValueError, KeyError, TypeError, tomllib.TOMLDecodeError) as exc:
        # ContractError is a ValueError
        print(f"pvwpe: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
