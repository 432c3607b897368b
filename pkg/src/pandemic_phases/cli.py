"""Command-line interface.

Observed data comes either from a directory of CSSE time-series files
(``--data DIR --country NAME``) or from a series JSON written by
``simulate`` (``--series FILE``).

Exit codes: 0 success, 2 parse or configuration error, 3 numerical failure,
4 not enough data.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import POPULATIONS, REFERENCE_THETA, RunConfig, load_config, preset_bounds
from .errors import DomainError, FitError, InsufficientDataError, IntegrationError, ParseError
from .fitting import MIN_FIT_DAYS, FitConfig, build_initial_state, fit_parameters, validate
from .ingest import KINDS, load_country, read_csse_file
from .model import SCHEMES, IntegratorConfig, ModelParams
from .pipeline import DynamicConfig, carry_over, dynamic_phase_detection
from .report import (
    FORMATS,
    fit_document,
    read_json,
    render,
    scenario_document,
    series_document,
    series_from_document,
    timeline_document,
    validation_document,
)
from .scenario import scenario_projection
from .series import ObservedSeries
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger("pandemic_phases")

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _multipliers(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        src = p.add_argument_group("input")
        src.add_argument("--data", type=Path, help="directory holding the CSSE global time-series CSV files")
        src.add_argument("--series", type=Path, help="series JSON written by the simulate subcommand")
        src.add_argument("--country", help="country name as spelled in the CSSE files")
        src.add_argument("--start", type=_date, help="first day (YYYY-MM-DD)")
        src.add_argument("--end", type=_date, help="last day (YYYY-MM-DD)")
    p.add_argument("--population", type=float, help="total population N (defaults per country)")
    p.add_argument("--bounds-file", type=Path, help="INI file with [bounds], [initial_state], [fit], [detection]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--popsize", type=int, help="differential evolution population multiplier")
    p.add_argument("--maxiter", type=int, help="differential evolution generations")
    p.add_argument("--tol", type=float, help="differential evolution relative tolerance")
    p.add_argument("--scheme", choices=SCHEMES, default="midpoint", help="time integrator")
    p.add_argument("--substeps", type=int, default=20, help="integrator substeps per day")
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("-o", "--output", type=Path, help="output file (default: stdout)")


def _add_detection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=int, help="window length in days (default 30)")
    p.add_argument("--c-factor", type=float, help="threshold multiplier c in h = c * 5 sigma")
    p.add_argument("--k-slack", type=float, help="reference value floor, in units of sigma")
    p.add_argument("--one-way", action="store_true", help="skip the backward refinement")
    p.add_argument("--reseed", action="store_true",
                   help="seed each new phase from the data instead of carrying the model state")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pandemic-phases", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model on one window")
    _add_common(p)
    p.add_argument("--train-days", type=int, default=30, help="fit on days [0, train-days]")

    p = sub.add_parser("validate", help="fit, then score a holdout projection")
    _add_common(p)
    p.add_argument("--train-days", type=int, default=30)
    p.add_argument("--horizon", type=int, default=30, help="holdout length in days")

    for name, text in (("detect", "offline change-point analysis of a whole series"),
                       ("dynamic", "streaming phase detection with sliding refits")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_detection(p)

    p = sub.add_parser("scenario", help="what-if projections with scaled contacts")
    _add_common(p)
    p.add_argument("--train-days", type=int, default=30, help="fit on the last train-days days")
    p.add_argument("--multipliers", type=_multipliers, default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--horizon", type=int, default=100)

    p = sub.add_parser("simulate", help="generate a synthetic series")
    _add_common(p, data=False)
    p.add_argument("--preset", choices=sorted(REFERENCE_THETA), default="United Kingdom",
                   help="reference parameter set for the first phase")
    p.add_argument("--theta", help="overrides as name=value,... (e.g. c1=0.6,alpha=0.1)")
    p.add_argument("--days", type=int, default=90)
    p.add_argument("--switch", type=int, action="append", default=[],
                   help="day at which contacts change (repeatable)")
    p.add_argument("--contact-multiplier", type=float, default=3.0,
                   help="factor applied to c1 and c2 at each switch")
    p.add_argument("--initial-infected", type=float, default=20000.0)
    p.add_argument("--initial-deaths", type=float, default=0.0)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--start-date", type=_date, default=dt.date(2020, 4, 1))

    p = sub.add_parser("ingest-check", help="parse CSSE files and summarise one country")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--country")
    p.add_argument("--start", type=_date)
    p.add_argument("--end", type=_date)
    p.add_argument("-o", "--output", type=Path)
    return parser


# helpers


def _run_config(args) -> RunConfig:
    cfg = RunConfig(bounds=preset_bounds(getattr(args, "country", None)))
    if args.bounds_file is not None:
        cfg = load_config(args.bounds_file, cfg)
    updates = {k: getattr(args, k) for k in ("popsize", "maxiter", "tol") if getattr(args, k) is not None}
    cfg.fit = FitConfig(**{**cfg.fit.__dict__, "seed": args.seed, **updates})
    for key in ("delta", "c_factor", "k_slack"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _population(args, cfg: RunConfig, obs: ObservedSeries | None = None) -> float:
    if args.population is not None:
        return args.population
    if cfg.population is not None:
        return cfg.population
    if obs is not None and obs.meta.get("population"):
        return float(obs.meta["population"])
    country = getattr(args, "country", None)
    if country in POPULATIONS:
        return POPULATIONS[country]
    raise ParseError("population unknown: pass --population or set it in the bounds file")


def _integrator(args) -> IntegratorConfig:
    return IntegratorConfig(substeps_per_day=args.substeps, scheme=args.scheme)


def _load_series(args) -> ObservedSeries:
    if (args.data is None) == (args.series is None):
        raise ParseError("give exactly one of --data or --series")
    if args.series is not None:
        try:
            doc = read_json(args.series)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read {args.series}: {exc}") from exc
        obs = series_from_document(doc)
        if "population" in doc.get("params", {}):
            obs.meta["population"] = doc["params"]["population"]
        lo = 0 if args.start is None else obs.index_of(args.start)
        hi = len(obs) if args.end is None else obs.index_of(args.end) + 1
        return obs if (lo, hi) == (0, len(obs)) else obs.slice(lo, hi)
    if not args.country:
        raise ParseError("--country is required with --data")
    return load_country(args.data, args.country, args.start, args.end)


def _emit(doc: dict, fmt: str, output: Path | None) -> None:
    text = render(doc, fmt)
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _train_window(obs: ObservedSeries, start: int, days: int) -> tuple[int, int]:
    end = start + days
    if days < MIN_FIT_DAYS or end > obs.last:
        raise InsufficientDataError(
            f"a {days}-day fit from day {start} needs {end + 1} days of data, have {len(obs)}"
            if days >= MIN_FIT_DAYS else f"training window must be at least {MIN_FIT_DAYS} days"
        )
    return start, end


def _parse_theta(text: str | None, base: dict) -> ModelParams:
    values = dict(base)
    if text:
        for item in text.split(","):
            name, _, raw = item.partition("=")
            name = name.strip()
            if name not in values:
                raise ParseError(f"unknown parameter {name!r} in --theta")
            try:
                values[name] = float(raw)
            except ValueError:
                raise ParseError(f"bad value for {name} in --theta: {raw!r}") from None
    return ModelParams(**values)


# subcommands


def cmd_fit(args) -> dict:
    cfg = _run_config(args)
    obs = _load_series(args)
    spec = cfg.initial_state(_population(args, cfg, obs))
    icfg = _integrator(args)
    fit = fit_parameters(obs, _train_window(obs, 0, args.train_days), cfg.bounds, spec, cfg.fit, icfg)
    return fit_document(fit, obs, icfg)


def cmd_validate(args) -> dict:
    cfg = _run_config(args)
    obs = _load_series(args)
    spec = cfg.initial_state(_population(args, cfg, obs))
    icfg = _integrator(args)
    window = _train_window(obs, 0, args.train_days)
    if window[1] + args.horizon > obs.last:
        raise InsufficientDataError(f"holdout of {args.horizon} days runs past the end of the series")
    fit = fit_parameters(obs, window, cfg.bounds, spec, cfg.fit, icfg)
    return validation_document(fit, validate(fit, obs, args.horizon, icfg), obs)


def cmd_dynamic(args) -> dict:
    cfg = _run_config(args)
    obs = _load_series(args)
    dyn = DynamicConfig(
        spec=cfg.initial_state(_population(args, cfg, obs)),
        delta=cfg.delta,
        bounds=cfg.bounds,
        c_factor=cfg.c_factor,
        k_slack=cfg.k_slack,
        two_way=not args.one_way,
        carry_state=not args.reseed,
        fit=cfg.fit,
        integrator=_integrator(args),
    )
    tl = dynamic_phase_detection(obs, dyn)
    return timeline_document(tl, obs, kind=args.command, cfg=dyn.integrator)


def cmd_scenario(args) -> dict:
    cfg = _run_config(args)
    obs = _load_series(args)
    spec = cfg.initial_state(_population(args, cfg, obs))
    icfg = _integrator(args)
    start = obs.last - args.train_days
    if start < 0:
        raise InsufficientDataError(f"need {args.train_days + 1} days of data, have {len(obs)}")
    fit = fit_parameters(obs, _train_window(obs, start, args.train_days), cfg.bounds, spec, cfg.fit, icfg)
    x_now = carry_over(fit, obs, obs.last, icfg)
    sset = scenario_projection(fit.theta, x_now, fit.v, args.multipliers, args.horizon, icfg)
    doc = scenario_document(sset, obs.date_of(obs.last))
    doc["params"]["label"] = obs.label
    doc["params"]["fit"] = {"window": list(fit.window), "train_mse": fit.train_mse}
    return doc


def cmd_simulate(args) -> dict:
    cfg = _run_config(args)
    population = args.population or cfg.population or POPULATIONS[args.preset]
    theta = _parse_theta(args.theta, REFERENCE_THETA[args.preset])
    switches = sorted(set(args.switch))
    if any(s <= 0 or s >= args.days for s in switches):
        raise DomainError("switch days must lie strictly inside the simulated range")
    edges = [0] + switches + [args.days]
    phases, current = [], theta
    for a, b in zip(edges, edges[1:]):
        phases.append((b - a, current))
        current = current.replace(c1=current.c1 * args.contact_multiplier, c2=current.c2 * args.contact_multiplier)
    seed_obs = ObservedSeries(
        start_date=args.start_date,
        confirmed=[args.initial_infected + args.initial_deaths],
        deaths=[args.initial_deaths],
        recovered=[0.0],
        active=[args.initial_infected],
    )
    x0 = build_initial_state(seed_obs, 0, cfg.initial_state(population))
    spec = SyntheticSpec(tuple(phases), x0, noise_sd=args.noise_sd, seed=args.seed,
                         start_date=args.start_date, cfg=_integrator(args))
    obs = generate_synthetic(spec)
    params = {
        "population": population,
        "noise_sd": args.noise_sd,
        "seed": args.seed,
        "switch_days": switches,
        "phases": [{"days": d, "theta": p.as_dict()} for d, p in phases],
    }
    return series_document(obs, params, kind="synthetic")


def cmd_ingest_check(args) -> dict:
    tables = {}
    for kind in KINDS:
        path = args.data / f"time_series_covid19_{kind}_global.csv"
        tables[kind] = read_csse_file(path, kind)
    summary = {
        kind: {
            "rows": len(t.rows),
            "first_date": t.dates[0].isoformat(),
            "last_date": t.dates[-1].isoformat(),
            "countries": len(t.countries()),
        }
        for kind, t in tables.items()
    }
    if args.country:
        obs = load_country(args.data, args.country, args.start, args.end)
        raw = tables["deaths"].country_total(args.country)
        summary["country"] = {
            "name": args.country,
            "days": len(obs),
            "final_deaths": float(obs.deaths[-1]),
            "repaired_deaths_days": int(np.sum(np.diff(raw) < 0)),
            "recovered_missing": obs.recovered_missing,
        }
    return {"schema_version": 1, "kind": "ingest-check", "params": summary, "phases": [],
            "series": {"dates": [], "values": {}}}


COMMANDS = {
    "fit": cmd_fit,
    "validate": cmd_validate,
    "detect": cmd_dynamic,
    "dynamic": cmd_dynamic,
    "scenario": cmd_scenario,
    "simulate": cmd_simulate,
    "ingest-check": cmd_ingest_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        doc = COMMANDS[args.command](args)
        _emit(doc, getattr(args, "format", "json"), args.output)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IntegrationError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
