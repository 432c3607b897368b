"""JSON, CSV and SVG output for fits, phase timelines and scenarios.

Every result is first turned into a plain *document*::

    {"schema_version": 1, "kind": ..., "params": {...}, "phases": [...],
     "series": {"dates": [...], "values": {name: [...]}}}

and the three writers work from that document only.  Floats are written with
the shortest repr that round-trips, so re-reading a JSON file gives back the
same doubles; non-finite values become ``null``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import DomainError
from .fitting import FitResult, ValidationReport
from .model import IntegratorConfig, ModelParams, integrate_forward
from .pipeline import Phase, PhaseTimeline
from .scenario import ScenarioSet
from .series import ObservedSeries

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "svg")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _nums(values) -> list:
    return [_num(v) for v in np.asarray(values, dtype=float)]


def _theta(theta: ModelParams | None) -> dict | None:
    if theta is None:
        return None
    out = {k: _num(v) for k, v in theta.as_dict().items()}
    out["r0"] = _num(theta.r0) if theta.d + theta.r > 0 else None
    return out


def _dates(start: dt.date, n: int) -> list[str]:
    return [(start + dt.timedelta(days=k)).isoformat() for k in range(n)]


def _document(kind: str, params: dict, phases: list, start: dt.date, values: dict) -> dict:
    lengths = {len(v) for v in values.values()}
    if len(lengths) > 1:
        raise DomainError(f"series columns have different lengths {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "params": params,
        "phases": phases,
        "series": {"dates": _dates(start, n), "values": {k: _nums(v) for k, v in values.items()}},
    }


def _fit_block(fit: FitResult | None) -> dict | None:
    if fit is None:
        return None
    return {
        "theta": _theta(fit.theta),
        "v": _num(fit.v),
        "train_mse": _num(fit.train_mse),
        "window": list(fit.window),
        "x0": {k: _num(v) for k, v in fit.x0.as_dict().items()},
    }


def fit_document(fit: FitResult, obs: ObservedSeries, cfg: IntegratorConfig | None = None) -> dict:
    """Fit over its window plus the model extrapolated to the end of ``obs``."""
    traj = integrate_forward(fit.theta, fit.x0, obs.last - fit.t_start, cfg, t0=fit.t_start)
    sl = slice(fit.t_start, None)
    infections = traj.column("i")
    values = {
        "observed_deaths": obs.deaths[sl],
        "model_deaths": traj.deaths,
        "observed_active": obs.active[sl],
        "model_infections": infections,
        "adjusted_infections": infections / fit.v if fit.v else np.full_like(infections, np.nan),
    }
    phase = {"tau_l": fit.t_start, "tau_r": fit.t_end, "start_date": obs.date_of(fit.t_start).isoformat(),
             "fit": _fit_block(fit), "detection": None}
    params = {"label": obs.label, "optimizer": dict(fit.optimizer_trace)}
    return _document("fit", params, [phase], obs.date_of(fit.t_start), values)


def validation_document(fit: FitResult, report: ValidationReport, obs: ObservedSeries) -> dict:
    params = {
        "label": obs.label,
        "holdout": list(report.holdout),
        "holdout_mse": _num(report.holdout_mse),
        "max_relative_error": _num(report.max_relative_error),
        "v": _num(report.v),
    }
    phase = {"tau_l": fit.t_start, "tau_r": fit.t_end, "start_date": obs.date_of(fit.t_start).isoformat(),
             "fit": _fit_block(fit), "detection": None}
    values = {"observed_deaths": report.observed, "projected_deaths": report.projected,
              "residual": report.residuals}
    return _document("validation", params, [phase], obs.date_of(report.holdout[0]), values)


def _phase_block(phase: Phase, obs: ObservedSeries) -> dict:
    det = phase.detection
    back = phase.backward_detection
    return {
        "tau_l": phase.tau_l,
        "tau_r": phase.tau_r,
        "start_date": obs.date_of(phase.tau_l).isoformat(),
        "fit": _fit_block(phase.fit),
        "baseline": None if phase.baseline is None else {"mu0": _num(phase.baseline[0]), "sigma0": _num(phase.baseline[1])},
        "refits": list(phase.refits),
        "detection": None if det is None else {
            "t": det.t, "date": obs.date_of(det.t).isoformat(), "direction": det.direction,
            "statistic": _num(det.statistic),
        },
        "backward_detection": None if back is None else {
            "t": back.t, "date": obs.date_of(back.t).isoformat(), "direction": back.direction,
            "statistic": _num(back.statistic),
        },
        "refined_start": phase.refined_start,
    }


def timeline_document(tl: PhaseTimeline, obs: ObservedSeries, kind: str = "dynamic",
                      cfg: IntegratorConfig | None = None) -> dict:
    """Observed deaths with the piecewise model; each day uses the phase that covers it."""
    model = np.full(len(obs), np.nan)
    for k, phase in enumerate(tl.phases):
        if phase.fit is None:
            continue
        stop = tl.phases[k + 1].tau_l if k + 1 < len(tl.phases) else len(obs)
        days = stop - 1 - phase.tau_l
        if days < 1:
            model[phase.tau_l] = phase.fit.x0.dd
            continue
        traj = integrate_forward(phase.fit.theta, phase.fit.x0, days, cfg, t0=phase.tau_l)
        model[phase.tau_l:stop] = traj.deaths
    residual = obs.deaths - model
    params = {
        "label": obs.label,
        "delta": tl.delta,
        "change_points": [obs.date_of(t).isoformat() for t in tl.change_points],
        "refined_change_points": [None if t is None else obs.date_of(t).isoformat()
                                  for t in tl.refined_change_points],
    }
    phases = [_phase_block(p, obs) for p in tl.phases]
    values = {"observed_deaths": obs.deaths, "model_deaths": model, "residual": residual}
    return _document(kind, params, phases, obs.start_date, values)


def scenario_document(sset: ScenarioSet, start_date: dt.date) -> dict:
    params = {
        "base_theta": _theta(sset.base_theta),
        "multipliers": [_num(k) for k in sset.multipliers],
        "horizon": sset.horizon,
        "v": _num(sset.v),
        "final_deaths": {repr(k): _num(v) for k, v in sset.final_deaths().items()},
        "failures": {repr(k): msg for k, msg in sset.failures.items()},
    }
    values = {}
    for k in sset.multipliers:
        if k in sset.deaths:
            values[f"deaths_x{k:g}"] = sset.deaths[k]
            values[f"infections_x{k:g}"] = sset.infections[k]
    return _document("scenario", params, [], start_date, values)


def series_document(obs: ObservedSeries, params: dict | None = None, kind: str = "series") -> dict:
    values = {"confirmed": obs.confirmed, "deaths": obs.deaths, "recovered": obs.recovered, "active": obs.active}
    return _document(kind, dict(params or {}, label=obs.label), [], obs.start_date, values)


def to_document(result, obs: ObservedSeries | None = None, **kw) -> dict:
    if isinstance(result, dict):
        return result
    if isinstance(result, FitResult):
        return fit_document(result, _need(obs), kw.get("cfg"))
    if isinstance(result, PhaseTimeline):
        return timeline_document(result, _need(obs), kw.get("kind", "dynamic"), kw.get("cfg"))
    if isinstance(result, ScenarioSet):
        return scenario_document(result, kw.get("start_date", dt.date(2020, 1, 1)))
    if isinstance(result, ObservedSeries):
        return series_document(result)
    raise DomainError(f"cannot report a {type(result).__name__}")


def _need(obs):
    if obs is None:
        raise DomainError("the observed series is required for this report")
    return obs


# writers


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def render_csv(doc: dict) -> str:
    series = doc["series"]
    names = list(series["values"])
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date"] + names)
    columns = [series["values"][n] for n in names]
    for k, day in enumerate(series["dates"]):
        writer.writerow([day] + ["" if col[k] is None else repr(col[k]) for col in columns])
    return out.getvalue()


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _markers(doc: dict) -> list[tuple[str, str]]:
    """(date, direction) of every detection in the document's phases."""
    found = []
    for phase in doc.get("phases", []):
        det = phase.get("detection")
        if det:
            found.append((det["date"], det["direction"]))
    return found


def render_svg(doc: dict, columns: list[str] | None = None, width: int = 900, height: int = 420) -> str:
    """Line plot of the chosen series with detections as vertical lines."""
    series = doc["series"]
    dates = series["dates"]
    names = columns or [n for n in series["values"] if n != "residual"]
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    finite = [v for n in names for v in series["values"][n] if v is not None]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    n = max(len(dates) - 1, 1)

    def sx(k):
        return left + pw * k / n

    def sy(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    title = doc.get("params", {}).get("label") or doc["kind"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-family="sans-serif" font-size="14">{escape(str(title))} ({escape(doc["kind"])})</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        parts.append(f'<text x="{left - 6}" y="{sy(v) + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{v:.4g}</text>')
    if dates:
        for k in sorted({0, len(dates) // 2, len(dates) - 1}):
            parts.append(f'<text x="{sx(k):.1f}" y="{top + ph + 18}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">{dates[k]}</text>')
    for idx, name in enumerate(names):
        colour = _PALETTE[idx % len(_PALETTE)]
        segments, current = [], []
        for k, v in enumerate(series["values"][name]):
            if v is None:
                if current:
                    segments.append(current)
                current = []
            else:
                current.append(f"{sx(k):.2f},{sy(v):.2f}")
        if current:
            segments.append(current)
        for seg in segments:
            parts.append(f'<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.5" '
                         f'points="{" ".join(seg)}"/>')
        parts.append(f'<text x="{left + 8}" y="{top + 16 + 14 * idx}" font-family="sans-serif" font-size="11" '
                     f'fill="{colour}">{escape(name)}</text>')
    index = {d: k for k, d in enumerate(dates)}
    for day, direction in _markers(doc):
        if day not in index:
            continue
        x = sx(index[day])
        colour = "#d62728" if direction == "positive" else "#2ca02c"
        parts.append(f'<line class="change-point" x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{top + ph}" '
                     f'stroke="{colour}" stroke-dasharray="4 3"><title>{day} {direction}</title></line>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_RENDERERS = {"json": render_json, "csv": render_csv, "svg": render_svg}


def render(doc: dict, fmt: str) -> str:
    if fmt not in _RENDERERS:
        raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")
    return _RENDERERS[fmt](doc)


def emit_report(result, fmt: str, path, obs: ObservedSeries | None = None, **kw) -> Path:
    """Write ``result`` (or a ready document) to ``path`` in ``fmt``."""
    doc = to_document(result, obs, **kw)
    text = render(doc, fmt)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def series_from_document(doc: dict) -> ObservedSeries:
    """Rebuild an observed series from a ``series``/``synthetic`` document."""
    try:
        values = doc["series"]["values"]
        dates = doc["series"]["dates"]
        start = dt.date.fromisoformat(dates[0])
        cols = {k: np.array([np.nan if v is None else v for v in values[k]], dtype=float)
                for k in ("confirmed", "deaths", "recovered", "active")}
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise DomainError(f"not a series document: {exc}") from exc
    return ObservedSeries(start_date=start, label=doc.get("params", {}).get("label", ""), **cols)
