"""Run configured ensembles and serialize them as CSV plus a text summary.

CSV layout: ``# key = value`` comment lines echoing the config and the bound
report, then one header row and one row per (replicate, record time)::

    replicate,t,U,V_bar,f_mean,diverged[,d_0,...,d_{P-1}]

Floats use 17 significant digits so they parse back exactly. ``diverged`` is
1 on every row of a replicate that blew up (its rows stop at the last good
record). The optional ``d_i`` columns hold per-thread distances to the
optimum (one column for the centralized iterate).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .analysis import BoundReport, EnsembleStats, bound_report, collect, run_replicate
from .config import ExperimentConfig, config_to_dict

COLUMNS = ("replicate", "t", "U", "V_bar", "f_mean", "diverged")
HIT_RADIUS = 0.1


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    stats: EnsembleStats | None
    bounds: BoundReport


def run_experiment(config: ExperimentConfig, R: int | None = None) -> ExperimentResult:
    R = config.replicates if R is None else R
    stats = collect(run_replicate(config, r) for r in range(R)) if R > 0 else None
    return ExperimentResult(config, stats, bound_report(config))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _flatten(d: dict, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def header_lines(result: ExperimentResult) -> list[str]:
    lines = [f"# config.{k} = {v!r}" for k, v in _flatten(config_to_dict(result.config))]
    lines += [f"# {ln}" for ln in result.bounds.to_text(prefix="bounds.").splitlines()]
    if result.stats is not None:
        for tr in result.stats.traces:
            if tr.diverged:
                lines.append(f"# diverged.{tr.replicate} = {tr.message}")
    return lines


def write_csv(result: ExperimentResult, fh, per_thread: bool = False):
    for ln in header_lines(result):
        fh.write(ln + "\n")
    cols = list(COLUMNS)
    stats = result.stats
    if per_thread and stats is not None:
        P = stats.traces[0].positions.shape[1]
        cols += [f"d_{i}" for i in range(P)]
    fh.write(",".join(cols) + "\n")
    if stats is None:
        return
    for r, tr in enumerate(stats.traces):
        n = len(tr.times)
        dist = tr.thread_distances() if per_thread else None
        for k in range(n):
            row = [tr.replicate, tr.times[k], stats.values["U"][r, k], stats.values["V_bar"][r, k],
                   stats.values["f_mean"][r, k], tr.diverged]
            if per_thread:
                row += list(dist[k])
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def csv_text(result: ExperimentResult, per_thread: bool = False) -> str:
    buf = io.StringIO()
    write_csv(result, buf, per_thread)
    return buf.getvalue()


def read_csv(text: str):
    """Parse CSV text back into ``(header dict, column dict of arrays)``."""
    header, rows, cols = {}, [], None
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            header[k.strip()] = v.strip()
        elif cols is None:
            cols = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    data = np.array(rows).reshape(-1, len(cols or []))
    return header, {c: data[:, i] for i, c in enumerate(cols or [])}


def summarize_columns(replicate, t, U, V_bar, diverged, radius: float = HIT_RADIUS,
                      fraction: float = 0.25) -> dict:
    """Summary statistics from flat CSV-style columns.

    Long-run values average the final ``fraction`` of each replicate's records
    (non-diverged replicates only). A replicate hits the ball of ``radius``
    around the optimum at its first record with ``U < radius^2 / 2``.
    """
    out = {}
    reps = np.unique(replicate)
    out["replicates"] = len(reps)
    div = [r for r in reps if np.any(diverged[replicate == r] > 0)]
    out["diverged"] = len(div)
    lr = {"U": [], "V_bar": []}
    hits = []
    for r in reps:
        sel = replicate == r
        for name, col in (("U", U), ("V_bar", V_bar)):
            v = col[sel]
            if r not in div and len(v):
                lr[name].append(v[int(math.floor((1 - fraction) * len(v))):].mean())
        inside = np.flatnonzero(U[sel] < radius * radius / 2)
        hits.append(t[sel][inside[0]] if len(inside) else math.nan)
    for name, vals in lr.items():
        vals = np.asarray(vals)
        vals = vals[np.isfinite(vals)]
        out[f"longrun.{name}.mean"] = float(vals.mean()) if len(vals) else math.nan
        out[f"longrun.{name}.se"] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    hits = np.asarray(hits)
    got = hits[np.isfinite(hits)]
    out["hitting.radius"] = radius
    out["hitting.count"] = len(got)
    out["hitting.mean"] = float(got.mean()) if len(got) else math.nan
    out["hitting.sd"] = float(got.std(ddof=1)) if len(got) > 1 else math.nan
    return out


def summarize(result: ExperimentResult, radius: float = HIT_RADIUS) -> dict:
    out = {}
    s = result.stats
    if s is not None:
        rep = np.concatenate([np.full(len(tr.times), tr.replicate) for tr in s.traces])
        t = np.concatenate([tr.times for tr in s.traces])
        cols = {}
        for name in ("U", "V_bar"):
            cols[name] = np.concatenate([s.values[name][r, :len(tr.times)] for r, tr in enumerate(s.traces)])
        div = np.concatenate([np.full(len(tr.times), float(tr.diverged)) for tr in s.traces])
        out.update(summarize_columns(rep, t, cols["U"], cols["V_bar"], div, radius))
    for k, v in result.bounds.items():
        out[f"bound.{k}"] = v
    return out


def summary_text(summary: dict) -> str:
    return "\n".join(f"{k} = {v!r}" for k, v in summary.items()) + "\n"
