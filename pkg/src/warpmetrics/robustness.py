"""Robustness study: does a metric computed from an estimated flow track the
same metric computed from the exact flow, and how stable is it under
illumination changes?

For every set and sample index the study records the (gt-flow, estimated-flow)
value of AAD, LD and ad_approx.  It then reports per set the R^2 of those
pairs and the Spearman rank correlation of the gt-flow value against the warp
amplitude.  It also reports, per sample index, the normalised std of each
value across the sets (same warp, different illumination).
"""

import csv
import io as _stdio
from pathlib import Path

import numpy as np
from scipy import stats

from . import io, metrics, synth
from ._version import __version__
from .config import write_config
from .errors import ParameterError, UndefinedStatisticError, WarpMetricsError
from .flow import estimate_sift_flow
from .report import map_ordered, write_jsonl, write_run_info

STUDY_METRICS = ("aad", "ld", "ad_approx")


def _settings(config):
    rc = config.robustness
    return [synth.DisturbanceSetting.preset(s, seed=config.seed, amplitude_start=rc.amplitude_start,
                                            amplitude_stop=rc.amplitude_stop) for s in rc.sets]


def base_page(config):
    return synth.make_page(tuple(config.robustness.size), seed=config.robustness.page_seed)


def _flow_metrics(base, weights, flow, aad_params):
    return {
        "aad": metrics.aad(base, flow, aad_params, weights).aad,
        "ld": metrics.ld(flow),
        "ad_approx": metrics.ad_approx(flow, weights)[0],
    }


def _sample_task(args):
    base, setting, index, count, config = args
    sample = synth.make_sample(base, setting, index, count)
    weights = metrics.sobel_weights(base)
    gt = _flow_metrics(base, weights, sample.flow, config.aad)
    if config.flow_source == "gt":
        est_flow = sample.flow
    else:
        est_flow = estimate_sift_flow(base, sample.image, config.sift)
    est = _flow_metrics(base, weights, est_flow, config.aad)
    return {"set": setting.set_id, "index": index, "amplitude": sample.provenance["amplitude"],
            "gt": gt, "est": est}


def _safe(fn, *args):
    try:
        return float(fn(*args)), None
    except (UndefinedStatisticError, WarpMetricsError) as exc:
        return None, str(exc)


def spearman(x, y):
    rho = stats.spearmanr(x, y).statistic
    if not np.isfinite(rho):
        raise UndefinedStatisticError("Spearman correlation undefined (constant input)")
    return float(rho)


def summarize(records, sets):
    by_set = {s: sorted([r for r in records if r["set"] == s], key=lambda r: r["index"]) for s in sets}
    per_set = {}
    for s, recs in by_set.items():
        amps = [r["amplitude"] for r in recs]
        cell = {}
        for m in STUDY_METRICS:
            g = [r["gt"][m] for r in recs]
            e = [r["est"][m] for r in recs]
            r2, r2_err = _safe(metrics.r_squared, g, e)
            rho, rho_err = _safe(spearman, amps, g)
            cell[m] = {"r_squared": r2, "r_squared_error": r2_err,
                       "spearman_gt_vs_amplitude": rho, "spearman_error": rho_err, "count": len(recs)}
        per_set[s] = cell

    cross = []
    cross_summary = {}
    if len(sets) > 1:
        indices = sorted(set.intersection(*[{r["index"] for r in by_set[s]} for s in sets]))
        lookup = {(r["set"], r["index"]): r for r in records}
        for i in indices:
            row = {"index": i}
            for m in STUDY_METRICS:
                for src in ("gt", "est"):
                    vals = [lookup[(s, i)][src][m] for s in sets]
                    row[f"{m}_{src}"], _ = _safe(metrics.normalized_std, vals)
            cross.append(row)
        for m in STUDY_METRICS:
            for src in ("gt", "est"):
                vals = [r[f"{m}_{src}"] for r in cross if r[f"{m}_{src}"] is not None]
                cross_summary[f"{m}_{src}"] = {
                    "mean": float(np.mean(vals)) if vals else None,
                    "max": float(np.max(vals)) if vals else None,
                    "defined": len(vals),
                }
    return per_set, cross, cross_summary


def _scatter_csv(records):
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["set", "index", "amplitude", "metric", "gt_flow", "estimated_flow"])
    for r in records:
        for m in STUDY_METRICS:
            w.writerow([r["set"], r["index"], repr(r["amplitude"]), m, repr(r["gt"][m]), repr(r["est"][m])])
    return buf.getvalue()


def _cross_csv(cross):
    buf = _stdio.StringIO()
    cols = ["index"] + [f"{m}_{src}" for m in STUDY_METRICS for src in ("gt", "est")]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in cross:
        w.writerow(["" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    return buf.getvalue()


def run_robustness(config, write=True):
    """Generate the corpus in memory, run the study and (optionally) write
    ``robustness.jsonl``, ``scatter.csv``, ``cross_illumination.csv`` and
    ``robustness_summary.json``.  Returns the summary dict."""
    if config.flow_source == "import":
        raise ParameterError("the robustness study estimates flows itself; use flow_source 'estimate' or 'gt'")
    rc = config.robustness
    base = base_page(config)
    settings = _settings(config)
    tasks = [(base, st, i, rc.count, config) for st in settings for i in range(rc.count)]
    records = map_ordered(_sample_task, tasks, config.jobs)
    records.sort(key=lambda r: (r["set"], r["index"]))
    per_set, cross, cross_summary = summarize(records, list(rc.sets))
    fp = config.fingerprint()
    summary = {
        "fingerprint": fp,
        "version": __version__,
        "flow_source": "ground-truth" if config.flow_source == "gt" else "estimated",
        "count": rc.count,
        "sets": per_set,
        "cross_illumination": cross_summary,
    }
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "robustness.jsonl", [dict(r, fingerprint=fp, version=__version__) for r in records])
        (out / "scatter.csv").write_text(_scatter_csv(records), encoding="utf-8")
        (out / "cross_illumination.csv").write_text(_cross_csv(cross), encoding="utf-8")
        io.write_json(out / "robustness_summary.json", summary)
        write_config(out / "config.json", config)
        write_run_info(out, "robustness")
    summary["records"] = records
    summary["cross_rows"] = cross
    return summary
