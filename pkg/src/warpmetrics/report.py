"""Per-pair metric reports, deterministic persistence and the evaluate run."""

import csv
import datetime as _dt
import io as _stdio
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io, metrics
from ._version import __version__
from .config import write_config
from .errors import FormatError, InvalidDimensionError, InvalidInputError, WarpMetricsError
from .flow import canonical_size, canonicalize_pair, estimate_sift_flow, resize_image
from .similarity import ms_ssim

SOURCE_TAGS = {"gt": "ground-truth", "estimate": "estimated", "import": "imported"}
SCALAR_FIELDS = ("aad", "aad_h", "aad_v", "ld", "ad_approx", "ms_ssim", "ed", "cer")


@dataclass
class MetricReport:
    image_id: str
    flow_source: str
    fingerprint: str
    version: str = __version__
    resolution: list = None
    aad: float = None
    aad_h: float = None
    aad_v: float = None
    ld: float = None
    ad_approx: float = None
    ad_approx_degenerate: bool = None
    ms_ssim: float = None
    ed: int = None
    cer: float = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# one pair
# ---------------------------------------------------------------------------


def _load_pair_at_resolution(pair, config):
    """Images and flow at the resolution metrics are computed at.

    Estimated flows use the canonical resolution.  A flow read from disk fixes
    the resolution instead: it must match either the gt size or the canonical
    size, and the images are resized to it.
    """
    gt = io.read_image(pair.gt, id=pair.stem)
    dw = io.read_image(pair.distorted, id=pair.stem)
    if config.flow_source == "estimate":
        y, d = canonicalize_pair(gt, dw, config.canonical_max_side)
        return y, d, estimate_sift_flow(y, d, config.sift)
    if pair.flow is None:
        raise FormatError(f"flow source {config.flow_source!r} needs flows/{pair.stem}.flow")
    flow = io.read_flow(pair.flow)
    allowed = {tuple(gt.shape), canonical_size(gt.shape, config.canonical_max_side)}
    if tuple(flow.shape) not in allowed:
        raise InvalidDimensionError(f"flow {flow.shape} matches neither gt {gt.shape} nor the canonical size")
    return resize_image(gt, flow.shape), resize_image(dw, flow.shape), flow


def evaluate_pair(pair, config, fingerprint):
    y, d, flow = _load_pair_at_resolution(pair, config)
    rep = MetricReport(image_id=pair.stem, flow_source=SOURCE_TAGS[config.flow_source],
                       fingerprint=fingerprint, resolution=list(y.shape))
    sel = set(config.metrics)
    weights = metrics.sobel_weights(y)
    if "aad" in sel:
        r = metrics.aad(y, flow, config.aad, weights)
        rep.aad, rep.aad_h, rep.aad_v = r.aad, r.aad_h, r.aad_v
    if "ld" in sel:
        rep.ld = metrics.ld(flow)
    if "ad_approx" in sel:
        rep.ad_approx, rep.ad_approx_degenerate = metrics.ad_approx(flow, weights)
    if "ms_ssim" in sel:
        try:
            rep.ms_ssim = ms_ssim(y, d)
        except InvalidInputError as exc:
            rep.notes.append(f"ms_ssim: {exc}")
    if "ocr" in sel and pair.text is not None:
        reference = Path(pair.text).read_text(encoding="utf-8").strip()
        command = os.environ.get("WARPMETRICS_OCR_CMD", config.ocr_command)
        hyp = metrics.run_ocr(pair.distorted, command)
        if hyp is None:
            rep.notes.append("ocr: command failed; ed/cer absent")
        else:
            hyp = hyp.strip()
            rep.ed = metrics.edit_distance(reference, hyp)
            rep.cer = metrics.cer(reference, hyp)
    return rep


def _evaluate_task(args):
    pair, config, fp = args
    try:
        return pair.stem, evaluate_pair(pair, config, fp).to_dict(), None
    except (WarpMetricsError, OSError, ValueError) as exc:
        return pair.stem, None, f"{type(exc).__name__}: {exc}"


def map_ordered(fn, tasks, jobs):
    """``map`` over a bounded process pool; result order follows ``tasks``."""
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(io.dumps(row) + "\n")


def aggregate(rows):
    """Mean and count of every scalar metric over rows where it is present."""
    out = {}
    for name in SCALAR_FIELDS:
        vals = [r[name] for r in rows if r.get(name) is not None]
        out[name] = {"mean": float(np.mean(vals)) if vals else None, "count": len(vals)}
    return out


def write_aggregate_csv(path, rows, fingerprint, flow_source):
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "mean", "count", "fingerprint", "version", "flow_source"])
    for name, agg in aggregate(rows).items():
        mean = "" if agg["mean"] is None else repr(agg["mean"])
        w.writerow([name, mean, agg["count"], fingerprint, __version__, flow_source])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_run_info(out_dir, command):
    """Wall-clock data lives here so every other artifact stays reproducible."""
    io.write_json(Path(out_dir) / "run_info.json", {
        "command": command,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": __version__,
    })


def run_evaluate(config, layout):
    """Evaluate every pair of ``layout``; returns the summary dict.

    Writes ``metrics.jsonl``, ``aggregate.csv``, ``summary.json``,
    ``config.json`` and ``run_info.json`` under ``config.out_dir``.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()
    tag = SOURCE_TAGS[config.flow_source]
    results = map_ordered(_evaluate_task, [(p, config, fp) for p in layout.pairs], config.jobs)
    results.sort(key=lambda r: r[0])
    rows = [r for _, r, err in results if err is None]
    failures = [{"stem": stem, "reason": err} for stem, _, err in results if err is not None]
    write_jsonl(out / "metrics.jsonl", rows)
    write_aggregate_csv(out / "aggregate.csv", rows, fp, tag)
    summary = {
        "fingerprint": fp,
        "version": __version__,
        "flow_source": tag,
        "evaluated": len(rows),
        "aggregate": aggregate(rows),
        "skipped": layout.skipped,
        "failures": failures,
    }
    io.write_json(out / "summary.json", summary)
    write_config(out / "config.json", config)
    write_run_info(out, "evaluate")
    return summary
