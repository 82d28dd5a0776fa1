"""Benchmark directory ingestion.

Directory layout::

    root/distorted/<stem>.png   dewarped output under evaluation
    root/gt/<stem>.png          ground-truth flat scan
    root/grids/<stem>.aagrid    optional predicted grids
    root/text/<stem>.txt        optional OCR reference text
    root/flows/<stem>.flow      optional precomputed flows (gt or imported)

Synthetic corpora written by :func:`warpmetrics.synth.write_corpus` are read
through :func:`corpus_layout`, which pairs every sample with ``base.png``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass(frozen=True)
class Pair:
    stem: str
    distorted: Path
    gt: Path
    grid: Path = None
    text: Path = None
    flow: Path = None


@dataclass
class DatasetLayout:
    root: Path
    pairs: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def _images(d):
    if not d.is_dir():
        return {}
    out = {}
    for p in sorted(d.iterdir()):
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
            if p.stem in out:
                raise FormatError(f"two images share the stem {p.stem!r} in {d}")
            out[p.stem] = p
    return out


def _optional(d, stem, suffixes):
    for s in suffixes:
        p = d / f"{stem}{s}"
        if p.is_file():
            return p
    return None


def scan_dataset(root):
    """Pair ``distorted/`` with ``gt/`` by stem; unpaired files land in ``skipped``."""
    root = Path(root)
    if not (root / "distorted").is_dir():
        raise FormatError(f"{root} has no distorted/ directory")
    if not (root / "gt").is_dir():
        raise FormatError(f"{root} has no gt/ directory")
    dist = _images(root / "distorted")
    gt = _images(root / "gt")
    layout = DatasetLayout(root)
    for stem in sorted(set(dist) | set(gt)):
        if stem not in gt:
            layout.skipped.append({"stem": stem, "file": str(dist[stem].relative_to(root)),
                                   "reason": "no ground-truth partner in gt/"})
            continue
        if stem not in dist:
            layout.skipped.append({"stem": stem, "file": str(gt[stem].relative_to(root)),
                                   "reason": "no distorted partner in distorted/"})
            continue
        layout.pairs.append(Pair(
            stem=stem,
            distorted=dist[stem],
            gt=gt[stem],
            grid=_optional(root / "grids", stem, (".aagrid", ".json")),
            text=_optional(root / "text", stem, (".txt",)),
            flow=_optional(root / "flows", stem, (".flow",)),
        ))
    return layout


def corpus_layout(root, sets=None):
    """Pairs of a synthetic corpus; stems are ``<set>-<index>``."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"{root} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    base = root / manifest["base"]
    layout = DatasetLayout(root)
    for set_id in sorted(manifest["sets"]):
        if sets is not None and set_id not in sets:
            continue
        for s in manifest["sets"][set_id]["samples"]:
            layout.pairs.append(Pair(stem=f"{set_id}-{s['stem']}", distorted=root / s["image"], gt=base,
                                     flow=root / s["flow"]))
    layout.pairs.sort(key=lambda p: p.stem)
    return layout
