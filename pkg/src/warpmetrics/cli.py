"""``warpmetrics`` command line.

Global flags (``--config``, ``--seed``, ``--jobs``, ``--out-dir``) are
accepted before or after the subcommand and override the config file.
Exit status is 0 on full success, 1 when some images failed, 2 on usage or
configuration errors.
"""

import argparse
import json
import sys
from pathlib import Path

from . import io
from ._version import __version__
from .config import METRICS, RunConfig, load_config, write_config
from .dataset import corpus_layout, scan_dataset
from .errors import WarpMetricsError
from .geometry import Grid2D, make_uniform_uv_grid

# ---------------------------------------------------------------------------
# commands (callable from Python as well)
# ---------------------------------------------------------------------------


def cmd_evaluate(config):
    from .report import run_evaluate

    if config.corpus:
        layout = corpus_layout(config.corpus)
    elif config.dataset:
        layout = scan_dataset(config.dataset)
    else:
        raise WarpMetricsError("evaluate needs --dataset or --corpus")
    summary = run_evaluate(config, layout)
    return 1 if summary["failures"] else 0, summary


def build_predictor(spec):
    from .pipeline import command_predictor, file_predictor

    kind = spec.get("kind", "file")
    if kind == "file":
        return file_predictor(spec["template"])
    if kind == "command":
        return command_predictor(spec["command"], serialize=spec.get("serialize", True))
    if kind == "oracle":
        return _SidecarOracle(spec["template"])
    raise WarpMetricsError(f"unknown predictor kind {kind!r}")


class _SidecarOracle:
    """Oracle predictor reading ``{"warp": ..., "ref_shape": [H, W]}`` per image
    id.  ``ref_shape`` defaults to the size of the uncropped image, which the
    preprocessing loop always presents first."""

    def __init__(self, template):
        self.template = template
        self._root_shapes = {}

    def predict(self, image):
        from .errors import PredictorError
        from .pipeline import oracle_predictor
        from .warps import WarpSpec

        path = Path(self.template.format(id=image.id))
        try:
            meta = json.loads(path.read_text())
            spec = WarpSpec.from_dict(meta["warp"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise PredictorError(f"cannot read oracle sidecar {path}: {exc}", image.id) from exc
        if image.origin is None:
            self._root_shapes[image.id] = image.shape
        if "ref_shape" in meta:
            ref_shape = tuple(meta["ref_shape"])
        elif image.id in self._root_shapes:
            ref_shape = self._root_shapes[image.id]
        else:
            raise PredictorError("oracle sidecar lacks ref_shape for a cropped image", image.id)
        return oracle_predictor(spec, ref_shape).predict(image)


def _dewarp_task(args):
    path, config = args
    from .pipeline import dewarp_with_axis_alignment

    out = Path(config.out_dir)
    stem = Path(path).stem
    try:
        image = io.read_image(path, id=stem)
        predictor = build_predictor(config.predictor)
        dewarped, grid, report = dewarp_with_axis_alignment(image, predictor, config.rounds, config.margin)
        io.write_image(out / f"{stem}.png", dewarped)
        io.write_grid(out / f"{stem}.aagrid", grid, image_size=image.shape)
        rep = report.to_dict()
        rep.update(image_id=stem, fingerprint=config.fingerprint(), version=__version__)
        io.write_json(out / f"{stem}.report.json", rep)
        return stem, None
    except (WarpMetricsError, OSError, ValueError) as exc:
        return stem, f"{type(exc).__name__}: {exc}"


def cmd_dewarp(config, inputs):
    from .report import map_ordered, write_run_info

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in map(Path, inputs):
        if p.is_dir():
            paths.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in (".png", ".jpg", ".jpeg")))
        else:
            paths.append(p)
    results = sorted(map_ordered(_dewarp_task, [(str(p), config) for p in paths], config.jobs))
    failures = [{"stem": s, "reason": e} for s, e in results if e is not None]
    summary = {"fingerprint": config.fingerprint(), "version": __version__,
               "processed": [s for s, e in results if e is None], "failures": failures}
    io.write_json(out / "dewarp_summary.json", summary)
    write_config(out / "config.json", config)
    write_run_info(out, "dewarp")
    return 1 if failures else 0, summary


def cmd_heatmap(config, gt_path, dewarped_path=None, flow_path=None):
    from .flow import canonicalize_pair, estimate_sift_flow, resize_image
    from .heatmap import render_heatmaps
    from .metrics import aad

    gt = io.read_image(gt_path)
    if flow_path is not None:
        flow = io.read_flow(flow_path)
        if flow.shape != gt.shape:
            raise WarpMetricsError(f"flow {flow.shape} does not match gt image {gt.shape}")
        background = io.read_image(dewarped_path) if dewarped_path else gt
        if background.shape != gt.shape:
            background = resize_image(background, gt.shape)
        y = gt
    elif dewarped_path is not None:
        y, background = canonicalize_pair(gt, io.read_image(dewarped_path), config.canonical_max_side)
        flow = estimate_sift_flow(y, background, config.sift)
    else:
        raise WarpMetricsError("heatmap needs --dewarped or --flow")
    result = aad(y, flow, config.aad)
    hm = config.heatmap
    info = render_heatmaps(result, background, config.out_dir, hm.alpha, hm.colormap, hm.percentile)
    info.update(aad=result.aad, aad_h=result.aad_h, aad_v=result.aad_v, fingerprint=config.fingerprint(),
                version=__version__, flow_source="imported" if flow_path else "estimated")
    io.write_json(Path(config.out_dir) / "heatmap.json", info)
    return 0, info


def cmd_robustness(config):
    from .robustness import run_robustness

    summary = run_robustness(config)
    summary.pop("records")
    summary.pop("cross_rows")
    return 0, summary


def cmd_synth(config):
    from . import synth

    rc = config.robustness
    root = Path(config.out_dir)
    base = synth.make_page(tuple(rc.size), seed=rc.page_seed)
    for s in rc.sets:
        setting = synth.DisturbanceSetting.preset(s, seed=config.seed, amplitude_start=rc.amplitude_start,
                                                  amplitude_stop=rc.amplitude_stop)
        synth.write_corpus(root, base, setting, synth.make_robustness_corpus(base, setting, rc.count))
    return 0, {"corpus": str(root), "sets": list(rc.sets), "count": rc.count}


def compute_losses(pred, gt, pred3d=None, gt3d=None, image=None, gt_image=None, weights=None,
                   reduction="sum"):
    """All loss components and their weighted total, as a dict."""
    from .losses import LossWeights, axis_aligned_loss_from_prediction, l1_grid_loss, ssim_loss, total_loss

    weights = weights or LossWeights()
    P, P_gt = Grid2D(pred), Grid2D(gt)
    if P.shape != P_gt.shape:
        raise WarpMetricsError(f"grid shapes differ: {P.shape} vs {P_gt.shape}")
    Q_gt = make_uniform_uv_grid(*P_gt.shape)
    al = axis_aligned_loss_from_prediction(P, P_gt, Q_gt, reduction)
    parts = {"l2d": l1_grid_loss(P, P_gt), "l_hor": al.l_hor, "l_ver": al.l_ver, "l_al": al.l_al,
             "l3d": None, "l_ssim": None}
    if (pred3d is None) != (gt3d is None):
        raise WarpMetricsError("give both 3D grids or neither")
    if pred3d is not None:
        parts["l3d"] = l1_grid_loss(pred3d, gt3d)
    if (image is None) != (gt_image is None):
        raise WarpMetricsError("give both images or neither")
    if image is not None:
        parts["l_ssim"] = ssim_loss(image, gt_image)
    parts["l_all"] = total_loss({k: v for k, v in parts.items() if v is not None}, weights)
    parts["weights"] = weights.to_dict()
    parts["reduction"] = reduction
    return parts


def cmd_loss(config, pred, gt, pred3d=None, gt3d=None, image=None, gt_image=None, reduction="sum"):
    def grid(path):
        return None if path is None else io.read_grid(path).points

    def img(path):
        return None if path is None else io.read_image(path)

    out = compute_losses(grid(pred), grid(gt), grid(pred3d), grid(gt3d), img(image), img(gt_image),
                         config.loss_weights, reduction)
    out.update(fingerprint=config.fingerprint(), version=__version__)
    return 0, out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _global_flags(suppress):
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="TOML or JSON run configuration")
    p.add_argument("--seed", type=int, default=default, help="master seed")
    p.add_argument("--jobs", type=int, default=default, help="worker processes (default: logical cores)")
    p.add_argument("--out-dir", default=default, help="output directory")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="warpmetrics", parents=[_global_flags(False)],
                                     description="Document dewarping evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(True)]

    p = sub.add_parser("evaluate", parents=common, help="metrics over a dataset directory or synthetic corpus")
    p.add_argument("--dataset", help="root with distorted/ and gt/")
    p.add_argument("--corpus", help="synthetic corpus root (pairs samples with base.png)")
    p.add_argument("--flow-source", choices=("gt", "estimate", "import"))
    p.add_argument("--metrics", help=f"comma-separated subset of {','.join(METRICS)}")
    p.add_argument("--max-side", type=int, help="canonical resolution (longest side)")

    p = sub.add_parser("dewarp", parents=common, help="dewarp images with axis-alignment preprocessing")
    p.add_argument("inputs", nargs="+", help="images or directories")
    p.add_argument("--rounds", type=int)
    p.add_argument("--margin", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid-template", help="file predictor, e.g. grids/{id}.aagrid")
    g.add_argument("--predictor-command", help="external predictor: <cmd> <image> <grid>")
    g.add_argument("--oracle-template", help="oracle predictor reading warp sidecars, e.g. corpus/Set1/{id}.json")

    p = sub.add_parser("heatmap", parents=common, help="AAD / AAD_H / AAD_V overlays")
    p.add_argument("--gt", required=True)
    p.add_argument("--dewarped")
    p.add_argument("--flow", help="AAFLOW1 file; skips flow estimation")
    p.add_argument("--alpha", type=float)
    p.add_argument("--colormap")
    p.add_argument("--percentile", type=float)

    p = sub.add_parser("robustness", parents=common, help="gt-flow vs estimated-flow metric study")
    p.add_argument("--count", type=int)
    p.add_argument("--sets", help="comma-separated subset of Set1,Set2,Set3")
    p.add_argument("--flow-source", choices=("gt", "estimate"))

    p = sub.add_parser("synth", parents=common, help="write a synthetic robustness corpus")
    p.add_argument("--count", type=int)
    p.add_argument("--sets")
    p.add_argument("--size", help="HxW, e.g. 256x256")

    p = sub.add_parser("loss", parents=common, help="loss components of a predicted grid")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred-3d")
    p.add_argument("--gt-3d")
    p.add_argument("--image", help="dewarped image for the SSIM term")
    p.add_argument("--gt-image")
    p.add_argument("--reduction", choices=("sum", "mean"), default="sum")
    for name in ("alpha", "beta", "gamma", "lam"):
        p.add_argument(f"--{name}", type=float)
    return parser


def resolve_config(args):
    from dataclasses import replace

    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    config = config.updated(seed=args.seed, jobs=args.jobs, out_dir=args.out_dir)
    cmd = args.command
    if cmd == "evaluate":
        config = config.updated(dataset=args.dataset, corpus=args.corpus, flow_source=args.flow_source,
                                canonical_max_side=args.max_side,
                                metrics=tuple(args.metrics.split(",")) if args.metrics else None)
    elif cmd == "dewarp":
        config = config.updated(rounds=args.rounds, margin=args.margin)
        if args.grid_template:
            config = replace(config, predictor={"kind": "file", "template": args.grid_template})
        elif args.predictor_command:
            config = replace(config, predictor={"kind": "command", "command": args.predictor_command})
        elif args.oracle_template:
            config = replace(config, predictor={"kind": "oracle", "template": args.oracle_template})
    elif cmd == "heatmap":
        hm = config.heatmap
        config = replace(config, heatmap=replace(hm, **{k: v for k, v in (
            ("alpha", args.alpha), ("colormap", args.colormap), ("percentile", args.percentile)) if v is not None}))
    elif cmd in ("robustness", "synth"):
        rc = config.robustness
        changes = {}
        if args.count is not None:
            changes["count"] = args.count
        if args.sets:
            changes["sets"] = tuple(args.sets.split(","))
        if cmd == "synth" and args.size:
            h, w = args.size.lower().split("x")
            changes["size"] = (int(h), int(w))
        config = replace(config, robustness=replace(rc, **changes))
        if cmd == "robustness":
            config = config.updated(flow_source=args.flow_source)
    elif cmd == "loss":
        lw = config.loss_weights
        config = replace(config, loss_weights=replace(lw, **{k: getattr(args, k) for k in (
            "alpha", "beta", "gamma", "lam") if getattr(args, k) is not None}))
    return config


def run(argv=None):
    """Parse ``argv`` and run; returns ``(exit_code, result dict)``."""
    args = build_parser().parse_args(argv)
    config = resolve_config(args)
    cmd = args.command
    if cmd == "evaluate":
        return cmd_evaluate(config)
    if cmd == "dewarp":
        return cmd_dewarp(config, args.inputs)
    if cmd == "heatmap":
        return cmd_heatmap(config, args.gt, args.dewarped, args.flow)
    if cmd == "robustness":
        return cmd_robustness(config)
    if cmd == "synth":
        return cmd_synth(config)
    return cmd_loss(config, args.pred, args.gt, args.pred_3d, args.gt_3d, args.image, args.gt_image,
                    args.reduction)


def main(argv=None):
    try:
        code, result = run(argv)
    except WarpMetricsError as exc:
        print(f"warpmetrics: error: {exc}", file=sys.stderr)
        return 2
    print(io.dumps(result, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
