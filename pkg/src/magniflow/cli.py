"""Command-line surface: data generation, noise fitting, training, magnification, evaluation.

Exit codes are a stable scripting contract: 0 success, 2 user/config/data
error, 3 checkpoint/state error. Every command is deterministic for a fixed
seed; the MAGNIFLOW_SEED environment variable overrides the seed from any
config file or flag.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import datagen, report
from .config import REGISTRY, load_config
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DegenerateFitError,
    EmptyMaskError,
    FlowFormatError,
)
from .flowcore import (
    FlowField,
    MetricReport,
    estimate_flow,
    flow_metrics,
    flow_to_color,
    image_metrics,
    list_flo,
    read_flo,
    read_video,
    write_flo,
    write_ppm,
    write_video,
)
from .magnifier import MagnifierModel, load_magnifier, make_schedule, train_magnifier
from .magnifier.training import RealSceneFlowSource, SyntheticFlowSource
from .pipeline import magnify_directory
from .synthesis import (
    FramePairSource,
    StyleExtractor,
    SynthesisModel,
    load_synthesizer,
    train_synthesizer,
)

EXIT_OK = 0
EXIT_USER = 2
EXIT_STATE = 3

_USER_ERRORS = (ConfigError, ContractError, DegenerateFitError, EmptyMaskError, FlowFormatError)


# ---- config plumbing ----------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Every registry key becomes a --key flag; --config reads a file first."""
    parser.add_argument("--config", metavar="FILE", help="key = value settings file")
    group = parser.add_argument_group("config overrides")
    for key in REGISTRY:
        group.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="V", help=argparse.SUPPRESS)


def _config_from(args) -> "RunConfig":
    overrides = {}
    for key in REGISTRY:
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def _dataset_config(cfg) -> datagen.DatasetConfig:
    return datagen.DatasetConfig(
        width=cfg["width"],
        height=cfg["height"],
        regions=cfg["regions"],
        segments=cfg["segments"],
        m_min=cfg["m_min"],
        m_max=cfg["m_max"],
        alpha_min=cfg["alpha_min"],
        alpha_max=cfg["alpha_max"],
        scale_min=cfg["scale_min"],
        scale_max=cfg["scale_max"],
        noise_mu=cfg["noise_mu"],
        noise_sigma=cfg["noise_sigma"],
        noise_blur_sigma=cfg["noise_blur_sigma"],
    )


def _require_checkpoint(path) -> str:
    if not os.path.isfile(path):
        raise CheckpointError(f"{path}: checkpoint not found")
    return path


def _fresh_out_dir(path) -> str:
    """Create the output directory; refuse to reuse a non-empty one."""
    if os.path.exists(path):
        if not os.path.isdir(path):
            raise ContractError(f"{path}: exists and is not a directory")
        if os.listdir(path):
            raise ContractError(f"{path}: not empty, refusing to overwrite")
    os.makedirs(path, exist_ok=True)
    return str(path)


# ---- commands -----------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _config_from(args)
    dataset_cfg = _dataset_config(cfg)
    manifest_path = datagen.generate_dataset(
        args.count, dataset_cfg, cfg["seed"], args.out, workers=args.workers
    )
    manifest = datagen.load_manifest(manifest_path)
    samples = manifest["samples"]
    alphas = np.asarray([s["alpha"] for s in samples])
    coverage = np.asarray([s["coverage"] for s in samples])
    counts, edges = np.histogram(alphas, bins=10, range=(cfg["alpha_min"], cfg["alpha_max"]))
    print(f"wrote {len(samples)} samples to {args.out}")
    print(
        f"alpha histogram over [{edges[0]:g}, {edges[-1]:g}], 10 bins: "
        + " ".join(str(int(c)) for c in counts)
    )
    print(f"mean mask coverage: {coverage.mean():.4f}")
    return EXIT_OK


def cmd_fit_noise(args) -> int:
    cfg = _config_from(args)
    frames = read_video(args.frames)
    if len(frames) < 2:
        raise ContractError(f"need at least 2 frames, got {len(frames)}")
    pooled = []
    for i, frame in enumerate(frames):
        rng = np.random.default_rng(np.random.SeedSequence([cfg["seed"], i]))
        noisy = datagen.simulate_photon_noise(frame, args.strength, rng)
        mags = estimate_flow(frame, noisy).magnitude()
        pooled.append(mags[mags > 0])
    pooled = np.concatenate(pooled) if pooled else np.empty(0)
    if pooled.size < 2:
        raise DegenerateFitError(
            "noise-induced flow is all zero; nothing to fit (is strength 0?)"
        )
    mu, sigma = datagen.fit_lognormal_mle(pooled)
    print(f"mu = {mu:.6f}")
    print(f"sigma = {sigma:.6f}")
    return EXIT_OK


def _load_scene_pairs(data_dir) -> list:
    """(frames, flows) per scene; flows come from disk or the flow estimator.

    A scene directory holds frames/ plus optionally flows/ with one .flo per
    frame after the first (against frame 0). A directory whose subdirectories
    are scenes loads them all. Missing flows are estimated from the frames,
    matching the image-pair supervision route.
    """
    if os.path.isdir(os.path.join(data_dir, "frames")):
        scene_dirs = [data_dir]
    else:
        scene_dirs = sorted(
            os.path.join(data_dir, name)
            for name in os.listdir(data_dir)
            if os.path.isdir(os.path.join(data_dir, name, "frames"))
        )
    if not scene_dirs:
        raise ContractError(f"{data_dir}: no scene directories with a frames/ subdirectory")
    scenes = []
    for scene in scene_dirs:
        frames = read_video(os.path.join(scene, "frames"))
        if len(frames) < 2:
            raise ContractError(f"{scene}: need at least 2 frames, got {len(frames)}")
        zero = np.zeros((frames[0].height, frames[0].width))
        flow_dir = os.path.join(scene, "flows")
        if os.path.isdir(flow_dir):
            paths = list_flo(flow_dir)
            if len(paths) != len(frames) - 1:
                raise ContractError(
                    f"{scene}: {len(frames)} frames need {len(frames) - 1} .flo files, "
                    f"got {len(paths)}"
                )
            flows = [FlowField(u=zero, v=zero)] + [read_flo(p) for p in paths]
        else:
            flows = [FlowField(u=zero, v=zero)] + [
                estimate_flow(frames[0], frames[t]) for t in range(1, len(frames))
            ]
        scenes.append((frames, flows))
    return scenes


def cmd_train(args) -> int:
    cfg = _config_from(args)
    resume = _require_checkpoint(args.resume) if args.resume else None
    if args.which == "dmm":
        model = MagnifierModel(
            widths=cfg["dmm_widths"],
            k_terms=cfg["k_terms"],
            alpha_max=cfg["alpha_max"],
            seed=cfg["seed"],
        )
        schedule = make_schedule(cfg["t_count"], cfg["f_max"])
        sources = [SyntheticFlowSource(args.data)]
        if args.scenes:
            sources.append(
                RealSceneFlowSource(_load_scene_pairs(args.scenes), alpha_max=cfg["alpha_max"])
            )
        result = train_magnifier(
            model,
            schedule,
            sources,
            steps=cfg["steps"],
            batch_size=cfg["batch_size"],
            lr=cfg["lr"],
            weight_decay=cfg["weight_decay"],
            seed=cfg["seed"],
            out_dir=args.out,
            log_every=cfg["log_every"],
            eval_every=cfg["eval_every"],
            resume_from=resume,
        )
    else:
        if args.scenes:
            raise ConfigError("--scenes applies only to dmm training")
        model = SynthesisModel(widths=cfg["fvs_widths"], seed=cfg["seed"])
        extractor = StyleExtractor(seed=cfg["style_seed"])
        sources = [FramePairSource(_load_scene_pairs(args.data))]
        result = train_synthesizer(
            model,
            extractor,
            sources,
            steps=cfg["steps"],
            batch_size=cfg["batch_size"],
            lr=cfg["lr"],
            weight_decay=cfg["weight_decay"],
            lam_l1=cfg["lam_l1"],
            lam_style=cfg["lam_style"],
            seed=cfg["seed"],
            out_dir=args.out,
            log_every=cfg["log_every"],
            eval_every=cfg["eval_every"],
            resume_from=resume,
        )
    print(
        f"trained {args.which} to step {result.steps_run}; "
        f"final loss {result.final_loss:.6f}"
    )
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"loss csv: {result.loss_csv}")
    return EXIT_OK


def cmd_magnify(args) -> int:
    cfg = _config_from(args)
    magnifier, schedule, _ = load_magnifier(_require_checkpoint(args.dmm))
    synthesizer, _, _ = load_synthesizer(_require_checkpoint(args.fvs))
    flo_paths = None if args.flow_source == "internal" else list_flo(args.flow_source)
    out_dir = _fresh_out_dir(args.out)
    result, frame_count = magnify_directory(
        args.frames,
        args.alpha,
        magnifier,
        schedule,
        synthesizer,
        mode=args.mode,
        flo_paths=flo_paths,
        sample_steps=cfg["sample_steps"],
        seed=cfg["seed"],
    )
    write_video(out_dir, result.frames, start_index=2)
    for k in range(len(result)):
        idx = k + 2
        write_flo(os.path.join(out_dir, f"cond_{idx:06d}.flo"), result.cond_flows[k])
        write_flo(os.path.join(out_dir, f"mag_{idx:06d}.flo"), result.mag_flows[k])
        write_ppm(os.path.join(out_dir, f"cond_{idx:06d}.ppm"), flow_to_color(result.cond_flows[k]))
        write_ppm(os.path.join(out_dir, f"mag_{idx:06d}.ppm"), flow_to_color(result.mag_flows[k]))
    cond_mean = float(np.mean([f.magnitude().mean() for f in result.cond_flows]))
    mag_mean = float(np.mean([f.magnitude().mean() for f in result.mag_flows]))
    print(
        f"magnified {frame_count} frames -> {len(result)} outputs "
        f"(alpha = {args.alpha:g}, mode = {args.mode})"
    )
    print(f"mean |flow|: conditional {cond_mean:.4f} px, magnified {mag_mean:.4f} px")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    have_frames = args.pred is not None or args.ref is not None
    have_flows = args.pred_flows is not None or args.gt_flows is not None
    if have_frames and (args.pred is None or args.ref is None):
        raise ConfigError("frame evaluation needs both --pred and --ref")
    if have_flows and (args.pred_flows is None or args.gt_flows is None):
        raise ConfigError("flow evaluation needs both --pred-flows and --gt-flows")
    if not have_frames and not have_flows:
        raise ConfigError("nothing to evaluate: give --pred/--ref and/or --pred-flows/--gt-flows")

    per_psnr, per_ssim, per_epe = [], [], []
    if have_frames:
        pred = read_video(args.pred)
        ref = read_video(args.ref)
        if len(pred) != len(ref):
            raise ContractError(
                f"frame count mismatch: {len(pred)} predictions vs {len(ref)} references"
            )
        for p, r in zip(pred, ref):
            s_psnr, s_ssim = image_metrics(p, r)
            per_psnr.append(s_psnr)
            per_ssim.append(s_ssim)
    if have_flows:
        pred_paths = list_flo(args.pred_flows)
        gt_paths = list_flo(args.gt_flows)
        if len(pred_paths) != len(gt_paths):
            raise ContractError(
                f"flow count mismatch: {len(pred_paths)} predictions vs {len(gt_paths)} references"
            )
        for pp, gp in zip(pred_paths, gt_paths):
            per_epe.append(flow_metrics(read_flo(pp), read_flo(gp)))

    metric_report = MetricReport(
        epe_mean=float(np.mean(per_epe)) if per_epe else float("nan"),
        psnr=float(np.mean(per_psnr)) if per_psnr else float("nan"),
        ssim=float(np.mean(per_ssim)) if per_ssim else float("nan"),
        per_frame_epe=per_epe,
        per_frame_psnr=per_psnr,
        per_frame_ssim=per_ssim,
    )
    paths = report.write_metric_report(args.out, metric_report)
    print(report.summarize(metric_report))
    print(f"report: {paths['csv']}")
    print(f"figure: {paths['figure']}")
    return EXIT_OK


# ---- parser -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magniflow",
        description="Motion magnification: generate data, train, magnify, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a conditional/target flow dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--workers", type=int, default=1, help="parallel writers (same output)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit-noise", help="fit the log-normal noise-flow magnitude model")
    p.add_argument("--frames", required=True, help="directory of clean frames")
    p.add_argument("--strength", type=float, required=True, help="photon noise strength")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit_noise)

    p = sub.add_parser("train", help="train the flow magnifier or the frame synthesizer")
    p.add_argument("which", choices=("dmm", "fvs"), help="which model to train")
    p.add_argument("--data", required=True, help="dataset dir (dmm) or scene dir (fvs)")
    p.add_argument("--out", required=True, help="run directory for checkpoint + loss csv")
    p.add_argument("--scenes", help="optional rendered scenes for estimated-flow batches (dmm)")
    p.add_argument("--resume", help="checkpoint to continue from")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("magnify", help="magnify motion in a frame directory")
    p.add_argument("--frames", required=True, help="input frame directory (never modified)")
    p.add_argument(
        "--alpha",
        type=float,
        required=True,
        help="magnification factor; alpha = 1 reproduces the input motion",
    )
    p.add_argument("--mode", choices=("static", "dynamic"), default="static")
    p.add_argument("--dmm", required=True, help="flow magnifier checkpoint")
    p.add_argument("--fvs", required=True, help="frame synthesizer checkpoint")
    p.add_argument("--out", required=True, help="fresh output directory")
    p.add_argument(
        "--flow-source",
        default="internal",
        help="'internal' to estimate flows, or a directory of N-1 .flo files",
    )
    _add_config_flags(p)
    p.set_defaults(func=cmd_magnify)

    p = sub.add_parser("evaluate", help="EPE / PSNR / SSIM report for frames and flows")
    p.add_argument("--pred", help="predicted frame directory")
    p.add_argument("--ref", help="reference frame directory")
    p.add_argument("--pred-flows", dest="pred_flows", help="predicted .flo directory")
    p.add_argument("--gt-flows", dest="gt_flows", help="ground-truth .flo directory")
    p.add_argument("--out", required=True, help="report directory (csv + figure)")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
