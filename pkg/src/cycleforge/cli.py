"""Command-line entry point (``cycleforge``).

Exit codes: 0 clean, 1 input error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blending import multiband_blend
from .config import CONFIG_ENV, RunConfig, load_config
from .embfile import load_embeddings
from .errors import CycleForgeError
from .imaging import crop_lower_face, read_image, read_mask, write_image
from .losses import FACESHIFTER_WEIGHTS, SIMSWAP_WEIGHTS, LossWeights, cycle_triplet_total, fixer_total, loss_report
from .pipeline import (
    EVAL_TASKS,
    EXIT_INPUT,
    EXIT_OK,
    VALIDATE_TARGETS,
    filter_iqa,
    run_eval,
    run_forge,
    run_manifest,
    setup_logging,
    validate,
)
from .reshaping import colorize_region_map, compute_region_map, reshape_inpaint

LOSS_FIXTURE_FILES = {
    "y": "y.png", "ref": "ref.png",
    "feat_y": "feat_y.npz", "feat_ref": "feat_ref.npz",
    "id_y": "id_y.emb", "id_ref": "id_ref.emb",
    "fix_src": "fix_src.emb", "fix_ref": "fix_ref.emb", "fix_y": "fix_y.emb",
}


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--levels", type=int)
    g.add_argument("--erode-radius", type=int)
    g.add_argument("--iqa-threshold", type=float)
    g.add_argument("--ratio", type=float)
    g.add_argument("--recon-frac", type=float)
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.override(seed=args.seed, workers=args.workers, levels=args.levels,
                        erode_radius=args.erode_radius, iqa_threshold=args.iqa_threshold,
                        ratio=args.ratio, recon_fraction=args.recon_frac)


def cmd_forge(args, cfg: RunConfig) -> int:
    summary = run_forge(args.pairs, args.out, cfg, args.iqa_scores, args.dump_stages)
    _emit(summary.to_json())
    return summary.exit_code


def cmd_blend(args, cfg: RunConfig) -> int:
    out = multiband_blend(read_image(args.target), read_image(args.reenacted), read_mask(args.mask), cfg.blend)
    write_image(args.out, out)
    return EXIT_OK


def cmd_regionmap(args, cfg: RunConfig) -> int:
    labels = compute_region_map(read_mask(args.m_face), read_mask(args.r_face))
    write_image(args.out, colorize_region_map(labels) / 255.0)
    _emit({name: int(np.sum(labels == k)) for k, name in enumerate(("gray", "yellow", "green", "blue"))})
    return EXIT_OK


def cmd_reshape(args, cfg: RunConfig) -> int:
    labels = compute_region_map(read_mask(args.m_face), read_mask(args.r_face))
    write_image(args.out, reshape_inpaint(read_image(args.blended), labels, cfg.inpaint))
    return EXIT_OK


def cmd_manifest(args, cfg: RunConfig) -> int:
    _emit(run_manifest(args.vanilla, args.triplets, args.out, cfg))
    return EXIT_OK


def cmd_filter_iqa(args, cfg: RunConfig) -> int:
    _emit(filter_iqa(args.triplets, args.scores, args.out, cfg.iqa_threshold))
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    _emit(run_eval(args.task, args.a, args.b))
    return EXIT_OK


def _single(path: Path) -> np.ndarray:
    vec = load_embeddings(path).vectors
    if vec.shape[0] != 1:
        raise CycleForgeError(f"{path}: expected exactly one embedding row, found {vec.shape[0]}")
    return vec[0]


def _stack(path: Path) -> list[np.ndarray]:
    with np.load(path) as data:
        return [data[k] for k in data.files]


def cmd_loss(args, cfg: RunConfig) -> int:
    root = Path(args.fixture)
    f = {k: root / v for k, v in LOSS_FIXTURE_FILES.items()}
    if args.weights:
        weights = LossWeights.from_dict(json.loads(Path(args.weights).read_text()))
    else:
        weights = SIMSWAP_WEIGHTS if args.preset == "simswap" else FACESHIFTER_WEIGHTS
    ct = cycle_triplet_total(read_image(f["y"]), read_image(f["ref"]), _stack(f["feat_y"]),
                             _stack(f["feat_ref"]), _single(f["id_y"]), _single(f["id_ref"]), weights)
    has_ref = not args.no_reference
    fx = fixer_total(_single(f["fix_src"]), _single(f["fix_ref"]) if has_ref else None,
                     _single(f["fix_y"]), weights, has_ref)
    _emit(loss_report(ct, fx))
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig) -> int:
    findings = validate(args.target, args.path)
    _emit({"target": args.target, "path": str(args.path), "findings": findings, "clean": not findings})
    return EXIT_OK if not findings else EXIT_INPUT


def cmd_crop_lower(args, cfg: RunConfig) -> int:
    write_image(args.out, crop_lower_face(read_image(args.image), cfg.crop_left, cfg.crop_top, cfg.crop_size))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cycleforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forge", parents=[common], help="synthesize swaps and triplets for a pair list")
    p.add_argument("pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--iqa-scores", help="JSONL of {path, score}; gates each pair")
    p.add_argument("--dump-stages", action="store_true", help="also write the coarse blends m_ab/m_ba")
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("blend", parents=[common], help="multi-band blend one image pair")
    p.add_argument("--target", required=True)
    p.add_argument("--reenacted", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("regionmap", parents=[common], help="colour-coded region map of two face masks")
    p.add_argument("--m-face", required=True)
    p.add_argument("--r-face", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regionmap)

    p = sub.add_parser("reshape", parents=[common], help="drop and refill the blend-only face bulge")
    p.add_argument("--blended", required=True)
    p.add_argument("--m-face", required=True)
    p.add_argument("--r-face", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reshape)

    p = sub.add_parser("manifest", help="training manifests")
    msub = p.add_subparsers(dest="manifest_command", required=True)
    b = msub.add_parser("build", parents=[common], help="mix vanilla samples with cycle triplets")
    b.add_argument("--vanilla", required=True, help="text file, one image path per line")
    b.add_argument("--triplets", required=True, nargs="+", help="triplets.jsonl index file(s)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_manifest)

    p = sub.add_parser("filter-iqa", parents=[common], help="apply the IQA drop rule to a triplet index")
    p.add_argument("--triplets", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_iqa)

    p = sub.add_parser("eval", parents=[common], help="identity / attribute / distribution metrics")
    p.add_argument("task", choices=EVAL_TASKS)
    p.add_argument("a", help="queries (retrieval), swapped embeddings, or first feature set")
    p.add_argument("b", help="gallery (retrieval), source/target embeddings, or second feature set")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", parents=[common], help="cycle-triplet and fixer losses for a fixture directory")
    p.add_argument("fixture")
    p.add_argument("--weights", help='JSON {"ct": [l1, l2, l3], "fix": [l1, l2]}')
    p.add_argument("--preset", choices=("faceshifter", "simswap"), default="faceshifter")
    p.add_argument("--no-reference", action="store_true", help="reference is not a real image")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("validate", parents=[common], help="check structural invariants of an input file")
    p.add_argument("target", choices=VALIDATE_TARGETS)
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("crop-lower", parents=[common], help="cut the lower-face patch from a 112x112 face")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crop_lower)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (OSError, ValueError, CycleForgeError) as exc:
        print(json.dumps({"level": "error", "event": "input_error", "command": args.command,
                          "error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
