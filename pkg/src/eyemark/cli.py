"""Command-line surface: synth, indicate, pipeline, sweep.

Configuration precedence is built-in defaults, then ``--config`` file
(plain-text ``key = value``), then explicit flags. Every command is
deterministic for a given (inputs, config, seed) and writes outputs
atomically, so re-runs byte-match. Exit codes: 0 success, 1 partial
(some images failed), 2 fatal.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as eio
from . import labels as L
from .densify import (
    densify_pupil_iris,
    eye_mask_from_indications,
    masks_from_ellipses,
    rasterize_ellipse,
)
from .evaluate import evaluate, report_json, report_text
from .exceptions import EyemarkError, FitError, PupilNotFoundError
from .eye_region import (
    EyeRegionParams,
    gstd_map,
    initial_eye_indication,
    refine_eye_indications,
)
from .locate import locate_pupil_point
from .oracle import make_oracle
from .pipeline import Schedule, derive_seed, run_single_image
from .pupil_iris import PupilIrisParams, generate_pupil_iris_indications
from .rays import RayFan
from .render import PROFILES, write_corpus


@dataclass
class PipelineConfig:
    """Every knob the commands accept, with the published defaults."""

    k: int = 10            # vote window side
    agreement: float = 0.8
    tau: int = 3           # ray pulse width
    rays: int = 360
    kstar: int = 5         # smoothness window side
    th_std: float = 5.0    # smoothness threshold
    smooth_fraction: float = 0.3
    grid_n: int = 10       # prompt grid resolution
    eps: int = 30          # curvature filter neighborhood
    th_d: float = 20.0     # curvature threshold
    rounds: int = 4
    e_start: int | None = None
    e_step: int = 1
    oracle: str | None = None
    prior_filter: bool = True
    seed: int = 0
    jobs: int = 1

    def pii_params(self) -> PupilIrisParams:
        return PupilIrisParams(window_side=self.k, agreement=self.agreement,
                               pulse_width=self.tau, n_rays=self.rays)

    def ei_params(self) -> EyeRegionParams:
        return EyeRegionParams(gstd_window=self.kstar, gstd_threshold=self.th_std,
                               smooth_fraction=self.smooth_fraction,
                               grid_size=self.grid_n, neighborhood=self.eps,
                               curvature_threshold=self.th_d)

    def schedule(self) -> Schedule:
        return Schedule(total_rounds=self.rounds, start_round=self.e_start,
                        refresh_interval=self.e_step)


_BOOL_WORDS = {"1": True, "true": True, "yes": True,
               "0": False, "false": False, "no": False}


def _coerce(name: str, raw: str):
    kind = PipelineConfig.__dataclass_fields__[name].type
    text = raw.strip()
    if name in ("e_start", "oracle") and text.lower() in ("", "none"):
        return None
    if kind.startswith("bool"):
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ValueError(f"bad boolean for {name}: {raw!r}") from None
    if kind.startswith("float"):
        return float(text)
    if kind.startswith("int"):
        return int(text)
    return text


def load_config(path) -> dict:
    """Parse a key = value config file into typed overrides."""
    kv = eio.parse_keyvalue_text(Path(path).read_text())
    known = set(PipelineConfig.__dataclass_fields__)
    out = {}
    for key, value in kv.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(args) -> PipelineConfig:
    values = dataclasses.asdict(PipelineConfig())
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for name in PipelineConfig.__dataclass_fields__:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return PipelineConfig(**values)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    g = parser.add_argument_group("overrides")
    g.add_argument("--k", type=int, help="vote window side")
    g.add_argument("--tau", type=int, help="ray pulse width")
    g.add_argument("--kstar", type=int, help="smoothness window side")
    g.add_argument("--th-std", dest="th_std", type=float, help="smoothness threshold")
    g.add_argument("--th-d", dest="th_d", type=float, help="curvature threshold")
    g.add_argument("--eps", type=int, help="curvature neighborhood (rays)")
    g.add_argument("--grid-n", dest="grid_n", type=int, help="prompt grid resolution")
    g.add_argument("--rays", type=int, help="rays in the fan")
    g.add_argument("--rounds", type=int, help="total rounds")
    g.add_argument("--e-start", dest="e_start", type=int, help="first eye-stage round")
    g.add_argument("--e-step", dest="e_step", type=int, help="eye-stage refresh interval")
    g.add_argument("--oracle", help="none | mock | file:<dir> | http(s)://...")
    g.add_argument("--seed", type=int, help="run seed")
    g.add_argument("--jobs", type=int, help="parallel workers over images")


def _config_notes(cfg: PipelineConfig) -> dict:
    notes = dataclasses.asdict(cfg)
    notes["e_start"] = cfg.schedule().start_round
    notes["oracle"] = cfg.oracle or "none"
    return {k: str(v) for k, v in notes.items()}


def _segment_worker(payload):
    """Top-level worker so ProcessPoolExecutor can pickle the call."""
    image_id, image, cfg, oracle = payload
    fallback_rounds: list = []
    try:
        masks = run_single_image(
            image, image_id, cfg.schedule(), oracle=oracle,
            pii_params=cfg.pii_params(), ei_params=cfg.ei_params(),
            seed=cfg.seed, use_prior_filter=cfg.prior_filter,
            fallback_rounds=fallback_rounds,
        )
        return image_id, masks, None, fallback_rounds
    except EyemarkError as exc:
        return image_id, None, f"{type(exc).__name__}: {exc}", fallback_rounds


def segment_corpus(images: dict, cfg: PipelineConfig, oracle):
    """Run the pipeline over a corpus, parallel when cfg.jobs > 1.

    Returns (masks, failures, fallbacks) dicts keyed by image id; results
    are identical regardless of the worker count.
    """
    payloads = [(i, images[i], cfg, oracle) for i in sorted(images)]
    masks, failures, fallbacks = {}, {}, {}
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_segment_worker, payloads))
    else:
        results = [_segment_worker(p) for p in payloads]
    for image_id, mask_set, failure, fell_back in results:
        masks[image_id] = mask_set
        if failure is not None:
            failures[image_id] = failure
        if fell_back:
            fallbacks[image_id] = fell_back
    return masks, failures, fallbacks


def cmd_synth(args) -> int:
    try:
        ids = write_corpus(args.out, args.profile, args.count, args.seed,
                           width=args.width, height=args.height)
    except (OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(ids)} {args.profile} images to {args.out}")
    return 0


def _parse_origin(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected x,y got {text!r}")
    return float(parts[0]), float(parts[1])


def indicate_image(image, cfg: PipelineConfig, oracle, origin=None,
                   seed: int = 0) -> tuple[np.ndarray, dict, list]:
    """Full indication map for one image: radial labels plus eye labels.

    Returns (labels, metadata, warnings). A missing pupil yields the
    all-Ignore map with a warning instead of an error.
    """
    warnings_out: list[str] = []
    meta: dict = {"k": cfg.k, "tau": cfg.tau, "rays": cfg.rays}
    if origin is None:
        try:
            origin = locate_pupil_point(image)
        except PupilNotFoundError as exc:
            warnings_out.append(f"no pupil found ({exc}); writing all-Ignore map")
            return np.zeros(image.shape, dtype=np.uint8), meta, warnings_out
    meta["origin"] = f"{origin[0]:.1f},{origin[1]:.1f}"

    pii = generate_pupil_iris_indications(image, origin, cfg.pii_params())
    labels = np.array(pii.labels, copy=True)
    meta["retained_rays"] = len(pii.retained)

    try:
        pupil_e, iris_e = densify_pupil_iris(pii)
        region = rasterize_ellipse(iris_e, image.shape) | rasterize_ellipse(
            pupil_e, image.shape)
        fan = RayFan(origin, image.shape, n_rays=cfg.rays)
        ei = initial_eye_indication(gstd_map(image, cfg.ei_params()), region,
                                    fan, cfg.ei_params())
        if oracle is not None:
            ei = refine_eye_indications(image, ei, oracle, cfg.ei_params(),
                                        seed=seed, image_id="indicate")
        merge = (labels == L.IGNORE) & (ei.labels != L.IGNORE)
        labels[merge] = ei.labels[merge]
    except (EyemarkError, ValueError) as exc:
        warnings_out.append(f"eye stage skipped: {exc}")
    return labels, meta, warnings_out


def cmd_indicate(args) -> int:
    try:
        cfg = build_config(args)
        origin = _parse_origin(args.origin) if args.origin else None
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        oracle = make_oracle(cfg.oracle, seed=cfg.seed)
    except (EyemarkError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2

    n_failed = 0
    for image_path in args.images:
        stem = Path(image_path).stem
        try:
            image = eio.read_gray(image_path)
            labels, meta, warns = indicate_image(
                image, cfg, oracle, origin=origin,
                seed=derive_seed(cfg.seed, stem, 0))
            for message in warns:
                print(f"warning: {image_path}: {message}", file=sys.stderr)
            eio.write_indication_png(out_dir / f"{stem}.indication.png",
                                     labels, meta)
            eio.write_overlay_png(out_dir / f"{stem}.overlay.png", image, labels)
        except (EyemarkError, OSError, ValueError) as exc:
            n_failed += 1
            print(f"error: {image_path}: {exc}", file=sys.stderr)
    print(f"indicated {len(args.images) - n_failed}/{len(args.images)} images"
          f" into {out_dir}")
    return 1 if n_failed else 0


def cmd_pipeline(args) -> int:
    try:
        cfg = build_config(args)
        from .render import read_corpus

        images, gt_masks = read_corpus(args.corpus)
        gt_eyes = {i: m.eye for i, m in gt_masks.items()} or None
        oracle = make_oracle(cfg.oracle, gt_masks=gt_eyes, seed=cfg.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
    except (EyemarkError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2

    masks, failures, fallbacks = segment_corpus(images, cfg, oracle)
    for image_id, mask_set in masks.items():
        if mask_set is not None:
            eio.write_mask_png(out_dir / "masks" / f"{image_id}.png", mask_set)
    for image_id, reason in sorted(failures.items()):
        print(f"failed: {image_id}: {reason}", file=sys.stderr)

    if gt_masks:
        notes = _config_notes(cfg)
        if fallbacks:
            notes["oracle_fallbacks"] = ",".join(
                f"{i}:r{','.join(map(str, rs))}" for i, rs in sorted(fallbacks.items()))
        try:
            report = evaluate(masks, gt_masks, notes=notes)
        except ValueError as exc:
            print(f"fatal: {exc}", file=sys.stderr)
            return 2
        eio.atomic_write_text(out_dir / "report.txt", report_text(report))
        eio.atomic_write_text(out_dir / "report.json", report_json(report))
        print(report_text(report))
    else:
        print(f"wrote {len(masks) - len(failures)} mask sets (no ground truth,"
              " report skipped)")
    return 1 if failures else 0


def _parse_vary(specs: list[str]) -> list[tuple[str, object]]:
    """Expand --vary name=v1,v2 specs into (name, typed value) rows."""
    rows = []
    for spec in specs:
        name, _, values = spec.partition("=")
        name = name.strip()
        if name not in PipelineConfig.__dataclass_fields__:
            raise ValueError(f"unknown parameter {name!r}")
        if not values:
            raise ValueError(f"no values for {name!r}")
        for raw in values.split(","):
            rows.append((name, _coerce(name, raw)))
    if not rows:
        raise ValueError("empty parameter grid")
    return rows


def cmd_sweep(args) -> int:
    try:
        cfg = build_config(args)
        rows = _parse_vary(args.vary or [])
        from .render import read_corpus

        images, gt_masks = read_corpus(args.corpus)
        if not gt_masks:
            raise ValueError("sweep needs ground-truth masks in the corpus")
    except (EyemarkError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2

    gt_eyes = {i: m.eye for i, m in gt_masks.items()}

    def run_row(row_cfg: PipelineConfig):
        oracle = make_oracle(row_cfg.oracle, gt_masks=gt_eyes, seed=row_cfg.seed)
        masks, failures, _ = segment_corpus(images, row_cfg, oracle)
        report = evaluate(masks, gt_masks)
        return report.means, len(failures)

    results = [("defaults", *run_row(cfg))]
    for name, value in rows:
        row_cfg = dataclasses.replace(cfg, **{name: value})
        results.append((f"{name}={value}", *run_row(row_cfg)))

    lines = [f"{'row':<16}{'pupil':>8}{'iris':>8}{'eye':>8}{'fail':>6}"]
    for label, means, n_failed in results:
        lines.append(f"{label:<16}{means['pupil']:>8.3f}{means['iris']:>8.3f}"
                     f"{means['eye']:>8.3f}{n_failed:>6}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    if args.out:
        eio.atomic_write_text(args.out, table)
    if args.json:
        payload = [{"row": label, "means": means, "failures": n_failed}
                   for label, means, n_failed in results]
        eio.atomic_write_text(args.json, json.dumps(payload, indent=2) + "\n")
    return 1 if any(n for _, _, n in results) else 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eyemark",
        description="Unsupervised eye-region segmentation for NIR images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render a synthetic corpus")
    p_synth.add_argument("--profile", choices=PROFILES, default="clean")
    p_synth.add_argument("--count", type=int, default=50)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--width", type=int, default=320)
    p_synth.add_argument("--height", type=int, default=240)
    p_synth.set_defaults(func=cmd_synth)

    p_ind = sub.add_parser("indicate", help="write indication + overlay PNGs")
    p_ind.add_argument("images", nargs="+", help="input grayscale images")
    p_ind.add_argument("--out", required=True, help="output directory")
    p_ind.add_argument("--origin", help="x,y pupil point override")
    _add_config_flags(p_ind)
    p_ind.set_defaults(func=cmd_indicate)

    p_pipe = sub.add_parser("pipeline", help="segment a corpus end to end")
    p_pipe.add_argument("--corpus", required=True)
    p_pipe.add_argument("--out", required=True)
    _add_config_flags(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    p_sweep = sub.add_parser("sweep", help="hyper-parameter robustness table")
    p_sweep.add_argument("--corpus", required=True)
    p_sweep.add_argument("--vary", action="append",
                         help="name=v1,v2,... (repeatable)")
    p_sweep.add_argument("--out", help="write the table to this file")
    p_sweep.add_argument("--json", help="write JSON rows to this file")
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
