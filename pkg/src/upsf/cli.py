"""Command-line surface: generation, training, evaluation, rendering.

Every subcommand draws all randomness from its ``--seed`` flag, loads the
array configuration from ``--config`` (`key = value` lines, MHz/mm units;
``UPSF_*`` environment variables override), and writes its artifacts under
``--out``, including a ``run_report.json`` recording the seed, a git-style
blob hash of the effective config, and content hashes of consumed inputs.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import metrics as metrics_mod
from .aberration import ABERRATION_LEVELS, generate_phase_screen, simulate_psf
from .core import (
    ConfigError,
    PatchKind,
    RealPatch,
    SimConfig,
    SimulationError,
    config_to_text,
    grid_from_config,
    load_config,
)
from .nn import TrainConfig, build_model, save_checkpoint, train
from .oracle import run_recovery_check
from .sigproc import bmode
from .speckle import load_manifest, make_dataset
from .tensorfile import TensorFileError, read_tensor, write_pgm, write_tensor

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _git_blob_sha1(payload: bytes) -> str:
    return hashlib.sha1(b"blob %d\x00" % len(payload) + payload).hexdigest()


def _file_sha1(path: str) -> str:
    with open(path, "rb") as fh:
        return _git_blob_sha1(fh.read())


def _write_run_report(out_dir: str, seed, cfg: SimConfig, inputs: dict[str, str], extra: dict | None = None):
    os.makedirs(out_dir, exist_ok=True)
    report = {
        "seed": seed,
        "config_hash": _git_blob_sha1(config_to_text(cfg).encode()),
        "input_hashes": {name: _file_sha1(path) for name, path in inputs.items()},
    }
    if extra:
        report.update(extra)
    with open(os.path.join(out_dir, "run_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)


def _load_rf_patch(path: str, cfg: SimConfig) -> RealPatch:
    data = read_tensor(path).astype(np.float64)
    if data.ndim != 2:
        raise ValueError(f"{path}: expected a 2D tensor, got shape {data.shape}")
    grid = grid_from_config(cfg, nx=data.shape[1], nz=data.shape[0])
    return RealPatch(grid=grid, kind=PatchKind.RF, data=data)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_screen(args) -> int:
    cfg = load_config(args.config)
    profile = generate_phase_screen(cfg, args.seed)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "screen.ut")
    write_tensor(out_path, profile.delays)
    if args.pgm:
        phases = profile.phases(cfg.fc)
        span = max(np.max(np.abs(phases)), 1e-30)
        img = (phases[None, :] / span + 1.0) * 30.0  # map [-span, span] -> [0, 60]
        write_pgm(os.path.join(args.out, "screen.pgm"), img)
    _write_run_report(args.out, args.seed, cfg, {}, {"command": "screen", "files": ["screen.ut"]})
    print(out_path)
    return EXIT_OK


def _cmd_psf(args) -> int:
    cfg = load_config(args.config)
    if args.level is not None:
        cfg = cfg.with_max_phase_error(args.level)
    grid = grid_from_config(cfg, nx=args.nx, nz=args.nz)
    profile = generate_phase_screen(cfg, args.seed)
    psf = simulate_psf(cfg, profile, grid)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "psf.ut")
    write_tensor(out_path, psf.data)
    if args.pgm:
        db = bmode(psf, cfg.dynamic_range)
        write_pgm(os.path.join(args.out, "psf.pgm"), db.data, cfg.dynamic_range)
    _write_run_report(args.out, args.seed, cfg, {}, {"command": "psf", "files": ["psf.ut"]})
    print(out_path)
    return EXIT_OK


def _cmd_dataset(args) -> int:
    cfg = load_config(args.config)
    grid = grid_from_config(cfg, nx=args.nx, nz=args.nz)
    manifest = make_dataset(cfg, grid, args.n, args.seed, workers=args.workers, out_dir=args.out)
    _write_run_report(
        args.out, args.seed, cfg, {},
        {"command": "dataset", "n_pairs": manifest.n_pairs, "complete": manifest.complete},
    )
    print(os.path.join(args.out, "manifest.json"))
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.dataset)
    if not manifest.complete:
        raise ValueError(f"dataset {args.dataset} is marked incomplete")
    psfs = []
    for entry in manifest.entries:
        psfs.append(read_tensor(os.path.join(args.dataset, entry["psf"]["path"])).astype(np.float64))
    if not psfs:
        raise ValueError(f"dataset {args.dataset} has no pairs")

    model = build_model(args.domain, seed=args.seed)
    train_cfg = TrainConfig(epochs=args.epochs, seed=args.seed, loss=args.loss, lr0=args.lr0)
    history = train(model, psfs, train_cfg, out_dir=args.out if args.checkpoints else None)
    save_checkpoint(model, os.path.join(args.out, "model"))
    with open(os.path.join(args.out, "loss_curve.json"), "w", encoding="utf-8") as fh:
        json.dump(history, fh)
    _write_run_report(
        args.out, args.seed, cfg,
        {"dataset_manifest": os.path.join(args.dataset, "manifest.json")},
        {"command": "train", "loss": args.loss, "domain": args.domain, "epochs": args.epochs,
         "final_loss": history[-1]["loss"] if history else None},
    )
    print(os.path.join(args.out, "model"))
    return EXIT_OK


def _match_pairs(pred: str, target: str) -> list[tuple[str, str, str]]:
    """Return (name, pred_path, target_path) pairs for files or directories."""
    if os.path.isfile(pred) and os.path.isfile(target):
        return [(os.path.basename(pred), pred, target)]
    if os.path.isdir(pred) and os.path.isdir(target):
        names = sorted(
            set(n for n in os.listdir(pred) if n.endswith(".ut"))
            & set(n for n in os.listdir(target) if n.endswith(".ut"))
        )
        if not names:
            raise ValueError(f"no common .ut files between {pred} and {target}")
        return [(n, os.path.join(pred, n), os.path.join(target, n)) for n in names]
    raise ValueError("--pred and --target must both be files or both be directories")


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    pairs = _match_pairs(args.pred, args.target)
    reports = []
    for name, pred_path, target_path in pairs:
        pred = _load_rf_patch(pred_path, cfg)
        target = _load_rf_patch(target_path, cfg)
        rep = metrics_mod.report_for(pred, target, cfg.dynamic_range)
        reports.append({"pair": name, **rep.to_dict()})
    keys = ["ssim", "lbpd", "iou1", "iou2", "iou3", "iou_mean", "sidelobe_ratio"]
    aggregate = {k: float(np.mean([r[k] for r in reports])) for k in keys}
    payload = {"pairs": reports, "aggregate": aggregate, "n_pairs": len(reports)}
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval_report.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
        inputs = {f"pred:{n}": p for n, p, _ in pairs}
        inputs.update({f"target:{n}": t for n, _, t in pairs})
        _write_run_report(args.out, None, cfg, inputs, {"command": "eval"})
    return EXIT_OK


def _cmd_render(args) -> int:
    cfg = load_config(args.config)
    data = read_tensor(args.input).astype(np.float64)
    if data.ndim != 2:
        raise ValueError(f"{args.input}: expected a 2D tensor, got shape {data.shape}")
    if args.kind == "rf":
        patch = _load_rf_patch(args.input, cfg)
        db = bmode(patch, cfg.dynamic_range).data
    else:
        db = data
    write_pgm(args.output, db, cfg.dynamic_range)
    print(args.output)
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    cfg = load_config(args.config)
    results = run_recovery_check(cfg, ABERRATION_LEVELS, seed=args.seed, eps=args.eps,
                                 nx=args.nx, nz=args.nz)
    all_ok = True
    for res in results:
        ok = res["ssim"] >= 0.98 and res["iou_mean"] >= 0.9
        all_ok &= ok
        print(
            f"level {res['level']:.4f} rad: ssim={res['ssim']:.4f} "
            f"iou_mean={res['iou_mean']:.4f} rel_rms={res['rel_rms']:.2e} "
            f"{'PASS' if ok else 'FAIL'}"
        )
    print("oracle-check:", "PASS" if all_ok else "FAIL")
    return EXIT_OK if all_ok else EXIT_USAGE


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="upsf", description="Ultrasound PSF simulation and estimation laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", default=None, help="key = value config file (MHz/mm units)")
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("screen", help="generate an aberration phase screen")
    common(p)
    p.add_argument("--pgm", action="store_true", help="also render a PGM strip of the profile")
    p.set_defaults(func=_cmd_screen)

    p = sub.add_parser("psf", help="simulate an aberrated PSF")
    common(p)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--nz", type=int, default=256)
    p.add_argument("--level", type=float, default=None, help="max phase error [rad]; default from config")
    p.add_argument("--pgm", action="store_true", help="also render the B-mode PSF as PGM")
    p.set_defaults(func=_cmd_psf)

    p = sub.add_parser("dataset", help="generate a training dataset")
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--nz", type=int, default=64)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("train", help="train a PSF estimator on a dataset")
    common(p)
    p.add_argument("--loss", default="l1_bmode", help="loss kind (l1, l2, ssim, feature, *_bmode)")
    p.add_argument("--domain", choices=("rf", "kspace"), default="rf")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr0", type=float, default=1e-3)
    p.add_argument("--dataset", required=True, help="dataset directory with manifest.json")
    p.add_argument("--checkpoints", action="store_true", help="write per-epoch checkpoints")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score predicted PSFs against targets")
    p.add_argument("--config", default=None)
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", default=None, help="optional output directory for the JSON report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="render a tensor file as 8-bit PGM")
    p.add_argument("--config", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", choices=("rf", "db"), default="rf", help="input interpretation")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("oracle-check", help="generate -> recover -> score pipeline check")
    common(p)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--nx", type=int, default=128)
    p.add_argument("--nz", type=int, default=128)
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ConfigError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TensorFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
