"""Command-line front end.

Subcommands: fit | inpaint | denoise | cloudrm | verify | info. Every task
run writes a bundle into the output directory: the resolved configuration,
the recovered tensor (CFT1), a flat key=value metrics file, the training
history CSV, the evolution log CSV, and the model checkpoint. Exit codes:
0 success, 1 verification failure, 2 usage/config error, 3 I/O error,
4 numerical abort.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import save_model
from .config import ConfigError, RunConfig, dump_config, parse_config
from .evolution import write_evolution_log
from .io import DecodeError, load_png, load_tensor, make_mask, save_tensor
from .metrics import psnr
from .model import count_flops, dense_mlp_flops
from .optim import write_history
from .synthetic import bundled
from .tasks import NoiseSpec, denoise_mixed, fit_inpainting, fit_regression, synthesize_noise
from .tensor_ops import NumericalError
from .theory import (
    fuzz_laplacian,
    fuzz_model_bound,
    fuzz_rank_lemma,
    fuzz_smoothness,
    summarize,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _load_input(spec, seed):
    """Input path or synth:<name>[:<n1>x<n2>x<n3>] generator reference."""
    if spec is None:
        raise ConfigError("an --input is required")
    if spec.startswith("synth:"):
        parts = spec.split(":")
        dims = None
        if len(parts) == 3:
            dims = tuple(int(x) for x in parts[2].split("x"))
        return bundled(parts[1], dims, seed=seed)
    path = Path(spec)
    if path.suffix.lower() == ".png":
        return load_png(path)
    return load_tensor(path)


def _auto_normalize(t):
    lo, hi = float(t.min()), float(t.max())
    if lo >= 0.0 and hi <= 1.0:
        return t
    if hi == lo:
        return np.zeros_like(t)
    return (t - lo) / (hi - lo)


def _write_metrics(path, metrics):
    with open(path, "w") as fh:
        for key in sorted(metrics):
            val = metrics[key]
            if isinstance(val, float):
                fh.write(f"{key}={val:.17g}\n")
            else:
                fh.write(f"{key}={val}\n")


def _write_bundle(outdir, cfg, result, extra_metrics=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, outdir / "config.txt")
    save_tensor(outdir / "recovered.cft1", result.recovered)
    metrics = dict(result.metrics)
    metrics.update(extra_metrics or {})
    _write_metrics(outdir / "metrics.txt", metrics)
    write_history(result.history, outdir / "history.csv")
    if result.evolution is not None:
        write_evolution_log(result.evolution, outdir / "evolution.csv")
    if result.model is not None:
        save_model(outdir / "model.cfnr", result.model)


def _add_config_flags(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--input", help="tensor path (.cft1/.png) or synth:<name>[:dims]")
    parser.add_argument("--output", help="output bundle directory")
    parser.add_argument("--reference", help="ground-truth tensor for metrics")
    numeric = [
        ("--lambda-x", "lambda_x", int),
        ("--lambda-y", "lambda_y", int),
        ("--mu", "mu", float),
        ("--omega-z", "omega_z", float),
        ("--r-z", "r_z", int),
        ("--k", "k", float),
        ("--cadence", "cadence", int),
        ("--core-frac", "core_frac", float),
        ("--iters", "iters", int),
        ("--lr", "lr", float),
        ("--lr-floor", "lr_floor", float),
        ("--weight-decay", "weight_decay", float),
        ("--width", "width", int),
        ("--depth", "depth", int),
        ("--seed", "seed", int),
        ("--record-every", "record_every", int),
        ("--sr", "sr", float),
        ("--gamma1", "gamma1", float),
        ("--gamma2", "gamma2", float),
        ("--rho0", "rho0", float),
        ("--kappa", "kappa", float),
        ("--outer-iters", "outer_iters", int),
        ("--inner-iters", "inner_iters", int),
        ("--noise-case", "noise_case", int),
        ("--noise-seed", "noise_seed", int),
    ]
    for flag, dest, typ in numeric:
        parser.add_argument(flag, dest=dest, type=typ, default=None)
    parser.add_argument("--mask", dest="mask_file", default=None, help="mask PNG/CFT1")
    parser.add_argument("--baseline", action="store_true", default=None,
                        help="fit the single-frequency baseline instead")
    parser.add_argument("--conventional", action="store_true", default=None,
                        help="fit the transformed target band-wise (comparison mode)")


def _resolve_config(args, task):
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "command", "trials", "dims")}
    overrides["task"] = task
    cfg = parse_config(args.config, overrides)
    if cfg.output is None:
        cfg.output = f"wavinr_{task}_out"
    return cfg


def _run_fit(args):
    cfg = _resolve_config(args, "fit")
    data = _auto_normalize(_load_input(cfg.input, cfg.seed))
    reference = _auto_normalize(load_tensor(cfg.reference)) if cfg.reference else None
    if cfg.baseline:
        return _run_fit_baseline(cfg, data, reference)
    result = fit_regression(data, cfg, reference=reference)
    _write_bundle(cfg.output, cfg, result)
    print(f"fit: psnr={result.metrics['psnr']:.2f} dB -> {cfg.output}")
    return EXIT_OK


def _run_fit_baseline(cfg, data, reference):
    from .baseline import build_single, fit_single, matched_rank
    from .model import build_model
    from .optim import AdamConfig
    from .tasks import TaskResult
    from .metrics import evaluate

    dims = data.shape
    rcfg = cfg.resolve_for_data(dims)
    band = build_model(
        dims, rcfg.lambda_x, rcfg.lambda_y, rcfg.mu, rcfg.omega_z, rcfg.r_z,
        rcfg.width, rcfg.depth, rcfg.seed, rcfg.core_frac, rcfg.use_bias,
    )
    rank = matched_rank(band.param_count(), dims, rcfg.r_z, rcfg.width, rcfg.depth, rcfg.use_bias)
    single = build_single(
        dims, rank, rcfg.r_z, rcfg.mu / 4.0, rcfg.omega_z, rcfg.width, rcfg.depth,
        rcfg.seed, rcfg.use_bias,
    )
    adam = AdamConfig(lr=rcfg.lr, lr_floor=rcfg.lr_floor, weight_decay=rcfg.weight_decay)
    image, history = fit_single(data, single, rcfg.iters, adam, rcfg.record_every,
                                reference=reference)
    ref = reference if reference is not None else data
    result = TaskResult(
        recovered=image, metrics=evaluate(ref, image).as_dict(), model=None,
        history=history, evolution=None,
    )
    _write_bundle(rcfg.output, rcfg, result, {"baseline_rank": rank})
    print(f"fit[baseline]: psnr={result.metrics['psnr']:.2f} dB -> {rcfg.output}")
    return EXIT_OK


def _run_inpaint(args, task="inpaint"):
    cfg = _resolve_config(args, task)
    data = _auto_normalize(_load_input(cfg.input, cfg.seed))
    reference = _auto_normalize(load_tensor(cfg.reference)) if cfg.reference else None
    if cfg.mask_file:
        mask = make_mask(data.shape, mask_path=cfg.mask_file)
    elif cfg.sr is not None:
        mask = make_mask(data.shape, sr=cfg.sr, seed=cfg.noise_seed)
    else:
        raise ConfigError(f"{task} needs --mask or --sr")
    result = fit_inpainting(data, mask, cfg, reference=reference)
    ref = reference if reference is not None else data
    observed = psnr(ref, np.where(mask, data, 0.0))
    _write_bundle(cfg.output, cfg, result, {"observed_psnr": observed})
    print(f"{task}: psnr={result.metrics['psnr']:.2f} dB -> {cfg.output}")
    return EXIT_OK


def _run_denoise(args):
    cfg = _resolve_config(args, "denoise")
    data = _auto_normalize(_load_input(cfg.input, cfg.seed))
    reference = _auto_normalize(load_tensor(cfg.reference)) if cfg.reference else None
    mask = None
    extra = {}
    if cfg.noise_case is not None:
        # input is clean ground truth; corrupt it, then recover
        reference = data
        data, mask = synthesize_noise(data, NoiseSpec(case=cfg.noise_case, seed=cfg.noise_seed))
        extra["observed_psnr"] = psnr(reference, np.clip(data, 0.0, 1.0))
    result = denoise_mixed(data, cfg, mask=mask, reference=reference)
    _write_bundle(cfg.output, cfg, result, extra)
    print(f"denoise: psnr={result.metrics['psnr']:.2f} dB -> {cfg.output}")
    return EXIT_OK


def _run_verify(args):
    trials = args.trials
    campaigns = [
        ("coefficient_smoothness", fuzz_smoothness(trials, seed=11)),
        ("laplacian_bounds", fuzz_laplacian(trials, seed=13)),
        ("rank_lemma", fuzz_rank_lemma(max(trials // 5, 1), seed=17)),
        ("generator_laplacian_cap", fuzz_model_bound(max(trials // 5, 1), seed=19)),
    ]
    rows = []
    failed = False
    print(f"{'campaign':<28}{'claims':>8}{'violations':>12}{'worst margin':>14}")
    for name, reports in campaigns:
        agg = summarize(reports)
        status = "PASS" if agg["violations"] == 0 else "FAIL"
        failed = failed or agg["violations"] > 0
        print(f"{name:<28}{agg['claims']:>8}{agg['violations']:>12}{agg['worst_margin']:>14.3e}  {status}")
        for i, rep in enumerate(reports):
            for claim in rep.claims:
                rows.append([name, i, claim.name, f"{claim.measured:.17g}",
                             f"{claim.bound:.17g}", f"{claim.slack:.17g}", claim.passed])
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "verify_slacks.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["campaign", "trial", "claim", "measured", "bound", "slack", "passed"])
            writer.writerows(rows)
        print(f"slack table -> {outdir / 'verify_slacks.csv'}")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def _run_info(args):
    print(f"wavinr {__version__}")
    dims = tuple(int(x) for x in args.dims.split("x")) if args.dims else (256, 256, 31)
    cfg = RunConfig().resolve_for_data(dims)
    banded = count_flops(dims, cfg.width, cfg.depth, dims[2])
    dense = dense_mlp_flops(dims, cfg.width, cfg.depth)
    print(f"dims {dims}: banded synthesis ~{banded / 1e6:.1f}M flops, "
          f"dense per-voxel MLP ~{dense / 1e6:.1f}M flops ({dense / banded:.0f}x)")
    print("defaults:")
    for key in ("mu", "omega_z", "k", "cadence", "iters", "lr", "width", "depth",
                "gamma1", "gamma2", "rho0", "kappa"):
        print(f"  {key}={getattr(cfg, key)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wavinr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fit", "inpaint", "denoise", "cloudrm"):
        p = sub.add_parser(name)
        _add_config_flags(p)
    pv = sub.add_parser("verify")
    pv.add_argument("--trials", type=int, default=1000)
    pv.add_argument("--output", default=None)
    pi = sub.add_parser("info")
    pi.add_argument("--dims", default=None, help="n1xn2xn3")
    return parser


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "fit":
            return _run_fit(args)
        if args.command in ("inpaint", "cloudrm"):
            return _run_inpaint(args, task=args.command)
        if args.command == "denoise":
            return _run_denoise(args)
        if args.command == "verify":
            return _run_verify(args)
        if args.command == "info":
            return _run_info(args)
        print(f"error: code={EXIT_USAGE} kind=usage msg=unknown command {args.command}",
              file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: code={EXIT_USAGE} kind=config msg={exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DecodeError) as exc:
        print(f"error: code={EXIT_IO} kind=io msg={exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"error: code={EXIT_NUMERICAL} kind=numerical msg={exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, AssertionError) as exc:
        print(f"error: code={EXIT_USAGE} kind=config msg={exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
