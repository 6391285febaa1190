"""Command-line interface.

Subcommands: sweep, train, validate-channel, gradcheck, constellation.
Exit codes: 0 success, 1 validation or training failure, 2 usage error.
Report-producing commands render a matplotlib figure next to each CSV
unless --no-figure is given.
"""

from __future__ import annotations

import argparse
import sys
import zlib
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .harness import ConfigError, emit_csv, parse_config_file, run_sweep
from .neural import activation_from_name, gradcheck, init_mlp, min_kink_margin
from .modem import one_hot_batch, qam_constellation
from .transceivers import (
    DegenerateConstellation,
    TrainingDiverged,
    load_transceiver,
    save_transceiver,
    train,
)
from .turbulence import GammaGammaParams, TurbulenceRegime, sample_intensity


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsosim",
        description="FSO link simulator: MQAM-ML and learned transceivers over Gamma-Gamma turbulence",
    )
    parser.add_argument("--version", action="version", version=f"fsosim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run an Es/N0 sweep from a config file")
    p_sweep.add_argument("--config", required=True, help="key = value config file")
    p_sweep.add_argument("--out", help="output CSV path (overrides the config's 'out')")
    p_sweep.add_argument("--no-figure", action="store_true", help="skip the waterfall figure")

    p_train = sub.add_parser("train", help="train one transceiver and save it")
    p_train.add_argument("--config", required=True, help="config file naming kind, m, regime, seed")
    p_train.add_argument("--esn0", type=float, help="training Es/N0 in dB (overrides train_esn0_db)")
    p_train.add_argument("--out", required=True, help="output stem for constellation/checkpoint files")
    p_train.add_argument("--no-figure", action="store_true")

    p_val = sub.add_parser("validate-channel", help="statistical checks on the turbulence sampler")
    group = p_val.add_mutually_exclusive_group(required=True)
    group.add_argument("--regime", choices=[r.value for r in TurbulenceRegime])
    group.add_argument("--alpha", type=float)
    p_val.add_argument("--beta", type=float)
    p_val.add_argument("--samples", type=int, default=1_000_000)
    p_val.add_argument("--seed", type=int, default=0)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of the network gradients")
    p_grad.add_argument("--activation", default="all", help="activation name or 'all'")
    p_grad.add_argument("--seed", type=int, default=0)

    p_const = sub.add_parser("constellation", help="dump a constellation to CSV")
    group = p_const.add_mutually_exclusive_group(required=True)
    group.add_argument("--qam", type=int, metavar="M", help="Gray QAM of this order")
    group.add_argument("--load", metavar="STEM", help="stem of a saved transceiver")
    p_const.add_argument("--out", required=True, help="output CSV path")
    p_const.add_argument("--no-figure", action="store_true")

    return parser


def _figure_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".png")


def _cmd_sweep(args) -> int:
    try:
        cfg = parse_config_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.out
    if out is None:
        print("error: no output path (give --out or set 'out' in the config)", file=sys.stderr)
        return 2
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result = run_sweep(cfg, csv_path=out)
    emit_csv(result, out)
    print(f"wrote {out}")
    if not args.no_figure:
        from .plotting import render_sweep_figure

        fig_path = _figure_path(out)
        render_sweep_figure(result, fig_path)
        print(f"wrote {fig_path}")
    for point in result.points:
        if point.failure is not None:
            print(f"point {point.esn0_db:g} dB failed: {point.failure}", file=sys.stderr)
    return 1 if result.failed else 0


def _cmd_train(args) -> int:
    try:
        cfg = parse_config_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not cfg.kind.trains:
        print("error: the qam-ml baseline has nothing to train", file=sys.stderr)
        return 2
    train_cfg = cfg.train
    if args.esn0 is not None:
        train_cfg = replace(train_cfg, train_esn0_db=args.esn0)
    if train_cfg.train_esn0_db is None:
        print("error: training Es/N0 unset; give --esn0 or train_esn0_db", file=sys.stderr)
        return 2
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0, 0)))
    try:
        tr, history = train(
            cfg.kind, cfg.order, cfg.link, cfg.combiner, train_cfg,
            rng=rng, csi_mode=cfg.csi_mode,
        )
    except (TrainingDiverged, DegenerateConstellation) as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    written = save_transceiver(tr, args.out)
    if not args.no_figure:
        from .plotting import render_constellation_figure, render_loss_figure

        stem = Path(args.out)
        const_fig = stem.with_name(stem.name + "_constellation.png")
        render_constellation_figure(tr.constellation, const_fig, title=f"{cfg.kind.value}, M={cfg.order}")
        loss_fig = stem.with_name(stem.name + "_loss.png")
        render_loss_figure(history, loss_fig, title=f"{cfg.kind.value} training loss")
        written.extend([const_fig, loss_fig])
    for path in written:
        print(f"wrote {path}")
    print(f"final training loss: {history[-1]:.6g}")
    return 0


def _cmd_validate_channel(args) -> int:
    if args.regime is not None:
        params = TurbulenceRegime(args.regime).params
    else:
        if args.beta is None:
            print("error: --alpha requires --beta", file=sys.stderr)
            return 2
        params = GammaGammaParams(alpha=args.alpha, beta=args.beta)
    rng = np.random.default_rng(args.seed)
    samples = sample_intensity(params, args.samples, rng)

    mean = float(samples.mean())
    si_emp = float(samples.var() / mean ** 2)
    si_theory = params.scintillation_index
    checks = [
        ("unit mean", abs(mean - 1.0), 0.01, f"mean = {mean:.6f}"),
        (
            "scintillation index",
            abs(si_emp / si_theory - 1.0),
            0.02,
            f"empirical = {si_emp:.6f}, expected = {si_theory:.6f}",
        ),
    ]
    ok = True
    for name, err, tol, detail in checks:
        passed = err < tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail} (|err| = {err:.4g}, tol {tol:g})")
    return 0 if ok else 1


_GRADCHECK_KINDS = (
    "relu", "leaky_relu", "crelu", "elu", "selu", "relu6",
    "tanh", "sigmoid", "softsign", "softplus", "identity",
)


def _well_conditioned(net, batch, targets) -> bool:
    from .neural import backward, forward, softmax_cross_entropy

    out, cache = forward(net, batch)
    _, dlogits = softmax_cross_entropy(out, targets)
    grads = backward(net, cache, dlogits)
    flat = np.concatenate(
        [g.ravel() for g in grads.weight_grads] + [g.ravel() for g in grads.bias_grads]
    )
    nonzero = np.abs(flat[flat != 0.0])
    return not (nonzero.size and nonzero.min() < 5e-5)


def _cmd_gradcheck(args) -> int:
    names = _GRADCHECK_KINDS if args.activation == "all" else (args.activation,)
    ok = True
    for name in names:
        try:
            kind = activation_from_name(name)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        # resample until no pre-activation sits within 1e-3 of a kink (the
        # finite differences must never straddle one) and no gradient falls
        # where the difference quotient drowns in float cancellation
        found = False
        for attempt in range(500):
            rng = np.random.default_rng((args.seed, zlib.crc32(name.encode()), attempt))
            net = init_mlp([3, 8, 8, 8, 4], kind, rng)
            batch = rng.uniform(-2.0, 2.0, size=(6, 3))
            if min_kink_margin(net, batch) <= 1e-3:
                continue
            targets = one_hot_batch(rng.integers(0, 4, size=6), 4)
            if _well_conditioned(net, batch, targets):
                found = True
                break
        if not found:
            print(f"FAIL {name}: could not find well-conditioned inputs", file=sys.stderr)
            ok = False
            continue
        err = gradcheck(net, batch, targets)
        passed = err < 1e-6
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: max relative error {err:.3e}")
    return 0 if ok else 1


def _cmd_constellation(args) -> int:
    if args.qam is not None:
        try:
            constellation = qam_constellation(args.qam)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        title = f"{args.qam}-QAM"
    else:
        try:
            constellation = load_transceiver(args.load).constellation
        except (OSError, ValueError) as exc:
            print(f"error: cannot load transceiver from {args.load!r}: {exc}", file=sys.stderr)
            return 2
        title = f"learned ({args.load})"
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    constellation.to_csv(out)
    print(f"wrote {out}")
    if not args.no_figure:
        from .plotting import render_constellation_figure

        fig_path = _figure_path(out)
        render_constellation_figure(constellation, fig_path, title=title)
        print(f"wrote {fig_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sweep": _cmd_sweep,
        "train": _cmd_train,
        "validate-channel": _cmd_validate_channel,
        "gradcheck": _cmd_gradcheck,
        "constellation": _cmd_constellation,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
