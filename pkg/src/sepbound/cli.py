"""Command-line front end.

Every computation is exposed as a subcommand that reads flags (and files)
and emits plot-ready tables: delimiter-separated text by default or a JSON
document with ``--format json``.  Tables carry a provenance comment line
(version, subcommand, flags, seed) and numbers are printed with 9
significant digits.  Subcommands are deterministic given identical flags.

Exit codes: 0 ok, 2 flag validation error, 3 quadrature non-convergence,
4 data validation error, 5 verification failure.

Environment overrides: SEPBOUND_REL_TOL_1D, SEPBOUND_ABS_TOL_1D,
SEPBOUND_REL_TOL_2D, SEPBOUND_ABS_TOL_2D, SEPBOUND_MAX_EVALS (quadrature
defaults) and SEPBOUND_THREADS (sweep parallelism).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    ClassConfig,
    LossModel,
    b,
    b_A,
    ba_sweep,
    bc_sweep,
    expected_accuracy,
    inter_ccdf_lower,
    intra_ccdf,
)
from .empirical import (
    DatasetParseError,
    DatasetValidationError,
    accuracy_report,
    fit_beta,
    histogram_export,
    load_dataset,
    mean_cross_entropy,
    pair_separability,
)
from .numerics import (
    DEFAULT_QUAD_1D,
    DEFAULT_QUAD_2D,
    QuadratureConfig,
    QuadratureError,
)
from .oracle import mc_b_A, mc_chi2_tails, mc_inter_ccdf, mc_intra_ccdf, mc_p_acc
from .synth import SynthSpec, generate, write_dataset

EXIT_OK = 0
EXIT_FLAGS = 2
EXIT_QUADRATURE = 3
EXIT_DATA = 4
EXIT_VERIFY = 5

# the oracle-vs-analytic matrix: (loss, beta, num_classes), kappa = C - 1
VERIFY_MATRIX = (
    (0.03, 1.4, 10),
    (0.03, 4.0, 20),
    (0.45, 1.4, 20),
    (0.45, 4.0, 10),
    (1.0, 1.4, 10),
    (1.0, 4.0, 20),
)


def _env_float(name: str, fallback: float) -> float:
    raw = os.environ.get(name)
    return float(raw) if raw else fallback


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else fallback


def _quad_1d() -> QuadratureConfig:
    return QuadratureConfig(
        rel_tol=_env_float("SEPBOUND_REL_TOL_1D", DEFAULT_QUAD_1D.rel_tol),
        abs_tol=_env_float("SEPBOUND_ABS_TOL_1D", DEFAULT_QUAD_1D.abs_tol),
        max_evals=_env_int("SEPBOUND_MAX_EVALS", DEFAULT_QUAD_1D.max_evals),
    )


def _quad_2d() -> QuadratureConfig:
    return QuadratureConfig(
        rel_tol=_env_float("SEPBOUND_REL_TOL_2D", DEFAULT_QUAD_2D.rel_tol),
        abs_tol=_env_float("SEPBOUND_ABS_TOL_2D", DEFAULT_QUAD_2D.abs_tol),
        max_evals=_env_int("SEPBOUND_MAX_EVALS", DEFAULT_QUAD_2D.max_evals),
    )


def _threads() -> int:
    return _env_int("SEPBOUND_THREADS", 1)


def _parse_grid(spec: str) -> list[float]:
    """Grid flags accept 'a,b,c' lists or 'start:stop:step' ranges."""
    spec = spec.strip()
    if not spec:
        raise ValueError("empty grid")
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {spec!r}")
        out = []
        k = 0
        while (v := start + k * step) <= stop + 1e-12:
            out.append(round(v, 12))
            k += 1
        return out
    return [float(p) for p in spec.split(",") if p.strip()]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


class _Emitter:
    """Writes one table (or report) as CSV with a provenance comment or JSON."""

    def __init__(self, args: argparse.Namespace):
        self.fmt = args.format
        self.out_path = args.output
        self.provenance = {
            "version": __version__,
            "command": args.command,
            "flags": args._flag_record,
        }

    def emit(self, columns: list[str], rows: list[tuple]) -> None:
        if self.fmt == "json":
            doc = {
                "provenance": self.provenance,
                "columns": columns,
                "rows": [[_fmt(v) for v in row] for row in rows],
            }
            text = json.dumps(doc, indent=2) + "\n"
        else:
            lines = [
                "# sepbound " + json.dumps(self.provenance, sort_keys=True),
                ",".join(columns),
            ]
            lines += [",".join(_fmt(v) for v in row) for row in rows]
            text = "\n".join(lines) + "\n"
        if self.out_path:
            Path(self.out_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _model_config(args) -> tuple[LossModel, ClassConfig]:
    model = LossModel(loss=args.loss, beta=args.beta)
    kappa = args.kappa if args.kappa is not None else float(args.classes - 1)
    return model, ClassConfig(num_classes=args.classes, kappa=kappa)


def cmd_bound(args) -> int:
    model, config = _model_config(args)
    result = b(
        args.gamma, model, config, args.grid_step, args.method, _quad_2d(),
        refine=args.refine,
    )
    rows = [
        ("gamma", args.gamma),
        ("loss", args.loss),
        ("beta", args.beta),
        ("classes", args.classes),
        ("kappa", config.kappa),
        ("method", result.method),
        ("grid_step", args.grid_step),
        ("refine", args.refine),
        ("eps1", result.eps1),
        ("eps2", result.eps2),
        ("bound", result.value),
    ]
    if args.verify:
        gamma_star = args.gamma * (1.0 + result.eps1) / (1.0 - result.eps2)
        analytic = b_A(gamma_star, model, config, _quad_2d())
        est = mc_b_A(gamma_star, model, config, n=args.samples, seed=args.seed)
        z = abs(est.value - analytic) / est.std_error if est.std_error > 0 else 0.0
        rows += [
            ("verify_gamma", gamma_star),
            ("verify_b_A", analytic),
            ("verify_mc", est.value),
            ("verify_mc_std_error", est.std_error),
            ("verify_z", z),
        ]
    _Emitter(args).emit(["quantity", "value"], rows)
    return EXIT_OK


def cmd_ccdf(args) -> int:
    nu_grid = _parse_grid(args.nu)
    losses = _parse_grid(args.loss)
    if not nu_grid or not losses:
        raise ValueError("nu and loss grids must be nonempty")
    kappa = args.kappa if args.kappa is not None else float(args.classes - 1)
    config = ClassConfig(num_classes=args.classes, kappa=kappa)
    cfg = _quad_1d()
    rows = []
    for L in losses:
        model = LossModel(loss=L, beta=args.beta)
        for nu in nu_grid:
            rows.append(
                (
                    nu,
                    L,
                    intra_ccdf(nu, model, cfg),
                    inter_ccdf_lower(nu, model, config, cfg),
                )
            )
    _Emitter(args).emit(["nu", "loss", "intra", "inter_lower"], rows)
    return EXIT_OK


def cmd_ba_sweep(args) -> int:
    gammas = _parse_grid(args.gamma)
    losses = _parse_grid(args.loss)
    classes = [int(c) for c in _parse_grid(args.classes)]
    cfg = _quad_2d()
    rows = []
    for L in losses:
        model = LossModel(loss=L, beta=args.beta)
        for C in classes:
            kappa = args.kappa if args.kappa is not None else float(C - 1)
            config = ClassConfig(num_classes=C, kappa=kappa)
            for g, v in ba_sweep(gammas, model, config, cfg, threads=_threads()):
                rows.append((g, L, C, v))
    _Emitter(args).emit(["gamma", "loss", "classes", "b_A"], rows)
    return EXIT_OK


def cmd_bc_sweep(args) -> int:
    losses = _parse_grid(args.loss)
    classes = [int(c) for c in _parse_grid(args.classes)]
    rows = bc_sweep(
        losses, args.beta, classes, args.grid_step, args.method, _quad_2d(),
        threads=_threads(), kappa_scale=args.kappa_scale,
    )
    _Emitter(args).emit(["loss", "classes", "b_c"], rows)
    return EXIT_OK


def cmd_fit_beta(args) -> int:
    ds = load_dataset(args.input, delimiter=args.delimiter)
    grid = _parse_grid(args.beta_grid) if args.beta_grid else None
    fit = fit_beta(ds, grid) if grid else fit_beta(ds)
    loss = mean_cross_entropy(ds)
    from .bounds import mu_from_loss

    rows = [
        ("loss", loss),
        ("beta_hat", fit.beta_hat),
        ("mu_hat", fit.mu_hat),
        ("ks_stat", fit.ks_stat),
        ("mu_model", mu_from_loss(loss, fit.beta_hat)),
    ]
    _Emitter(args).emit(["quantity", "value"], rows)
    return EXIT_OK


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"pair must be c1:c2, got {text!r}")
    return int(parts[0]), int(parts[1])


def cmd_separability(args) -> int:
    ds = load_dataset(args.input, delimiter=args.delimiter)
    if not args.pair:
        raise ValueError("at least one --pair c1:c2 is required")
    rows = []
    for text in args.pair:
        c1, c2 = _parse_pair(text)
        r = pair_separability(ds, c1, c2, args.anchors, args.pool, args.seed)
        rows.append((r.c1, r.c2, r.p1, r.p2))
    _Emitter(args).emit(["c1", "c2", "p1", "p2"], rows)
    return EXIT_OK


def cmd_accuracy(args) -> int:
    ds = load_dataset(args.input, delimiter=args.delimiter)
    fit = fit_beta(ds)
    report = accuracy_report(ds, fit)
    rows = [
        (r.class_id, r.n, r.actual, r.predicted, r.lower_bound) for r in report.rows
    ]
    emitter = _Emitter(args)
    emitter.provenance["loss"] = _fmt(report.loss)
    emitter.provenance["beta_hat"] = _fmt(fit.beta_hat)
    emitter.emit(["class", "n", "actual", "predicted", "lower_bound"], rows)
    return EXIT_OK


def cmd_hist(args) -> int:
    ds = load_dataset(args.input, delimiter=args.delimiter)
    hist = histogram_export(ds, args.beta, args.bins)
    emitter = _Emitter(args)
    emitter.provenance["mu_hat"] = _fmt(hist.mu_hat)
    rows = [(b.lo, b.hi, b.empirical_density, b.fitted_density) for b in hist.bins]
    emitter.emit(["lo", "hi", "empirical_density", "fitted_density"], rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        variant=args.variant,
        n_train=args.train,
        n_test=args.test,
        seed=args.seed,
        dim=args.dim,
        num_classes=args.classes,
    )
    result = generate(spec)
    paths = write_dataset(result, args.out_dir)
    rows = [(kind, str(path)) for kind, path in paths.items()]
    _Emitter(args).emit(["file", "path"], rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    n = 10**5 if args.quick else args.samples
    band = args.sigma
    cfg1, cfg2 = _quad_1d(), _quad_2d()
    rows = []
    failures = 0

    def record(name: str, params: str, analytic: float, est) -> None:
        nonlocal failures
        z = abs(est.value - analytic) / est.std_error if est.std_error > 0 else 0.0
        ok = z <= band
        failures += 0 if ok else 1
        rows.append((name, params, analytic, est.value, est.std_error, z, ok))

    for L, beta, C in VERIFY_MATRIX:
        model = LossModel(loss=L, beta=beta)
        config = ClassConfig(num_classes=C)
        tag = f"L={L},beta={beta},C={C}"
        record("intra_ccdf", tag + ",nu=1", intra_ccdf(1.0, model, cfg1),
               mc_intra_ccdf(1.0, model, n=n, seed=args.seed))
        record("inter_ccdf_lower", tag + ",nu=1",
               inter_ccdf_lower(1.0, model, config, cfg1),
               mc_inter_ccdf(1.0, model, config, n=n, seed=args.seed))
        record("b_A", tag + ",gamma=1.5", b_A(1.5, model, config, cfg2),
               mc_b_A(1.5, model, config, n=n, seed=args.seed))
        record("expected_accuracy", tag + f",kappa*={C - 1}",
               expected_accuracy(L, beta, float(C - 1)),
               mc_p_acc(L, beta, float(C - 1), n=n, seed=args.seed))

    # chi-squared tail inequalities: empirical mass must stay below the bound
    for dof, eps in ((9, 0.5), (19, 0.3)):
        upper, lower = mc_chi2_tails(dof, eps, n=n, seed=args.seed)
        up_bound = math.exp(-0.5 * dof * (1.0 + eps - math.sqrt(1.0 + 2.0 * eps)))
        lo_bound = math.exp(-0.25 * dof * eps * eps)
        for name, est, bound in (
            ("chi2_tail_upper", upper, up_bound),
            ("chi2_tail_lower", lower, lo_bound),
        ):
            margin = (bound - est.value) / est.std_error if est.std_error > 0 else math.inf
            ok = est.value <= bound + band * est.std_error
            if not ok:
                failures += 1
            rows.append((name, f"dof={dof},eps={eps}", bound, est.value,
                         est.std_error, margin, ok))

    _Emitter(args).emit(
        ["check", "params", "analytic", "estimate", "std_error", "z_or_margin", "pass"],
        rows,
    )
    return EXIT_OK if failures == 0 else EXIT_VERIFY


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="output format (default csv)")
    p.add_argument("--output", default=None, help="write to this file instead of stdout")


def _add_model_flags(p: argparse.ArgumentParser, loss_is_grid: bool = False) -> None:
    if loss_is_grid:
        p.add_argument("--loss", required=True,
                       help="cross-entropy loss grid: 'a,b,c' or start:stop:step")
    else:
        p.add_argument("--loss", type=float, required=True, help="cross-entropy loss L")
    p.add_argument("--beta", type=float, required=True, help="tail-shape exponent beta")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepbound",
        description="Class-separability bounds for cross-entropy-trained "
                    "classifiers: analytic bounds, Monte-Carlo verification, "
                    "empirical feature-space statistics, synthetic datasets.",
    )
    parser.add_argument("--version", action="version", version=f"sepbound {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="maximized separability bound b(gamma, L)")
    _add_model_flags(p)
    p.add_argument("--classes", type=int, required=True, help="number of classes C")
    p.add_argument("--kappa", type=float, default=None,
                   help="confusion constant (default C-1)")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="distance ratio factor gamma >= 1 (default 1)")
    p.add_argument("--grid-step", type=float, default=0.1,
                   help="epsilon grid step in (0,1) (default 0.1)")
    p.add_argument("--method", choices=("chi2_cdf", "concentration"),
                   default="chi2_cdf", help="chi-squared mass form")
    p.add_argument("--refine", action="store_true",
                   help="one grid_step/10 refinement pass around the argmax")
    p.add_argument("--verify", action="store_true",
                   help="cross-check b_A at the argmax against Monte Carlo")
    p.add_argument("--samples", type=int, default=10**6, help="Monte-Carlo samples")
    p.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed")
    _add_output_flags(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("ccdf", help="intra/inter ccdf table over a nu grid")
    _add_model_flags(p, loss_is_grid=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--nu", default="0.1:50:0.5", help="nu grid (default 0.1:50:0.5)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_ccdf)

    p = sub.add_parser("ba-sweep", help="b_A over a gamma grid")
    _add_model_flags(p, loss_is_grid=True)
    p.add_argument("--classes", required=True, help="class count or list")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--gamma", default="1.1:5:0.1", help="gamma grid (default 1.1:5:0.1)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_ba_sweep)

    p = sub.add_parser("bc-sweep", help="b_c over a loss grid for several C")
    _add_model_flags(p, loss_is_grid=True)
    p.add_argument("--classes", required=True, help="class count or list")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--method", choices=("chi2_cdf", "concentration"), default="chi2_cdf")
    p.add_argument("--kappa-scale", type=float, default=1.0,
                   help="kappa = scale * (C-1) (default 1)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_bc_sweep)

    p = sub.add_parser("fit-beta", help="fit the tail exponent from a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--beta-grid", default=None, help="candidate grid (default 1:6:0.1)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_fit_beta)

    p = sub.add_parser("separability", help="p1/p2 statistics for class pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--pair", action="append", default=[],
                   help="class pair c1:c2 (repeatable)")
    p.add_argument("--anchors", type=int, default=100, help="anchors per class")
    p.add_argument("--pool", type=int, default=100, help="pool points per class")
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_separability)

    p = sub.add_parser("accuracy", help="actual vs predicted per-class accuracy")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    _add_output_flags(p)
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("hist", help="transformed-score histogram with fitted density")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--bins", type=int, default=50)
    _add_output_flags(p)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--variant", choices=("syn1", "syn2"), required=True)
    p.add_argument("--train", type=int, default=16000, help="training rows")
    p.add_argument("--test", type=int, default=4000, help="test rows")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", help="output directory")
    _add_output_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="Monte-Carlo vs analytic check matrix")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--quick", action="store_true", help="use 1e5 samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=4.0,
                   help="acceptance band in standard errors (default 4)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._flag_record = " ".join(sys.argv[1:] if argv is None else argv)
    try:
        return args.func(args)
    except QuadratureError as exc:
        print(f"sepbound: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (DatasetParseError, DatasetValidationError) as exc:
        print(f"sepbound: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"sepbound: {exc}", file=sys.stderr)
        return EXIT_FLAGS


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
