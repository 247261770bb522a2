"""Command-line entry point: ``robustfill <subcommand> ...``.

Exit status is 0 on success, 2 for malformed input and 3 when a numerical
step fails (for example a correlation matrix that cannot be factorised).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import DEFAULT_THETAS, CriterionConfig, QuadratureSpec, imse, irmse, min_efficiency
from .generators import (
    cross_array,
    double_transformed_noise,
    hybrid_noise_design,
    jittered_cross_array,
    maximin_lhd,
    maxpro_lhd,
    optimize_irmse_1d,
    robust_1d_noise_design,
    transformed_noise,
)
from .gp_core import ConditioningError, Design, fit_kriging
from .harness import StudyConfig, emit_profile, robust_setting, run_simulated_example
from .io import DesignParseError, load_config, read_design, read_responses, write_design
from .stats_dist import DomainError, NoiseModel

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _floats(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    if not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"non-finite value in {text!r}")
    return vals


def _noise_model(args) -> NoiseModel:
    if args.noise_kind == "uniform":
        return NoiseModel.uniform(args.noise_lower, args.noise_upper)
    return NoiseModel.normal(args.noise_mean, args.noise_sd)


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _theta(args, design: Design):
    """Scalar theta, or one value per column when a list is given."""
    t = args.theta
    if t is None:
        return None
    if len(t) == 1:
        return t[0]
    if len(t) != design.d:
        raise ValueError(f"--theta needs 1 or {design.d} values, got {len(t)}")
    return np.array(t)


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    p, q = args.p, args.q
    if args.type in ("mmlhd", "maxprolhd"):
        build = maximin_lhd if args.type == "mmlhd" else maxpro_lhd
        roles = ("control",) * p + ("noise_ext",) * q
        D = Design(build(args.n1, p + q, seed=args.seed), roles=roles)
    else:
        if args.n2 is None:
            raise ValueError(f"--n2 is required for --type {args.type}")
        Dx = maximin_lhd(args.n1, p, seed=args.seed)
        Dz = maximin_lhd(args.n2, q, seed=args.seed + 1)
        if args.type == "cross":
            D, _ = cross_array(Dx, Dz)
        else:
            D = jittered_cross_array(Dx, Dz, seed=args.seed, restarts=args.restarts)
    model = _noise_model(args)
    if args.noise == "tr":
        D = transformed_noise(D, model)
    elif args.noise == "dt":
        D = double_transformed_noise(D, model, alpha=args.alpha)
    elif args.noise == "hybrid":
        levels = len(np.unique(D.X[:, D.noise_idx[0]]))
        T = robust_1d_noise_design(levels, args.theta_set, model, seed=args.seed, restarts=args.restarts)
        D = hybrid_noise_design(D, T)
    write_design(D, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    D = read_design(args.design)
    model = _noise_model(args)
    cfg = CriterionConfig(k=args.k, quad=QuadratureSpec(rule=args.rule, nodes=args.nodes))
    theta = _theta(args, D)
    crit = args.criterion
    if crit in ("irmse", "imse", "wrmse-profile") and theta is None:
        raise ValueError(f"--theta is required for --criterion {crit}")
    if crit == "irmse":
        _write_json({"criterion": "irmse", "k": args.k, "theta": args.theta, "value": irmse(D, theta, model, cfg)},
                    args.out)
    elif crit == "imse":
        _write_json({"criterion": "imse", "theta": args.theta, "value": imse(D, theta, model, cfg)}, args.out)
    elif crit == "wrmse-profile":
        if D.d > 2:
            raise ValueError("wrmse-profile supports 1-D or 2-D designs")
        axes = []
        for j in range(D.d):
            if j in D.noise_idx:
                lo, hi = model.support if model.bounded else (model.mean - 4 * model.sd, model.mean + 4 * model.sd)
            else:
                lo, hi = 0.0, 1.0
            axes.append(np.linspace(lo, hi, args.grid))
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        if args.out in (None, "-"):
            raise ValueError("wrmse-profile needs --out")
        emit_profile(D, theta, model, grid, args.out)
    else:
        thetas = args.theta_set
        if args.optima:
            raw = json.loads(Path(args.optima).read_text(encoding="utf-8"))
            optima = {float(k): float(v) for k, v in raw.items()}
        elif D.d == 1 and D.q == 1:
            optima = {t: optimize_irmse_1d(D.n, t, model, seed=args.seed)[1] for t in thetas}
        else:
            raise ValueError("minmax-eff on a multi-column design needs --optima")
        eff = min_efficiency(D, thetas, optima, model, cfg)
        _write_json({"criterion": "minmax-eff", "theta_set": thetas, "value": eff,
                     "optima": {repr(k): v for k, v in sorted(optima.items())}}, args.out)
    return EXIT_OK


def _fit(args):
    D = read_design(args.design)
    y = read_responses(args.responses)
    if len(y) != D.n:
        raise DesignParseError(len(y) + 1, f"expected {D.n} responses, got {len(y)}")
    return fit_kriging(D, y, theta_bounds=(args.theta_lo, args.theta_hi), n_starts=args.starts, seed=args.seed)


def cmd_fit(args) -> int:
    m = _fit(args)
    pred = m.predict(m.X)
    _write_json({
        "names": list(m.design.names),
        "theta": m.theta.theta.tolist(),
        "mu": m.mu,
        "tau2": m.tau2,
        "loglik": None if not np.isfinite(m.loglik) else m.loglik,
        "nugget": m.factor.nugget,
        "constant": m.constant,
        "max_train_residual": float(np.max(np.abs(pred - m.y))),
    }, args.out)
    return EXIT_OK


def cmd_robust(args) -> int:
    m = _fit(args)
    if m.design.p == 0:
        raise ValueError("design has no control columns")
    r = robust_setting(m, args.loss, [_noise_model(args)] * m.design.q, x_grid=args.grid, seed=args.seed)
    _write_json({"x": r.x.tolist(), "value": r.value, "flat": r.flat, "loss": args.loss}, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = StudyConfig.from_dict(load_config(args.config))
    report = run_simulated_example(cfg, threads=args.threads)
    text = report.to_json() + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------


def _add_noise_flags(sp):
    g = sp.add_argument_group("noise distribution")
    g.add_argument("--noise-kind", choices=("normal", "uniform"), default="normal")
    g.add_argument("--noise-mean", type=float, default=0.5)
    g.add_argument("--noise-sd", type=float, default=1.0 / 6.0)
    g.add_argument("--noise-lower", type=float, default=0.0)
    g.add_argument("--noise-upper", type=float, default=1.0)


def _add_fit_flags(sp):
    sp.add_argument("--design", required=True)
    sp.add_argument("--responses", required=True, help="one response per line")
    sp.add_argument("--theta-lo", type=float, default=1e-2)
    sp.add_argument("--theta-hi", type=float, default=1e3)
    sp.add_argument("--starts", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="robustfill", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"robustfill {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="build a design and write it as CSV")
    g.add_argument("--type", required=True, choices=("mmlhd", "maxprolhd", "cross", "jca"))
    g.add_argument("--n1", type=int, required=True, help="runs (LHD) or control-array runs (cross, jca)")
    g.add_argument("--n2", type=int, help="noise-array runs (cross, jca)")
    g.add_argument("--p", type=int, default=1, help="control factors")
    g.add_argument("--q", type=int, default=1, help="noise factors")
    g.add_argument("--noise", choices=("none", "tr", "dt", "hybrid"), default="none")
    g.add_argument("--alpha", type=float, default=2.0 / 3.0)
    g.add_argument("--theta-set", type=_floats, default=list(DEFAULT_THETAS))
    g.add_argument("--restarts", type=int, default=16)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    _add_noise_flags(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="evaluate a design criterion")
    e.add_argument("--design", required=True)
    e.add_argument("--criterion", required=True, choices=("irmse", "imse", "wrmse-profile", "minmax-eff"))
    e.add_argument("--theta", type=_floats, help="one value, or one per column")
    e.add_argument("--theta-set", type=_floats, default=list(DEFAULT_THETAS))
    e.add_argument("--optima", help="JSON object mapping theta to best-known IRMSE")
    e.add_argument("--k", type=float, default=1.0, help="power for IRMSE_k")
    e.add_argument("--rule", choices=("auto", "legendre", "hermite", "panel", "mc"), default="auto")
    e.add_argument("--nodes", type=int, default=64)
    e.add_argument("--grid", type=int, default=201, help="profile points per axis")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    _add_noise_flags(e)
    e.set_defaults(func=cmd_evaluate)

    f = sub.add_parser("fit", help="fit an ordinary kriging model")
    _add_fit_flags(f)
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("robust", help="fit kriging, then search for the robust control setting")
    _add_fit_flags(r)
    r.add_argument("--loss", choices=("variance", "quadratic"), default="variance")
    r.add_argument("--grid", type=int, default=501)
    _add_noise_flags(r)
    r.set_defaults(func=cmd_robust)

    s = sub.add_parser("simulate", help="run the simulated control-by-noise study")
    s.add_argument("config", help="JSON file with a robustfill_config_v1 object")
    s.add_argument("--threads", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConditioningError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"robustfill: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DesignParseError, DomainError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"robustfill: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
