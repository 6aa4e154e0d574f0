"""Command-line interface.

    wbiharmonic constants  --N 5 --alpha 1
    wbiharmonic degeneracy --N 5 --alpha 0 | --scan -0.4 1.9 100
    wbiharmonic spectrum   --N 5 --alpha 1 --modes 3 --count 3
    wbiharmonic deficit    --N 5 --alpha 1 --demo | --input field.csv
    wbiharmonic perturb    --N 5 --alpha 1 --h gauss:1,0,1 --eps 1e-3 [--eps-sweep 1e-2,5e-3,2.5e-3]
    wbiharmonic residual   --N 5 --alpha 1 [--refine]

Exit status: 0 success, 1 numerical failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import report
from .errors import GridError, NumericalError, ParameterError

OUTPUT_DIR_ENV = "WBIHARMONIC_OUTPUT_DIR"


class UsageError(Exception):
    pass


def parse_alpha(text: str):
    """'1', '-0.25', '1/2' are read as exact rationals; 'nan'/'inf' are rejected."""
    try:
        val = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return val


def _params(args):
    from .params import ProblemParams
    return ProblemParams(args.N, args.alpha)


def _params_json(pr) -> dict:
    from .deficit import _params_json as pj
    return pj(pr)


def _tgrid(args):
    from .grid import TGrid
    return TGrid(t_max=args.t_max, n=args.n, stencil=args.stencil)


def _sgrid(args):
    from .spectrum import SGrid
    return SGrid(sigma_max=args.sigma_max, n=args.sn, stencil=args.stencil)


# each command returns (json_object, csv_header, csv_rows)

def cmd_constants(args):
    from .closedform import best_constant_radial, c_of_m, emden_fowler_profile, hardy_rellich_mu2, omega_sphere
    from .params import derive
    pr = _params(args)
    dc = derive(pr)
    out = {"params": _params_json(pr)}
    for key in ("two_star", "kappa1", "kappa2", "a_const", "b_const", "k2", "k0", "q", "m_dim", "c_bubble"):
        out[key] = getattr(dc, key)
    out["M"] = out.pop("m_dim")
    m, nu, c_amp = emden_fowler_profile(pr)
    out.update({"ef_m": m, "ef_nu": nu, "ef_amplitude": c_amp, "omega_sphere": omega_sphere(pr.N),
                "c_of_m": c_of_m(dc.m_dim), "s_rad": best_constant_radial(pr)})
    try:
        out["hardy_rellich_mu2"] = hardy_rellich_mu2(pr)
    except ParameterError:
        out["hardy_rellich_mu2"] = None
    rows = [(k, v) for k, v in out.items() if k != "params"]
    return out, ["key", "value"], rows


def _verdict(pr) -> dict:
    from .params import degeneracy_check
    rep = degeneracy_check(pr)
    return {"alpha": float(pr.alpha), "alpha_exact": str(pr.alpha) if pr.exact else None,
            "degenerate": rep.degenerate, "k": rep.k_mode, "kernel_dim": rep.kernel_dim,
            "harmonic_dim": rep.harmonic_dim}


def cmd_degeneracy(args):
    from .params import ProblemParams, degenerate_alphas
    if args.scan is None:
        if args.alpha is None:
            raise UsageError("degeneracy needs --alpha or --scan")
        pr = _params(args)
        v = _verdict(pr)
        out = {"N": pr.N, **v}
        return out, ["alpha", "degenerate", "k", "kernel_dim"], [[v["alpha"], v["degenerate"], v["k"], v["kernel_dim"]]]
    lo_s, hi_s, steps_s = args.scan
    lo, hi = parse_alpha(lo_s), parse_alpha(hi_s)
    try:
        steps = int(steps_s)
    except ValueError:
        raise UsageError(f"scan steps must be an integer, got {steps_s!r}") from None
    if steps < 2 or not lo < hi:
        raise UsageError("scan needs alpha_min < alpha_max and at least 2 steps")
    alphas = [lo + (hi - lo) * Fraction(j, steps - 1) if isinstance(lo, Fraction) and isinstance(hi, Fraction)
              else lo + (hi - lo) * j / (steps - 1) for j in range(steps)]
    alphas += [a for a, _ in degenerate_alphas(args.N, float(lo), float(hi))]
    rows, seen = [], set()
    for a in sorted(alphas, key=float):
        if a in seen:
            continue
        seen.add(a)
        v = _verdict(ProblemParams(args.N, a))
        rows.append(v)
    out = {"N": args.N, "scan": rows}
    return out, ["alpha", "degenerate", "k", "kernel_dim"], [[r["alpha"], r["degenerate"], r["k"], r["kernel_dim"]] for r in rows]


def cmd_spectrum(args):
    from .spectrum import mode_eigensolve
    pr = _params(args)
    sg = _sgrid(args)
    if args.modes < 1 or args.count < 1:
        raise UsageError("--modes and --count must be positive")
    spectra = [mode_eigensolve(pr, k, sg, count=args.count) for k in range(args.modes)]
    out = {"spectra": [ms.report() for ms in spectra]}
    rows = [[ms.k, j, mu, res] for ms in spectra for j, (mu, res) in enumerate(zip(ms.eigenvalues, ms.residuals))]
    return out, ["k", "index", "eigenvalue", "residual"], rows


def cmd_deficit(args):
    from .deficit import deficit_report, demo_family
    from .grid import read_field_csv
    pr = _params(args)
    if args.demo:
        rows = demo_family(pr, tgrid=_tgrid(args), sgrid=_sgrid(args))
        out = {"params": _params_json(pr), "family": "U1 + delta e3", "rows": rows}
        return out, ["delta", "dist", "deficit", "ratio", "rho_prediction"], [
            [r["delta"], r["dist"], r["deficit"], r["ratio"], r["rho_prediction"]] for r in rows]
    if args.input is None:
        raise UsageError("deficit needs --input FILE or --demo")
    field = read_field_csv(args.input, pr, stencil=args.stencil)
    rep = deficit_report(field, _sgrid(args))
    return rep, ["key", "value"], [(k, v) for k, v in rep.items() if k != "params"]


def cmd_perturb(args):
    from .closedform import j0_bubble
    from .grid import write_field_csv
    from .reduction import PerturbationH, ReductionConfig, eps_sweep, find_critical, gamma_curve, solve_omega
    pr = _params(args)
    grid = _tgrid(args)
    h = PerturbationH.parse(args.h)
    cfg = ReductionConfig(n_lambda=args.n_lambda)
    if args.eps_sweep:
        try:
            eps_list = [float(x) for x in args.eps_sweep.split(",")]
        except ValueError:
            raise UsageError(f"--eps-sweep expects comma-separated numbers, got {args.eps_sweep!r}") from None
        if len(eps_list) < 2 or any(e == 0 for e in eps_list):
            raise UsageError("--eps-sweep needs at least two nonzero values")
        slope, results = eps_sweep(eps_list, h, pr, grid, cfg)
        out = {"params": _params_json(pr), "h": h.describe(), "slope": slope,
               "runs": [{k: v for k, v in r.report().items() if k != "gamma_samples"} for r in results]}
        rows = [[r.epsilon, r.lambda_eps, r.omega_norm, r.residual] for r in results]
        return out, ["epsilon", "lambda_eps", "omega_norm", "residual"], rows
    eps = args.eps
    j0 = j0_bubble(pr)
    if eps == 0:
        # every lambda is critical; report the corrector at lambda = 1 and the flat curve
        corr = solve_omega(1.0, 0.0, h, pr, grid, cfg)
        samples = gamma_curve(0.0, h, pr, grid=grid, config=cfg)
        from .grid import hnorm
        on = hnorm(corr.omega)
        out = {"params": _params_json(pr), "h": h.describe(), "epsilon": 0.0, "lambda_eps": None,
               "omega_norm": on, "omega_relative": on / hnorm(corr.u - corr.omega), "residual": None,
               "gamma_samples": [[lam, g] for lam, g in samples], "newton_iterations": corr.iterations,
               "j0": j0}
        vals = [g for _, g in samples if g is not None]
        out["gamma_relative_spread"] = (max(vals) - min(vals)) / abs(j0) if vals else None
        omega = corr.omega
    else:
        res = find_critical(eps, h, pr, grid, cfg)
        out = {"params": _params_json(pr), "h": h.describe(), **res.report(), "j0": j0}
        samples, omega = res.gamma_samples, res.omega
    if args.omega_out:
        write_field_csv(omega, args.omega_out)
    return out, ["lambda", "gamma"], [[lam, g] for lam, g in samples]


def cmd_residual(args):
    from .closedform import bubble_residual, residual_pwht
    from .grid import TGrid, project
    from .closedform import RadialProfile
    pr = _params(args)
    base = _tgrid(args)
    sizes = [base.n]
    if args.refine:
        sizes = [n for n in ((base.n - 1) // 4 + 1, (base.n - 1) // 2 + 1) if n >= 201] + [base.n]
    rows = []
    for n in sizes:
        g = TGrid(base.t_max, n, stencil=base.stencil)
        sup, l2 = bubble_residual(pr, g, order=base.stencil)
        sup64, _ = residual_pwht(project(RadialProfile.bubble(pr), g), order=base.stencil)
        rows.append({"n": n, "h": g.h, "sup_residual": sup, "l2_residual": l2, "sup_residual_float64": sup64})
    for prev, cur in zip(rows, rows[1:]):
        cur["observed_order"] = math.log(prev["sup_residual"] / cur["sup_residual"]) / math.log(prev["h"] / cur["h"])
    out = {"params": _params_json(pr), "t_max": base.t_max, "stencil": base.stencil,
           "relative_to": "max|phi|^(p-1)", "levels": rows}
    return out, ["n", "h", "sup_residual", "l2_residual"], [[r["n"], r["h"], r["sup_residual"], r["l2_residual"]] for r in rows]


COMMANDS = {
    "constants": cmd_constants,
    "degeneracy": cmd_degeneracy,
    "spectrum": cmd_spectrum,
    "deficit": cmd_deficit,
    "perturb": cmd_perturb,
    "residual": cmd_residual,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", type=int, required=True, help="dimension N >= 2")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", help=f"output file (default: stdout, or ${OUTPUT_DIR_ENV}/<command>.<format>)")
    common.add_argument("--t-max", dest="t_max", type=float, default=40.0, help="t-grid half width")
    common.add_argument("--n", type=int, default=4001, help="t-grid nodes (odd, >= 201)")
    common.add_argument("--sigma-max", dest="sigma_max", type=float, default=20.0, help="sigma-grid half width")
    common.add_argument("--sn", type=int, default=2001, help="sigma-grid nodes (odd, >= 1001)")
    common.add_argument("--stencil", type=int, default=4, choices=(2, 4), help="finite-difference order")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="wbiharmonic", description="Weighted biharmonic bubble laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="derived constants and the radial best constant")
    p.add_argument("--alpha", type=parse_alpha, required=True)

    p = sub.add_parser("degeneracy", parents=[common], help="degeneracy verdict or an alpha scan")
    p.add_argument("--alpha", type=parse_alpha)
    p.add_argument("--scan", nargs=3, metavar=("ALPHA_MIN", "ALPHA_MAX", "STEPS"))

    p = sub.add_parser("spectrum", parents=[common], help="mode eigenvalues of the linearized problem")
    p.add_argument("--alpha", type=parse_alpha, required=True)
    p.add_argument("--modes", type=int, default=3, help="modes k = 0..K-1")
    p.add_argument("--count", type=int, default=3, help="eigenvalues per mode")

    p = sub.add_parser("deficit", parents=[common], help="distance to the manifold, deficit, stability ratio")
    p.add_argument("--alpha", type=parse_alpha, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--input", help="field CSV with columns t,phi")
    g.add_argument("--demo", action="store_true", help="run the U1 + delta e3 family")

    p = sub.add_parser("perturb", parents=[common], help="reduced problem for a radial perturbation h")
    p.add_argument("--alpha", type=parse_alpha, required=True)
    p.add_argument("--h", required=True, help="gauss:a,t0,w or csv:path")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--eps-sweep", dest="eps_sweep", help="comma-separated eps values for the slope fit")
    p.add_argument("--n-lambda", dest="n_lambda", type=int, default=61)
    p.add_argument("--omega-out", dest="omega_out", help="write the corrector field as CSV")

    p = sub.add_parser("residual", parents=[common], help="ODE residual of the analytic bubble")
    p.add_argument("--alpha", type=parse_alpha, required=True)
    p.add_argument("--refine", action="store_true", help="also report n/4 and n/2 grids")
    return parser


def _destination(args):
    if args.output:
        return Path(args.output)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env) / f"{args.command}.{args.format}"
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # grids and parameters are validated before any heavy work starts
        if getattr(args, "alpha", None) is not None:
            _params(args)
        _tgrid(args)
        _sgrid(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            obj, header, rows = COMMANDS[args.command](args)
    except (ParameterError, GridError, UsageError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    text = report.dumps(obj) + "\n" if args.format == "json" else report.csv_text(header, rows)
    dest = _destination(args)
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
