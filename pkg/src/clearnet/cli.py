"""Command-line front end.

Every command prints one JSON object on stdout. Exit codes: 0 success,
2 validation error, 3 infeasibility or insolvency, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
import warnings

import numpy as np

from . import __version__
from .clearing import clear as run_clearing
from .errors import ClearnetError, DimensionMismatch, InsolventToExternal, SchemaError
from .experiments import kink_report, loss_curve
from .model import NormKind, build_network, check_nominal_solvency, perturbed_inflow
from .resilience import default_margin, insolvency_margin, relative_level
from .worstcase import uniqueness_check, worst_case_loss


def jsonable(x):
    """Convert numpy values for JSON; infinities become the string ``"inf"``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, NormKind):
        return x.value
    return x


def _read(path):
    with open(path, "rb") as fh:
        data = fh.read()
    digest = "sha256:" + hashlib.sha256(data).hexdigest()
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return build_network(raw), digest


def _parse_delta(text, m):
    if text is None:
        return np.zeros(m)
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise SchemaError(f"cannot parse --delta {text!r}") from None
    if len(vals) == 1 and vals[0] == 0.0:
        return np.zeros(m)
    if len(vals) != m:
        raise DimensionMismatch(f"--delta needs {m} values, got {len(vals)}")
    return np.array(vals)


def _clearing_payload(net, res):
    return {
        "method": res.method,
        "payments": res.payments,
        "residuals": res.residuals,
        "loss": res.loss,
        "defaults": res.defaults,
        "insolvent": np.flatnonzero(res.insolvent).tolist(),
        "iterations": res.iterations,
        "converged": res.converged,
    }


def cmd_validate(net, args):
    ok, slack = check_nominal_solvency(net)
    boundary = bool(np.all(slack >= 0)) and not ok
    payload = {
        "valid": True,
        "n": net.n,
        "m": net.m,
        "nominal_solvent": ok,
        "nominal_slack": slack,
        "warnings": [],
    }
    if not ok:
        bad = np.flatnonzero(slack <= 0).tolist()
        if boundary and args.allow_boundary:
            payload["warnings"].append(f"banks {bad} have zero nominal net worth")
        else:
            payload["valid"] = False
            payload["error"] = {"error": "NominalDefault",
                                "message": f"banks {bad} are not solvent at nominal prices"}
            return payload, 2
    return payload, 0


def cmd_clear(net, args):
    delta = _parse_delta(args.delta, net.m)
    c = perturbed_inflow(net, delta)
    try:
        res = run_clearing(net, c, args.method)
    except InsolventToExternal as exc:
        payload = _clearing_payload(net, exc.result)
        payload["error"] = {"error": "InsolventToExternal", "message": str(exc)}
        return payload, 3
    payload = _clearing_payload(net, res)
    payload["delta"] = delta
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("node,payment,residual,defaulted,insolvent\n")
        for i, name in enumerate(net.node_names):
            buf.write(f"{name},{res.payments[i]:.12g},{res.residuals[i]:.12g},"
                      f"{int(res.defaulted[i])},{int(res.insolvent[i])}\n")
        return buf.getvalue(), 0
    return payload, 0


def cmd_margin(net, args):
    rep = default_margin(net, args.norm, allow_boundary=args.allow_boundary)
    return {
        "norm": rep.norm,
        "epsilon_star": rep.epsilon_star,
        "relative_level": relative_level(net, rep.epsilon_star, rep.norm),
        "critical_banks": rep.critical_banks,
        "critical_assets": {str(k): v for k, v in rep.critical_assets.items()},
        "witness": None if rep.witness is None else rep.witness.delta,
        "nominal_slack": rep.slack,
        "dual_norms": rep.exposure,
    }, 0


def cmd_insolvency(net, args):
    norm = NormKind.parse(args.norm)
    eps = insolvency_margin(net, norm)
    return {"norm": norm, "epsilon_ub": eps, "relative_level": relative_level(net, eps, norm)}, 0


def cmd_worst_case(net, args):
    norm = NormKind.parse(args.norm)
    rep = worst_case_loss(net, args.epsilon, norm)
    payload = {
        "norm": norm,
        "epsilon": rep.epsilon,
        "eta_wc": rep.eta_wc,
        "i_star": rep.i_star,
        "delta_wc": rep.delta_wc.delta,
        "beta_star": rep.beta_star,
        "lambda_star": rep.lambda_star,
        "clearing": _clearing_payload(net, rep.clearing_at_wc),
    }
    if args.check_uniqueness:
        u = uniqueness_check(net, args.epsilon, norm, report=rep)
        payload["uniqueness"] = {
            "status": u.unique.value,
            "rank_FZ": u.rank_FZ,
            "columns": u.columns,
            "iota_star": u.iota_star,
            "conditions": u.condition_flags,
            "ambiguous": u.ambiguous,
        }
    return payload, 0


def cmd_sweep(net, args):
    curve = loss_curve(net, args.norm, grid_points=args.grid, runs=args.runs,
                       seed=args.seed, below=args.below)
    csv = curve.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv)
    if args.format == "csv" and not args.out:
        return csv, 0
    return {
        "norm": curve.norm,
        "epsilon_star": curve.epsilon_star,
        "epsilon_ub": curve.epsilon_ub,
        "seed": curve.seed,
        "runs": args.runs,
        "out": args.out,
        "points": [
            {"epsilon": p.epsilon, "eta_wc": p.eta_wc, "i_star": p.i_star,
             "rand_min": p.rand_min, "rand_mean": p.rand_mean, "rand_max": p.rand_max}
            for p in curve.points
        ],
        "kinks": kink_report(curve),
    }, 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clearnet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"clearnet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="network JSON file")
        p.set_defaults(func=func)
        return p

    def norm_arg(p):
        p.add_argument("--norm", required=True, choices=["l1", "linf"])

    p = add("validate", cmd_validate, "check a network file")
    p.add_argument("--allow-boundary", action="store_true",
                   help="accept zero nominal net worth with a warning")

    p = add("clear", cmd_clear, "compute the clearing vector")
    p.add_argument("--delta", help="comma-separated price perturbation (0 means all zeros)")
    p.add_argument("--method", default="lp", choices=["lp", "iter-max", "iter-min"])
    p.add_argument("--format", default="json", choices=["json", "csv"])

    p = add("margin", cmd_margin, "default resilience margin")
    norm_arg(p)
    p.add_argument("--allow-boundary", action="store_true")

    p = add("insolvency-margin", cmd_insolvency, "insolvency resilience margin")
    norm_arg(p)

    p = add("worst-case", cmd_worst_case, "worst-case loss at a perturbation level")
    norm_arg(p)
    p.add_argument("--epsilon", required=True, type=float)
    p.add_argument("--check-uniqueness", action="store_true")

    p = add("sweep", cmd_sweep, "loss curve with random-shock baseline")
    norm_arg(p)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--runs", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--below", type=int, default=0, help="extra grid points below the default margin")
    p.add_argument("--out", help="write the CSV table to this file")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    return ap


def _emit(obj, out):
    out.write(json.dumps(jsonable(obj), separators=(",", ":"), allow_nan=False) + "\n")


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        net, digest = _read(args.file)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            payload, code = args.func(net, args)
    except ClearnetError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, out)
        return exc.exit_code
    except OSError as exc:
        _emit({"error": "IOError", "message": str(exc)}, out)
        return 2
    except Exception as exc:  # noqa: BLE001
        _emit({"error": type(exc).__name__, "message": str(exc)}, out)
        return 1
    if isinstance(payload, str):
        out.write(payload)
        return code
    report = {
        "command": args.command,
        "input_digest": digest,
        "tool_version": __version__,
        **payload,
        "duration_s": round(time.perf_counter() - start, 6),
    }
    _emit(report, out)
    return code


def main() -> None:
    sys.exit(run())
