"""Command line entry point: ``psido residue|trace|logdet|anomaly|verify``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import anomaly as an
from . import verification as vf
from .spectral import DEFAULT_MODES, log_det_spectral, weighted_trace_spectral
from .symbols import DEFAULT_DEPTH
from .traces import canonical_trace, residue, weighted_trace
from .workbench import SpecError, build_operator, load_config, operator_from_expression, parse_operator

# ---------------------------------------------------------------------------
# deterministic serialization


def _float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    out = format(v, ".17g")
    if not any(c in out for c in ".en"):
        out += ".0"
    return out


def _plain(obj):
    """Convert numpy scalars, complex numbers and dataclass-like payloads to JSON-ready values."""
    if isinstance(obj, (np.generic,)):
        obj = obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def dumps(obj, indent: int = 0) -> str:
    """JSON with sorted keys and every float written to 17 significant digits."""
    obj = _plain(obj)
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(k)}: {dumps(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def format_number(z: complex, digits: int = 7) -> str:
    z = complex(z)
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.{digits}f}"
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real:.{digits}f}{sign}{abs(z.imag):.{digits}f}i"


def _csv_number(z: complex) -> str:
    z = complex(z)
    if z.imag == 0 or abs(z.imag) <= 1e-14 * max(1.0, abs(z.real)):
        return _float(z.real)
    return f"{_float(z.real)}{'+' if z.imag >= 0 else '-'}{_float(abs(z.imag))}j"


# ---------------------------------------------------------------------------
# operator input


def _operator(args, text: str | None, key: str, cfg: dict | None, name: str = ""):
    """An operator from ``--op``-style expression text or from the config entry ``key``."""
    if text is not None:
        return operator_from_expression(text, args.cut, name or text, args.depth, args.grid)
    if cfg is not None and key in cfg:
        return build_operator(parse_operator(cfg[key], key), args.depth, args.grid)
    raise SpecError(f"no operator given: pass an expression or a config with field {key!r}")


def _settings(args) -> dict:
    return {"depth": args.depth, "grid": args.grid, "modes": args.modes, "tol": args.tol, "cut": args.cut}


def _emit(args, payload: dict, line: str) -> None:
    if args.format == "json":
        text = dumps(payload) + "\n"
    else:
        text = line + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.{args.format}").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verbs


def cmd_residue(args, cfg) -> int:
    built = _operator(args, args.op, "op", cfg)
    value = residue(built.operator.symbol)
    _emit(args, {"command": "residue", "operator": built.spec.to_json(), "value": value, "settings": _settings(args)},
          format_number(value))
    return 0


def cmd_trace(args, cfg) -> int:
    built = _operator(args, args.op, "op", cfg)
    payload = {"command": "trace", "operator": built.spec.to_json(), "settings": _settings(args)}
    if args.weight is not None or (cfg and "weight" in cfg):
        q = _operator(args, args.weight, "weight", cfg)
        value = weighted_trace(built.operator.symbol, q.operator.symbol, q.operator.cut)
        payload["weight"] = q.spec.to_json()
        if built.multiplier is not None and q.multiplier is not None:
            payload["spectral"] = weighted_trace_spectral(built.multiplier, q.multiplier, modes=args.modes).value
    else:
        value = canonical_trace(built.operator.symbol)
    payload["value"] = value
    _emit(args, payload, format_number(value))
    return 0


def cmd_logdet(args, cfg) -> int:
    built = _operator(args, args.op, "op", cfg)
    payload = {"command": "logdet", "operator": built.spec.to_json(), "settings": _settings(args)}
    if args.weight is not None or (cfg and "weight" in cfg):
        q = _operator(args, args.weight, "weight", cfg)
        value = an.log_det_weighted(built.operator, q.operator)
        payload["weight"] = q.spec.to_json()
    else:
        value = an.log_det_zeta_local(built.operator)
        if built.multiplier is not None:
            payload["spectral"] = log_det_spectral(built.multiplier, modes=args.modes)
    payload["value"] = value
    line = format_number(value)
    if "spectral" in payload:
        line += f"  (mode sums: {format_number(payload['spectral'])})"
    _emit(args, payload, line)
    return 0


def cmd_anomaly(args, cfg) -> int:
    a = _operator(args, args.a, "A", cfg)
    b = _operator(args, args.b, "B", cfg)
    cut_ab = args.cut_ab if args.cut_ab is not None else (cfg or {}).get("cut_ab")
    rep = an.zeta_anomaly_local(a.operator, b.operator, cut_ab, spectral=not args.no_spectral)
    payload = rep.to_json()
    payload.update({"command": "anomaly", "A": a.spec.to_json(), "B": b.spec.to_json(), "settings": _settings(args)})
    line = f"log M = {format_number(rep.log_M_local)}"
    if rep.log_M_spectral is not None:
        line += f"  mode sums {format_number(rep.log_M_spectral)}  |local - spectral| = {rep.discrepancy:.3e}"
    _emit(args, payload, line)
    return 0


def _workers(count: int) -> int:
    cap = os.environ.get("PSIDO_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, count))


def run_suite(suite: str, cfg: dict | None = None, tol: float | None = None, workers: int | None = None) -> dict:
    """Run the criteria of ``suite`` (in parallel when allowed) and assemble the report."""
    numbers = vf.SUITES[suite]
    workers = _workers(len(numbers)) if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(vf.run_criterion, numbers, [cfg] * len(numbers)))
    else:
        results = [vf.run_criterion(k, cfg) for k in numbers]
    checks, criteria = [], []
    for k, rows in zip(numbers, results):
        name = vf.CRITERIA[k][0]
        for r in rows:
            passed = r.passed if tol is None else bool(r.detail.get("error", math.inf) <= tol)
            checks.append({
                "criterion": k,
                "check_id": r.check_id,
                "paper_ref": name,
                "description": r.description,
                "value": r.value,
                "reference": r.reference,
                "tolerance": r.tolerance if tol is None else tol,
                "error": r.detail.get("error"),
                "pass": passed,
                "detail": {key: v for key, v in r.detail.items() if key != "error"},
            })
        criteria.append({"criterion": k, "name": name, "pass": all(c["pass"] for c in checks if c["criterion"] == k)})
    return {
        "suite": suite,
        "config": {"suite": suite, "tolerance_override": tol, "input": cfg or {}},
        "criteria": criteria,
        "checks": checks,
        "pass": all(c["pass"] for c in criteria),
    }


def summary_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["check_id", "paper_ref", "value", "reference", "tolerance", "pass"])
    for c in report["checks"]:
        writer.writerow([c["check_id"], c["paper_ref"], _csv_number(c["value"]), _csv_number(c["reference"]),
                         _float(float(c["tolerance"])), "true" if c["pass"] else "false"])
    return buf.getvalue()


def cmd_verify(args, cfg) -> int:
    if cfg is not None:
        cfg = dict(cfg)
        settings = {"depth": args.depth, "grid": args.grid}
        settings.update(cfg.get("settings", {}))
        cfg["settings"] = settings
    report = run_suite(args.suite, cfg, args.tol)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / f"report_{args.suite}.json").write_text(dumps(report) + "\n", encoding="utf-8")
    (out / f"summary_{args.suite}.csv").write_text(summary_csv(report), encoding="utf-8")
    if args.format == "json":
        sys.stdout.write(dumps(report) + "\n")
    else:
        for c in report["checks"]:
            err = c["error"]
            sys.stdout.write(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check_id']}  |err| = {err:.3e}  tol = {c['tolerance']:.0e}\n")
        failed = [c["check_id"] for c in report["checks"] if not c["pass"]]
        sys.stdout.write(f"{len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed\n")
        if failed:
            sys.stdout.write("failed: " + ", ".join(failed) + "\n")
    return 0 if report["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--depth", type=int, default=DEFAULT_DEPTH, help="number of homogeneous components kept")
    common.add_argument("--grid", type=int, default=None, help="x-grid size for x-dependent symbols")
    common.add_argument("--modes", type=int, default=DEFAULT_MODES, help="directly summed modes in spectral sums")
    common.add_argument("--tol", type=float, default=None, help="override every check tolerance (verify)")
    common.add_argument("--out", help="directory for report files")
    common.add_argument("--format", choices=("json", "csv"), default="csv", help="stdout format")
    common.add_argument("--cut", type=float, default=math.pi, help="spectral cut angle for expression operators")

    parser = argparse.ArgumentParser(prog="psido", description="Residues, regularized traces and determinants on the circle.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("residue", parents=[common], help="noncommutative residue of an operator")
    p.add_argument("--op", help="expression in n (multiplier) or in x, xi (symbol)")
    p = sub.add_parser("trace", parents=[common], help="canonical or weighted trace")
    p.add_argument("--op")
    p.add_argument("--weight", help="weight expression; gives tr^Q instead of TR")
    p = sub.add_parser("logdet", parents=[common], help="log of the zeta or weighted determinant")
    p.add_argument("--op")
    p.add_argument("--weight")
    p = sub.add_parser("anomaly", parents=[common], help="multiplicative anomaly log det(AB) - log det A - log det B")
    p.add_argument("--a", dest="a")
    p.add_argument("--b", dest="b")
    p.add_argument("--cut-ab", type=float, default=None, help="cut for AB (chosen automatically if omitted)")
    p.add_argument("--no-spectral", action="store_true", help="skip the mode-sum comparison")
    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=sorted(vf.SUITES))
    return parser


COMMANDS = {"residue": cmd_residue, "trace": cmd_trace, "logdet": cmd_logdet, "anomaly": cmd_anomaly, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else None
        return COMMANDS[args.command](args, cfg)
    except (SpecError, ValueError) as err:
        sys.stderr.write(f"psido {args.command}: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
