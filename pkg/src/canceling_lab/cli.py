"""Command-line front end: parse specs, run the library, write reports."""

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, algebra, geometry, lab
from .fields import field_from_spec, generate
from .search import SearchRejected, extremizer_search, problem_from_spec

EXIT_OK, EXIT_INPUT, EXIT_ANOMALY = 0, 1, 2

SCHEMAS = """\
spec schemas (all JSON):

  operator   {"n": int, "dimV": int, "dimE": int, "coeffs": [[[real]]]}
             coeffs indexed [k][e][v], symbol A(xi) = sum_k xi_k coeffs[k].
             Also {"preset": NAME, "n": int}. A missing file whose stem is a
             preset name is resolved as that preset: gradient, deformation,
             cauchy_riemann, partial_1, zero; "gradient:3" or "gradient3" pick n.

  field      {"n", "shape": [int], "h": real, "kind": "scalar"|"vector",
              "generator": {"name": NAME, "params": {...}}}
             or {"n", "shape", "h", "kind", "dimV", "lower", "raw": base64 <f8}.
             generators: gaussian_bump, mollified_ball_indicator,
             anisotropic_gaussian, rigid_motion_windowed, gaussian_gradient, zero.

  case       {"cases": [CASE, ...]} or a single CASE, where CASE is
             {"id": str, "check": alvino|korn|directional|certificate|planar,
              "field": FIELD, "operator": OPERATOR (certificate),
              "family": {"preset": "alvino"} | {"w": [[[..]]], "v": [[[..]]]}
                        | {"expand": {"w": [[..]], "v": [[..]]}} (directional)}.
             Preset case files: zero, planar, gaussian, mollified_ball.

  search     {"problem": alvino|korn|certificate, "operator": OPERATOR,
              "generator": NAME, "grid": {"n", "shape", "h"},
              "bounds": {PARAM: [lo, hi]}, "fixed": {PARAM: value}}

  voxel      {"n", "h", "cells": [[int]]} or {"n", "h", "generator":
              {"name": ball|parallelepiped|box, "params": {...}}},
             optionally with "bases": [[[w_1], ..., [w_n]], ...] and
             "raster_h". Preset voxel files: disk, cube, parallelepiped.

outputs: report.json (manifest, results, sha256 of the report without its
timestamp) and summary.csv in --out; the report is also printed to stdout.
exit codes: 0 all checks hold, 1 input error, 2 anomaly or construction failure.
environment: CANCELING_LAB_THREADS caps the worker threads used by verify.
"""


class InputError(Exception):
    pass


# ---------------------------------------------------------------- inputs

def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg} "
                         f"(char {exc.pos})") from None


def _preset_name(ref):
    stem = Path(ref).stem if str(ref).endswith(".json") else str(ref)
    name, _, dim = stem.partition(":")
    if not dim:
        stripped = name.rstrip("0123456789")
        if stripped != name and stripped in algebra.PRESETS:
            name, dim = stripped, name[len(stripped):]
    return name, (int(dim) if dim else None)


def operator_from_json(data):
    if "preset" in data:
        return algebra.preset(data["preset"], data.get("n", 2))
    op = algebra.OperatorSymbol.from_json(data)
    for key, actual in (("n", op.n), ("dimE", op.dim_e), ("dimV", op.dim_v)):
        if key in data and data[key] != actual:
            raise ValueError(f"{key}={data[key]} does not match coeffs shape")
    return op


def resolve_operator(ref):
    """Operator from a dict, a JSON file, or a preset name."""
    if isinstance(ref, dict):
        return operator_from_json(ref)
    if Path(ref).exists():
        return operator_from_json(load_json(ref))
    name, dim = _preset_name(ref)
    if name not in algebra.PRESETS:
        raise InputError(f"{ref}: no such file or operator preset")
    return algebra.preset(name, dim or 2)


def _grid_field(generator, vector=False, **params):
    shape = (128, 128)
    if vector:
        params.setdefault("direction", [1.0, 0.5])
    return generate(generator, 2, shape, 8.0 / 128, **params)


def _case_presets(name):
    if name == "zero":
        zero = generate("zero", 2, (32, 32), 0.25)
        zerov = generate("zero", 2, (32, 32), 0.25, dim_v=2)
        return [("zero:alvino", "alvino", zero, None, None),
                ("zero:korn", "korn", zerov, None, None),
                ("zero:directional", "directional", zerov, None, None),
                ("zero:planar", "planar", zerov, None, None)]
    if name in ("gaussian", "mollified_ball", "planar"):
        gen, params = {"gaussian": ("gaussian_bump", {}),
                       "mollified_ball": ("mollified_ball_indicator", {"radius": 1.5, "width": 0.75}),
                       "planar": ("gaussian_bump", {})}[name]
        s, v = _grid_field(gen, **params), _grid_field(gen, vector=True, **params)
        if name == "planar":
            return [("planar", "planar", v, None, None)]
        return [(f"{name}:alvino", "alvino", s, None, None),
                (f"{name}:korn", "korn", v, None, None),
                (f"{name}:directional", "directional", v, None, None),
                (f"{name}:certificate", "certificate", v, algebra.preset("deformation", 2), None)]
    return None


def _family(spec, u):
    if spec is None or spec.get("preset") == "alvino":
        return lab.alvino_family(u.n, u.dim_v)
    if "expand" in spec:
        return lab.de_figueiredo_expand(spec["expand"]["w"], spec["expand"]["v"])
    return lab.DirectionalFamily(np.asarray(spec["w"], float), np.asarray(spec["v"], float))


def load_cases(ref):
    if not Path(ref).exists():
        cases = _case_presets(Path(ref).stem)
        if cases is None:
            raise InputError(f"{ref}: no such file or case preset")
        return cases
    data = load_json(ref)
    raw = data.get("cases", [data]) if isinstance(data, dict) else data
    cases = []
    for idx, c in enumerate(raw):
        try:
            op = resolve_operator(c["operator"]) if "operator" in c else None
            cases.append((c.get("id", f"case{idx}"), c["check"], field_from_spec(c["field"]),
                          op, c.get("family")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{ref}: case {idx}: {exc!r}") from None
    return cases


# ---------------------------------------------------------------- reports

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def report_hash(report):
    body = dict(report)
    body.pop("sha256", None)
    body["manifest"] = {k: v for k, v in body["manifest"].items() if k != "timestamp"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def make_manifest(args, inputs):
    return {"command": args.command, "inputs": [str(p) for p in inputs],
            "seed": args.seed, "budget": getattr(args, "budget", None),
            "outdir": str(args.out) if args.out else None, "version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}


def emit(args, manifest, result, header, rows, status):
    report = _clean({"manifest": manifest, "status": status, "result": result})
    report["sha256"] = report_hash(report)
    text = json.dumps(report, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(_clean(rows))
        (out / "summary.csv").write_text(buf.getvalue())
    return report


RESULT_HEADER = ["case", "lhs", "rhs", "ratio", "h", "cells", "seed"]


def _thread_cap():
    raw = os.environ.get("CANCELING_LAB_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        cap = int(raw)
    except ValueError:
        raise InputError(f"CANCELING_LAB_THREADS must be an integer, got {raw!r}") from None
    if cap < 1:
        raise InputError("CANCELING_LAB_THREADS must be at least 1")
    return cap


# ---------------------------------------------------------------- commands

def cmd_classify(args):
    op = resolve_operator(args.operator)
    ell = algebra.is_elliptic(op, seed=args.seed)
    canceling, details = {}, {}
    for level in range(1, op.n):
        verdict = algebra.is_l_canceling(op, level, seed=args.seed)
        canceling[str(level)] = verdict.canceling
        details[str(level)] = verdict.to_json()
    result = {"operator": op.to_json(), "elliptic": ell.elliptic, "canceling": canceling,
              "ellipticity": ell.to_json(), "cancellation": details}
    rows = [["classify", ell.min_singular, ell.operator_norm, None, None, None, args.seed]]
    return result, RESULT_HEADER, rows, EXIT_OK


def cmd_certify(args):
    op = resolve_operator(args.operator)
    try:
        cert = algebra.construct_certificate(op, seed=args.seed, budget=args.budget)
    except algebra.PreconditionError as exc:
        return ({"operator": op.to_json(), "error": "precondition", "message": str(exc)},
                RESULT_HEADER, [], EXIT_ANOMALY)
    except algebra.ConstructionError as exc:
        return ({"operator": op.to_json(), "error": "construction", "message": str(exc),
                 "diagnostic": exc.diagnostic}, RESULT_HEADER, [], EXIT_ANOMALY)
    check = algebra.verify_certificate(op, cert, seed=args.seed)
    result = {"operator": op.to_json(), "certificate": cert.to_json(),
              "verification": check.to_json()}
    rows = [["certificate", check.identity_residual, check.identity_scale,
             None, None, None, args.seed]]
    return result, RESULT_HEADER, rows, EXIT_OK if check.passed else EXIT_ANOMALY


def _run_case(case, seed):
    case_id, check, u, op, family = case
    if check == "alvino":
        return [lab.verify_alvino(u, case_id)]
    if check == "korn":
        return [lab.verify_korn_sobolev(u, case_id)]
    if check == "directional":
        return [lab.verify_directional_theorem(u, _family(family, u), case_id)]
    if check == "certificate":
        if op is None:
            raise InputError(f"case {case_id}: certificate check needs an operator")
        cert = algebra.construct_certificate(op, seed=seed)
        return [lab.verify_certificate_inequality(op, cert, u, case_id)]
    if check == "planar":
        report = lab.planar_checks(u)
        return [_planar_row(case_id, item, u) for item in report.items]
    raise InputError(f"case {case_id}: unknown check {check!r}")


def _planar_row(case_id, item, u):
    rep = lab.VerificationReport(f"{case_id}:{item.name}", item.lhs, item.rhs, u.h, u.shape,
                                 extras={"slack": item.slack, "holds": item.holds})
    return rep


def cmd_verify(args):
    cases = load_cases(args.case)
    with ThreadPoolExecutor(max_workers=_thread_cap()) as pool:
        batches = list(pool.map(lambda c: _run_case(c, args.seed), cases))
    reports = [r for batch in batches for r in batch]
    # planar rows carry their own verdict; a zero rhs there is not an anomaly
    flagged = [r.case_id for r in reports
               if (not r.extras["holds"] if "holds" in r.extras else r.anomaly)]
    rows = [r.csv_row(args.seed) for r in reports]
    result = {"reports": [r.to_json() for r in reports], "flagged": flagged}
    return result, RESULT_HEADER, rows, EXIT_ANOMALY if flagged else EXIT_OK


def cmd_extremize(args):
    try:
        problem = problem_from_spec(load_json(args.search))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.search}: bad search spec: {exc!r}") from None
    try:
        res = extremizer_search(problem, args.budget, seed=args.seed)
    except SearchRejected as exc:
        return {"error": "degenerate", "message": str(exc)}, RESULT_HEADER, [], EXIT_ANOMALY
    rows = [r.csv_row(args.seed) for r in (res.best, res.refined)]
    rows[1][0] += ":refined"
    flagged = res.best.anomaly or res.refined.anomaly
    return res.to_json(), RESULT_HEADER, rows, EXIT_ANOMALY if flagged else EXIT_OK


def _voxel_presets(name):
    if name == "disk":
        return {"n": 2, "h": 1 / 64, "generator": {"name": "ball", "params": {"radius": 1.0}}}
    if name == "cube":
        return {"n": 3, "h": 1 / 8, "generator": {"name": "box",
                                                   "params": {"lower": [0, 0, 0], "upper": [8, 8, 8]}}}
    if name == "parallelepiped":
        s = 1 / math.sqrt(2)
        return {"n": 2, "h": 1 / 32, "bases": [[[1, 0], [s, s]]],
                "generator": {"name": "parallelepiped", "params": {"vectors": [[1, 0], [s, s]]}}}
    return None


def cmd_lw_demo(args):
    ref = args.voxels
    spec = load_json(ref) if Path(ref).exists() else _voxel_presets(Path(ref).stem)
    if spec is None:
        raise InputError(f"{ref}: no such file or voxel preset")
    try:
        voxels = geometry.voxels_from_spec(spec)
        bases = spec.get("bases", [np.eye(voxels.n).tolist()])
        raster_h = float(spec.get("raster_h", voxels.h / 4))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{ref}: bad voxel spec: {exc!r}") from None
    results, rows = [], []
    for idx, b in enumerate(bases):
        basis = geometry.DirectionBasis.from_vectors(b)
        rep = geometry.loomis_whitney_check(voxels, basis, raster_h)
        results.append({"basis": basis.w.tolist(), **rep.to_json()})
        rows.append([f"basis{idx}", rep.lhs, rep.rhs, rep.ratio, rep.raster_tolerance])
    status = EXIT_OK if all(r["holds"] for r in results) else EXIT_ANOMALY
    result = {"voxels": {"n": voxels.n, "h": voxels.h, "count": voxels.count,
                         "measure": voxels.measure}, "checks": results}
    return result, ["case", "lhs", "rhs", "ratio", "tolerance"], rows, status


# ---------------------------------------------------------------- entry points

def build_parser():
    parser = argparse.ArgumentParser(
        prog="canceling-lab", description="Classify operators, build certificates and "
        "check Lorentz-scale Sobolev inequalities on grids.",
        epilog=SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, positional, help_text, budget=None):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=SCHEMAS,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument(positional)
        p.add_argument("--seed", type=int, default=0)
        if budget is not None:
            p.add_argument("--budget", type=int, default=budget)
        p.add_argument("--out", help="directory for report.json and summary.csv")
        p.set_defaults(handler=handler, positional=positional)

    add("classify", cmd_classify, "operator", "ellipticity and l-cancellation verdicts")
    add("certify", cmd_certify, "operator", "construct and verify a certificate family", 256)
    add("verify", cmd_verify, "case", "run inequality checks on a case bundle")
    add("extremize", cmd_extremize, "search", "search generator parameters for large ratios", 64)
    add("lw-demo", cmd_lw_demo, "voxels", "Loomis-Whitney check on a voxel set")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    manifest = make_manifest(args, [getattr(args, args.positional)])
    try:
        result, header, rows, status = args.handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    emit(args, manifest, result, header, rows, status)
    return status


def main():
    sys.exit(run())
