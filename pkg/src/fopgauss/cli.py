"""Command-line front end: ``fopgauss {analyze,quadrature,lanczos,realize,verify} INPUT``.

Problems and reports are JSON. Complex numbers are two-element ``[re, im]``
arrays; floats are written with 17 significant digits in a fixed key order so
identical inputs give byte-identical reports.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from collections.abc import Sequence

import numpy as np

from .core import MomentFunctional, TolerancePolicy, TripletFunctional
from .exceptions import (
    FopError,
    HorizonExceeded,
    InsufficientPattern,
    NoRealizableDegree,
    NotRegularDegree,
    ZeroInitialCoupling,
)
from .fop import assemble_block_tridiagonal, build_fop_sequence
from .hankel import analysis_from_pattern, classify_degree, determinant_sequence
from .lanczos import (
    block_biorthogonality_residual,
    classify_breakdown,
    krylov_residuals,
    lanczos,
    look_ahead_lanczos,
)
from .quadrature import gauss_quadrature, guaranteed_matching_range, matching_moment_check
from .realization import markov_parameters, minimal_partial_realization, mismatch_check

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_HORIZON = 3
EXIT_NOT_REGULAR = 4
EXIT_ZERO_COUPLING = 5
EXIT_NO_REALIZATION = 6


class ParseError(Exception):
    pass


# ---------------------------------------------------------------- serialization


def _fmt_float(x: float) -> str:
    x = float(x) + 0.0
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    # shortest round-trip form, identical on every platform
    return repr(x)


def _emit(obj, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(obj))
    elif isinstance(obj, (complex, np.complexfloating)):
        out.append(f"[{_fmt_float(obj.real)}, {_fmt_float(obj.imag)}]")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        # short rows of scalars stay on one line
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq):
            parts: list[str] = []
            for x in seq:
                buf: list[str] = []
                _emit(x, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, x in enumerate(seq):
            out.append(pad)
            _emit(x, indent, level + 1, out)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text for reports."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


# ---------------------------------------------------------------- problem files


def _complex(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ParseError(f"{where}: expected a number or [re, im]")
    if isinstance(x, (int, float)):
        z = complex(x)
    elif isinstance(x, list) and len(x) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in x):
        z = complex(x[0], x[1])
    else:
        raise ParseError(f"{where}: expected a number or [re, im]")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ParseError(f"{where}: non-finite value")
    return z


def _vector(data, name: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ParseError(f"{name} must be a nonempty array")
    return np.array([_complex(x, f"{name}[{i}]") for i, x in enumerate(data)], dtype=complex)


def _matrix(data) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ParseError("A must be a nonempty array of rows")
    rows = [_vector(r, f"A[{i}]") for i, r in enumerate(data)]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ParseError("A must be square")
    return np.array(rows)


def parse_problem(text: str) -> dict:
    """Validate a problem file and return ``{"moments": ...}`` or ``{"A", "v", "w"}`` plus tolerances."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("problem must be a JSON object")
    has_m = "moments" in data
    has_t = any(k in data for k in ("A", "v", "w"))
    if has_m == has_t:
        raise ParseError("give exactly one of 'moments' or 'A', 'v', 'w'")
    prob: dict = {}
    if has_m:
        prob["moments"] = _vector(data["moments"], "moments")
    else:
        for k in ("A", "v", "w"):
            if k not in data:
                raise ParseError(f"missing '{k}'")
        A = _matrix(data["A"])
        v = _vector(data["v"], "v")
        w = _vector(data["w"], "w")
        if len(v) != A.shape[0] or len(w) != A.shape[0]:
            raise ParseError("v and w must match the dimension of A")
        prob.update(A=A, v=v, w=w)
    tol = data.get("tolerances", {})
    if not isinstance(tol, dict) or set(tol) - {"zero_det_tol", "cluster_tol", "residual_tol"}:
        raise ParseError("tolerances must be an object with zero_det_tol, cluster_tol, residual_tol")
    prob["tolerances"] = tol
    return prob


def _problem_echo(prob: dict) -> dict:
    if "moments" in prob:
        return {"moments": list(prob["moments"])}
    return {"A": [list(r) for r in prob["A"]], "v": list(prob["v"]), "w": list(prob["w"])}


def _functional(prob: dict):
    if "moments" in prob:
        return MomentFunctional(list(prob["moments"]))
    return TripletFunctional(prob["w"], prob["A"], prob["v"])


def _tolerances(prob: dict, args) -> TolerancePolicy:
    base = dict(prob.get("tolerances", {})) if prob else {}
    for flag, name in (("tol_zero", "zero_det_tol"), ("tol_cluster", "cluster_tol"), ("tol_residual", "residual_tol")):
        val = getattr(args, flag)
        if val is not None:
            base[name] = val
    try:
        return TolerancePolicy(**base)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None


# ---------------------------------------------------------------- commands


def _classification_table(analysis, max_degree: int) -> dict:
    table = {}
    for n in range(1, max_degree + 1):
        try:
            table[str(n)] = classify_degree(analysis, n).value
        except InsufficientPattern:
            table[str(n)] = "undetermined"
    return table


def _analysis_payload(analysis) -> dict:
    return {
        "deltas": list(analysis.deltas),
        "pattern": analysis.pattern,
        "regular_indices": list(analysis.regular_indices),
        "kronecker": list(analysis.kronecker),
        "euclidean": list(analysis.euclidean),
        "incurable_from": analysis.incurable_from,
        "tail_certified": analysis.tail_certified,
        "exact": analysis.exact,
    }


def cmd_analyze(prob, args, tol: TolerancePolicy) -> dict:
    if args.pattern is not None:
        try:
            analysis = analysis_from_pattern(args.pattern)
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    else:
        analysis = determinant_sequence(_functional(prob), args.max_degree, tol, args.exact)
    top = args.max_degree if args.max_degree is not None else analysis.computed
    payload = _analysis_payload(analysis)
    payload["classification"] = _classification_table(analysis, top)
    return payload


def _rule_payload(rule) -> dict:
    return {
        "n": rule.n,
        "nodes": [
            {
                "value": nd.value,
                "multiplicity": nd.multiplicity,
                "weights": list(nd.weights),
                "suspect": nd.suspect,
            }
            for nd in rule.nodes
        ],
        "prefactor": rule.prefactor,
        "nu1": rule.nu1,
        "exactness": rule.exactness,
        "weight_residual": rule.weight_residual,
    }


def _matching_table(T, f, k_max: int) -> dict:
    rep = matching_moment_check(T, f, k_max)
    m = f.moments(k_max + 1)
    return {
        "k_max": k_max,
        "rows": [
            {"k": k, "matrix": rep.matrix_moments[k], "moment": complex(m[k]), "residual": rep.residuals[k]}
            for k in range(k_max + 1)
        ],
        "max_residual": rep.max_residual,
        "relative": rep.relative,
    }


def _range_cap(f, analysis, n: int, max_degree: int | None) -> int:
    g = guaranteed_matching_range(analysis, n)
    cap = f.horizon if f.horizon is not None else 2 * (f.dimension + n)
    if max_degree is not None:
        cap = min(cap, max_degree)
    return cap if g is None else min(g, cap)


def cmd_quadrature(prob, args, tol: TolerancePolicy) -> dict:
    if args.n is None:
        raise ParseError("--n is required")
    f = _functional(prob)
    analysis = determinant_sequence(f, None, tol, args.exact)
    rule = gauss_quadrature(f, args.n, tol=tol, analysis=analysis)
    payload = _rule_payload(rule)
    if rule.source_T is not None:
        payload["T"] = rule.source_T.matrix
        payload["matching"] = _matching_table(rule.source_T, f, _range_cap(f, analysis, args.n, args.max_degree))
    return payload


def _require_triplet(prob, cmd: str):
    if "A" not in prob:
        raise ParseError(f"{cmd} needs a triplet problem with A, v, w")


def cmd_lanczos(prob, args, tol: TolerancePolicy) -> dict:
    _require_triplet(prob, "lanczos")
    A, v, w = prob["A"], prob["v"], prob["w"]
    run = look_ahead_lanczos if args.look_ahead else lanczos
    state, raw = run(A, v, w, args.n_max, tol)
    analysis = determinant_sequence(TripletFunctional(w, A, v), None, tol, args.exact)
    cls = classify_breakdown(state, analysis)
    kv, kw = krylov_residuals(state)
    return {
        "look_ahead": bool(args.look_ahead),
        "steps": state.step,
        "T": state.T.matrix,
        "blocks": list(state.nu),
        "truncated": state.truncated,
        "breakdown": {"kind": raw.kind.value, "step": raw.step, "detail": raw.detail},
        "classified": {"kind": cls.kind.value, "step": cls.step, "detail": cls.detail},
        "biorthogonality_residual": block_biorthogonality_residual(state),
        "krylov_residual_v": kv,
        "krylov_residual_w": kw,
    }


def cmd_realize(prob, args, tol: TolerancePolicy) -> dict:
    if "moments" not in prob:
        raise ParseError("realize needs a moments problem")
    if args.k is None:
        raise ParseError("--k is required")
    ms = list(prob["moments"])
    if args.k > len(ms) - 1:
        raise HorizonExceeded(args.k, len(ms) - 1)
    triplet, n = minimal_partial_realization(ms, args.k, tol, args.exact)
    got = markov_parameters(triplet, args.k).as_array()
    m = np.array(ms[: args.k + 1])
    res = float(np.max(np.abs(got - m)))
    scale = float(np.max(np.abs(m)))
    return {
        "k": args.k,
        "dimension": n,
        "w": triplet.w,
        "A": triplet.A,
        "v": triplet.v,
        "markov": list(got),
        "markov_residual": res,
        "markov_relative": res / scale if scale > 0 else res,
        "minimality": "relative to the computed determinant zero pattern",
    }


def cmd_verify(prob, args, tol: TolerancePolicy) -> dict:
    _require_triplet(prob, "verify")
    A, v, w = prob["A"], prob["v"], prob["w"]
    rep = mismatch_check(A, v, w, tol)
    f = TripletFunctional(w, A, v)
    analysis = determinant_sequence(f, None, tol, args.exact)
    payload = {
        "breakdown": {"kind": rep.breakdown.kind.value, "step": rep.breakdown.step, "detail": rep.breakdown.detail},
        "incurable": rep.applicable,
        "blocks": list(rep.nu),
        "mismatch": {
            "applicable": rep.applicable,
            "ritz": list(rep.ritz),
            "spectrum": list(rep.spectrum),
            "max_min_distance": rep.max_min_distance,
        },
    }
    n = max(x for x in rep.nu if x <= len(rep.ritz)) if rep.ritz else 0
    if n > 0 and n in analysis.regular_indices:
        T = assemble_block_tridiagonal(build_fop_sequence(f, n, analysis, tol), n)
        payload["matching"] = _matching_table(T, f, _range_cap(f, analysis, n, args.max_degree))
    return payload


COMMANDS = {
    "analyze": cmd_analyze,
    "quadrature": cmd_quadrature,
    "lanczos": cmd_lanczos,
    "realize": cmd_realize,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fopgauss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", nargs="?", help='problem file (JSON), "-" for stdin')
    common.add_argument("--tol-zero", type=float, help="zero_det_tol")
    common.add_argument("--tol-cluster", type=float, help="cluster_tol")
    common.add_argument("--tol-residual", type=float, help="residual_tol")
    common.add_argument("--exact", action="store_true", help="exact rational determinants")
    common.add_argument("--max-degree", type=int, help="largest degree / determinant count considered")
    common.add_argument("-o", "--output", help="write the report here instead of stdout")

    p = sub.add_parser("analyze", parents=[common], help="Hankel determinant pattern and degree classification")
    p.add_argument("--pattern", help='synthetic zero pattern such as "xx0xx0000x000x"')
    p = sub.add_parser("quadrature", parents=[common], help="n-node Gauss rule")
    p.add_argument("--n", type=int)
    p = sub.add_parser("lanczos", parents=[common], help="plain or look-ahead Lanczos on a triplet")
    p.add_argument("--n-max", type=int)
    p.add_argument("--look-ahead", action="store_true")
    p = sub.add_parser("realize", parents=[common], help="minimal partial realization")
    p.add_argument("--k", type=int)
    sub.add_parser("verify", parents=[common], help="breakdown classification and Ritz/spectrum mismatch")
    return parser


def _echo(args) -> dict:
    keys = ["input", "tol_zero", "tol_cluster", "tol_residual", "exact", "max_degree",
            "pattern", "n", "n_max", "look_ahead", "k"]
    flags = {k: getattr(args, k) for k in keys if hasattr(args, k) and getattr(args, k) not in (None, False)}
    return {"name": args.command, "flags": flags}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    body = {"error": kind, "message": message}
    body.update(extra)
    sys.stderr.write(dumps(body))
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK

    raw = b""
    prob: dict = {}
    try:
        if args.input is None:
            if not (args.command == "analyze" and args.pattern is not None):
                raise ParseError("an input file is required")
        else:
            raw = sys.stdin.buffer.read() if args.input == "-" else open(args.input, "rb").read()
            prob = parse_problem(raw.decode("utf-8"))
        tol = _tolerances(prob, args)
        payload = COMMANDS[args.command](prob, args, tol)
    except ParseError as exc:
        return _fail(EXIT_PARSE, "ParseError", str(exc))
    except OSError as exc:
        return _fail(EXIT_PARSE, "ParseError", str(exc))
    except UnicodeDecodeError as exc:
        return _fail(EXIT_PARSE, "ParseError", str(exc))
    except HorizonExceeded as exc:
        return _fail(EXIT_HORIZON, "HorizonExceeded", str(exc), index=exc.index, horizon=exc.horizon)
    except NotRegularDegree as exc:
        return _fail(EXIT_NOT_REGULAR, "NotRegularDegree", str(exc), n=exc.n, nearest=list(exc.nearest))
    except ZeroInitialCoupling as exc:
        return _fail(EXIT_ZERO_COUPLING, "ZeroInitialCoupling", str(exc))
    except NoRealizableDegree as exc:
        return _fail(EXIT_NO_REALIZATION, "NoRealizableDegree", str(exc))
    except FopError as exc:
        return _fail(EXIT_FAILURE, type(exc).__name__, str(exc))

    report = {
        "command": _echo(args),
        "input": {
            "sha256": hashlib.sha256(raw).hexdigest() if raw else None,
            "problem": _problem_echo(prob) if prob else None,
        },
        "tolerances": tol.as_dict(),
        "result": payload,
    }
    text = dumps(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
