"""Operator specifications: JSON-compatible text to symbols, cuts and mode maps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import sympy as sp

from . import expressions as ex
from .holo import SpectralCut, complex_power_symbol
from .operators import Operator, shifted_derivative
from .spectral import MultiplierOperator, _ModeCalculus
from .symbols import (
    DEFAULT_DEPTH,
    DEFAULT_GRID,
    ExactSymbol,
    PeriodicMatrixFunction,
    PolyhomSymbol,
    make_symbol,
    polynomial_symbol,
)

KINDS = ("power_multiplier", "shifted_first_order", "matrix_multiplier", "variable_symbol")
_ALLOWED_VARS = {
    "power_multiplier": {"n"},
    "shifted_first_order": set(),
    "matrix_multiplier": {"n"},
    "variable_symbol": {"x", "xi"},
}


class SpecError(ValueError):
    """Invalid operator specification; the message names the offending field."""


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    kind: str
    params: dict
    cut: float
    depth: int = DEFAULT_DEPTH
    grid: int | None = None
    trees: dict = field(default_factory=dict, compare=False, repr=False)

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "cut": self.cut, "depth": self.depth}
        if self.grid is not None:
            out["grid"] = self.grid
        out.update(self.params)
        return out


def _field(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _parse_expr(value: Any, path: str, allowed: set[str]) -> ex.Node:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return ex.Num(float(value))
    if not isinstance(value, str):
        raise SpecError(f"{path}: expected a number or expression string, got {type(value).__name__}")
    try:
        node = ex.parse(value)
    except ex.ExpressionError as err:
        raise SpecError(f"{path}: {err}") from None
    extra = ex.free_variables(node) - allowed
    if extra:
        what = "a multiplier" if "n" in allowed else ("a constant" if not allowed else "this kind")
        raise SpecError(f"{path}: variables {sorted(extra)} are not allowed in {what}")
    return node


def _matrix_field(obj: dict, path: str, allowed: set[str]) -> list[list[ex.Node]]:
    if "symbol" in obj:
        return [[_parse_expr(obj["symbol"], _field(path, "symbol"), allowed)]]
    if "entries" not in obj:
        raise SpecError(f"{path}: needs 'symbol' or 'entries'")
    rows = obj["entries"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) and len(r) == len(rows) for r in rows):
        raise SpecError(f"{_field(path, 'entries')}: expected a square list of lists")
    return [[_parse_expr(v, f"{_field(path, 'entries')}[{i}][{j}]", allowed) for j, v in enumerate(r)] for i, r in enumerate(rows)]


def parse_operator(text: str | dict, path: str = "") -> OperatorSpec:
    """Validate one operator description (a JSON string or an already-decoded mapping)."""
    if isinstance(text, str):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as err:
            raise SpecError(f"{path or 'operator'}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    else:
        obj = dict(text)
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SpecError(f"{_field(path, 'kind')}: expected one of {', '.join(KINDS)}, got {kind!r}")
    allowed = _ALLOWED_VARS[kind]
    trees: dict = {}
    params: dict = {}
    if kind == "power_multiplier":
        for key in ("base", "exponent"):
            if key not in obj:
                raise SpecError(f"{path or 'operator'}: missing field '{key}'")
        trees["base"] = _parse_expr(obj["base"], _field(path, "base"), allowed)
        trees["exponent"] = _parse_expr(obj["exponent"], _field(path, "exponent"), set())
        params = {"base": obj["base"], "exponent": obj["exponent"]}
        if "base_cut" in obj:
            params["base_cut"] = float(_number(obj["base_cut"], _field(path, "base_cut")).real)
    elif kind == "shifted_first_order":
        if "c" not in obj:
            raise SpecError(f"{path or 'operator'}: missing field 'c'")
        trees["c"] = _parse_expr(obj["c"], _field(path, "c"), set())
        params = {"c": obj["c"]}
    else:
        trees["entries"] = _matrix_field(obj, path, allowed)
        params = {k: obj[k] for k in ("symbol", "entries") if k in obj}
        if "power" in obj:
            trees["power"] = _parse_expr(obj["power"], _field(path, "power"), set())
            params["power"] = obj["power"]
            if "base_cut" in obj:
                params["base_cut"] = float(_number(obj["base_cut"], _field(path, "base_cut")).real)
    cut = _number(obj.get("cut", math.pi), _field(path, "cut"))
    depth = int(_number(obj.get("depth", DEFAULT_DEPTH), _field(path, "depth")).real)
    grid = obj.get("grid")
    if grid is not None:
        grid = int(_number(grid, _field(path, "grid")).real)
    return OperatorSpec(str(obj.get("name", kind)), kind, params, float(np.real(cut)), depth, grid, trees)


def _number(value: Any, path: str) -> complex:
    node = _parse_expr(value, path, set())
    return complex(ex.evaluate(node))


# ---------------------------------------------------------------------------
# symbols from expressions

_T = sp.Symbol("t", positive=True)


def _side_expansion(expr: sp.Expr, var: sp.Symbol, side: int, upto: int) -> dict:
    """``expr(side/t)`` as ``{(p, l): c}`` meaning ``c t^p log(t)^l``."""
    g = sp.expand(expr.subs(var, side / _T))
    ser = sp.series(g, _T, 0, upto).removeO()
    out: dict = {}
    for term in sp.Add.make_args(sp.expand(ser)):
        coeff, p, l = term, sp.Integer(0), 0
        for factor in sp.Mul.make_args(term):
            base, e = factor.as_base_exp()
            if base == _T:
                p += e
                coeff = coeff / factor
            elif base == sp.log(_T) and e.is_Integer:
                l += int(e)
                coeff = coeff / factor
        if coeff.has(_T):
            raise SpecError(f"cannot expand {expr} in powers of 1/|n|")
        out[(p, l)] = out.get((p, l), 0) + complex(sp.N(coeff, 20))
    return out


def _series_symbol(entries: list[list[ex.Node]], depth: int) -> PolyhomSymbol:
    """Homogeneous components of a matrix of functions of ``n`` from their large-``n`` series."""
    var = ex.SYMPY_VARS["n"]
    exprs = [[ex.to_sympy(e) for e in row] for row in entries]
    m = len(exprs)
    first = {}
    for side in (1, -1):
        for i in range(m):
            for j in range(m):
                first[(side, i, j)] = _side_expansion(exprs[i][j], var, side, 2)
    degrees = [-float(p) for d in first.values() for (p, _), c in d.items() if abs(c) > 0]
    if not degrees:
        raise SpecError("operator is identically zero")
    order = max(degrees)
    upto = int(math.ceil(depth - order)) + 1
    comps: dict = {}
    log_type = 0
    for side_idx, side in enumerate((1, -1)):
        for i in range(m):
            for j in range(m):
                for (p, l), c in _side_expansion(exprs[i][j], var, side, upto).items():
                    deg = -float(p)
                    k = order - deg
                    if abs(k - round(k)) > 1e-9:
                        raise SpecError(f"entry [{i}][{j}] has degree {deg} not congruent to the order {order}")
                    k = int(round(k))
                    if k >= depth or abs(c) == 0:
                        continue
                    log_type = max(log_type, l)
                    # log(t) = -log|xi|
                    comps[(k, l, side_idx, i, j)] = c * (-1) ** l
    data = np.zeros((depth, log_type + 1, 2, 1, m, m), dtype=complex)
    for (k, l, s, i, j), c in comps.items():
        data[k, l, s, 0, i, j] += c

    def fn(xi):
        out = np.empty((len(xi), m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                out[:, i, j] = np.broadcast_to(ex.evaluate(entries[i][j], n=xi), xi.shape)
        return out

    return make_symbol(int(order) if float(order).is_integer() else order, data, ExactSymbol(fn))


def _variable_symbol(entries: list[list[ex.Node]], depth: int, grid: int) -> PolyhomSymbol:
    """``sum_k c_k(x) xi^k`` from expressions polynomial in ``xi``."""
    xs, xis = ex.SYMPY_VARS["x"], ex.SYMPY_VARS["xi"]
    m = len(entries)
    polys = []
    deg = 0
    for i, row in enumerate(entries):
        for j, node in enumerate(row):
            e = sp.expand(ex.to_sympy(node))
            try:
                poly = sp.Poly(e, xis)
            except sp.PolynomialError:
                raise SpecError(f"entry [{i}][{j}] is not polynomial in xi") from None
            if poly.free_symbols - {xis, xs}:
                raise SpecError(f"entry [{i}][{j}] has unexpected symbols")
            polys.append((i, j, poly))
            deg = max(deg, poly.degree())
    x = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    coefs = []
    for k in range(deg + 1):
        samples = np.zeros((grid, m, m), dtype=complex)
        for i, j, poly in polys:
            c = poly.coeff_monomial(xis**k)
            f = sp.lambdify(xs, c, "numpy")
            samples[:, i, j] = np.broadcast_to(np.asarray(f(x), dtype=complex), (grid,))
        if np.allclose(samples, samples[:1]):
            coefs.append(samples[0])
        else:
            coefs.append(PeriodicMatrixFunction(samples))
    return polynomial_symbol(coefs, depth, grid if any(isinstance(c, PeriodicMatrixFunction) for c in coefs) else None)


@dataclass(frozen=True, eq=False)
class BuiltOperator:
    spec: OperatorSpec
    operator: Operator
    multiplier: MultiplierOperator | None


def build_operator(spec: OperatorSpec, depth: int | None = None, grid: int | None = None) -> BuiltOperator:
    depth = depth or spec.depth
    grid = grid or spec.grid or DEFAULT_GRID
    cut = SpectralCut(spec.cut)
    mult = None
    if spec.kind == "shifted_first_order":
        c = ex.constant_value(spec.trees["c"])
        c = c.real if abs(c.imag) < 1e-15 else c
        sym = shifted_derivative(c, cut, depth=depth)
        mult = MultiplierOperator(lambda n, c=c: (n + c)[:, None, None], 1.0, cut, sym, name=spec.name)
    elif spec.kind == "power_multiplier":
        base_nodes = [[spec.trees["base"]]]
        base = _series_symbol(base_nodes, depth)
        z = ex.constant_value(spec.trees["exponent"])
        z = z.real if abs(z.imag) < 1e-15 else z
        base_cut = SpectralCut(spec.params.get("base_cut", math.pi))
        sym = complex_power_symbol(base, z, base_cut, depth)
        mult = _power_mode_map(base_nodes, z, base_cut, sym, cut, spec.name)
    elif spec.kind == "matrix_multiplier":
        sym = _series_symbol(spec.trees["entries"], depth)
        if "power" in spec.trees:
            z = ex.constant_value(spec.trees["power"])
            base_cut = SpectralCut(spec.params.get("base_cut", math.pi))
            pw = complex_power_symbol(sym, z, base_cut, depth)
            mult = _power_mode_map(spec.trees["entries"], z, base_cut, pw, cut, spec.name)
            sym = pw
        else:
            mult = MultiplierOperator(lambda n, s=sym: s.exact(n)[0], sym.order, cut, sym, sym.log_type, spec.name)
    else:
        sym = _variable_symbol(spec.trees["entries"], depth, grid)
        if "power" in spec.trees:
            z = ex.constant_value(spec.trees["power"])
            base_cut = SpectralCut(spec.params.get("base_cut", math.pi))
            sym = complex_power_symbol(sym, z, base_cut, depth)
        if sym.grid_size == 1 and sym.exact is not None:
            mult = MultiplierOperator(lambda n, s=sym: s.exact(n)[0], sym.order, cut, sym, sym.log_type, spec.name)
    return BuiltOperator(spec, Operator(sym, cut, spec.name), mult)


def _power_mode_map(entries, z, base_cut: SpectralCut, sym, cut: SpectralCut, name: str) -> MultiplierOperator:
    m = len(entries)

    def mode_map(n):
        vals = np.empty((len(n), m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                vals[:, i, j] = np.broadcast_to(ex.evaluate(entries[i][j], n=n), n.shape)
        calc = _ModeCalculus(vals)
        return calc.apply(lambda lam: base_cut.power(lam, z), lambda lam: z * base_cut.power(lam, z - 1))

    return MultiplierOperator(mode_map, sym.order, cut, sym, 0, name)


def operator_from_expression(text: str, cut: float = math.pi, name: str = "", depth: int = DEFAULT_DEPTH, grid: int | None = None) -> BuiltOperator:
    """Shorthand used by the command line: an expression in ``n`` (multiplier) or in ``x, xi``."""
    node = ex.parse(text)
    variables = ex.free_variables(node)
    if variables <= {"n"}:
        obj = {"kind": "matrix_multiplier", "symbol": text, "cut": cut, "name": name or text}
    elif variables <= {"x", "xi"}:
        obj = {"kind": "variable_symbol", "symbol": text, "cut": cut, "name": name or text}
    else:
        raise SpecError(f"expression {text!r} mixes n with x/xi")
    obj["depth"] = depth
    if grid is not None:
        obj["grid"] = grid
    return build_operator(parse_operator(obj))


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise SpecError(f"{path}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
