"""Expression language for chart components and support functions.

Grammar::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := base ("^" factor)?
    base   := number | ident | ident "(" expr ")" | "(" expr ")" | "-" base

Note that unary minus lives in ``base``, so ``-u^2`` reads as ``(-u)^2``.
Write ``-(u^2)`` or ``0 - u^2`` for the other meaning.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "ParseDiagnostic",
    "DomainError",
    "parse_expression",
    "differentiate",
    "evaluate",
    "free_variables",
    "to_string",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs", "sign")
CONSTANTS = {"pi": math.pi}


class ParseDiagnostic(ValueError):
    """Syntax error, unknown identifier or arity mismatch in an expression."""

    def __init__(self, offset: int, message: str, token: str = ""):
        self.offset = offset
        self.message = message
        self.token = token
        super().__init__(f"at offset {offset} ({token!r}): {message}")


class DomainError(ArithmeticError):
    """An operation was evaluated outside its real domain."""

    def __init__(self, message: str, point: Mapping[str, object] | None = None):
        self.point = dict(point) if point else {}
        where = ", ".join(f"{k}={_fmt_point(v)}" for k, v in self.point.items())
        super().__init__(f"{message} at ({where})" if where else message)


def _fmt_point(v):
    try:
        return repr(float(v))
    except TypeError:
        return repr(v)


# ---------------------------------------------------------------------------
# AST


class Expression:
    """Base of the immutable expression tree."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expression):
    name: str


@dataclass(frozen=True, eq=True)
class Unary(Expression):
    op: str  # neg or one of FUNCTIONS
    arg: Expression


@dataclass(frozen=True, eq=True)
class Binary(Expression):
    op: str  # add sub mul div pow
    left: Expression
    right: Expression


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(e: Expression, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _is_integer(x: float) -> bool:
    return float(x).is_integer()


def _const_value(e: Expression) -> float | None:
    """Value of a literal, possibly negated (``u^-2`` parses as pow(u, neg 2))."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Unary) and e.op == "neg":
        v = _const_value(e.arg)
        return None if v is None else -v
    return None


def _fold(op: str, a: float, b: float | None = None) -> float | None:
    """Fold a constant subtree; None when the result would leave the reals."""
    try:
        if op == "neg":
            return -a
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            return None if b == 0 else a / b
        if op == "pow":
            if _is_integer(b):
                if a == 0 and b < 0:
                    return None
                return float(a ** int(b))
            return None if a <= 0 else math.exp(b * math.log(a))
        if op == "sin":
            return math.sin(a)
        if op == "cos":
            return math.cos(a)
        if op == "exp":
            return math.exp(a)
        if op == "ln":
            return None if a <= 0 else math.log(a)
        if op == "sqrt":
            return None if a < 0 else math.sqrt(a)
        if op == "abs":
            return abs(a)
        if op == "sign":
            return None if a == 0 else math.copysign(1.0, a)
    except OverflowError:
        return None
    raise ValueError(f"unknown operator {op!r}")


# Smart constructors: the only simplifications are constant folding and the
# x*0, x*1, x+0, x^1, x^0 rules.


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def func(name: str, a: Expression) -> Expression:
    if isinstance(a, Const):
        v = _fold(name, a.value)
        if v is not None:
            return Const(v)
    return Unary(name, a)


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("mul", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        v = _fold("div", a.value, b.value)
        if v is not None:
            return Const(v)
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def pow_(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        v = _fold("pow", a.value, b.value)
        if v is not None:
            return Const(v)
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return ONE
    return Binary("pow", a, b)




# ---------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseDiagnostic(pos, "unexpected character", text[pos])
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, params: Sequence[str]):
        self.text = text
        self.params = set(params)
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.tok
        offset = min(tok.offset, max(len(self.text) - 1, 0))
        raise ParseDiagnostic(offset, message, tok.text)

    def expect(self, text: str):
        if self.tok.text != text:
            self.fail(f"expected {text!r}")
        self.i += 1

    def parse(self) -> Expression:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("unexpected token")
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self.tok.text in ("+", "-"):
            op = "add" if self.tok.text == "+" else "sub"
            self.i += 1
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self.tok.text in ("*", "/"):
            op = "mul" if self.tok.text == "*" else "div"
            self.i += 1
            e = Binary(op, e, self.factor())
        return e

    def factor(self) -> Expression:
        b = self.base()
        if self.tok.text == "^":
            self.i += 1
            return Binary("pow", b, self.factor())
        return b

    def base(self) -> Expression:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.text == "-":
            self.i += 1
            return Unary("neg", self.base())
        if tok.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                if self.tok.text != "(":
                    self.fail(f"function {name!r} requires one argument", tok)
                self.i += 1
                arg = self.expr()
                if self.tok.text == ",":
                    self.fail(f"function {name!r} takes exactly one argument")
                self.expect(")")
                return Unary(name, arg)
            if self.tok.text == "(":
                self.fail(f"{name!r} is not a function", tok)
            if name in self.params:
                return Var(name)
            if name in CONSTANTS:
                return Const(CONSTANTS[name])
            self.fail(f"unknown identifier {name!r}", tok)
        if tok.kind == "end":
            self.fail("unexpected end of input")
        self.fail("unexpected token")


def parse_expression(text: str, params: Iterable[str]) -> Expression:
    """Parse ``text`` into an expression over the names in ``params``.

    Raises ParseDiagnostic with the byte offset of the offending token.
    """
    params = list(params)
    if not text or not text.strip():
        raise ParseDiagnostic(0, "empty expression", "")
    clash = set(params) & (set(FUNCTIONS) | set(CONSTANTS))
    if clash:
        raise ValueError(f"parameter names shadow builtins: {sorted(clash)}")
    return _Parser(text, params).parse()


# ---------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expression, var: str) -> Expression:
    """Exact partial derivative of ``e`` with respect to ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Unary):
        a = e.arg
        da = differentiate(a, var)
        if _is_const(da, 0.0):
            return ZERO
        op = e.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            return mul(func("cos", a), da)
        if op == "cos":
            return neg(mul(func("sin", a), da))
        if op == "exp":
            return mul(e, da)
        if op == "ln":
            return div(da, a)
        if op == "sqrt":
            return div(da, mul(Const(2.0), e))
        if op == "abs":
            return mul(func("sign", a), da)
        if op == "sign":
            # zero away from the origin; sign(a) itself raises at a == 0
            return mul(mul(ZERO, func("sign", a)), da)
        raise ValueError(f"unsupported node {op!r}")
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = differentiate(a, var), differentiate(b, var)
        op = e.op
        if op == "add":
            return add(da, db)
        if op == "sub":
            return sub(da, db)
        if op == "mul":
            return add(mul(da, b), mul(a, db))
        if op == "div":
            return div(sub(mul(da, b), mul(a, db)), mul(b, b))
        if op == "pow":
            k = _const_value(b)
            if k is not None:
                if _is_const(da, 0.0):
                    return ZERO
                return mul(mul(Const(k), pow_(a, Const(k - 1.0))), da)
            # a^b = exp(b ln a), a > 0
            inner = add(mul(db, func("ln", a)), div(mul(b, da), a))
            return mul(e, inner)
        raise ValueError(f"unsupported node {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def free_variables(e: Expression) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return free_variables(e.arg)
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    return set()


# ---------------------------------------------------------------------------
# Evaluation

Number = Union[float, np.ndarray]


class _NumpyBackend:
    sin = staticmethod(np.sin)
    cos = staticmethod(np.cos)
    exp = staticmethod(np.exp)
    log = staticmethod(np.log)
    sqrt = staticmethod(np.sqrt)

    @staticmethod
    def const(v):
        return v

    @staticmethod
    def any(mask) -> bool:
        return bool(np.any(mask))

    @staticmethod
    def finite(x) -> bool:
        return bool(np.all(np.isfinite(x)))

    @staticmethod
    def sign(x):
        return np.sign(x)

    @staticmethod
    def abs(x):
        return np.abs(x)


class _MpBackend:
    """Arbitrary precision via mpmath, for finite-difference oracles."""

    def __init__(self):
        import mpmath

        self.mp = mpmath
        self.sin = mpmath.sin
        self.cos = mpmath.cos
        self.exp = mpmath.exp
        self.log = mpmath.log
        self.sqrt = mpmath.sqrt

    def const(self, v):
        return self.mp.mpf(v)

    @staticmethod
    def any(mask) -> bool:
        return bool(mask)

    def finite(self, x) -> bool:
        return bool(self.mp.isfinite(x))

    @staticmethod
    def sign(x):
        return 1 if x > 0 else -1

    @staticmethod
    def abs(x):
        return abs(x)


_NUMPY = _NumpyBackend()


def _backend(name: str):
    if name == "numpy":
        return _NUMPY
    if name == "mpmath":
        return _MpBackend()
    raise ValueError(f"unknown backend {name!r}")


def evaluate(e: Expression, bindings: Mapping[str, Number], backend: str = "numpy"):
    """Evaluate ``e`` at the given bindings.

    Values may be floats or numpy arrays of a common shape; the
    ``"mpmath"`` backend accepts ``mpmath.mpf`` scalars.  Raises DomainError
    (carrying the offending point) on ln/sqrt/pow/div outside the reals.
    """
    lib = _backend(backend)
    missing = free_variables(e) - set(bindings)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    with np.errstate(all="ignore"):
        return _eval(e, bindings, lib)


def _domain(msg, mask, bindings, lib):
    point = {}
    if lib is _NUMPY and np.ndim(mask) > 0:
        idx = np.unravel_index(int(np.argmax(mask)), np.shape(mask))
        for k, v in bindings.items():
            point[k] = np.asarray(v)[idx] if np.ndim(v) else v
    else:
        point = dict(bindings)
    raise DomainError(msg, point)


def _eval(e, bindings, lib):
    if isinstance(e, Const):
        return lib.const(e.value)
    if isinstance(e, Var):
        return bindings[e.name]
    if isinstance(e, Unary):
        a = _eval(e.arg, bindings, lib)
        op = e.op
        if op == "neg":
            return -a
        if op == "sin":
            return lib.sin(a)
        if op == "cos":
            return lib.cos(a)
        if op == "exp":
            return lib.exp(a)
        if op == "ln":
            if lib.any(a <= 0):
                _domain("ln of nonpositive argument", a <= 0, bindings, lib)
            return lib.log(a)
        if op == "sqrt":
            if lib.any(a < 0):
                _domain("sqrt of negative argument", a < 0, bindings, lib)
            return lib.sqrt(a)
        if op == "abs":
            return lib.abs(a)
        if op == "sign":
            if lib.any(a == 0):
                _domain("derivative of abs at zero", a == 0, bindings, lib)
            return lib.sign(a)
        raise ValueError(f"unsupported node {op!r}")
    if isinstance(e, Binary):
        a = _eval(e.left, bindings, lib)
        b = _eval(e.right, bindings, lib)
        op = e.op
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            if lib.any(b == 0):
                _domain("division by zero", b == 0, bindings, lib)
            return a / b
        if op == "pow":
            kv = _const_value(e.right)
            if kv is None and np.ndim(b) == 0 and not free_variables(e.right):
                kv = float(b)
            if kv is not None and _is_integer(kv):
                k = int(kv)
                if k < 0 and lib.any(a == 0):
                    _domain("zero to a negative power", a == 0, bindings, lib)
                return _ipow(a, k)
            if lib.any(a <= 0):
                _domain("non-integer power of nonpositive base", a <= 0, bindings, lib)
            return lib.exp(b * lib.log(a))
        raise ValueError(f"unsupported node {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def _ipow(a, k: int):
    """Integer power by repeated squaring (exact sign handling)."""
    if k < 0:
        return 1 / _ipow(a, -k)
    result = None
    base = a
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return a * 0 + 1 if result is None else result


# ---------------------------------------------------------------------------
# Printer

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 3}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _num(v: float) -> str:
    if v == math.inf or v != v or v == -math.inf:
        raise ValueError("cannot print non-finite constant")
    s = repr(float(v))
    return s if v >= 0 else f"({s})"


def to_string(e: Expression) -> str:
    """Print ``e`` so that parsing the result gives an equivalent tree."""
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"-({to_string(e.arg)})"
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left, right = to_string(e.left), to_string(e.right)
        if e.op == "pow":
            # right-associative; bases are always atoms in the grammar
            if not _atomic(e.left):
                left = f"({left})"
            if not (_atomic(e.right) or _prec_of(e.right) == 3):
                right = f"({right})"
        else:
            if _prec_of(e.left) < p:
                left = f"({left})"
            if _prec_of(e.right) <= p:
                right = f"({right})"
        return f"{left}{_SYM[e.op]}{right}"
    raise TypeError(f"not an expression: {e!r}")


def _prec_of(e: Expression) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    return 4


def _atomic(e: Expression) -> bool:
    if isinstance(e, Const):
        return e.value >= 0
    return isinstance(e, Var) or (isinstance(e, Unary) and e.op != "neg")
