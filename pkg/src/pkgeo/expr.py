"""Expression DSL: parsing, printing, symbolic differentiation and evaluation.

Grammar (loosest binding first)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so ``-s^2``
is ``-(s^2)``. Names are declared variables, bound parameters, the constant
``pi`` or one of the functions in ``FUNCTIONS``.
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass
from functools import singledispatch
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from pkgeo.errors import DomainError, ExprSyntaxError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "tan", "atan", "exp", "log", "sqrt", "sinh", "cosh", "abs")
CONSTANTS = {"pi": math.pi}
MAX_ORDER = 4

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expr:
    """Base class of all AST nodes.

    Nodes are immutable and compare structurally. Arithmetic operators build
    new nodes through the simplifying constructors, so ``Var("s") * 1`` is
    just ``Var("s")``.
    """

    precedence = _PREC_ATOM

    def __str__(self) -> str:
        return to_text(self)

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return power(self, _coerce(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    @property
    def precedence(self) -> int:  # type: ignore[override]
        return _PREC_NEG if self.value < 0 else _PREC_ATOM

    def __repr__(self) -> str:
        return _format_number(self.value)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True, repr=False)
class Param(Expr):
    """A named parameter; its value is bound by ScalarField."""

    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr
    precedence = _PREC_NEG

    def __repr__(self) -> str:
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class BinOp(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Add(BinOp):
    precedence = _PREC_ADD
    symbol = "+"


@dataclass(frozen=True, repr=False)
class Sub(BinOp):
    precedence = _PREC_ADD
    symbol = "-"


@dataclass(frozen=True, repr=False)
class Mul(BinOp):
    precedence = _PREC_MUL
    symbol = "*"


@dataclass(frozen=True, repr=False)
class Div(BinOp):
    precedence = _PREC_MUL
    symbol = "/"


@dataclass(frozen=True, repr=False)
class Pow(BinOp):
    precedence = _PREC_POW
    symbol = "^"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    func: str
    arg: Expr

    def __repr__(self) -> str:
        return f"{self.func.capitalize()}({self.arg!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


# ---------------------------------------------------------------------------
# Simplifying constructors
# ---------------------------------------------------------------------------


def _is_const(node: Expr, value: float | None = None) -> bool:
    if not isinstance(node, Const):
        return False
    return value is None or node.value == value


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(b, -1.0):
        return neg(a)
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return ONE
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        if a.value > 0 or (float(b.value).is_integer() and (a.value != 0 or b.value > 0)):
            try:
                return Const(a.value**b.value)
            except OverflowError:
                # left unfolded; evaluation reports the non-finite value
                return Pow(a, b)
    return Pow(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(func: str, a: Expr) -> Expr:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function '{func}'")
    if isinstance(a, Const):
        try:
            value = _MATH_FUNCTIONS[func](a.value)
        except (ValueError, OverflowError):
            return Call(func, a)
        return Const(float(value))
    return Call(func, a)


_MATH_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "atan": math.atan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "abs": abs,
}

_BUILDERS = {Add: add, Sub: sub, Mul: mul, Div: div, Pow: power}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op" or "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            raise ExprSyntaxError(f"unexpected character '{text[pos]}'", pos)
        kind = match.lastgroup or "op"
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), start))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Iterable[str], parameters: Iterable[str]):
        self.tokens = _tokenize(text)
        self.index = 0
        self.variables = set(variables)
        self.parameters = set(parameters)

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> None:
        token = self.current
        if token.text != text or token.kind != "op":
            found = "end of input" if token.kind == "end" else f"'{token.text}'"
            raise ExprSyntaxError(f"expected '{text}', found {found}", token.pos)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(f"unexpected '{self.current.text}'", self.current.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            right = self.term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            right = self.unary()
            node = Mul(node, right) if op == "*" else Div(node, right)
        return node

    def unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            operand = self.unary()
            # negative literals are constants, not negations
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Neg(operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "num":
            self.advance()
            return Const(float(token.text))
        if token.kind == "name":
            self.advance()
            name = token.text
            if name in FUNCTIONS:
                if not (self.current.kind == "op" and self.current.text == "("):
                    raise ExprSyntaxError(f"function '{name}' needs an argument", self.current.pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if self.current.kind == "op" and self.current.text == "(":
                raise UnknownIdentifierError(name, token.pos)
            if name in self.variables:
                return Var(name)
            if name in self.parameters:
                return Param(name)
            if name in CONSTANTS:
                return Const(CONSTANTS[name])
            raise UnknownIdentifierError(name, token.pos)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if token.kind == "end" else f"'{token.text}'"
        raise ExprSyntaxError(f"unexpected {found}", token.pos)


def parse(
    text: str,
    variables: Iterable[str] = ("s", "t"),
    parameters: Iterable[str] = (),
) -> Expr:
    """Parse expression text into an AST.

    Args:
        text: Expression in the grammar of this module
        variables: Names that become Var nodes
        parameters: Names that become Param nodes

    Returns:
        The (unsimplified) AST

    Raises:
        ExprSyntaxError: Text violates the grammar
        UnknownIdentifierError: A name is not declared
    """
    return _Parser(text, variables, parameters).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _format_number(value: float) -> str:
    if math.isfinite(value) and float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def to_text(node: Expr) -> str:
    """Print an AST with the minimal parentheses that re-parse to the same AST."""
    if isinstance(node, Const):
        return _format_number(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _PREC_NEG, strict=False)
    if isinstance(node, Pow):
        base = _wrap(node.left, _PREC_POW, strict=True)
        exponent = _wrap(node.right, _PREC_NEG, strict=False)
        return f"{base}^{exponent}"
    if isinstance(node, BinOp):
        left = _wrap(node.left, node.precedence, strict=False)
        right = _wrap(node.right, node.precedence, strict=True)
        return f"{left}{node.symbol}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node: Expr, level: int, strict: bool) -> str:
    text = to_text(node)
    if node.precedence < level or (strict and node.precedence == level):
        return f"({text})"
    return text


def _short(node: Expr, limit: int = 80) -> str:
    text = to_text(node)
    return text if len(text) <= limit else text[: limit - 3] + "..."


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(ast: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``ast`` with respect to ``var``.

    The result is simplified with constant folding and 0/1 elimination.
    Parameters and constants differentiate to zero.
    """
    return _d(ast, var, {})


def _d(node: Expr, var: str, memo: dict[int, tuple[Expr, Expr]]) -> Expr:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    result = _derivative(node, var, memo)
    # keep node alive so its id is not recycled during this call
    memo[key] = (node, result)
    return result


@singledispatch
def _derivative(node: Expr, var: str, memo) -> Expr:
    raise TypeError(f"cannot differentiate {type(node).__name__}")


@_derivative.register(Const)
@_derivative.register(Param)
def _(node, var, memo):
    return ZERO


@_derivative.register(Var)
def _(node, var, memo):
    return ONE if node.name == var else ZERO


@_derivative.register(Neg)
def _(node, var, memo):
    return neg(_d(node.arg, var, memo))


@_derivative.register(Add)
def _(node, var, memo):
    return add(_d(node.left, var, memo), _d(node.right, var, memo))


@_derivative.register(Sub)
def _(node, var, memo):
    return sub(_d(node.left, var, memo), _d(node.right, var, memo))


@_derivative.register(Mul)
def _(node, var, memo):
    du = _d(node.left, var, memo)
    dv = _d(node.right, var, memo)
    return add(mul(du, node.right), mul(node.left, dv))


@_derivative.register(Div)
def _(node, var, memo):
    du = _d(node.left, var, memo)
    dv = _d(node.right, var, memo)
    if _is_const(dv, 0.0):
        return div(du, node.right)
    return div(sub(mul(du, node.right), mul(node.left, dv)), power(node.right, Const(2.0)))


@_derivative.register(Pow)
def _(node, var, memo):
    base, exponent = node.left, node.right
    db = _d(base, var, memo)
    de = _d(exponent, var, memo)
    if _is_const(de, 0.0):
        # n * f^(n-1) * f'
        return mul(mul(exponent, power(base, sub(exponent, ONE))), db)
    # f^g * (g' log f + g f'/f)
    inner = add(mul(de, call("log", base)), div(mul(exponent, db), base))
    return mul(node, inner)


@_derivative.register(Call)
def _(node, var, memo):
    arg = node.arg
    darg = _d(arg, var, memo)
    if _is_const(darg, 0.0):
        return ZERO
    outer = _OUTER_DERIVATIVES[node.func](arg, node)
    return mul(outer, darg)


_OUTER_DERIVATIVES = {
    "sin": lambda x, n: call("cos", x),
    "cos": lambda x, n: neg(call("sin", x)),
    "tan": lambda x, n: div(ONE, power(call("cos", x), Const(2.0))),
    "atan": lambda x, n: div(ONE, add(ONE, power(x, Const(2.0)))),
    "exp": lambda x, n: n,
    "log": lambda x, n: div(ONE, x),
    "sqrt": lambda x, n: div(ONE, mul(Const(2.0), n)),
    "sinh": lambda x, n: call("cosh", x),
    "cosh": lambda x, n: call("sinh", x),
    "abs": lambda x, n: div(x, n),
}


def simplify(ast: Expr) -> Expr:
    """Best-effort simplification: constant folding and identity elimination."""
    memo: dict[int, tuple[Expr, Expr]] = {}

    def walk(node: Expr) -> Expr:
        hit = memo.get(id(node))
        if hit is not None:
            return hit[1]
        if isinstance(node, BinOp):
            result = _BUILDERS[type(node)](walk(node.left), walk(node.right))
        elif isinstance(node, Neg):
            result = neg(walk(node.arg))
        elif isinstance(node, Call):
            result = call(node.func, walk(node.arg))
        else:
            result = node
        memo[id(node)] = (node, result)
        return result

    return walk(ast)


def substitute(ast: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables (and parameters) by the given sub-expressions."""
    memo: dict[int, tuple[Expr, Expr]] = {}

    def walk(node: Expr) -> Expr:
        hit = memo.get(id(node))
        if hit is not None:
            return hit[1]
        if isinstance(node, (Var, Param)) and node.name in mapping:
            result = mapping[node.name]
        elif isinstance(node, BinOp):
            result = _BUILDERS[type(node)](walk(node.left), walk(node.right))
        elif isinstance(node, Neg):
            result = neg(walk(node.arg))
        elif isinstance(node, Call):
            result = call(node.func, walk(node.arg))
        else:
            result = node
        memo[id(node)] = (node, result)
        return result

    return walk(ast)


def names(ast: Expr) -> tuple[set[str], set[str]]:
    """Return the (variable names, parameter names) occurring in an AST."""
    variables: set[str] = set()
    parameters: set[str] = set()
    seen: set[int] = set()
    stack = [ast]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            variables.add(node.name)
        elif isinstance(node, Param):
            parameters.add(node.name)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
        elif isinstance(node, (Neg, Call)):
            stack.append(node.arg)
    return variables, parameters


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(ast: Expr, env: Mapping[str, float | np.ndarray]):
    """Evaluate an AST for the given variable/parameter values.

    Values may be floats or numpy arrays (evaluated elementwise).

    Raises:
        DomainError: log/sqrt of a negative number, division by zero, ...
        UnknownIdentifierError: A Var or Param has no value in ``env``
    """
    with np.errstate(all="ignore"):
        value = _ev(ast, env, {})
    if np.ndim(value) == 0:
        return float(value)
    return value


def _ev(node: Expr, env, memo: dict[int, tuple[Expr, object]]):
    hit = memo.get(id(node))
    if hit is not None:
        return hit[1]
    value = _evaluate(node, env, memo)
    memo[id(node)] = (node, value)
    return value


@singledispatch
def _evaluate(node: Expr, env, memo):
    raise TypeError(f"cannot evaluate {type(node).__name__}")


@_evaluate.register(Const)
def _(node, env, memo):
    return node.value


@_evaluate.register(Var)
@_evaluate.register(Param)
def _(node, env, memo):
    try:
        return np.asarray(env[node.name], dtype=float)
    except KeyError:
        raise UnknownIdentifierError(node.name, -1) from None


@_evaluate.register(Neg)
def _(node, env, memo):
    return -_ev(node.arg, env, memo)


@_evaluate.register(Add)
def _(node, env, memo):
    return _ev(node.left, env, memo) + _ev(node.right, env, memo)


@_evaluate.register(Sub)
def _(node, env, memo):
    return _ev(node.left, env, memo) - _ev(node.right, env, memo)


@_evaluate.register(Mul)
def _(node, env, memo):
    return _ev(node.left, env, memo) * _ev(node.right, env, memo)


@_evaluate.register(Div)
def _(node, env, memo):
    num = _ev(node.left, env, memo)
    den = _ev(node.right, env, memo)
    if np.any(np.asarray(den) == 0.0):
        raise DomainError("division by zero", _short(node))
    return num / den


@_evaluate.register(Pow)
def _(node, env, memo):
    base = np.asarray(_ev(node.left, env, memo), dtype=float)
    exponent = np.asarray(_ev(node.right, env, memo), dtype=float)
    integral = exponent == np.round(exponent)
    if np.any((base < 0) & ~integral):
        raise DomainError("negative base with non-integer exponent", _short(node))
    if np.any((base == 0) & (exponent < 0)):
        raise DomainError("zero to a negative power", _short(node))
    value = np.power(base, exponent)
    if not np.all(np.isfinite(value)):
        raise DomainError("non-finite value", _short(node))
    return value


@_evaluate.register(Call)
def _(node, env, memo):
    x = np.asarray(_ev(node.arg, env, memo), dtype=float)
    if node.func == "log" and np.any(x <= 0):
        raise DomainError("log of a non-positive number", _short(node))
    if node.func == "sqrt" and np.any(x < 0):
        raise DomainError("sqrt of a negative number", _short(node))
    value = _NUMPY_FUNCTIONS[node.func](x)
    if not np.all(np.isfinite(value)):
        raise DomainError("non-finite value", _short(node))
    return value


_NUMPY_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "atan": np.arctan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "abs": np.abs,
}


# ---------------------------------------------------------------------------
# Scalar fields and jets
# ---------------------------------------------------------------------------


class Jet(dict):
    """Partial derivatives keyed by multi-index.

    ``jet[(1, 1)]`` and ``jet["st"]`` both give the mixed second partial of a
    field in variables (s, t); ``jet[""]`` is the value.
    """

    def __init__(self, variables: tuple[str, ...], values: dict[tuple[int, ...], float]):
        super().__init__(values)
        self.variables = variables

    def __getitem__(self, key):
        if isinstance(key, str):
            key = _multi_index(self.variables, key)
        return super().__getitem__(key)


def _multi_index(variables: tuple[str, ...], letters: str) -> tuple[int, ...]:
    counts = [0] * len(variables)
    for letter in letters:
        try:
            counts[variables.index(letter)] += 1
        except ValueError:
            raise KeyError(letters) from None
    return tuple(counts)


class ScalarField:
    """Smooth map of one or two real variables backed by an AST.

    Parameters are bound at construction; ``rebind`` returns a new field.
    Derivative ASTs up to order four are built on demand, once, under a lock,
    so fields may be shared between threads.

    Attributes:
        ast: The AST as written (parameters unbound)
        variables: Ordered variable names, e.g. ("s", "t")
        parameters: Bound parameter values
    """

    def __init__(
        self,
        ast: Expr,
        variables: Iterable[str] = ("s", "t"),
        parameters: Mapping[str, float] | None = None,
    ):
        self.ast = ast
        self.variables = tuple(variables)
        self.parameters = dict(parameters or {})
        used_vars, used_params = names(ast)
        unknown = used_vars - set(self.variables)
        if unknown:
            raise UnknownIdentifierError(sorted(unknown)[0], -1)
        missing = used_params - set(self.parameters)
        if missing:
            raise UnknownIdentifierError(sorted(missing)[0], -1)
        bindings = {name: Const(float(v)) for name, v in self.parameters.items()}
        self._bound = simplify(substitute(ast, bindings)) if bindings else ast
        zero = (0,) * len(self.variables)
        self._derivatives: dict[tuple[int, ...], Expr] = {zero: self._bound}
        self._lock = threading.Lock()

    @classmethod
    def parse(
        cls,
        text: str,
        variables: Iterable[str] = ("s", "t"),
        parameters: Mapping[str, float] | None = None,
    ) -> "ScalarField":
        """Parse text into a field over ``variables``."""
        variables = tuple(variables)
        params = dict(parameters or {})
        return cls(parse(text, variables, params.keys()), variables, params)

    @classmethod
    def constant(cls, value: float, variables: Iterable[str] = ("s", "t")) -> "ScalarField":
        return cls(Const(float(value)), variables)

    def rebind(self, **parameters: float) -> "ScalarField":
        merged = {**self.parameters, **parameters}
        return ScalarField(self.ast, self.variables, merged)

    def __repr__(self) -> str:
        return f"ScalarField({to_text(self.ast)!r}, variables={self.variables})"

    def __str__(self) -> str:
        return to_text(self.ast)

    @property
    def expression(self) -> Expr:
        """The AST with parameters bound."""
        return self._bound

    def derivative_ast(self, multi_index: tuple[int, ...]) -> Expr:
        """Cached AST of the partial derivative with the given multi-index."""
        multi_index = tuple(multi_index)
        if len(multi_index) != len(self.variables):
            raise ValueError(f"multi-index {multi_index} does not match {self.variables}")
        if sum(multi_index) > MAX_ORDER:
            raise ValueError(f"derivatives are cached up to order {MAX_ORDER}")
        cached = self._derivatives.get(multi_index)
        if cached is not None:
            return cached
        with self._lock:
            return self._build(multi_index)

    def _build(self, multi_index: tuple[int, ...]) -> Expr:
        cached = self._derivatives.get(multi_index)
        if cached is not None:
            return cached
        # differentiate the previous entry in the first non-zero variable
        axis = next(i for i, n in enumerate(multi_index) if n > 0)
        previous = list(multi_index)
        previous[axis] -= 1
        result = differentiate(self._build(tuple(previous)), self.variables[axis])
        self._derivatives[multi_index] = result
        return result

    def partial(self, var: str, times: int = 1) -> "ScalarField":
        """A new field holding the partial derivative in ``var``."""
        index = [0] * len(self.variables)
        index[self.variables.index(var)] = times
        return ScalarField(self.derivative_ast(tuple(index)), self.variables)

    def __call__(self, *point):
        env = dict(zip(self.variables, point))
        return evaluate(self._bound, env)

    def value(self, point, multi_index: tuple[int, ...] | None = None):
        """Evaluate the field (or one of its partials) at a point."""
        ast = self._bound if multi_index is None else self.derivative_ast(multi_index)
        return evaluate(ast, dict(zip(self.variables, _as_point(point, len(self.variables)))))

    def is_constant(self) -> bool:
        """True when every first partial simplifies to the constant zero."""
        n = len(self.variables)
        for axis in range(n):
            index = tuple(1 if i == axis else 0 for i in range(n))
            if not _is_const(simplify(self.derivative_ast(index)), 0.0):
                return False
        return True


def _as_point(point, n: int) -> tuple:
    if np.ndim(point) == 0:
        point = (point,)
    point = tuple(point)
    if len(point) != n:
        raise ValueError(f"expected a point with {n} coordinates, got {len(point)}")
    return point


def jet(field: ScalarField, point, order: int = 2) -> Jet:
    """All partials of ``field`` of total order <= ``order`` at ``point``.

    Args:
        field: The scalar field
        point: Coordinates (a scalar for one-variable fields)
        order: Highest total derivative order, at most four

    Returns:
        Jet keyed by multi-index

    Raises:
        DomainError: A partial is not defined at ``point``
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be between 0 and {MAX_ORDER}")
    n = len(field.variables)
    env = dict(zip(field.variables, _as_point(point, n)))
    values: dict[tuple[int, ...], float] = {}
    for index in product(range(order + 1), repeat=n):
        if sum(index) <= order:
            values[index] = evaluate(field.derivative_ast(index), env)
    return Jet(field.variables, values)
