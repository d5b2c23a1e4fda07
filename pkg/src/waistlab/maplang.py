"""A small expression language for maps f : R^n -> R^k.

Components are separated by ``;``.  Each component is an arithmetic
expression over the variables ``x1 .. xn`` with ``+ - * / ^``, unary minus,
parentheses, the functions ``sin cos exp sqrt abs`` and the constants
``pi`` and ``e``.  ``^`` is right-associative and binds tighter than unary
minus, so ``-x1^2`` is ``-(x1^2)`` and ``2^-1`` is ``0.5``.

Evaluation is vectorized: :meth:`MapExpr.evaluate` takes an ``(N, n)`` array.

>>> f = parse_map("x1^2 + x2^2", 2, 1)
>>> eval_map(f, [0.6, 0.8])
array([1.])
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

__all__ = [
    "MapSyntaxError",
    "MapArityError",
    "UnknownIdentifierError",
    "UnknownFunctionError",
    "MapDomainError",
    "Num",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "MapExpr",
    "LinearMapSpec",
    "parse_expression",
    "parse_map",
    "eval_map",
    "eval_jacobian",
    "pretty",
    "map_from_config",
]


class MapSyntaxError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class MapArityError(ValueError):
    pass


class UnknownIdentifierError(MapSyntaxError):
    pass


class UnknownFunctionError(MapSyntaxError):
    pass


class MapDomainError(ArithmeticError):
    """Division by zero, sqrt of a negative number or a non-real power.

    ``component`` is the 1-based index of the failing output component.
    """

    def __init__(self, message, component=None):
        where = f" in component {component}" if component is not None else ""
        super().__init__(message + where)
        self.reason = message
        self.component = component


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")

# binding powers: + - < * / < unary minus < ^
_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_BP = 30


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^();])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MapSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, tokens, n):
        self.tokens = tokens
        self.pos = 0
        self.n = n

    @property
    def token(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        tok = self.token
        if tok.kind != "op" or tok.text != text:
            found = repr(tok.text) if tok.kind != "end" else "end of input"
            raise MapSyntaxError(f"expected {text!r}, found {found}", tok.offset)
        return self.advance()

    def expression(self, rbp=0):
        left = self.prefix(self.advance())
        while True:
            tok = self.token
            bp = _INFIX.get(tok.text, 0) if tok.kind == "op" else 0
            if bp <= rbp:
                return left
            self.advance()
            # right-associative ^: parse the exponent one notch looser
            right = self.expression(bp - 1 if tok.text == "^" else bp)
            left = BinOp(tok.text, left, right)

    def prefix(self, tok):
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_PREFIX_BP))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        found = repr(tok.text) if tok.kind != "end" else "end of input"
        raise MapSyntaxError(f"expected an operand, found {found}", tok.offset)

    def name(self, tok):
        ident = tok.text
        if self.token.kind == "op" and self.token.text == "(":
            if ident not in FUNCTIONS:
                raise UnknownFunctionError(f"unknown function {ident!r}", tok.offset)
            self.advance()
            arg = self.expression()
            self.expect(")")
            return Call(ident, arg)
        if ident in CONSTANTS:
            return Const(ident)
        m = re.fullmatch(r"x([1-9]\d*)", ident)
        if m and int(m.group(1)) <= self.n:
            return Var(int(m.group(1)))
        if ident in FUNCTIONS:
            raise MapSyntaxError(f"function {ident!r} needs an argument", tok.offset)
        raise UnknownIdentifierError(f"unknown identifier {ident!r}", tok.offset)


def parse_expression(text: str, n: int) -> Node:
    """Parse a single component expression over ``x1 .. xn``."""
    parser = _Parser(tokenize(text), n)
    node = parser.expression()
    if parser.token.kind != "end":
        raise MapSyntaxError(f"unexpected {parser.token.text!r}", parser.token.offset)
    return node


def parse_map(text: str, n: int, k: int) -> "MapExpr":
    """Parse ``k`` ``;``-separated component expressions over ``x1 .. xn``.

    Raises :class:`MapSyntaxError` (with a byte offset), :class:`MapArityError`,
    :class:`UnknownIdentifierError` or :class:`UnknownFunctionError`.
    """
    if not text or not text.strip():
        raise MapSyntaxError("empty map text", 0)
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    parser = _Parser(tokenize(text), n)
    components = [parser.expression()]
    while parser.token.kind == "op" and parser.token.text == ";":
        parser.advance()
        components.append(parser.expression())
    if parser.token.kind != "end":
        raise MapSyntaxError(f"unexpected {parser.token.text!r}", parser.token.offset)
    if len(components) != k:
        raise MapArityError(f"expected {k} component(s), got {len(components)}")
    return MapExpr(n, k, tuple(components), text)


# --- printing --------------------------------------------------------------

def pretty(node: Node) -> str:
    """Fully parenthesized text that reparses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation ------------------------------------------------------------

class _Invalid(Exception):
    def __init__(self, reason, mask):
        self.reason = reason
        self.mask = mask


def _power(base, expo, strict):
    base, expo = np.broadcast_arrays(base, expo)
    bad = (base < 0) & (expo != np.round(expo))
    bad |= (base == 0) & (expo < 0)
    if bad.any():
        if strict:
            raise _Invalid("non-real or infinite power", bad)
    with np.errstate(all="ignore"):
        out = np.power(base, expo)
    return np.where(bad, np.nan, out)


def _eval(node, X, strict):
    if isinstance(node, Num):
        return np.full(len(X), node.value)
    if isinstance(node, Const):
        return np.full(len(X), CONSTANTS[node.name])
    if isinstance(node, Var):
        return X[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, X, strict)
    if isinstance(node, BinOp):
        a = _eval(node.left, X, strict)
        b = _eval(node.right, X, strict)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            bad = b == 0
            if bad.any() and strict:
                raise _Invalid("division by zero", bad)
            with np.errstate(all="ignore"):
                return np.where(bad, np.nan, a / np.where(bad, 1.0, b))
        return _power(a, b, strict)
    if isinstance(node, Call):
        a = _eval(node.arg, X, strict)
        if node.func == "sqrt":
            bad = a < 0
            if bad.any() and strict:
                raise _Invalid("sqrt of a negative number", bad)
            return np.where(bad, np.nan, np.sqrt(np.abs(a)))
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[node.func](a)
    raise TypeError(f"not an expression node: {node!r}")


def _as_batch(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"expected points with {n} coordinates, got {X.shape[1]}")
    return X, single


@dataclass(frozen=True)
class MapExpr:
    """Parsed map with ``k`` component trees over ``n`` input variables."""

    n: int
    k: int
    components: Tuple[Node, ...]
    text: str = ""

    def __post_init__(self):
        if len(self.components) != self.k:
            raise MapArityError(f"expected {self.k} component(s), got {len(self.components)}")

    def evaluate(self, x, errors="raise") -> np.ndarray:
        """Evaluate at a point (length n) or a batch ``(N, n)``.

        With ``errors="raise"`` an invalid operation anywhere raises
        :class:`MapDomainError`; with ``errors="nan"`` the affected entries
        become NaN.
        """
        X, single = _as_batch(x, self.n)
        strict = errors == "raise"
        cols = []
        for i, node in enumerate(self.components, start=1):
            try:
                cols.append(np.asarray(_eval(node, X, strict), dtype=float))
            except _Invalid as exc:
                raise MapDomainError(exc.reason, component=i) from None
        out = np.column_stack(cols)
        return out[0] if single else out

    __call__ = evaluate

    def jacobian(self, x, step=None, errors="raise") -> np.ndarray:
        """Central-difference Jacobian, shape ``(k, n)`` or ``(N, k, n)`` for a batch."""
        X, single = _as_batch(x, self.n)
        if step is None:
            h = 1e-6 * (1.0 + np.linalg.norm(X, axis=1))
        else:
            h = np.full(len(X), float(step))
        J = np.empty((len(X), self.k, self.n))
        for j in range(self.n):
            shift = np.zeros_like(X)
            shift[:, j] = h
            up = self.evaluate(X + shift, errors)
            down = self.evaluate(X - shift, errors)
            J[:, :, j] = (up - down) / (2.0 * h[:, None])
        return J[0] if single else J

    def pretty(self) -> str:
        return "; ".join(pretty(c) for c in self.components)


@dataclass(frozen=True, eq=False)
class LinearMapSpec:
    """Affine map ``x -> matrix @ x + offset``."""

    matrix: np.ndarray
    offset: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.zeros(A.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=float)
        if b.shape != (A.shape[0],):
            raise ValueError(f"offset must have length {A.shape[0]}, got shape {b.shape}")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", b)

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def evaluate(self, x, errors="raise") -> np.ndarray:
        X, single = _as_batch(x, self.n)
        out = X @ self.matrix.T + self.offset
        return out[0] if single else out

    __call__ = evaluate

    def jacobian(self, x, step=None, errors="raise") -> np.ndarray:
        X, single = _as_batch(x, self.n)
        if single:
            return self.matrix.copy()
        return np.broadcast_to(self.matrix, (len(X),) + self.matrix.shape).copy()


def eval_map(expr, x) -> np.ndarray:
    """Evaluate a map at a single point, raising :class:`MapDomainError` on invalid input."""
    return expr.evaluate(np.asarray(x, dtype=float).reshape(-1))


def eval_jacobian(expr, x, step=None) -> np.ndarray:
    """Central finite-difference ``k x n`` Jacobian at a single point.

    The default step is ``1e-6 * (1 + |x|)``.
    """
    return expr.jacobian(np.asarray(x, dtype=float).reshape(-1), step)


def map_from_config(spec: dict):
    """Build a map from a config mapping.

    ``{"kind": "expr", "n": .., "k": .., "text": ".."}`` or
    ``{"kind": "linear", "matrix": [[..]], "offset": [..]}``.
    """
    kind = spec.get("kind")
    if kind == "expr":
        return parse_map(spec["text"], int(spec["n"]), int(spec["k"]))
    if kind == "linear":
        return LinearMapSpec(spec["matrix"], spec.get("offset"))
    raise ValueError(f"unknown map kind {kind!r}")
