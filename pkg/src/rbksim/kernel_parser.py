"""Recursive-descent parser for rate-kernel expressions in ``j`` and ``k``.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' number)?
    base   := 'j' | 'k' | number | '(' expr ')'
            | ('min' | 'max') '(' expr ',' expr ')'

Exponents are numeric literals only. Numbers are plain decimals (``2``,
``0.5``, ``.5``); scientific notation is not accepted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "BinOp",
    "Call",
    "KernelAst",
    "ExpressionSyntaxError",
    "UnknownIdentifier",
    "EvaluationError",
    "AsymmetricKernel",
    "NegativeKernel",
    "parse",
    "to_source",
    "evaluate",
    "validate_kernel",
]


class ExpressionSyntaxError(ValueError):
    """Malformed kernel expression.

    ``offset`` is the byte offset into the source where parsing stopped and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        full = f"{message} at offset {offset}"
        if exp:
            full += f" (expected one of: {exp})"
        super().__init__(full)


class UnknownIdentifier(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset, ("j", "k", "min", "max"))


class EvaluationError(ValueError):
    """Division by zero or a non-finite value on the validation grid."""

    def __init__(self, j: int, k: int, value: float):
        self.j, self.k, self.value = j, k, value
        super().__init__(f"kernel is not finite at (j={j}, k={k}): {value!r}")


class AsymmetricKernel(ValueError):
    def __init__(self, j: int, k: int, a_jk: float, a_kj: float):
        self.j, self.k, self.a_jk, self.a_kj = j, k, a_jk, a_kj
        super().__init__(
            f"kernel is not symmetric: a({j},{k})={a_jk!r} but a({k},{j})={a_kj!r}"
        )


class NegativeKernel(ValueError):
    def __init__(self, j: int, k: int, value: float):
        self.j, self.k, self.value = j, k, value
        super().__init__(f"kernel is negative: a({j},{k})={value!r}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "j" or "k"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "KernelAst"
    right: "KernelAst"


@dataclass(frozen=True)
class Call:
    fn: str  # "min" or "max"
    a: "KernelAst"
    b: "KernelAst"


KernelAst = Union[Num, Var, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_BASE_START = ("j", "k", "number", "(", "min", "max")


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.tokens = []  # (kind, text, offset)
        self._tokenize()
        self.pos = 0

    def _tokenize(self):
        src, i = self.src, 0
        while i < len(src):
            if src[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(src, i)
            if m is None or m.end() == i:
                raise ExpressionSyntaxError(f"unexpected character {src[i]!r}", _byte_offset(src, i))
            if m.group("num") is not None:
                self.tokens.append(("number", m.group("num"), m.start("num")))
            elif m.group("name") is not None:
                self.tokens.append(("name", m.group("name"), m.start("name")))
            else:
                self.tokens.append((m.group("op"), m.group("op"), m.start("op")))
            i = m.end()
        self.tokens.append(("eof", "", len(src)))

    def peek(self):
        return self.tokens[self.pos]

    def fail(self, expected):
        kind, text, off = self.peek()
        what = "end of input" if kind == "eof" else f"token {text!r}"
        raise ExpressionSyntaxError(f"unexpected {what}", _byte_offset(self.src, off), expected)

    def expect(self, kind):
        if self.peek()[0] != kind:
            self.fail((kind,))
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> KernelAst:
        node = self.expr()
        if self.peek()[0] != "eof":
            self.fail(("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.tokens[self.pos][0]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.tokens[self.pos][0]
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "^":
            self.pos += 1
            exponent = self.expect("number")
            node = BinOp("^", node, Num(float(exponent[1])))
        return node

    def base(self):
        kind, text, off = self.peek()
        if kind == "number":
            self.pos += 1
            return Num(float(text))
        if kind == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in ("j", "k"):
                self.pos += 1
                return Var(text)
            if text in ("min", "max"):
                self.pos += 1
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return Call(text, a, b)
            raise UnknownIdentifier(text, _byte_offset(self.src, off))
        self.fail(_BASE_START)


def _byte_offset(src: str, char_index: int) -> int:
    return len(src[:char_index].encode("utf-8"))


def parse(source: str) -> KernelAst:
    """Parse a kernel expression such as ``"min(j,k)+1"`` or ``"(j*k)^0.5"``."""
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0, _BASE_START)
    return _Parser(source).parse()


def _fmt_num(x: float) -> str:
    # repr is the shortest round-tripping form; integers drop the ".0"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    s = repr(x)
    if "e" in s or "E" in s:
        s = np.format_float_positional(x, unique=True, trim="-")
    return s


def to_source(ast: KernelAst) -> str:
    """Canonical, fully parenthesised source text for ``ast``."""
    if isinstance(ast, Num):
        return _fmt_num(ast.value)
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Call):
        return f"{ast.fn}({to_source(ast.a)},{to_source(ast.b)})"
    if ast.op == "^":
        return f"({to_source(ast.left)})^{_fmt_num(ast.right.value)}"
    return f"({to_source(ast.left)}{ast.op}{to_source(ast.right)})"


def evaluate(ast: KernelAst, j, k):
    """Evaluate ``ast`` at scalar or array arguments (broadcast like numpy)."""
    if isinstance(ast, Num):
        return ast.value
    if isinstance(ast, Var):
        return j if ast.name == "j" else k
    if isinstance(ast, Call):
        fn = np.minimum if ast.fn == "min" else np.maximum
        return fn(evaluate(ast.a, j, k), evaluate(ast.b, j, k))
    left = evaluate(ast.left, j, k)
    if ast.op == "^":
        return np.power(np.asarray(left, dtype=float), ast.right.value)
    right = evaluate(ast.right, j, k)
    if ast.op == "+":
        return left + right
    if ast.op == "-":
        return left - right
    if ast.op == "*":
        return left * right
    return np.divide(np.asarray(left, dtype=float), right)


def kernel_table(ast: KernelAst, n: int) -> np.ndarray:
    """Values ``a(j,k)`` on ``[1..n]^2`` as a float array indexed ``[j-1, k-1]``."""
    idx = np.arange(1, n + 1, dtype=float)
    with np.errstate(all="ignore"):
        table = evaluate(ast, idx[:, None], idx[None, :])
    return np.broadcast_to(np.asarray(table, dtype=float), (n, n)).copy()


def check_table(table: np.ndarray) -> None:
    """Raise the first finiteness, symmetry or sign violation in ``table``."""
    bad = np.argwhere(~np.isfinite(table))
    if bad.size:
        j, k = bad[0]
        raise EvaluationError(int(j) + 1, int(k) + 1, float(table[j, k]))
    # first asymmetric pair in row-major order with j < k
    asym = np.argwhere(np.triu(table != table.T, 1))
    if asym.size:
        j, k = asym[0]
        raise AsymmetricKernel(int(j) + 1, int(k) + 1, float(table[j, k]), float(table[k, j]))
    neg = np.argwhere(table < 0)
    if neg.size:
        j, k = neg[0]
        raise NegativeKernel(int(j) + 1, int(k) + 1, float(table[j, k]))


def validate_kernel(ast: KernelAst, grid: int = 64, source: str | None = None):
    """Check ``ast`` on ``[1..grid]^2`` and wrap it as an expression kernel.

    Raises EvaluationError, AsymmetricKernel or NegativeKernel on the first
    violation found.
    """
    from .kernel import Expression

    if grid < 2:
        raise ValueError("validation grid must be at least 2")
    check_table(kernel_table(ast, grid))
    return Expression(ast, source=source if source is not None else to_source(ast))
