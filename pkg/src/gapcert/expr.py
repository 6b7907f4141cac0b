"""Rate expressions in one integer variable.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' unary]          # right-associative
    atom   := NUMBER | NAME | '$' NAME | FUNC '(' expr {',' expr} ')' | '(' expr ')'

Functions: ``min``, ``max``, ``sqrt``, ``log``, ``abs`` and ``if_even(x, y)``,
which is ``x`` when ``i`` is even and ``y`` otherwise.  ``$name`` refers to a
parameter bound at evaluation time.

Two evaluators share the tree: a vectorised numpy one and a scalar mpmath one
for high-precision asymptotics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ExpressionEvaluationError, SpecSyntaxError

__all__ = ["Expr", "parse_expr", "FUNCTIONS"]

FUNCTIONS = {"min": 2, "max": 2, "sqrt": 1, "log": 1, "abs": 1, "if_even": 2}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<param>\$[A-Za-z_]\w*)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^(),]))"
)


class Expr:
    """Base node.  Subclasses are frozen dataclasses, so equality is
    structural and trees can be compared after a round trip."""

    def evaluate(self, i, params=None, variables=None):
        """Vectorised float evaluation at integer points ``i``."""
        i_int = np.asarray(i)
        env = {"i": i_int.astype(float)}
        if variables:
            env.update({k: np.asarray(v, dtype=float) for k, v in variables.items()})
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._np(env, i_int % 2 == 0, params or {})
            out = np.broadcast_to(np.asarray(out, dtype=float), i_int.shape).copy()
        if np.any(np.isnan(out)):
            bad = np.asarray(i_int).ravel()[np.isnan(out).ravel()][:3]
            raise ExpressionEvaluationError(f"{self} is undefined at i = {bad.tolist()}")
        return out

    def evaluate_mp(self, i: int, params=None):
        """Scalar mpmath evaluation (uses the caller's ``mpmath.mp`` precision)."""
        env = {"i": mpmath.mpf(int(i))}
        return self._mp(env, int(i) % 2 == 0, params or {})

    def parameters(self) -> set:
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def _np(self, env, even, params):
        return np.float64(self.value)

    def _mp(self, env, even, params):
        return mpmath.mpf(self.value)

    def __str__(self):
        return repr(float(self.value)) if self.value != int(self.value) else str(int(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _np(self, env, even, params):
        try:
            return env[self.name]
        except KeyError:
            raise ExpressionEvaluationError(f"unbound variable {self.name!r}") from None

    def _mp(self, env, even, params):
        try:
            return env[self.name]
        except KeyError:
            raise ExpressionEvaluationError(f"unbound variable {self.name!r}") from None

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Param(Expr):
    name: str

    def _lookup(self, params):
        if self.name not in params:
            raise ExpressionEvaluationError(f"parameter ${self.name} is not bound")
        return params[self.name]

    def _np(self, env, even, params):
        return np.float64(self._lookup(params))

    def _mp(self, env, even, params):
        return mpmath.mpf(self._lookup(params))

    def _collect(self, out):
        out.add(self.name)

    def __str__(self):
        return "$" + self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _np(self, env, even, params):
        return -self.arg._np(env, even, params)

    def _mp(self, env, even, params):
        return -self.arg._mp(env, even, params)

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"-({self.arg})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _np(self, env, even, params):
        a = self.left._np(env, even, params)
        b = self.right._np(env, even, params)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0):
                raise ExpressionEvaluationError(f"division by zero in {self}")
            return a / b
        return np.power(a, b)

    def _mp(self, env, even, params):
        a = self.left._mp(env, even, params)
        b = self.right._mp(env, even, params)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if b == 0:
                raise ExpressionEvaluationError(f"division by zero in {self}")
            return a / b
        return mpmath.power(a, b)

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple

    def _np(self, env, even, params):
        vals = [a._np(env, even, params) for a in self.args]
        f = self.func
        if f == "min":
            return np.minimum(*vals)
        if f == "max":
            return np.maximum(*vals)
        if f == "sqrt":
            return np.sqrt(vals[0])
        if f == "log":
            return np.log(vals[0])
        if f == "abs":
            return np.abs(vals[0])
        return np.where(even, vals[0], vals[1])

    def _mp(self, env, even, params):
        f = self.func
        if f == "if_even":
            return self.args[0 if even else 1]._mp(env, even, params)
        vals = [a._mp(env, even, params) for a in self.args]
        if f == "min":
            return min(vals)
        if f == "max":
            return max(vals)
        if f == "sqrt":
            return mpmath.sqrt(vals[0])
        if f == "log":
            return mpmath.log(vals[0]) if vals[0] > 0 else mpmath.mpf("-inf")
        return abs(vals[0])

    def _collect(self, out):
        for a in self.args:
            a._collect(out)

    def __str__(self):
        return f"{self.func}(" + ", ".join(str(a) for a in self.args) + ")"


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.variables = set(variables)
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _tokenize(self, text):
        tokens = []
        at = 0
        while True:
            while at < len(text) and text[at].isspace():
                at += 1
            if at >= len(text):
                break
            m = _TOKEN.match(text, at)
            if not m or m.end() == at:
                raise SpecSyntaxError(f"unexpected character {text[at]!r}", column=at + 1)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start + 1))
            at = m.end()
        tokens.append(("end", "", len(text) + 1))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok, message):
        raise SpecSyntaxError(message, column=tok[2])

    def expect(self, value):
        tok = self.advance()
        if tok[1] != value:
            self.fail(tok, f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(tok, f"unexpected {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "param":
            return Param(text[1:])
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                close = self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    self.fail(close, f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}")
                return Call(text, tuple(args))
            if text in self.variables:
                return Var(text)
            self.fail(tok, f"unknown name {text!r}")
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(tok, f"unexpected {text or 'end of input'!r}")


def parse_expr(text: str, variables=("i",)) -> Expr:
    """Parse ``text``; syntax errors carry the 1-based column."""
    return _Parser(text, variables).parse()
