"""Small expression language for parametrizations and scalar maps.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-'|'+') factor | base ('^' ['-'] integer)?
    base   := number | ident | func '(' expr ')' | '(' expr ')'

Identifiers are u1..u9, x1..x9 and t (restricted further by the caller);
functions are sqrt, sin, cos, exp, log.  Unary sign is an extension over the
bare arithmetic grammar; it binds looser than '^', so -u1^2 == -(u1^2).

Trees are immutable, evaluate vectorised over numpy arrays, and differentiate
symbolically with light simplification (constant folding, 0/1 identities).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import EvaluationError, ParseError, UnknownIdentifierError

IDENT_RE = re.compile(r"^(?:[ux][1-9]|t)$")
FUNCS = ("sqrt", "sin", "cos", "exp", "log")


class Expr:
    prec = 100

    def eval(self, env: Mapping[str, object]):
        """Evaluate with variables bound in ``env`` (floats or broadcastable arrays)."""
        with np.errstate(all="ignore"):
            out = self._eval(env)
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite value evaluating {self}")
        return out

    def __call__(self, **env):
        return self.eval(env)

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def variables(self) -> frozenset:
        return frozenset()

    def subs(self, bindings: Mapping[str, float]) -> "Expr":
        return self

    def _wrap(self, child: "Expr", min_prec: int) -> str:
        s = str(child)
        return f"({s})" if child.prec < min_prec else s


@dataclass(frozen=True)
class Const(Expr):
    value: float
    prec = 100

    def _eval(self, env):
        return self.value

    def diff(self, var):
        return ZERO

    def __str__(self):
        v = self.value
        if v == int(v) and abs(v) < 1e15:
            s = str(int(v))
        else:
            s = repr(v)
        return f"({s})" if v < 0 else s


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"variable {self.name} is not bound") from None

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def variables(self):
        return frozenset([self.name])

    def subs(self, bindings):
        return Const(float(bindings[self.name])) if self.name in bindings else self

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr
    prec = 1

    def _eval(self, env):
        return self.a._eval(env) + self.b._eval(env)

    def diff(self, var):
        return add(self.a.diff(var), self.b.diff(var))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def subs(self, bindings):
        return add(self.a.subs(bindings), self.b.subs(bindings))

    def __str__(self):
        return f"{self._wrap(self.a, 1)} + {self._wrap(self.b, 2)}"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr
    prec = 1

    def _eval(self, env):
        return self.a._eval(env) - self.b._eval(env)

    def diff(self, var):
        return sub(self.a.diff(var), self.b.diff(var))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def subs(self, bindings):
        return sub(self.a.subs(bindings), self.b.subs(bindings))

    def __str__(self):
        return f"{self._wrap(self.a, 1)} - {self._wrap(self.b, 2)}"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr
    prec = 2

    def _eval(self, env):
        return self.a._eval(env) * self.b._eval(env)

    def diff(self, var):
        return add(mul(self.a.diff(var), self.b), mul(self.a, self.b.diff(var)))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def subs(self, bindings):
        return mul(self.a.subs(bindings), self.b.subs(bindings))

    def __str__(self):
        return f"{self._wrap(self.a, 2)}*{self._wrap(self.b, 3)}"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr
    prec = 2

    def _eval(self, env):
        den = np.asarray(self.b._eval(env), dtype=float)
        if np.any(den == 0):
            raise EvaluationError(f"division by zero in {self}")
        return self.a._eval(env) / den

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        if db == ZERO:
            return div(da, self.b)
        return div(sub(mul(da, self.b), mul(self.a, db)), power(self.b, 2))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def subs(self, bindings):
        return div(self.a.subs(bindings), self.b.subs(bindings))

    def __str__(self):
        return f"{self._wrap(self.a, 2)}/{self._wrap(self.b, 3)}"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr
    prec = 2

    def _eval(self, env):
        return -self.a._eval(env)

    def diff(self, var):
        return neg(self.a.diff(var))

    def variables(self):
        return self.a.variables()

    def subs(self, bindings):
        return neg(self.a.subs(bindings))

    def __str__(self):
        return f"-{self._wrap(self.a, 3)}"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: int
    prec = 3

    def _eval(self, env):
        b = np.asarray(self.base._eval(env), dtype=float)
        if self.exp < 0 and np.any(b == 0):
            raise EvaluationError(f"negative power of zero in {self}")
        return b ** float(self.exp)

    def diff(self, var):
        db = self.base.diff(var)
        if db == ZERO:
            return ZERO
        return mul(mul(Const(float(self.exp)), power(self.base, self.exp - 1)), db)

    def variables(self):
        return self.base.variables()

    def subs(self, bindings):
        return power(self.base.subs(bindings), self.exp)

    def __str__(self):
        e = str(self.exp)
        return f"{self._wrap(self.base, 4)}^{e}"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def _eval(self, env):
        x = np.asarray(self.arg._eval(env), dtype=float)
        if self.fn == "sqrt":
            if np.any(x < 0):
                raise EvaluationError(f"sqrt of a negative number in {self}")
            return np.sqrt(x)
        if self.fn == "log":
            if np.any(x <= 0):
                raise EvaluationError(f"log of a non-positive number in {self}")
            return np.log(x)
        return getattr(np, self.fn)(x)

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO:
            return ZERO
        if self.fn == "sqrt":
            outer = div(Const(0.5), self)
        elif self.fn == "log":
            outer = div(ONE, self.arg)
        elif self.fn == "exp":
            outer = self
        elif self.fn == "sin":
            outer = Call("cos", self.arg)
        else:
            outer = neg(Call("sin", self.arg))
        return mul(outer, da)

    def variables(self):
        return self.arg.variables()

    def subs(self, bindings):
        a = self.arg.subs(bindings)
        if isinstance(a, Const):
            return Const(float(Call(self.fn, a).eval({})))
        return Call(self.fn, a)

    def __str__(self):
        return f"{self.fn}({self.arg})"


# ---------------------------------------------------------------------------
# simplifying constructors

def _c(x):
    return isinstance(x, Const)


def add(a, b):
    if _c(a) and _c(b):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(b, Neg):
        return sub(a, b.a)
    return Add(a, b)


def sub(a, b):
    if _c(a) and _c(b):
        return Const(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Sub(a, b)


def neg(a):
    if _c(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def mul(a, b):
    if _c(b) and not _c(a):
        a, b = b, a
    if _c(a):
        if _c(b):
            return Const(a.value * b.value)
        if a.value == 0:
            return ZERO
        if a.value == 1:
            return b
        if a.value == -1:
            return neg(b)
        if isinstance(b, Mul) and _c(b.a):
            return mul(Const(a.value * b.a.value), b.b)
        if isinstance(b, Neg):
            return mul(Const(-a.value), b.a)
    if a == ZERO or b == ZERO:
        return ZERO
    if isinstance(a, Neg):
        return neg(mul(a.a, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.a))
    return Mul(a, b)


def div(a, b):
    if _c(b):
        if b.value == 0:
            raise EvaluationError("division by the constant zero")
        return mul(Const(1.0 / b.value), a)
    if a == ZERO:
        return ZERO
    return Div(a, b)


def power(a, e: int):
    if e == 0:
        return ONE
    if e == 1:
        return a
    if _c(a):
        if a.value == 0 and e < 0:
            raise EvaluationError("negative power of the constant zero")
        return Const(a.value ** e)
    return Pow(a, e)


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser

_TOKEN_RE = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                       r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


class _Parser:
    def __init__(self, text: str, variables: Iterable[str]):
        self.text = text
        self.vars = frozenset(variables)
        self.tokens = self._tokenize(text)
        self.i = 0

    def _tokenize(self, text):
        toks = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
            start = m.start(m.lastgroup)
            toks.append((m.lastgroup, m.group(m.lastgroup), start))
            pos = m.end()
        toks.append(("end", "", len(text)))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.peek()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", self.text, pos)
        self.take()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", self.text, pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self):
        kind, val, pos = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.factor()
            return Neg(inner) if val == "-" else inner
        b = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                found = "end of input" if kind == "end" else repr(val)
                raise ParseError(f"exponent must be an integer, found {found}", self.text, pos)
            return Pow(b, sign * int(val))
        return b

    def base(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if not IDENT_RE.match(val) or val not in self.vars:
                allowed = ", ".join(sorted(self.vars)) or "none"
                raise UnknownIdentifierError(f"unknown identifier {val!r} (allowed: {allowed})", self.text, pos)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"expected a number, identifier or '(', found {found}", self.text, pos)


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` into an expression tree over the given variable names.

    >>> float(parse("u1^2 + u2^2", ["u1", "u2"]).eval({"u1": 3.0, "u2": 4.0}))
    25.0
    """
    return _Parser(text, variables).parse()


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` through the simplifying constructors."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Add):
        return add(simplify(e.a), simplify(e.b))
    if isinstance(e, Sub):
        return sub(simplify(e.a), simplify(e.b))
    if isinstance(e, Mul):
        return mul(simplify(e.a), simplify(e.b))
    if isinstance(e, Div):
        return div(simplify(e.a), simplify(e.b))
    if isinstance(e, Neg):
        return neg(simplify(e.a))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exp)
    if isinstance(e, Call):
        return Call(e.fn, simplify(e.arg)).subs({})
    raise TypeError(type(e))


def u_vars(p: int) -> list[str]:
    return [f"u{i + 1}" for i in range(p)]


def x_vars(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)]


def to_expr(value, variables) -> Expr:
    """Accept an Expr, a number, or expression text."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if not math.isfinite(value):
            raise EvaluationError("non-finite constant")
        return Const(float(value))
    return parse(str(value), variables)
