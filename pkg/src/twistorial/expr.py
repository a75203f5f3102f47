"""Immutable scalar expression trees over named chart coordinates.

Nodes are hash-consed: two structurally equal trees are the same Python
object, so equality is identity and common subexpressions are shared.
Every constructor applies a light simplification (constant folding, 0/1
identities, like-term and like-power collection) and nothing more.

Evaluation is vectorised over numpy arrays and runs on either a real or a
complex path. Division by anything smaller in modulus than
``DENOMINATOR_FLOOR`` raises instead of returning a huge value.
"""

from __future__ import annotations

import cmath
import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DENOMINATOR_FLOOR = 1e-12
BRANCH_CUT_TOL = 1e-12

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class EvaluationError(ExprError):
    pass


class DenominatorFloorError(EvaluationError):
    pass


class DomainError(EvaluationError):
    pass


class BranchCutError(EvaluationError):
    pass


class GuardError(EvaluationError):
    """A point lies outside a chart's box or inside an excluded locus."""


# ---------------------------------------------------------------------------
# nodes

_INTERN: dict = {}
_LOCK = threading.Lock()


def _value_key(value):
    if value is None:
        return None
    if isinstance(value, str):
        return ("s", value)
    if isinstance(value, Fraction):
        return ("q", value.numerator, value.denominator)
    if isinstance(value, float):
        return ("f", value)
    if isinstance(value, complex):
        return ("c", value.real, value.imag)
    raise TypeError(f"bad payload {value!r}")


class Expr:
    """A node of an immutable expression DAG.

    ``op`` is one of ``const, var, add, mul, div, pow, neg, sin, cos, exp,
    log``. ``value`` carries the constant, the variable name, or the
    rational exponent of a ``pow`` node. Build trees with the module-level
    constructors or the arithmetic operators, never directly.
    """

    __slots__ = ("op", "args", "value", "free", "is_complex", "_deriv", "__weakref__")

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    # arithmetic sugar ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # convenience -----------------------------------------------------------
    def diff(self, var):
        return differentiate(self, var)

    @property
    def is_const(self):
        return self.op == "const"

    def is_zero(self):
        return self.op == "const" and self.value == 0

    def node_count(self):
        return node_count(self)


def _make(op, args=(), value=None):
    key = (op, _value_key(value), tuple(id(a) for a in args))
    node = _INTERN.get(key)
    if node is not None:
        return node
    with _LOCK:
        node = _INTERN.get(key)
        if node is not None:
            return node
        node = object.__new__(Expr)
        free = frozenset()
        cplx = isinstance(value, complex)
        for a in args:
            free = free | a.free
            cplx = cplx or a.is_complex
        if op == "var":
            free = frozenset((value,))
        setter = object.__setattr__
        setter(node, "op", op)
        setter(node, "args", tuple(args))
        setter(node, "value", value)
        setter(node, "free", free)
        setter(node, "is_complex", cplx)
        setter(node, "_deriv", {})
        _INTERN[key] = node
    return node


def _num(v):
    """Normalise a python number to a constant payload."""
    if isinstance(v, bool):
        raise TypeError("booleans are not expression constants")
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ExprError(f"non-finite constant {v}")
        return v + 0.0
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        if v.imag == 0:
            return _num(v.real)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ExprError(f"non-finite constant {v}")
        return v
    if isinstance(v, np.integer):
        return Fraction(int(v))
    raise TypeError(f"cannot make a constant from {v!r}")


def const(v) -> Expr:
    return _make("const", (), _num(v))


def var(name: str) -> Expr:
    if not isinstance(name, str) or not name:
        raise ExprError(f"bad variable name {name!r}")
    return _make("var", (), name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


ZERO = const(0)
ONE = const(1)


def _split_coef(t):
    if t.op == "neg":
        c, rest = _split_coef(t.args[0])
        return -c, rest
    if t.op == "mul" and t.args[0].op == "const":
        rest = t.args[1:]
        return t.args[0].value, (rest[0] if len(rest) == 1 else mul(*rest))
    return Fraction(1), t


def add(*terms) -> Expr:
    flat = []
    for t in terms:
        t = as_expr(t)
        if t.op == "add":
            flat.extend(t.args)
        else:
            flat.append(t)
    csum = Fraction(0)
    order = []
    coefs = {}
    for t in flat:
        if t.op == "const":
            csum = csum + t.value
            continue
        c, rest = _split_coef(t)
        k = id(rest)
        if k in coefs:
            coefs[k][1] = coefs[k][1] + c
        else:
            coefs[k] = [rest, c]
            order.append(k)
    out = []
    for k in order:
        rest, c = coefs[k]
        if c == 0:
            continue
        if c == 1:
            out.append(rest)
        elif c == -1:
            out.append(neg(rest))
        else:
            out.append(mul(const(c), rest))
    if csum != 0:
        out.append(const(csum))
    if not out:
        return const(csum)
    if len(out) == 1:
        return out[0]
    return _make("add", out)


def mul(*factors) -> Expr:
    cprod = Fraction(1)
    order = []
    expo = {}

    def visit(f):
        nonlocal cprod
        if f.op == "const":
            cprod = cprod * f.value
        elif f.op == "mul":
            for a in f.args:
                visit(a)
        elif f.op == "neg":
            cprod = -cprod
            visit(f.args[0])
        else:
            if f.op == "pow":
                base, e = f.args[0], f.value
            else:
                base, e = f, Fraction(1)
            k = id(base)
            if k in expo:
                expo[k][1] += e
            else:
                expo[k] = [base, e]
                order.append(k)

    for f in factors:
        visit(as_expr(f))
    if cprod == 0:
        return ZERO
    out = []
    for k in order:
        base, e = expo[k]
        if e != 0:
            p = power(base, e)
            if p.op == "const":
                cprod = cprod * p.value
            else:
                out.append(p)
    if not out:
        return const(cprod)
    if cprod == -1:
        return neg(out[0] if len(out) == 1 else _make("mul", out))
    if cprod != 1:
        out.insert(0, const(cprod))
    if len(out) == 1:
        return out[0]
    return _make("mul", out)


def neg(a) -> Expr:
    a = as_expr(a)
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    if a.op == "mul" and a.args[0].op == "const":
        return mul(const(-a.args[0].value), *a.args[1:])
    return _make("neg", (a,))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if b.op == "const":
        if b.value == 0:
            return _make("div", (a, b))
        if isinstance(b.value, Fraction):
            return mul(const(1 / b.value), a)
        return mul(const(1.0 / b.value), a)
    if a.is_zero():
        return ZERO
    # quotients become products with negative powers so that bases cancel in mul
    den = b.args if b.op == "mul" else (b,)
    return mul(a, *[power(f, -1) for f in den])


def _rational(p) -> Fraction:
    if isinstance(p, Expr):
        if p.op != "const" or not isinstance(p.value, Fraction):
            raise ExprError("exponents must be rational constants")
        return p.value
    if isinstance(p, float):
        return Fraction(p).limit_denominator(10**6)
    return Fraction(p)


def _exact_root(v: Fraction, n: int):
    """``v**(1/n)`` as a Fraction when it is rational, else None."""
    out = []
    for k in (v.numerator, v.denominator):
        r = round(k ** (1.0 / n))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**n == k:
                out.append(c)
                break
        else:
            return None
    return Fraction(out[0], out[1])


def power(a, p) -> Expr:
    a = as_expr(a)
    p = _rational(p)
    if p == 0:
        return ONE
    if p == 1:
        return a
    if a.op == "const":
        v = a.value
        if isinstance(v, Fraction):
            if p.denominator == 1 and not (v == 0 and p < 0):
                return const(v ** int(p))
            if v > 0:
                exact = _exact_root(v, p.denominator)
                if exact is not None:
                    return const(exact ** p.numerator)
                return const(float(v) ** float(p))
        elif isinstance(v, float) and (v > 0 or p.denominator == 1):
            if not (v == 0 and p < 0):
                return const(v ** (int(p) if p.denominator == 1 else float(p)))
        elif isinstance(v, complex) and p.denominator == 1:
            return const(v ** int(p))
        return _make("pow", (a,), p)
    if a.op == "pow" and p.denominator == 1:
        return power(a.args[0], a.value * p)
    if a.op == "neg" and p.denominator == 1:
        inner = power(a.args[0], p)
        return inner if p.numerator % 2 == 0 else neg(inner)
    return _make("pow", (a,), p)


def sqrt(a) -> Expr:
    return power(a, Fraction(1, 2))


def _fold(name, v):
    if isinstance(v, complex):
        return getattr(cmath, name)(v)
    return getattr(math, name)(float(v))


def sin(a) -> Expr:
    a = as_expr(a)
    if a.op == "const":
        return ZERO if a.value == 0 else const(_fold("sin", a.value))
    if a.op == "neg":
        return neg(sin(a.args[0]))
    return _make("sin", (a,))


def cos(a) -> Expr:
    a = as_expr(a)
    if a.op == "const":
        return ONE if a.value == 0 else const(_fold("cos", a.value))
    if a.op == "neg":
        return cos(a.args[0])
    return _make("cos", (a,))


def exp(a) -> Expr:
    a = as_expr(a)
    if a.op == "const":
        return ONE if a.value == 0 else const(_fold("exp", a.value))
    return _make("exp", (a,))


def log(a) -> Expr:
    a = as_expr(a)
    if a.op == "const":
        if a.value == 1:
            return ZERO
        if not isinstance(a.value, complex) and a.value > 0:
            return const(math.log(float(a.value)))
    return _make("log", (a,))


_UNARY = {"sin": sin, "cos": cos, "exp": exp, "log": log, "neg": neg}


def rebuild(op, args, value=None) -> Expr:
    """Reassemble a node of kind ``op`` through the simplifying constructors."""
    if op == "const":
        return const(value)
    if op == "var":
        return var(value)
    if op == "add":
        return add(*args)
    if op == "mul":
        return mul(*args)
    if op == "div":
        return div(*args)
    if op == "pow":
        return power(args[0], value)
    return _UNARY[op](args[0])


# ---------------------------------------------------------------------------
# traversal helpers


def _postorder(roots):
    seen = set()
    out = []
    stack = [(r, False) for r in reversed(roots)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))
    return out


def node_count(*exprs) -> int:
    """Number of distinct nodes in the DAG spanned by ``exprs``."""
    return len(_postorder([as_expr(e) for e in exprs]))


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the simplifying constructors.

    Trees made by this module are already in that form, so this is the
    identity on them; it matters only for trees assembled from foreign
    pieces (e.g. after substitution).
    """
    memo = {}
    for node in _postorder([e]):
        if not node.args:
            memo[id(node)] = node
        else:
            memo[id(node)] = rebuild(node.op, [memo[id(a)] for a in node.args], node.value)
    return memo[id(e)]


def substitute(e, name, replacement, coords: Iterable[str] | None = None) -> Expr:
    """Capture-free replacement of variable ``name`` by ``replacement``.

    If ``coords`` is given, ``name`` must be one of them.
    """
    return subs(e, {name: replacement}, coords)


def subs(e, mapping: Mapping[str, object], coords: Iterable[str] | None = None) -> Expr:
    e = as_expr(e)
    if coords is not None:
        known = set(coords)
        for k in mapping:
            if k not in known:
                raise ExprError(f"unknown variable {k!r}")
    repl = {k: as_expr(v) for k, v in mapping.items()}
    if not (e.free & repl.keys()):
        return e
    memo = {}
    for node in _postorder([e]):
        if node.op == "var":
            memo[id(node)] = repl.get(node.value, node)
        elif not node.args or not (node.free & repl.keys()):
            memo[id(node)] = node
        else:
            memo[id(node)] = rebuild(node.op, [memo[id(a)] for a in node.args], node.value)
    return memo[id(e)]


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to the coordinate ``name``."""
    e = as_expr(e)
    if name not in e.free:
        return ZERO
    cached = e._deriv.get(name)
    if cached is not None:
        return cached
    # children first, iteratively, so deep trees do not hit the recursion limit
    for node in _postorder([e]):
        if name in node.free and name not in node._deriv:
            node._deriv[name] = _d(node, name)
    return e._deriv[name]


def _dd(a, name):
    if name not in a.free:
        return ZERO
    return a._deriv[name]


def _d(node, name):
    op, args = node.op, node.args
    if op == "var":
        return ONE
    if op == "add":
        return add(*[_dd(a, name) for a in args])
    if op == "mul":
        terms = []
        for i, a in enumerate(args):
            da = _dd(a, name)
            if da.is_zero():
                continue
            terms.append(mul(*args[:i], da, *args[i + 1:]))
        return add(*terms)
    if op == "div":
        a, b = args
        da, db = _dd(a, name), _dd(b, name)
        if db.is_zero():
            return div(da, b)
        return div(add(mul(da, b), neg(mul(a, db))), power(b, 2))
    if op == "pow":
        a = args[0]
        p = node.value
        return mul(const(p), power(a, p - 1), _dd(a, name))
    if op == "neg":
        return neg(_dd(args[0], name))
    a = args[0]
    da = _dd(a, name)
    if op == "sin":
        return mul(cos(a), da)
    if op == "cos":
        return neg(mul(sin(a), da))
    if op == "exp":
        return mul(node, da)
    if op == "log":
        return div(da, a)
    raise ExprError(f"cannot differentiate {op}")


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _fmt_number(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"(-{-v.numerator})"
        if v >= 0:
            return f"({v.numerator}/{v.denominator})"
        return f"(-{-v.numerator}/{v.denominator})"
    if isinstance(v, float):
        r = repr(v)
        return r if v >= 0 else f"({r})"
    return f"({v!r})"


def _fmt_exponent(p):
    if p.denominator == 1 and p >= 0:
        return str(p.numerator)
    if p.denominator == 1:
        return f"(-{-p.numerator})"
    sign = "-" if p < 0 else ""
    return f"({sign}{abs(p.numerator)}/{p.denominator})"


def to_text(e: Expr) -> str:
    """Render ``e`` in the ASCII input grammar (round-trips through parse)."""
    memo = {}
    for node in _postorder([e]):
        memo[id(node)] = _fmt(node, memo)
    return memo[id(e)][0]


def _wrap(child, memo, min_prec):
    text, prec = memo[id(child)]
    return text if prec >= min_prec else f"({text})"


def _fmt(node, memo):
    op = node.op
    if op == "const":
        return _fmt_number(node.value), 5
    if op == "var":
        return node.value, 5
    if op == "add":
        parts = []
        for i, t in enumerate(node.args):
            if t.op == "neg" and i > 0:
                parts.append(" - " + _wrap(t.args[0], memo, 2))
            else:
                parts.append((" + " if i else "") + _wrap(t, memo, 2))
        return "".join(parts), 1
    if op == "mul":
        parts = []
        for f in node.args:
            if f.op == "div":
                parts.append("(" + memo[id(f)][0] + ")")
            else:
                parts.append(_wrap(f, memo, 3))
        return "*".join(parts), 2
    if op == "div":
        num = _wrap(node.args[0], memo, 2)
        den = _wrap(node.args[1], memo, 4)
        return f"{num}/{den}", 2
    if op == "neg":
        return "-" + _wrap(node.args[0], memo, 4), 3
    if op == "pow":
        if node.value == Fraction(1, 2):
            return f"sqrt({memo[id(node.args[0])][0]})", 5
        base = _wrap(node.args[0], memo, 5)
        return f"{base}^{_fmt_exponent(node.value)}", 4
    return f"{op}({memo[id(node.args[0])][0]})", 5


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        toks.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text, names, constants):
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names
        self.constants = constants

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, v, off = self.take()
        if v != value or kind == "end":
            raise ParseError(f"expected {value!r}, found {v or 'end of input'!r}", off)

    def parse(self):
        e = self.expr()
        kind, v, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", off)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, v, _ = self.take()
            t = self.term()
            e = add(e, t) if v == "+" else add(e, neg(t))
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, v, _ = self.take()
            f = self.unary()
            e = mul(e, f) if v == "*" else div(e, f)
        return e

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            inner = self.unary()
            return neg(inner) if v == "-" else inner
        return self.factor()

    def factor(self):
        b = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            b = power(b, self.rational())
        return b

    def _number(self):
        kind, v, off = self.take()
        if kind != "num":
            raise ParseError(f"expected a number, found {v or 'end of input'!r}", off)
        return v

    def rational(self):
        kind, v, off = self.peek()
        if kind == "op" and v == "(":
            self.take()
            sign = self._sign()
            p = Fraction(self._number())
            if self.peek()[1] == "/":
                self.take()
                sign2 = self._sign()
                q = Fraction(self._number())
                if q == 0:
                    raise ParseError("zero denominator in exponent", off)
                p = p / q * sign2
            self.expect(")")
            return p * sign
        sign = self._sign()
        return Fraction(self._number()) * sign

    def _sign(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            return -1 if v == "-" else 1
        return 1

    def base(self):
        kind, v, off = self.take()
        if kind == "num":
            if re.fullmatch(r"\d+", v):
                return const(int(v))
            return const(float(v))
        if kind == "id":
            if v in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ParseError(f"function {v} needs a parenthesised argument", self.peek()[2])
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                close = self.peek()
                self.expect(")")
                if len(args) != 1:
                    raise ArityError(f"{v} takes 1 argument, got {len(args)}", close[2])
                return sqrt(args[0]) if v == "sqrt" else _UNARY[v](args[0])
            if self.peek()[1] == "(":
                raise UnknownIdentifierError(f"unknown function {v!r}", off)
            if v == "pi":
                return const(math.pi)
            if v in self.constants:
                return as_expr(self.constants[v])
            if v in self.names:
                return var(v)
            raise UnknownIdentifierError(f"unknown identifier {v!r}", off)
        if kind == "op" and v == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {v or 'end of input'!r}", off)


def parse_expr(text: str, chart=None, constants: Mapping[str, object] | None = None) -> Expr:
    """Parse ``text`` into an expression over the coordinates of ``chart``.

    ``chart`` may be a :class:`Chart` or any iterable of coordinate names;
    ``constants`` maps extra identifiers to numbers or expressions.

    >>> to_text(parse_expr("x^2 + sin(2*z)", "xyz"))
    'x^2 + sin(2*z)'
    """
    if chart is None:
        names = ()
    elif isinstance(chart, Chart):
        names = chart.coords
    else:
        names = tuple(chart)
    return _Parser(text, frozenset(names), dict(constants or {})).parse()


# ---------------------------------------------------------------------------
# evaluation


def _as_float(v):
    return float(v) if isinstance(v, Fraction) else v


def _check_den(x, what="denominator"):
    if np.any(np.abs(x) < DENOMINATOR_FLOOR):
        raise DenominatorFloorError(f"{what} below floor {DENOMINATOR_FLOOR:g}")


def _check_cut(x, what):
    bad = (np.real(x) < 0) & (np.abs(np.imag(x)) <= BRANCH_CUT_TOL * np.abs(x))
    if np.any(bad):
        raise BranchCutError(f"{what} argument on or near the branch cut")


def _eval_node(node, vals, cplx):
    op = node.op
    a = [vals[id(c)] for c in node.args]
    if op == "add":
        out = a[0]
        for x in a[1:]:
            out = out + x
        return out
    if op == "mul":
        out = a[0]
        for x in a[1:]:
            out = out * x
        return out
    if op == "div":
        _check_den(a[1])
        return a[0] / a[1]
    if op == "neg":
        return -a[0]
    if op == "pow":
        x = a[0]
        p = node.value
        if p.denominator == 1:
            n = p.numerator
            if n < 0:
                _check_den(x, "base of negative power")
                return 1.0 / (x ** (-n))
            return x ** n
        if cplx:
            _check_cut(x, "fractional power")
        elif np.any(x < 0):
            raise DomainError("fractional power of a negative number")
        if p < 0:
            _check_den(x, "base of negative power")
        if p == Fraction(1, 2):
            return np.sqrt(x)
        if p == Fraction(-1, 2):
            return 1.0 / np.sqrt(x)
        return np.power(x, float(p))
    x = a[0]
    if op == "sin":
        return np.sin(x)
    if op == "cos":
        return np.cos(x)
    if op == "exp":
        return np.exp(x)
    if op == "log":
        if cplx:
            _check_cut(x, "log")
            _check_den(x, "log argument")
        elif np.any(x <= 0):
            raise DomainError("log of a non-positive number")
        return np.log(x)
    raise EvaluationError(f"cannot evaluate {op}")


def evaluate(exprs: Sequence, env: Mapping[str, object]) -> list:
    """Evaluate several expressions on a shared environment of arrays.

    ``env`` maps coordinate names to scalars or broadcast-compatible arrays.
    The complex path is taken when an input has a nonzero imaginary part or
    a tree carries a complex constant; complex inputs lying exactly on the
    real axis are evaluated on the real path, so both agree bitwise there.
    """
    roots = [as_expr(e) for e in exprs]
    arrs = {k: np.asarray(v) for k, v in env.items()}
    cplx = any(r.is_complex for r in roots)
    for k, v in arrs.items():
        if np.iscomplexobj(v):
            if np.any(v.imag != 0):
                cplx = True
            else:
                arrs[k] = v.real
    dtype = complex if cplx else float
    arrs = {k: v.astype(dtype) for k, v in arrs.items()}
    shape = np.broadcast_shapes(*[v.shape for v in arrs.values()]) if arrs else ()
    vals = {}
    with np.errstate(all="ignore"):
        for node in _postorder(roots):
            if node.op == "const":
                vals[id(node)] = _as_float(node.value)
            elif node.op == "var":
                try:
                    vals[id(node)] = arrs[node.value]
                except KeyError:
                    raise EvaluationError(f"no value for coordinate {node.value!r}") from None
            else:
                vals[id(node)] = _eval_node(node, vals, cplx)
    out = []
    for r in roots:
        v = np.broadcast_to(np.asarray(vals[id(r)], dtype=dtype), shape).copy()
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"non-finite value evaluating {to_text(r)[:80]}")
        out.append(v)
    return out


def eval_point(e, point: Mapping[str, object]):
    """Value of ``e`` at a single real or complex point (a name -> number map)."""
    (v,) = evaluate([e], point)
    v = v.item()
    if isinstance(v, complex):
        return v
    if any(isinstance(x, complex) or np.iscomplexobj(x) for x in point.values()):
        return complex(v)
    return v


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Locus:
    """An excluded singular set, given by a distance-like function.

    Points with ``distance(env) < min_distance`` are rejected by the guard.
    """

    description: str
    distance: Callable[[Mapping[str, np.ndarray]], np.ndarray]
    min_distance: float


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names plus a domain guard.

    ``box`` holds one closed interval per coordinate (``None`` for
    unbounded); ``excluded`` lists singular loci that must be avoided.
    """

    coords: tuple
    box: tuple | None = None
    excluded: tuple = field(default_factory=tuple)

    def __post_init__(self):
        coords = tuple(self.coords)
        if len(set(coords)) != len(coords):
            raise ExprError(f"coordinate names must be distinct: {coords}")
        object.__setattr__(self, "coords", coords)
        if self.box is not None:
            box = tuple(None if b is None else (float(b[0]), float(b[1])) for b in self.box)
            if len(box) != len(coords):
                raise ExprError("box needs one interval per coordinate")
            object.__setattr__(self, "box", box)
        object.__setattr__(self, "excluded", tuple(self.excluded))

    @property
    def dim(self):
        return len(self.coords)

    def index(self, name):
        return self.coords.index(name)

    def var(self, name):
        if name not in self.coords:
            raise ExprError(f"{name!r} is not a coordinate of {self.coords}")
        return var(name)

    def extend(self, name, interval=None, excluded=()):
        box = None
        if self.box is not None or interval is not None:
            box = (self.box or (None,) * self.dim) + (interval,)
        return Chart(self.coords + (name,), box, self.excluded + tuple(excluded))

    def restrict(self, name):
        """Drop coordinate ``name`` (and its interval)."""
        i = self.index(name)
        box = None if self.box is None else self.box[:i] + self.box[i + 1:]
        return Chart(self.coords[:i] + self.coords[i + 1:], box, self.excluded)

    def with_box(self, box):
        return Chart(self.coords, box, self.excluded)

    def env(self, points):
        pts = np.asarray(points)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[-1] != self.dim:
            raise ExprError(f"points need {self.dim} coordinates, got {pts.shape[-1]}")
        return {c: pts[..., i] for i, c in enumerate(self.coords)}

    def guard(self, points, skip=()):
        """Raise :class:`GuardError` unless every point is admissible.

        Coordinates named in ``skip`` (e.g. a complexified fibre variable)
        are exempt from the box test.
        """
        env = self.env(points)
        if self.box is not None:
            for c, b in zip(self.coords, self.box):
                if b is None or c in skip:
                    continue
                x = env[c]
                if np.iscomplexobj(x):
                    if np.any(x.imag != 0):
                        raise GuardError(f"complex value for real coordinate {c}")
                    x = x.real
                lo, hi = b
                slack = 1e-12 * max(1.0, abs(lo), abs(hi))
                if np.any(x < lo - slack) or np.any(x > hi + slack):
                    raise GuardError(f"coordinate {c} outside [{lo}, {hi}]")
        if self.excluded:
            renv = {k: (v.real if np.iscomplexobj(v) else v) for k, v in env.items()}
            for loc in self.excluded:
                d = np.asarray(loc.distance(renv))
                if np.any(d < loc.min_distance):
                    raise GuardError(f"point too close to excluded locus: {loc.description}")
        return env

    def evaluate(self, exprs, points, skip=()):
        """Evaluate expressions at ``points`` (shape ``(n, dim)``) after guarding.

        Returns an array of shape ``(len(exprs), n)``.
        """
        exprs = list(exprs)
        env = self.guard(points, skip)
        if not exprs:
            return np.zeros((0, len(next(iter(env.values())))))
        return np.array(evaluate(exprs, env))
