"""Small text modeling language with exact symbolic derivatives.

Statements end with ';', comments run from '#' to end of line:

    var x in [0, 10] start 1;
    var y;
    minimize (x-2)^2 + (y-1)^2;
    subject to g1: x^2 - y <= 0;

Relations are '==', '<=', '>=' or a two-sided range 'a <= expr <= b' with
constant bound sides.  Exponents of '^' must be constant expressions.
Expressions are trees of tuples:

    ("const", value) | ("var", index) | ("neg", a)
    ("call", name, a)                         name in {sin, cos, exp, log, sqrt}
    (op, a, b)                                op in {add, sub, mul, div, pow}
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import NonConstantExponent, ParseError, UndeclaredVariable
from .model import Problem

_FUNCS = ("sin", "cos", "exp", "log", "sqrt")
_KEYWORDS = ("var", "minimize", "maximize", "subject", "to", "in", "start")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|<=|>=|[-+*/^()\[\],;:])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str   # num | ident | op | eof
    text: str
    line: int
    col: int


def _tokenize(text):
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass
class VarDecl:
    name: str
    lb: float = -math.inf
    ub: float = math.inf
    start: float | None = None


@dataclass
class ConDecl:
    name: str
    expr: tuple
    cl: float
    cu: float


@dataclass
class ModelFile:
    variables: list = field(default_factory=list)
    sense: str = "minimize"
    objective: tuple = ("const", 0.0)
    constraints: list = field(default_factory=list)


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars: dict[str, int] = {}

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    def fail(self, msg):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)

    # -- statements --

    def parse_model(self):
        mf = ModelFile()
        saw_objective = False
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "var":
                mf.variables.append(self.var_decl())
            elif tok.text in ("minimize", "maximize"):
                if saw_objective:
                    self.fail("duplicate objective")
                self.next()
                mf.sense = tok.text
                mf.objective = self.expr()
                self.expect(";")
                saw_objective = True
            elif tok.text == "subject":
                self.next()
                self.expect("to")
                mf.constraints.append(self.con_decl())
            else:
                self.fail(f"expected a statement, found {tok.text or 'end of input'!r}")
        return mf

    def var_decl(self):
        self.expect("var")
        name_tok = self.next()
        if name_tok.kind != "ident" or name_tok.text in _KEYWORDS or name_tok.text in _FUNCS:
            raise ParseError("expected a variable name", name_tok.line, name_tok.col)
        if name_tok.text in self.vars:
            raise ParseError(f"variable {name_tok.text!r} declared twice",
                             name_tok.line, name_tok.col)
        decl = VarDecl(name_tok.text)
        if self.peek().text == "in":
            self.next()
            self.expect("[")
            decl.lb = self.signed_number()
            self.expect(",")
            decl.ub = self.signed_number()
            self.expect("]")
        if self.peek().text == "start":
            self.next()
            decl.start = self.signed_number()
        self.expect(";")
        self.vars[decl.name] = len(self.vars)
        return decl

    def con_decl(self):
        name_tok = self.next()
        if name_tok.kind != "ident":
            raise ParseError("expected a constraint name", name_tok.line, name_tok.col)
        self.expect(":")
        first = self.expr()
        rel_tok = self.next()
        if rel_tok.text not in ("==", "<=", ">="):
            raise ParseError(f"expected '==', '<=' or '>=', found {rel_tok.text!r}",
                             rel_tok.line, rel_tok.col)
        second = self.expr()
        if self.peek().text == "<=":
            # range: const <= expr <= const
            if rel_tok.text != "<=":
                self.fail("range constraints must chain with '<='")
            self.next()
            third = self.expr()
            lo = self.const_value(first, rel_tok)
            hi = self.const_value(third, rel_tok)
            self.expect(";")
            return ConDecl(name_tok.text, second, lo, hi)
        self.expect(";")
        if contains_var(first) and contains_var(second):
            expr = ("sub", first, second)
            bound = 0.0
        elif contains_var(second):
            # constant on the left: mirror the relation
            expr = second
            bound = self.const_value(first, rel_tok)
            if rel_tok.text != "==":
                rel_tok.text = {"<=": ">=", ">=": "<="}[rel_tok.text]
        else:
            expr = first
            bound = self.const_value(second, rel_tok)
        if rel_tok.text == "==":
            return ConDecl(name_tok.text, expr, bound, bound)
        if rel_tok.text == "<=":
            return ConDecl(name_tok.text, expr, -math.inf, bound)
        return ConDecl(name_tok.text, expr, bound, math.inf)

    def const_value(self, e, tok):
        if contains_var(e):
            raise ParseError("constraint bound must be a constant expression",
                             tok.line, tok.col)
        return evaluate(e, ())

    def signed_number(self):
        neg = False
        if self.peek().text == "-":
            self.next()
            neg = True
        tok = self.next()
        if tok.kind != "num":
            raise ParseError(f"expected a number, found {tok.text!r}", tok.line, tok.col)
        val = float(tok.text)
        return -val if neg else val

    # -- expressions (precedence climbing) --

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            rhs = self.factor()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def factor(self):
        if self.peek().text == "-":
            self.next()
            return ("neg", self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            tok = self.next()
            exponent = self.factor()   # right-associative, unary minus allowed
            if contains_var(exponent):
                raise NonConstantExponent(
                    f"{tok.line}:{tok.col}: exponent must be constant")
            return ("pow", base, ("const", evaluate(exponent, ())))
        return base

    def atom(self):
        tok = self.next()
        if tok.kind == "num":
            return ("const", float(tok.text))
        if tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if tok.text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", tok.text, arg)
            if tok.text in _KEYWORDS:
                raise ParseError(f"keyword {tok.text!r} cannot start an expression",
                                 tok.line, tok.col)
            if tok.text not in self.vars:
                raise UndeclaredVariable(tok.text)
            return ("var", self.vars[tok.text])
        raise ParseError(f"expected an expression, found {tok.text or 'end of input'!r}",
                         tok.line, tok.col)


def parse_model(text):
    """Parse model text into a ModelFile; raises ParseError and friends."""
    return _Parser(text).parse_model()


# -- expression operations --

def contains_var(e):
    kind = e[0]
    if kind == "var":
        return True
    if kind == "const":
        return False
    if kind in ("neg", "call"):
        return contains_var(e[-1])
    return contains_var(e[1]) or contains_var(e[2])


def evaluate(e, x):
    """Evaluate an expression tree at point x (indexable)."""
    kind = e[0]
    if kind == "const":
        return e[1]
    if kind == "var":
        return float(x[e[1]])
    if kind == "neg":
        return -evaluate(e[1], x)
    if kind == "call":
        v = evaluate(e[2], x)
        try:
            return getattr(math, e[1])(v)
        except ValueError:
            return math.nan
        except OverflowError:
            return math.inf
    a = evaluate(e[1], x)
    b = evaluate(e[2], x)
    try:
        if kind == "add":
            return a + b
        if kind == "sub":
            return a - b
        if kind == "mul":
            return a * b
        if kind == "div":
            return a / b
        if kind == "pow":
            return math.pow(a, b)
    except ZeroDivisionError:
        return math.nan
    except (ValueError, OverflowError):
        return math.nan
    raise AssertionError(f"bad node {e!r}")


def _is_const(e, value=None):
    return e[0] == "const" and (value is None or e[1] == value)


def _add(a, b):
    if _is_const(a) and _is_const(b):
        return ("const", a[1] + b[1])
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return ("add", a, b)


def _sub(a, b):
    if _is_const(a) and _is_const(b):
        return ("const", a[1] - b[1])
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return ("neg", b)
    return ("sub", a, b)


def _mul(a, b):
    if _is_const(a) and _is_const(b):
        return ("const", a[1] * b[1])
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ("const", 0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return ("mul", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return ("const", 0.0)
    if _is_const(b, 1.0):
        return a
    return ("div", a, b)


def _neg(a):
    if _is_const(a):
        return ("const", -a[1])
    if a[0] == "neg":
        return a[1]
    return ("neg", a)


def diff(e, i):
    """Exact symbolic partial derivative of e with respect to variable i."""
    kind = e[0]
    if kind == "const":
        return ("const", 0.0)
    if kind == "var":
        return ("const", 1.0 if e[1] == i else 0.0)
    if kind == "neg":
        return _neg(diff(e[1], i))
    if kind == "add":
        return _add(diff(e[1], i), diff(e[2], i))
    if kind == "sub":
        return _sub(diff(e[1], i), diff(e[2], i))
    if kind == "mul":
        a, b = e[1], e[2]
        return _add(_mul(diff(a, i), b), _mul(a, diff(b, i)))
    if kind == "div":
        a, b = e[1], e[2]
        num = _sub(_mul(diff(a, i), b), _mul(a, diff(b, i)))
        return _div(num, _mul(b, b))
    if kind == "pow":
        a, c = e[1], e[2][1]
        da = diff(e[1], i)
        if c == 0.0:
            return ("const", 0.0)
        if c == 1.0:
            return da
        return _mul(("const", c), _mul(("pow", a, ("const", c - 1.0)), da))
    if kind == "call":
        fn, a = e[1], e[2]
        da = diff(a, i)
        if fn == "sin":
            outer = ("call", "cos", a)
        elif fn == "cos":
            outer = _neg(("call", "sin", a))
        elif fn == "exp":
            outer = ("call", "exp", a)
        elif fn == "log":
            outer = _div(("const", 1.0), a)
        elif fn == "sqrt":
            outer = _div(("const", 0.5), ("call", "sqrt", a))
        else:
            raise AssertionError(f"bad call {fn!r}")
        return _mul(outer, da)
    raise AssertionError(f"bad node {e!r}")


def format_expr(e):
    """Fully parenthesized text form; reparsing reproduces the identical tree."""
    kind = e[0]
    if kind == "const":
        v = e[1]
        return repr(v) if v >= 0 else f"({v!r})"
    if kind == "var":
        return f"v{e[1]}"
    if kind == "neg":
        return f"(-{format_expr(e[1])})"
    if kind == "call":
        return f"{e[1]}({format_expr(e[2])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[kind]
    return f"({format_expr(e[1])} {sym} {format_expr(e[2])})"


def format_model(mf):
    """Render a ModelFile as model text that parses back to an equal tree."""
    lines = []
    for d in mf.variables:
        parts = [f"var {d.name}"]
        if math.isfinite(d.lb) or math.isfinite(d.ub):
            lo = repr(d.lb) if math.isfinite(d.lb) else "-1e308"
            hi = repr(d.ub) if math.isfinite(d.ub) else "1e308"
            parts.append(f"in [{lo}, {hi}]")
        if d.start is not None:
            parts.append(f"start {d.start!r}")
        lines.append(" ".join(parts) + ";")
    names = {i: d.name for i, d in enumerate(mf.variables)}
    lines.append(f"{mf.sense} {_format_named(mf.objective, names)};")
    for c in mf.constraints:
        body = _format_named(c.expr, names)
        if c.cl == c.cu:
            rel = f"{body} == {c.cl!r}"
        elif math.isinf(c.cl):
            rel = f"{body} <= {c.cu!r}"
        elif math.isinf(c.cu):
            rel = f"{body} >= {c.cl!r}"
        else:
            rel = f"{c.cl!r} <= {body} <= {c.cu!r}"
        lines.append(f"subject to {c.name}: {rel};")
    return "\n".join(lines) + "\n"


def _format_named(e, names):
    kind = e[0]
    if kind == "var":
        return names[e[1]]
    if kind == "const":
        v = e[1]
        return repr(v) if v >= 0 else f"(0.0 - {-v!r})"
    if kind == "neg":
        return f"(-{_format_named(e[1], names)})"
    if kind == "call":
        return f"{e[1]}({_format_named(e[2], names)})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[kind]
    return f"({_format_named(e[1], names)} {sym} {_format_named(e[2], names)})"


# -- Problem construction --

def build_problem(mf, name="model"):
    """Compile a parsed model into a Problem with exact derivative trees."""
    n = len(mf.variables)
    m = len(mf.constraints)
    obj_tree = mf.objective
    grad_trees = [diff(obj_tree, i) for i in range(n)]
    hobj = {}
    for i in range(n):
        for j in range(i + 1):
            t = diff(grad_trees[i], j)
            if not _is_const(t, 0.0):
                hobj[(i, j)] = t
    jac_trees = [[diff(c.expr, i) for i in range(n)] for c in mf.constraints]
    hcon = []
    for k in range(m):
        hk = {}
        for i in range(n):
            for j in range(i + 1):
                t = diff(jac_trees[k][i], j)
                if not _is_const(t, 0.0):
                    hk[(i, j)] = t
        hcon.append(hk)

    import numpy as np

    def obj(x):
        return evaluate(obj_tree, x)

    def grad(x):
        return np.array([evaluate(t, x) for t in grad_trees])

    def cons(x):
        return np.array([evaluate(c.expr, x) for c in mf.constraints])

    def jac(x):
        return np.array([[evaluate(t, x) for t in row] for row in jac_trees])

    def hess(x, y, obj_weight):
        H = np.zeros((n, n))
        for (i, j), t in hobj.items():
            v = obj_weight * evaluate(t, x)
            H[i, j] += v
            if i != j:
                H[j, i] += v
        for k, hk in enumerate(hcon):
            if y[k] == 0.0:
                continue
            for (i, j), t in hk.items():
                v = -y[k] * evaluate(t, x)
                H[i, j] += v
                if i != j:
                    H[j, i] += v
        return H

    lb = [d.lb for d in mf.variables]
    ub = [d.ub for d in mf.variables]
    x0 = [d.start if d.start is not None else 0.0 for d in mf.variables]
    cl = [c.cl for c in mf.constraints]
    cu = [c.cu for c in mf.constraints]
    return Problem(name, n, obj=obj, grad=grad, hess=hess,
                   m=m, cons=cons, jac=jac,
                   x0=x0, lb=lb, ub=ub, cl=cl, cu=cu, sense=mf.sense)


def load_model(path, name=None):
    """Parse a .ncl-mod file and build its Problem."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    mf = parse_model(text)
    return build_problem(mf, name=name or str(path))
