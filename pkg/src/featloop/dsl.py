"""Closed per-row feature-transformation language.

Grammar (recursive descent, backtracking only inside comparisons):

    expr    := term (('+'|'-') term)*
    term    := unary (('*'|'/') unary)*
    unary   := '-'? atom
    atom    := number | identifier | fncall | '(' expr ')'
             | 'if' cmp 'then' expr 'else' expr
    cmp     := cmp_and ('or' cmp_and)*
    cmp_and := cmp_not ('and' cmp_not)*
    cmp_not := 'not' cmp_not | '(' cmp ')' | expr relop expr
             | identifier '==' stringLiteral
    relop   := '>' | '<' | '>=' | '<=' | '==' | '!='
    fncall  := fname '(' expr (',' expr)* ')'

Functions: abs, sqrt, log1p, exp, min, max, clip, floor.  Identifiers are
feature column names and must start with a letter.  String equality is legal
only on categorical columns and yields 1.0/0.0.

Arithmetic is totalized so every program yields finite values on every row:
x/0 -> 0.0, sqrt of a negative -> 0.0, log1p at or below -1 -> 0.0, and any
overflow is clamped to +/-1e308.  Each such event is counted per row.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import ColumnKind, Dataset

MAX_SOURCE_BYTES = 4096
MAX_DEPTH = 32
CLAMP = 1e308

FUNCTIONS = {"abs": 1, "sqrt": 1, "log1p": 1, "exp": 1, "floor": 1,
             "min": 2, "max": 2, "clip": 3}
KEYWORDS = {"if", "then", "else", "and", "or", "not"}
RELOPS = {">", "<", ">=", "<=", "==", "!="}

GRAMMAR_DOC = """\
A program is a single expression evaluated once per row:
  expr   := term (('+'|'-') term)*
  term   := unary (('*'|'/') unary)*
  unary  := '-'? atom
  atom   := number | column | fn '(' expr {',' expr} ')' | '(' expr ')'
          | 'if' cond 'then' expr 'else' expr
  cond   := comparisons combined with 'and', 'or', 'not', parentheses
  comparison := expr ('>'|'<'|'>='|'<='|'=='|'!=') expr
              | column == "token"        (categorical columns only)
Functions: abs(x), sqrt(x), log1p(x), exp(x), floor(x), min(x,y), max(x,y),
clip(x,lo,hi).  Column names must be written exactly as listed.  Label
columns must never be referenced.  Division by zero yields 0.0."""


class ErrorKind(Enum):
    SYNTAX = "SyntaxError"
    UNKNOWN_IDENTIFIER = "UnknownIdentifier"
    LABEL_LEAKAGE = "LabelLeakage"
    UNKNOWN_FUNCTION = "UnknownFunction"
    ARITY_MISMATCH = "ArityMismatch"
    TYPE_ERROR = "TypeError"
    DEPTH_EXCEEDED = "DepthExceeded"


class DslError(Exception):
    def __init__(self, kind: ErrorKind, location: int, detail: str):
        super().__init__(f"{kind.value} at {location}: {detail}")
        self.kind = kind
        self.location = location
        self.detail = detail


# ---------------------------------------------------------------- AST nodes

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class StrEq:
    column: str
    literal: str


@dataclass(frozen=True)
class BoolOp:
    op: str  # 'and' | 'or'
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class Program:
    source: str
    ast: object
    referenced_columns: frozenset


# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>\d+(\.\d+)?([eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<str>\"[^\"\n]*\"|'[^'\n]*')"
    r"|(?P<op>>=|<=|==|!=|[-+*/(),<>])"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslError(ErrorKind.SYNTAX, pos, f"unexpected character {source[pos]!r}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        text = m.group()
        if m.lastgroup == "num":
            tokens.append(("num", text, m.start()))
        elif m.lastgroup == "ident":
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append((kind, text, m.start()))
        elif m.lastgroup == "str":
            tokens.append(("str", text[1:-1], m.start()))
        else:
            tokens.append(("op", text, m.start()))
    tokens.append(("eof", "", len(source)))
    return tokens


# ------------------------------------------------------------------- parser

class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, text, loc = self.peek()
        if kind != "op" or text != op:
            raise DslError(ErrorKind.SYNTAX, loc, f"expected {op!r}, found {text or 'end of input'!r}")
        return self.advance()

    def _enter(self, loc):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise DslError(ErrorKind.DEPTH_EXCEEDED, loc,
                           f"nesting exceeds maximum depth {MAX_DEPTH}")

    def _leave(self):
        self.depth -= 1

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, text, loc = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            self._enter(loc)
            node = Neg(self.atom())
            self._leave()
            return node
        return self.atom()

    def atom(self):
        kind, text, loc = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "kw" and text == "if":
            return self._if(loc)
        if kind == "ident":
            self.advance()
            nk, nt, nloc = self.peek()
            if nk == "op" and nt == "(":
                if text not in FUNCTIONS:
                    raise DslError(ErrorKind.UNKNOWN_FUNCTION, loc,
                                   f"{text!r} is not an allowed function")
                return self._fncall(text, loc)
            return Col(text)
        if kind == "op" and text == "(":
            self.advance()
            self._enter(loc)
            node = self.expr()
            self._leave()
            self.expect_op(")")
            return node
        raise DslError(ErrorKind.SYNTAX, loc,
                       f"expected a value, found {text or 'end of input'!r}")

    def _fncall(self, name, loc):
        self.expect_op("(")
        self._enter(loc)
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.expr())
        self.expect_op(")")
        self._leave()
        if len(args) != FUNCTIONS[name]:
            raise DslError(ErrorKind.ARITY_MISMATCH, loc,
                           f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}")
        return Call(name, tuple(args))

    def _if(self, loc):
        self.advance()  # 'if'
        self._enter(loc)
        cond = self.cmp()
        self._expect_kw("then")
        then = self.expr()
        self._expect_kw("else")
        orelse = self.expr()
        self._leave()
        return If(cond, then, orelse)

    def _expect_kw(self, word):
        kind, text, loc = self.peek()
        if kind != "kw" or text != word:
            raise DslError(ErrorKind.SYNTAX, loc, f"expected {word!r}")
        self.advance()

    def cmp(self):
        node = self.cmp_and()
        while self.peek()[:2] == ("kw", "or"):
            self.advance()
            node = BoolOp("or", node, self.cmp_and())
        return node

    def cmp_and(self):
        node = self.cmp_not()
        while self.peek()[:2] == ("kw", "and"):
            self.advance()
            node = BoolOp("and", node, self.cmp_not())
        return node

    def cmp_not(self):
        kind, text, loc = self.peek()
        if kind == "kw" and text == "not":
            self.advance()
            self._enter(loc)
            node = Not(self.cmp_not())
            self._leave()
            return node
        return self.cmp_atom()

    def cmp_atom(self):
        kind, text, loc = self.peek()
        if kind == "op" and text == "(":
            # could be a parenthesized condition or a parenthesized expression
            # starting a comparison; try the condition first, then backtrack
            save = self.pos
            save_depth = self.depth
            try:
                self.advance()
                self._enter(loc)
                node = self.cmp()
                self._leave()
                self.expect_op(")")
                return node
            except DslError as err:
                if err.kind is not ErrorKind.SYNTAX:
                    raise
                self.pos = save
                self.depth = save_depth
        left = self.expr()
        kind, text, loc = self.peek()
        if kind != "op" or text not in RELOPS:
            raise DslError(ErrorKind.SYNTAX, loc, "expected a comparison operator")
        self.advance()
        nk, nt, nloc = self.peek()
        if nk == "str":
            if text != "==":
                raise DslError(ErrorKind.SYNTAX, nloc,
                               "string literals may only be compared with '=='")
            if not isinstance(left, Col):
                raise DslError(ErrorKind.SYNTAX, nloc,
                               "string equality requires a bare column on the left")
            self.advance()
            return StrEq(left.name, nt)
        return Cmp(text, left, self.expr())


def _collect_columns(node, out):
    if isinstance(node, Col):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_columns(node.operand, out)
    elif isinstance(node, Bin):
        _collect_columns(node.left, out)
        _collect_columns(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_columns(a, out)
    elif isinstance(node, If):
        _collect_columns(node.cond, out)
        _collect_columns(node.then, out)
        _collect_columns(node.orelse, out)
    elif isinstance(node, Cmp):
        _collect_columns(node.left, out)
        _collect_columns(node.right, out)
    elif isinstance(node, StrEq):
        out.add(node.column)
    elif isinstance(node, BoolOp):
        _collect_columns(node.left, out)
        _collect_columns(node.right, out)
    elif isinstance(node, Not):
        _collect_columns(node.operand, out)


def parse(source: str) -> Program:
    """Parse a DSL expression; raises DslError on any violation."""
    if len(source.encode("utf-8")) > MAX_SOURCE_BYTES:
        raise DslError(ErrorKind.SYNTAX, MAX_SOURCE_BYTES,
                       f"source exceeds {MAX_SOURCE_BYTES} bytes")
    parser = _Parser(_tokenize(source))
    ast = parser.expr()
    kind, text, loc = parser.peek()
    if kind != "eof":
        raise DslError(ErrorKind.SYNTAX, loc, f"unexpected trailing input {text!r}")
    cols = set()
    _collect_columns(ast, cols)
    return Program(source, ast, frozenset(cols))


# ---------------------------------------------------------------- validator

def validate(program: Program, ds: Dataset) -> None:
    """Check column references against the dataset schema; raises DslError."""
    kinds = {c.name: c.kind for c in ds.columns}
    labels = set(ds.labels.label_names)

    def walk(node, numeric_context):
        if isinstance(node, Col):
            if node.name in labels:
                raise DslError(ErrorKind.LABEL_LEAKAGE, 0,
                               f"label column {node.name!r} referenced")
            if node.name not in kinds:
                raise DslError(ErrorKind.UNKNOWN_IDENTIFIER, 0,
                               f"unknown column {node.name!r}")
            if numeric_context and kinds[node.name] is ColumnKind.CATEGORICAL:
                raise DslError(ErrorKind.TYPE_ERROR, 0,
                               f"categorical column {node.name!r} used numerically")
        elif isinstance(node, StrEq):
            if node.column in labels:
                raise DslError(ErrorKind.LABEL_LEAKAGE, 0,
                               f"label column {node.column!r} referenced")
            if node.column not in kinds:
                raise DslError(ErrorKind.UNKNOWN_IDENTIFIER, 0,
                               f"unknown column {node.column!r}")
            if kinds[node.column] is ColumnKind.NUMERIC:
                raise DslError(ErrorKind.TYPE_ERROR, 0,
                               f"string equality on numeric column {node.column!r}")
        elif isinstance(node, Neg):
            walk(node.operand, True)
        elif isinstance(node, Bin):
            walk(node.left, True)
            walk(node.right, True)
        elif isinstance(node, Call):
            for a in node.args:
                walk(a, True)
        elif isinstance(node, If):
            walk(node.cond, True)
            walk(node.then, True)
            walk(node.orelse, True)
        elif isinstance(node, Cmp):
            walk(node.left, True)
            walk(node.right, True)
        elif isinstance(node, BoolOp):
            walk(node.left, True)
            walk(node.right, True)
        elif isinstance(node, Not):
            walk(node.operand, True)

    walk(program.ast, True)


# ---------------------------------------------------------------- evaluator

def _clamp_overflow(values, events):
    bad = ~np.isfinite(values)
    if bad.any():
        events = events + bad.astype(np.int64)
        values = np.where(values == np.inf, CLAMP, values)
        values = np.where(values == -np.inf, -CLAMP, values)
        values = np.where(np.isnan(values), 0.0, values)
    return values, events


def evaluate(program: Program, ds: Dataset):
    """Vectorized evaluation; returns (values length n, totalization count).

    Must be run only after validate() succeeded.
    """
    n = ds.n
    numeric = {c.name: np.asarray(c.values, dtype=float)
               for c in ds.columns if c.kind is ColumnKind.NUMERIC}
    categorical = {c.name: c.values
                   for c in ds.columns if c.kind is ColumnKind.CATEGORICAL}
    zeros = np.zeros(n, dtype=np.int64)

    def ev(node):
        if isinstance(node, Num):
            return np.full(n, node.value), zeros
        if isinstance(node, Col):
            return numeric[node.name].copy(), zeros
        if isinstance(node, Neg):
            v, e = ev(node.operand)
            return -v, e
        if isinstance(node, Bin):
            lv, le = ev(node.left)
            rv, re_ = ev(node.right)
            events = le + re_
            if node.op == "+":
                return _clamp_overflow(lv + rv, events)
            if node.op == "-":
                return _clamp_overflow(lv - rv, events)
            if node.op == "*":
                return _clamp_overflow(lv * rv, events)
            zero = rv == 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                q = lv / np.where(zero, 1.0, rv)
            q = np.where(zero, 0.0, q)
            return _clamp_overflow(q, events + zero.astype(np.int64))
        if isinstance(node, Call):
            args = [ev(a) for a in node.args]
            events = args[0][1]
            for _, e in args[1:]:
                events = events + e
            vals = [v for v, _ in args]
            if node.fn == "abs":
                return np.abs(vals[0]), events
            if node.fn == "sqrt":
                neg = vals[0] < 0.0
                r = np.sqrt(np.where(neg, 0.0, vals[0]))
                return np.where(neg, 0.0, r), events + neg.astype(np.int64)
            if node.fn == "log1p":
                bad = vals[0] <= -1.0
                r = np.log1p(np.where(bad, 0.0, vals[0]))
                return np.where(bad, 0.0, r), events + bad.astype(np.int64)
            if node.fn == "exp":
                return _clamp_overflow(np.exp(vals[0]), events)
            if node.fn == "floor":
                return np.floor(vals[0]), events
            if node.fn == "min":
                return np.minimum(vals[0], vals[1]), events
            if node.fn == "max":
                return np.maximum(vals[0], vals[1]), events
            # clip(x, lo, hi)
            return np.minimum(np.maximum(vals[0], vals[1]), vals[2]), events
        if isinstance(node, If):
            c, ce = cond(node.cond)
            tv, te = ev(node.then)
            ov, oe = ev(node.orelse)
            return np.where(c, tv, ov), ce + np.where(c, te, oe)
        raise AssertionError(f"unexpected node {node!r}")

    def cond(node):
        if isinstance(node, Cmp):
            lv, le = ev(node.left)
            rv, re_ = ev(node.right)
            ops = {">": np.greater, "<": np.less, ">=": np.greater_equal,
                   "<=": np.less_equal, "==": np.equal, "!=": np.not_equal}
            return ops[node.op](lv, rv), le + re_
        if isinstance(node, StrEq):
            toks = categorical[node.column]
            return np.array([t == node.literal for t in toks]), zeros
        if isinstance(node, BoolOp):
            lv, le = cond(node.left)
            rv, re_ = cond(node.right)
            combined = np.logical_and(lv, rv) if node.op == "and" else np.logical_or(lv, rv)
            return combined, le + re_
        if isinstance(node, Not):
            v, e = cond(node.operand)
            return np.logical_not(v), e
        raise AssertionError(f"unexpected condition node {node!r}")

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        values, events = ev(program.ast)
    return np.asarray(values, dtype=float), int(events.sum())


def reference_evaluate(program: Program, ds: Dataset):
    """Row-at-a-time interpreter with the same semantics as evaluate().

    Kept structurally independent of the vectorized path; this is the
    differential-testing oracle.  numpy scalar ops are used so results are
    bit-identical to the ufunc loops.
    """
    numeric = {c.name: c.values for c in ds.columns if c.kind is ColumnKind.NUMERIC}
    categorical = {c.name: c.values for c in ds.columns if c.kind is ColumnKind.CATEGORICAL}
    f64 = np.float64

    def clamp(x, events):
        if np.isfinite(x):
            return x, events
        if x == np.inf:
            return f64(CLAMP), events + 1
        if x == -np.inf:
            return f64(-CLAMP), events + 1
        return f64(0.0), events + 1

    def ev(node, i, events):
        if isinstance(node, Num):
            return f64(node.value), events
        if isinstance(node, Col):
            return f64(numeric[node.name][i]), events
        if isinstance(node, Neg):
            v, events = ev(node.operand, i, events)
            return -v, events
        if isinstance(node, Bin):
            lv, events = ev(node.left, i, events)
            rv, events = ev(node.right, i, events)
            if node.op == "+":
                return clamp(lv + rv, events)
            if node.op == "-":
                return clamp(lv - rv, events)
            if node.op == "*":
                return clamp(lv * rv, events)
            if rv == 0.0:
                return f64(0.0), events + 1
            return clamp(lv / rv, events)
        if isinstance(node, Call):
            vals = []
            for a in node.args:
                v, events = ev(a, i, events)
                vals.append(v)
            if node.fn == "abs":
                return np.abs(vals[0]), events
            if node.fn == "sqrt":
                if vals[0] < 0.0:
                    return f64(0.0), events + 1
                return np.sqrt(vals[0]), events
            if node.fn == "log1p":
                if vals[0] <= -1.0:
                    return f64(0.0), events + 1
                return np.log1p(vals[0]), events
            if node.fn == "exp":
                return clamp(np.exp(vals[0]), events)
            if node.fn == "floor":
                return np.floor(vals[0]), events
            if node.fn == "min":
                return np.minimum(vals[0], vals[1]), events
            if node.fn == "max":
                return np.maximum(vals[0], vals[1]), events
            return np.minimum(np.maximum(vals[0], vals[1]), vals[2]), events
        if isinstance(node, If):
            c, events = cond(node.cond, i, events)
            branch = node.then if c else node.orelse
            return ev(branch, i, events)
        raise AssertionError(f"unexpected node {node!r}")

    def cond(node, i, events):
        if isinstance(node, Cmp):
            lv, events = ev(node.left, i, events)
            rv, events = ev(node.right, i, events)
            table = {">": lv > rv, "<": lv < rv, ">=": lv >= rv,
                     "<=": lv <= rv, "==": lv == rv, "!=": lv != rv}
            return bool(table[node.op]), events
        if isinstance(node, StrEq):
            return categorical[node.column][i] == node.literal, events
        if isinstance(node, BoolOp):
            lv, events = cond(node.left, i, events)
            rv, events = cond(node.right, i, events)
            return (lv and rv) if node.op == "and" else (lv or rv), events
        if isinstance(node, Not):
            v, events = cond(node.operand, i, events)
            return not v, events
        raise AssertionError(f"unexpected condition node {node!r}")

    out = np.empty(ds.n, dtype=float)
    total = 0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for i in range(ds.n):
            v, ev_count = ev(program.ast, i, 0)
            out[i] = v
            total += ev_count
    return out, total


# ------------------------------------------------------------ pretty printer

def pretty(node) -> str:
    """Canonical fully-parenthesized rendering; reparses to the same AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Col):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, Bin):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, If):
        return f"(if {pretty(node.cond)} then ({pretty(node.then)}) else ({pretty(node.orelse)}))"
    if isinstance(node, Cmp):
        return f"({pretty(node.left)}) {node.op} ({pretty(node.right)})"
    if isinstance(node, StrEq):
        return f'{node.column} == "{node.literal}"'
    if isinstance(node, BoolOp):
        return f"({pretty(node.left)}) {node.op} ({pretty(node.right)})"
    if isinstance(node, Not):
        return f"not ({pretty(node.operand)})"
    raise AssertionError(f"unexpected node {node!r}")
