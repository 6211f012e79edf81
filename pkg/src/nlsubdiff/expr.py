"""Small arithmetic language for the source f(x, t) and the nonlocal map g(x, w).

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := power (('*' | '/') power)*
    power  := unary ('^' power)?
    unary  := ('-' | '+') unary | atom
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

Unary minus binds tighter than '^', so ``-x^2`` is ``(-x)^2``. Parsed trees
are compiled once to a postfix program that runs on numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "abs": 1, "pow": 2}
CONSTANTS = {"pi": math.pi}


class ExprError(DomainError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        hint = f"; expected one of {', '.join(sorted(expected))}" if expected else ""
        super().__init__(f"syntax error at byte {offset}: {message}{hint}")


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class EvalError(ExprError):
    pass


# {{{ syntax tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Union[Num, Const, Var, Unary, Binary, Call]

# }}}


# {{{ lexer and parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int  # byte offset into the source


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = src.encode()

    def byte(i: int) -> int:
        return len(src[:i].encode())

    while True:
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            rest = src[pos:]
            if rest.strip() == "":
                break
            start = pos + len(rest) - len(rest.lstrip())
            raise ExprSyntaxError(f"unexpected character {src[start]!r}", byte(start),
                                  frozenset({"number", "name", "operator"}))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), byte(m.start(kind))))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


_ATOM_START = frozenset({"number", "name", "(", "-", "+"})


class _Parser:
    def __init__(self, src: str, allowed: frozenset[str]):
        self.toks = _tokenize(src)
        self.i = 0
        self.allowed = allowed

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def at(self, *texts: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in texts

    def take(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if not self.at(text):
            raise ExprSyntaxError(f"found {self.tok.text or 'end of input'!r}", self.tok.offset,
                                  frozenset({text}))
        self.i += 1

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset,
                                  frozenset({"+", "-", "*", "/", "^", "end of input"}))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.at("+", "-"):
            op = self.take().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.at("*", "/"):
            op = self.take().text
            node = Binary(op, node, self.power())
        return node

    def power(self) -> Node:
        base = self.unary()
        if self.at("^"):
            self.take()
            return Binary("^", base, self.power())
        return base

    def unary(self) -> Node:
        if self.at("-", "+"):
            op = self.take().text
            return Unary(op, self.unary())
        return self.atom()

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.take()
            if self.at("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifier(tok.text, tok.offset)
                self.take()
                args = [self.expr()]
                while self.at(","):
                    self.take()
                    args.append(self.expr())
                close = self.tok.offset
                self.expect(")")
                if len(args) != FUNCTIONS[tok.text]:
                    raise ExprSyntaxError(
                        f"{tok.text} takes {FUNCTIONS[tok.text]} argument(s), got {len(args)}",
                        close,
                    )
                return Call(tok.text, tuple(args))
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in self.allowed:
                return Var(tok.text)
            raise UnknownIdentifier(tok.text, tok.offset)
        if self.at("("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"found {found!r}", tok.offset, _ATOM_START)


def parse_expr(src: str, allowed_vars) -> Node:
    """Parse ``src`` into a tree; variables outside ``allowed_vars`` are errors."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, _ATOM_START)
    return _Parser(src, frozenset(allowed_vars)).parse()


# }}}


def pretty(node: Node) -> str:
    """Fully parenthesised source text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{pretty(node.arg)})"
    if isinstance(node, Binary):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    return f"{node.func}({', '.join(pretty(a) for a in node.args)})"


def free_vars(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return free_vars(node.arg)
    if isinstance(node, Binary):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Call):
        return set().union(*(free_vars(a) for a in node.args))
    return set()


# {{{ compiled evaluation


def _div(a, b):
    if np.any(b == 0):
        raise EvalError("division by zero")
    return a / b


def _sqrt(a):
    if np.any(a < 0):
        raise EvalError("square root of a negative number")
    return np.sqrt(a)


def _pow(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    bad = (a < 0) & (b != np.round(b))
    if np.any(bad):
        raise EvalError("non-integer power of a negative number")
    if np.any((a == 0) & (b < 0)):
        raise EvalError("division by zero")
    return np.power(a, b)


_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": _div, "^": _pow}
_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": _sqrt, "abs": np.abs, "pow": _pow}


class CompiledExpr:
    """Postfix program for a tree; call with arrays in ``arg_names`` order."""

    def __init__(self, node: Node, arg_names: tuple[str, ...], source: str = ""):
        self.arg_names = tuple(arg_names)
        self.source = source or pretty(node)
        self.node = node
        self.program: list[tuple] = []
        self._emit(node)

    def _emit(self, node: Node) -> None:
        prog = self.program
        if isinstance(node, Num):
            prog.append(("push", node.value))
        elif isinstance(node, Const):
            prog.append(("push", CONSTANTS[node.name]))
        elif isinstance(node, Var):
            if node.name not in self.arg_names:
                raise UnknownIdentifier(node.name, -1)
            prog.append(("load", self.arg_names.index(node.name)))
        elif isinstance(node, Unary):
            self._emit(node.arg)
            if node.op == "-":
                prog.append(("neg",))
        elif isinstance(node, Binary):
            self._emit(node.left)
            self._emit(node.right)
            prog.append(("bin", _BINARY[node.op]))
        else:
            for a in node.args:
                self._emit(a)
            prog.append(("call", _CALLS[node.func], len(node.args)))

    def __call__(self, *args):
        arrays = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast(*arrays).shape if arrays else ()
        stack: list = []
        with np.errstate(over="ignore"):
            for ins in self.program:
                op = ins[0]
                if op == "push":
                    stack.append(ins[1])
                elif op == "load":
                    stack.append(arrays[ins[1]])
                elif op == "neg":
                    stack.append(np.negative(stack.pop()))
                elif op == "bin":
                    b = stack.pop()
                    stack.append(ins[1](stack.pop(), b))
                else:
                    n = ins[2]
                    argv = stack[-n:]
                    del stack[-n:]
                    stack.append(ins[1](*argv))
        out = np.broadcast_to(np.asarray(stack.pop(), dtype=float), shape)
        if not np.all(np.isfinite(out)):
            raise EvalError(f"expression {self.source!r} produced a non-finite value")
        return np.array(out)

    def __repr__(self) -> str:
        return f"CompiledExpr({self.source!r}, args={self.arg_names})"


def compile_expr(src: str, arg_names: tuple[str, ...]) -> CompiledExpr:
    return CompiledExpr(parse_expr(src, arg_names), arg_names, src)


# }}}
