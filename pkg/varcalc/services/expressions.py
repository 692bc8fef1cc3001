"""
A small arithmetic language for user-defined scalar fields.

Grammar (precedence ^ > unary - > * / > + -, ^ right-associative):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | variable | name '(' expr ')' | '(' expr ')'

Variables are q1..qn, y1..ym, p1..pm, u1..uk, v1..vm and t; `pi` is a constant.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import math
import re

import numpy as np

from varcalc.exceptions import ExprSyntaxError, NonFiniteError
from varcalc.models.core import BLOCKS, ScalarField

FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}

CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")
_VARIABLE = re.compile(r"^(?P<block>[qypuv])(?P<index>[1-9]\d*)$")


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"
    pos: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"
    pos: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"
    pos: int = 0


ExprAst = Union[Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


def variable_block(name: str) -> Tuple[str, int]:
    """("q", 0) for "q1", ("t", 0) for "t"."""
    if name == "t":
        return "t", 0
    match = _VARIABLE.match(name)
    if match is None:
        raise KeyError(name)
    return match.group("block"), int(match.group("index")) - 1


class _Parser:
    def __init__(self, text: str, dims: Optional[Mapping[str, int]]):
        self.tokens = tokenize(text)
        self.i = 0
        self.dims = dims

    @property
    def current(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        token = self.tokens[self.i]
        self.i += 1
        return token

    def expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind == "end":
            found = "end of input" if self.current.kind == "end" else repr(self.current.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.current.pos)
        return self.advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.current.text!r}", self.current.pos)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance()
            node = BinOp(op.text, node, self.unary(), op.pos)
        return node

    def unary(self) -> ExprAst:
        if self.current.kind == "op" and self.current.text == "-":
            op = self.advance()
            return Neg(self.unary(), op.pos)
        return self.power()

    def power(self) -> ExprAst:
        base = self.atom()
        if self.current.kind == "op" and self.current.text == "^":
            op = self.advance()
            return BinOp("^", base, self.unary(), op.pos)
        return base

    def atom(self) -> ExprAst:
        token = self.current
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {token.text} overflows", token.pos)
            return Const(value, token.pos)
        if token.kind == "name":
            self.advance()
            if self.current.text == "(" and self.current.kind == "op":
                return self.call(token)
            if token.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {token.text!r} needs an argument list", token.pos)
            if token.text in CONSTANTS:
                return Const(CONSTANTS[token.text], token.pos)
            self.check_variable(token)
            return Var(token.text, token.pos)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "end":
            raise ExprSyntaxError("unexpected end of input", token.pos)
        raise ExprSyntaxError(f"unexpected {token.text!r}", token.pos)

    def call(self, name: Token) -> ExprAst:
        if name.text not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name.text!r}", name.pos)
        self.expect("(")
        if self.current.text == ")":
            raise ExprSyntaxError(f"{name.text} takes exactly one argument, got none", name.pos)
        arg = self.expr()
        if self.current.text == ",":
            raise ExprSyntaxError(f"{name.text} takes exactly one argument", name.pos)
        self.expect(")")
        return Call(name.text, arg, name.pos)

    def check_variable(self, token: Token) -> None:
        try:
            block, index = variable_block(token.text)
        except KeyError:
            raise ExprSyntaxError(f"unknown identifier {token.text!r}", token.pos)
        if self.dims is None:
            return
        if block == "t":
            if "t" not in self.dims:
                raise ExprSyntaxError("time t is not an argument here", token.pos)
            return
        if index >= self.dims.get(block, 0):
            raise ExprSyntaxError(f"undeclared variable {token.text!r} ({block} has dimension "
                                  f"{self.dims.get(block, 0)})", token.pos)


def parse_expr(text: str, dims: Optional[Mapping[str, int]] = None) -> ExprAst:
    """
    Parse `text` into an ExprAst.

    When `dims` is given (e.g. {"q": 2, "y": 2, "t": 1}) only those variables are accepted.

    Raises:
        ExprSyntaxError: with the character position of the offending token
    """
    return _Parser(text, dims).parse()


def print_expr(node: ExprAst) -> str:
    """Canonical, fully parenthesized text; reparses to the same function."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{print_expr(node.operand)})"
    if isinstance(node, BinOp):
        return f"({print_expr(node.left)} {node.op} {print_expr(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({print_expr(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: ExprAst) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()


def _binary(op: str) -> Callable[[float, float], float]:
    if op == "+":
        return lambda a, b: a + b
    if op == "-":
        return lambda a, b: a - b
    if op == "*":
        return lambda a, b: a * b
    if op == "/":
        return lambda a, b: a / b
    return math.pow


def _compile(node: ExprAst, slots: Mapping[str, int]) -> Callable[[Sequence], float]:
    if isinstance(node, Const):
        value = float(node.value)
        return lambda args: value
    if isinstance(node, Var):
        block, index = variable_block(node.name)
        slot = slots[block]
        if block == "t":
            return lambda args: float(args[slot])
        return lambda args: float(args[slot][index])
    if isinstance(node, Neg):
        inner = _compile(node.operand, slots)
        return lambda args: -inner(args)
    if isinstance(node, BinOp):
        left = _compile(node.left, slots)
        right = _compile(node.right, slots)
        fn = _binary(node.op)
        return lambda args: fn(left(args), right(args))
    inner = _compile(node.arg, slots)
    fn = FUNCTIONS[node.func]
    return lambda args: fn(inner(args))


def evaluate(node: ExprAst, env: Mapping[str, float]) -> float:
    """Evaluate with scalar variable values, e.g. {"q1": 2.0, "t": 0.0}."""
    names = variables(node)
    missing = sorted(names - set(env))
    if missing:
        raise ExprSyntaxError(f"no value for {', '.join(missing)}")
    blocks: Dict[str, np.ndarray] = {}
    for name in names:
        block, index = variable_block(name)
        if block == "t":
            continue
        size = max(variable_block(other)[1] + 1 for other in names if variable_block(other)[0] == block)
        blocks.setdefault(block, np.zeros(size))[index] = env[name]
    order = [b for b in BLOCKS if b in blocks or (b == "t" and "t" in names)]
    args = [env["t"] if b == "t" else blocks[b] for b in order]
    return _guarded(_compile(node, {b: i for i, b in enumerate(order)}), print_expr(node))(args)


def _guarded(fn: Callable[[Sequence], float], text: str) -> Callable[[Sequence], float]:
    def run(args):
        try:
            value = fn(args)
        except (ZeroDivisionError, ValueError, OverflowError) as e:
            raise NonFiniteError(f"cannot evaluate {text}: {e}")
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite value of {text}")
        return value

    return run


def compile_expr(source: Union[str, ExprAst], dims: Mapping[str, int], name: str = "") -> ScalarField:
    """
    Compile to a ScalarField whose arity is the blocks of `dims`, in canonical order
    (t, q, y, p, u, v). Gradients are left to finite differences.
    """
    node = parse_expr(source, dims) if isinstance(source, str) else source
    order = tuple(b for b in BLOCKS if b in dims)
    run = _guarded(_compile(node, {b: i for i, b in enumerate(order)}), print_expr(node))

    def evaluator(*args):
        return run(args)

    return ScalarField(order, evaluator, name=name or print_expr(node))
