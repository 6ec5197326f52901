"""Expression trees for piecewise-affine maps with absolute-value kinks.

A function spec file holds one line of the form::

    name(x, y, ...) = (expr1, expr2, ...)

with ``+``, ``-``, ``*``, ``abs(...)``, decimal constants and parentheses.
``#`` starts a comment; blank and comment-only lines are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import DimensionError, ParseError


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Sum:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Diff:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Prod:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Scale:
    factor: float
    child: "Node"


@dataclass(frozen=True)
class Abs:
    child: "Node"


Node = Union[Const, Var, Sum, Diff, Prod, Scale, Abs]


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Const, Var)):
        return ()
    if isinstance(node, Sum):
        return node.children
    if isinstance(node, (Diff, Prod)):
        return (node.left, node.right)
    return (node.child,)


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal. Abs nodes are numbered in this order everywhere."""
    yield node
    for c in children(node):
        yield from walk(c)


@dataclass(frozen=True)
class FunctionModel:
    """A map R^m -> R^n given by ``n`` component expressions."""

    variables: tuple[str, ...]
    components: tuple[Node, ...]
    label: str = "f"

    def __post_init__(self):
        if not self.variables:
            raise DimensionError("a function needs at least one input variable")
        if not self.components:
            raise DimensionError("a function needs at least one component")
        m = len(self.variables)
        for node in self.iter_nodes():
            if isinstance(node, Var) and not 0 <= node.index < m:
                raise DimensionError(f"variable index {node.index} out of range for m={m}")

    @property
    def input_dim(self) -> int:
        return len(self.variables)

    @property
    def output_dim(self) -> int:
        return len(self.components)

    @property
    def is_square(self) -> bool:
        return self.input_dim == self.output_dim

    def iter_nodes(self) -> Iterator[Node]:
        for comp in self.components:
            yield from walk(comp)

    @property
    def abs_count(self) -> int:
        return sum(isinstance(n, Abs) for n in self.iter_nodes())

    @property
    def is_affine(self) -> bool:
        """True when no product node is present, i.e. the map is piecewise affine."""
        return not any(isinstance(n, Prod) for n in self.iter_nodes())

    def __str__(self) -> str:
        return format_model(self)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "variables": list(self.variables),
            "components": [node_to_dict(c) for c in self.components],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionModel":
        model = cls(
            variables=tuple(d["variables"]),
            components=tuple(node_from_dict(c) for c in d["components"]),
            label=d.get("label", "f"),
        )
        if "input_dim" in d and d["input_dim"] != model.input_dim:
            raise DimensionError("input_dim does not match variable list")
        if "output_dim" in d and d["output_dim"] != model.output_dim:
            raise DimensionError("output_dim does not match component list")
        return model


# -- construction helpers ---------------------------------------------------


def add_models(f: FunctionModel, g: FunctionModel, label: str | None = None) -> FunctionModel:
    """Componentwise sum ``f + g`` as a new AST (no simplification)."""
    if f.input_dim != g.input_dim or f.output_dim != g.output_dim:
        raise DimensionError("cannot add models of different shapes")
    comps = tuple(Sum((a, b)) for a, b in zip(f.components, g.components))
    return FunctionModel(f.variables, comps, label or f"{f.label}+{g.label}")


def extended_model(F: FunctionModel, m: int) -> FunctionModel:
    """The square map ``(x, y) -> (x, F(x, y))`` where ``x`` is the first ``m`` inputs."""
    if F.input_dim != m + F.output_dim:
        raise DimensionError(
            f"F has {F.input_dim} inputs; expected m + n = {m} + {F.output_dim}"
        )
    comps = tuple(Var(i) for i in range(m)) + F.components
    return FunctionModel(F.variables, comps, f"ext_{F.label}")


# -- printing ---------------------------------------------------------------


def _fmt_const(v: float) -> str:
    return repr(float(v))


def format_node(node: Node, names: tuple[str, ...]) -> str:
    """Fully parenthesised infix text; re-parses to the same tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return names[node.index]
    if isinstance(node, Sum):
        return "(" + " + ".join(format_node(c, names) for c in node.children) + ")"
    if isinstance(node, Diff):
        return f"({format_node(node.left, names)} - {format_node(node.right, names)})"
    if isinstance(node, Prod):
        return f"({format_node(node.left, names)} * {format_node(node.right, names)})"
    if isinstance(node, Scale):
        return f"({_fmt_const(node.factor)} * {format_node(node.child, names)})"
    return f"abs({format_node(node.child, names)})"


def format_model(model: FunctionModel) -> str:
    body = ", ".join(format_node(c, model.variables) for c in model.components)
    return f"{model.label}({', '.join(model.variables)}) = ({body})"


# -- JSON -------------------------------------------------------------------


def node_to_dict(node: Node) -> dict:
    if isinstance(node, Const):
        return {"kind": "constant", "value": node.value}
    if isinstance(node, Var):
        return {"kind": "variable", "index": node.index}
    if isinstance(node, Sum):
        return {"kind": "sum", "children": [node_to_dict(c) for c in node.children]}
    if isinstance(node, Diff):
        return {"kind": "difference", "left": node_to_dict(node.left),
                "right": node_to_dict(node.right)}
    if isinstance(node, Prod):
        return {"kind": "product", "left": node_to_dict(node.left),
                "right": node_to_dict(node.right)}
    if isinstance(node, Scale):
        return {"kind": "scalar_multiple", "factor": node.factor,
                "child": node_to_dict(node.child)}
    return {"kind": "abs", "child": node_to_dict(node.child)}


def node_from_dict(d: dict) -> Node:
    kind = d["kind"]
    if kind == "constant":
        return Const(float(d["value"]))
    if kind == "variable":
        return Var(int(d["index"]))
    if kind == "sum":
        return Sum(tuple(node_from_dict(c) for c in d["children"]))
    if kind == "difference":
        return Diff(node_from_dict(d["left"]), node_from_dict(d["right"]))
    if kind == "product":
        return Prod(node_from_dict(d["left"]), node_from_dict(d["right"]))
    if kind == "scalar_multiple":
        return Scale(float(d["factor"]), node_from_dict(d["child"]))
    if kind == "abs":
        return Abs(node_from_dict(d["child"]))
    raise ValueError(f"unknown node kind {kind!r}")


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*(),=]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", line, col)
        kind = mt.lastgroup
        toks.append(_Tok(kind, mt.group(kind), line, mt.start(kind) + 1))
        pos = mt.end()
    toks.append(_Tok("end", "", line, len(text) + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0
        self.names: dict[str, int] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def take(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "end":
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def model(self) -> FunctionModel:
        if self.tok.kind != "name":
            self.error("expected function name")
        label = self.tok.text
        self.i += 1
        self.take("(")
        variables: list[str] = []
        while True:
            if self.tok.kind != "name" or self.tok.text == "abs":
                self.error("expected variable name")
            if self.tok.text in self.names:
                self.error(f"duplicate variable {self.tok.text!r}")
            self.names[self.tok.text] = len(variables)
            variables.append(self.tok.text)
            self.i += 1
            if not self.accept(","):
                break
        self.take(")")
        self.take("=")
        if self.tok.text == "(":
            # a parenthesised tuple; a single parenthesised expression is a 1-tuple
            self.i += 1
            comps = [self.expr()]
            while self.accept(","):
                comps.append(self.expr())
            self.take(")")
            # "(a) * b" style bodies continue as a single expression
            if self.tok.kind != "end":
                if len(comps) != 1:
                    self.error("trailing input after component tuple")
                comps = [self._continue_expr(comps[0])]
        else:
            comps = [self.expr()]
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return FunctionModel(tuple(variables), tuple(comps), label)

    def _continue_expr(self, first: Node) -> Node:
        terms = [self._continue_term(first)]
        return self._expr_tail(terms)

    def _continue_term(self, first: Node) -> Node:
        left = first
        while self.accept("*"):
            left = _mul(left, self.factor())
        return left

    def expr(self) -> Node:
        return self._expr_tail([self.term()])

    def _expr_tail(self, terms: list[Node]) -> Node:
        # consecutive '+' collect into one n-ary Sum; '-' closes it off
        while True:
            if self.accept("+"):
                terms.append(self.term())
                continue
            if self.tok.kind == "op" and self.tok.text == "-":
                self.i += 1
                base = terms[0] if len(terms) == 1 else Sum(tuple(terms))
                terms = [Diff(base, self.term())]
                continue
            break
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Node:
        left = self.factor()
        while self.accept("*"):
            left = _mul(left, self.factor())
        return left

    def factor(self) -> Node:
        if self.accept("-"):
            inner = self.factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Scale(-1.0, inner)
        if self.accept("+"):
            return self.factor()
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text == "abs":
                self.take("(")
                inner = self.expr()
                self.take(")")
                return Abs(inner)
            if tok.text not in self.names:
                self.error(f"unknown variable {tok.text!r}", tok)
            return Var(self.names[tok.text])
        if self.accept("("):
            inner = self.expr()
            self.take(")")
            return inner
        self.error(f"unexpected {tok.text or 'end of input'!r}")


def _mul(left: Node, right: Node) -> Node:
    if isinstance(left, Const):
        return Scale(left.value, right)
    if isinstance(right, Const):
        return Scale(right.value, left)
    return Prod(left, right)


def parse_function(text: str) -> FunctionModel:
    """Parse a one-function spec text into a :class:`FunctionModel`."""
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        rest = [ln.split("#", 1)[0] for ln in lines[lineno:]]
        if any(r.strip() for r in rest):
            extra = lineno + 1 + next(i for i, r in enumerate(rest) if r.strip())
            raise ParseError("only one function per spec is allowed", extra, 1)
        return _Parser(_tokenize(content, lineno)).model()
    raise ParseError("empty function spec", 1, 1)


def load_function(path) -> FunctionModel:
    with open(path, encoding="utf-8") as fh:
        return parse_function(fh.read())
