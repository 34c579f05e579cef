"""Expression language for proof states: formal sums, residues, series.

Proof scripts ship as data; every intermediate state of a proof is a small
expression over the series variables (x, y, z) and the instance parameters,
built from integer powers, binomial values, finite and support-bounded
infinite sums, residue extraction, and collapsed geometric series. The
evaluator turns a state into a concrete LaurentSeries at one parameter
instance, inside a truncation window.

    expr    ::= ("-")? term (("+"|"-") term)*
    term    ::= factor ("*" factor)*
    factor  ::= base ("^" "(" linexpr ")")?
    base    ::= INT | NAME | "C" "(" linexpr "," linexpr ")" | "(" expr ")"
              | "sum" "(" NAME "," linexpr "," linexpr ")" "[" expr "]"
              | "isum" "(" NAME "," linexpr ")" "[" expr "]"
              | "res" "(" NAME ")" "[" expr "]"
              | "geo" "[" expr "]"

`isum(k,b)[...]` is a sum over k >= 0 whose terms are asserted to vanish for
k > b; the evaluator checks that assertion on a probe range past the bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .arith import binomial
from .dsl import ParseError, Token, tokenize
from .model import BinomFactor, LinExpr, SumExpr, Term
from .series import INF, LaurentSeries, geometric_collapse, res


class SupportBoundError(Exception):
    """An isum term past the declared support bound is not zero."""


@dataclass(frozen=True)
class RInt:
    value: int


@dataclass(frozen=True)
class RVar:
    name: str


@dataclass(frozen=True)
class RBinom:
    upper: LinExpr
    lower: LinExpr


@dataclass(frozen=True)
class RPow:
    base: "RNode"
    exponent: LinExpr


@dataclass(frozen=True)
class RProd:
    factors: tuple["RNode", ...]


@dataclass(frozen=True)
class RAdd:
    terms: tuple[tuple[int, "RNode"], ...]  # (sign, node)


@dataclass(frozen=True)
class RSum:
    var: str
    lower: LinExpr
    upper: LinExpr
    body: "RNode"


@dataclass(frozen=True)
class RISum:
    var: str
    bound: LinExpr
    body: "RNode"


@dataclass(frozen=True)
class RRes:
    var: str
    body: "RNode"


@dataclass(frozen=True)
class RGeo:
    body: "RNode"


RNode = Union[RInt, RVar, RBinom, RPow, RProd, RAdd, RSum, RISum, RRes, RGeo]


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        what = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return ParseError(f"{message}, found {what}", tok.span)

    def expect_sym(self, sym: str) -> None:
        tok = self.peek()
        if tok.kind != "SYM" or tok.text != sym:
            raise self.error(f"expected '{sym}'")
        self.next()

    def expect_name(self) -> str:
        tok = self.peek()
        if tok.kind != "NAME":
            raise self.error("expected a name")
        return self.next().text

    def at_sym(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYM" and tok.text == sym

    def linexpr(self) -> LinExpr:
        total = LinExpr()
        sign = 1
        if self.at_sym("-"):
            self.next()
            sign = -1
        total = total + self._linitem().scaled(sign)
        while self.at_sym("+") or self.at_sym("-"):
            sign = 1 if self.next().text == "+" else -1
            total = total + self._linitem().scaled(sign)
        return total

    def _linitem(self) -> LinExpr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            value = int(tok.text)
            if self.at_sym("*"):
                self.next()
                return LinExpr.var(self.expect_name()).scaled(value)
            return LinExpr(value)
        if tok.kind == "NAME":
            return LinExpr.var(self.next().text)
        raise self.error("expected integer or variable")

    def expr(self) -> RNode:
        terms: list[tuple[int, RNode]] = []
        sign = 1
        if self.at_sym("-"):
            self.next()
            sign = -1
        terms.append((sign, self.term()))
        while self.at_sym("+") or self.at_sym("-"):
            sign = 1 if self.next().text == "+" else -1
            terms.append((sign, self.term()))
        if len(terms) == 1 and terms[0][0] == 1:
            return terms[0][1]
        return RAdd(tuple(terms))

    def term(self) -> RNode:
        factors = [self.factor()]
        while self.at_sym("*"):
            self.next()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else RProd(tuple(factors))

    def factor(self) -> RNode:
        base = self.base()
        if self.at_sym("^"):
            self.next()
            self.expect_sym("(")
            e = self.linexpr()
            self.expect_sym(")")
            return RPow(base, e)
        return base

    def base(self) -> RNode:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return RInt(int(tok.text))
        if tok.kind == "SYM" and tok.text == "(":
            self.next()
            inner = self.expr()
            self.expect_sym(")")
            return inner
        if tok.kind != "NAME":
            raise self.error("expected an expression")
        name = self.next().text
        if name == "C":
            self.expect_sym("(")
            upper = self.linexpr()
            self.expect_sym(",")
            lower = self.linexpr()
            self.expect_sym(")")
            return RBinom(upper, lower)
        if name == "sum":
            self.expect_sym("(")
            var = self.expect_name()
            self.expect_sym(",")
            lower = self.linexpr()
            self.expect_sym(",")
            upper = self.linexpr()
            self.expect_sym(")")
            self.expect_sym("[")
            body = self.expr()
            self.expect_sym("]")
            return RSum(var, lower, upper, body)
        if name == "isum":
            self.expect_sym("(")
            var = self.expect_name()
            self.expect_sym(",")
            bound = self.linexpr()
            self.expect_sym(")")
            self.expect_sym("[")
            body = self.expr()
            self.expect_sym("]")
            return RISum(var, bound, body)
        if name == "res":
            self.expect_sym("(")
            var = self.expect_name()
            self.expect_sym(")")
            self.expect_sym("[")
            body = self.expr()
            self.expect_sym("]")
            return RRes(var, body)
        if name == "geo":
            self.expect_sym("[")
            body = self.expr()
            self.expect_sym("]")
            return RGeo(body)
        return RVar(name)


def parse_resexpr(text: str) -> RNode:
    p = _Parser(text)
    node = p.expr()
    if p.peek().kind != "EOF":
        raise p.error("trailing input after expression")
    return node


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalContext:
    vars: tuple[str, ...]
    window: dict[str, tuple[int, int]]
    probe: int
    env: dict[str, int]
    # value cache for the root environment; inner binder scopes disable it
    cache: dict | None = None

    def child(self, var: str, value: int) -> "EvalContext":
        env = dict(self.env)
        env[var] = value
        return EvalContext(self.vars, self.window, self.probe, env, None)


def evaluate(node: RNode, ctx: EvalContext) -> LaurentSeries:
    if ctx.cache is None:
        return _evaluate(node, ctx)
    hit = ctx.cache.get(node)
    if hit is None:
        hit = _evaluate(node, ctx)
        ctx.cache[node] = hit
    return hit


def _evaluate(node: RNode, ctx: EvalContext) -> LaurentSeries:
    if isinstance(node, RInt):
        return LaurentSeries.constant(ctx.vars, node.value)
    if isinstance(node, RVar):
        if node.name not in ctx.vars:
            raise ValueError(f"'{node.name}' is not a series variable")
        return LaurentSeries.monomial(ctx.vars, {node.name: 1})
    if isinstance(node, RBinom):
        value = binomial(node.upper.evaluate(ctx.env), node.lower.evaluate(ctx.env))
        return LaurentSeries.constant(ctx.vars, value)
    if isinstance(node, RPow):
        return evaluate(node.base, ctx).pow(node.exponent.evaluate(ctx.env), ctx.window)
    if isinstance(node, RProd):
        out = evaluate(node.factors[0], ctx)
        for f in node.factors[1:]:
            out = (out * evaluate(f, ctx)).clipped(ctx.window)
        return out
    if isinstance(node, RAdd):
        out = LaurentSeries.zero(ctx.vars)
        for sign, sub in node.terms:
            piece = evaluate(sub, ctx)
            out = out + (piece if sign > 0 else -piece)
        return out
    if isinstance(node, RSum):
        lo = node.lower.evaluate(ctx.env)
        hi = node.upper.evaluate(ctx.env)
        out = LaurentSeries.zero(ctx.vars)
        for k in range(lo, hi + 1):
            out = out + evaluate(node.body, ctx.child(node.var, k))
        return out
    if isinstance(node, RISum):
        bound = max(node.bound.evaluate(ctx.env), -1)
        out = LaurentSeries.zero(ctx.vars)
        for k in range(0, bound + 1):
            out = out + evaluate(node.body, ctx.child(node.var, k))
        for k in range(bound + 1, bound + 1 + ctx.probe):
            tail = evaluate(node.body, ctx.child(node.var, k))
            if tail.coeffs:
                raise SupportBoundError(
                    f"isum({node.var},{node.bound}): term at {node.var}={k} is not zero"
                )
        return out
    if isinstance(node, RRes):
        expanded = _res_of_geo_product(node, ctx)
        if expanded is not None:
            return expanded
        return res(evaluate(node.body, ctx), node.var)
    if isinstance(node, RGeo):
        return geometric_collapse(evaluate(node.body, ctx), ctx.window)
    raise TypeError(f"unknown node {node!r}")


def _res_of_geo_product(node: RRes, ctx: EvalContext):
    """Residue of `rest * geo[r]`, exchanged with the geometric sum.

    When the ratio moves strictly in the residue variable and the rest of
    the product has finite known support there, only finitely many powers of
    the ratio can reach exponent -1; summing their residues term by term
    avoids forming the full product, whose per-variable accuracy boxes can
    be vacuous even though the residue itself is finite.
    """
    if not isinstance(node.body, RProd):
        return None
    geos = [f for f in node.body.factors if isinstance(f, RGeo)]
    if len(geos) != 1:
        return None
    rest_nodes = [f for f in node.body.factors if not isinstance(f, RGeo)]
    ratio = evaluate(geos[0].body, ctx)
    rest = LaurentSeries.constant(ctx.vars, 1)
    for f in rest_nodes:
        rest = (rest * evaluate(f, ctx)).clipped(ctx.window)
    if rest.is_zero:
        return LaurentSeries.zero(ctx.vars)
    i = ctx.vars.index(node.var)
    known_in_var = rest.sup_lo[i] >= rest.acc_lo[i] and rest.sup_hi[i] <= rest.acc_hi[i]
    finite = rest.sup_lo[i] != -INF and rest.sup_hi[i] != INF
    if not (known_in_var and finite):
        return None
    rlo, rhi = ratio.sup_lo[i], ratio.sup_hi[i]
    if rhi <= -1:
        count = max((int(rest.sup_hi[i]) + 1) // -int(rhi), 0)
    elif rlo >= 1:
        count = max((-1 - int(rest.sup_lo[i])) // int(rlo), 0)
    else:
        return None
    total = LaurentSeries.zero(ctx.vars)
    power = LaurentSeries.constant(ctx.vars, 1)
    for k in range(count + 1):
        if k > 0:
            power = (power * ratio).clipped(ctx.window)
        total = total + res(rest * power, node.var)
    return total


def series_expand(
    text: Union[str, RNode],
    window: Mapping[str, tuple[int, int]],
    env: Mapping[str, int] | None = None,
    probe: int = 2,
) -> LaurentSeries:
    """Expand a formal expression into a LaurentSeries, exact in the window."""
    node = parse_resexpr(text) if isinstance(text, str) else text
    vars = tuple(window)
    ctx = EvalContext(vars, dict(window), probe, dict(env or {}), {})
    return evaluate(node, ctx)


# ---------------------------------------------------------------------------
# Conversion to the identity model (for Recognize steps)


def node_to_term(node: RNode, aliases: Mapping[str, LinExpr]) -> Term:
    """Convert a product of binomial values into a Term, expanding aliases."""
    factors: list[BinomFactor] = []

    def walk(n: RNode) -> None:
        if isinstance(n, RBinom):
            factors.append(BinomFactor(n.upper.subst(aliases), n.lower.subst(aliases)))
        elif isinstance(n, RProd):
            for f in n.factors:
                walk(f)
        else:
            raise ValueError(f"not a product of binomials: {n!r}")

    walk(node)
    return Term(None, tuple(factors))


def split_carried_sum(node: RNode, aliases: Mapping[str, LinExpr]) -> tuple[Term, SumExpr]:
    """Split a `carried * sum(...)` state into the multiplier and the sum."""
    if not isinstance(node, RProd):
        raise ValueError("state is not a product")
    carried: list[BinomFactor] = []
    sums: list[SumExpr] = []
    for f in node.factors:
        if isinstance(f, RSum):
            body = node_to_term(f.body, aliases)
            sums.append(SumExpr(f.var, f.lower.subst(aliases), f.upper.subst(aliases), body))
        elif isinstance(f, RBinom):
            carried.append(BinomFactor(f.upper.subst(aliases), f.lower.subst(aliases)))
        else:
            raise ValueError(f"unexpected factor in carried-sum state: {f!r}")
    if len(sums) != 1:
        raise ValueError("state must contain exactly one sum")
    return Term(None, tuple(carried)), sums[0]
