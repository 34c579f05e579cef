"""AST for parameterized binomial identities and the operations on it.

The value domain is affine integer expressions (`LinExpr`) sitting inside
binomial factors, products of factors with an optional (-1)^e sign, finite
sums over one bound variable, and named identities with nonnegativity
constraints. Everything is an immutable dataclass; all operations return
new values and are safe under concurrency.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .arith import binomial


class EvalError(Exception):
    """Evaluation failed (unbound variable)."""


class ConstraintError(Exception):
    """A parameter environment violates an identity's constraints."""


class RewriteError(Exception):
    """A rewrite rule was applied at a position that does not match."""


class SubstitutionError(Exception):
    """A substitution does not cover the parameters it must map."""


# ---------------------------------------------------------------------------
# Affine integer expressions


@dataclass(frozen=True)
class LinExpr:
    """Affine expression const + sum(coeff * var), canonically ordered.

    Invariants: no zero coefficients are stored and variable names are kept
    sorted, so structural equality of normalized expressions is dataclass
    equality.
    """

    const: int = 0
    coeffs: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def of(const: int = 0, **vars: int) -> "LinExpr":
        return LinExpr.make(const, vars)

    @staticmethod
    def make(const: int, coeffs: Mapping[str, int]) -> "LinExpr":
        items = tuple(sorted((v, c) for v, c in coeffs.items() if c != 0))
        return LinExpr(const, items)

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr(0, ((name, 1),))

    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def evaluate(self, env: Mapping[str, int]) -> int:
        total = self.const
        for v, c in self.coeffs:
            if v not in env:
                raise EvalError(f"unbound variable '{v}' in expression {self}")
            total += c * env[v]
        return total

    def subst(self, mapping: Mapping[str, "LinExpr"]) -> "LinExpr":
        """Replace each mapped variable by an affine expression."""
        const = self.const
        acc: dict[str, int] = {}
        for v, c in self.coeffs:
            image = mapping.get(v)
            if image is None:
                acc[v] = acc.get(v, 0) + c
            else:
                const += c * image.const
                for w, d in image.coeffs:
                    acc[w] = acc.get(w, 0) + c * d
        return LinExpr.make(const, acc)

    def parity(self) -> "LinExpr":
        """The mod-2 representative; (-1)^e depends only on this."""
        return LinExpr.make(self.const % 2, {v: c % 2 for v, c in self.coeffs})

    def key(self):
        return (self.coeffs, self.const)

    def __add__(self, other: "LinExpr") -> "LinExpr":
        acc = dict(self.coeffs)
        for v, c in other.coeffs:
            acc[v] = acc.get(v, 0) + c
        return LinExpr.make(self.const + other.const, acc)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + (-other)

    def __neg__(self) -> "LinExpr":
        return LinExpr(-self.const, tuple((v, -c) for v, c in self.coeffs))

    def scaled(self, factor: int) -> "LinExpr":
        if factor == 0:
            return LinExpr()
        return LinExpr(self.const * factor, tuple((v, c * factor) for v, c in self.coeffs))

    def __str__(self) -> str:
        parts: list[str] = []
        for v, c in self.coeffs:
            if c == 1:
                parts.append(f"+{v}")
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{c:+d}*{v}")
        if self.const != 0 or not parts:
            parts.append(f"{self.const:+d}")
        text = "".join(parts)
        return text[1:] if text.startswith("+") else text


ZERO = LinExpr()
ONE = LinExpr(1)


# ---------------------------------------------------------------------------
# Terms, sums, identities


@dataclass(frozen=True)
class BinomFactor:
    upper: LinExpr
    lower: LinExpr

    def key(self):
        return (self.upper.key(), self.lower.key())

    def __str__(self) -> str:
        return f"C({self.upper},{self.lower})"


@dataclass(frozen=True)
class Term:
    """Product of binomial factors with an optional (-1)^sign_exponent."""

    sign_exponent: Optional[LinExpr] = None
    factors: tuple[BinomFactor, ...] = ()

    def variables(self) -> set[str]:
        out: set[str] = set()
        if self.sign_exponent is not None:
            out.update(self.sign_exponent.variables())
        for f in self.factors:
            out.update(f.upper.variables())
            out.update(f.lower.variables())
        return out


@dataclass(frozen=True)
class SumExpr:
    """sum of body over bound_var from lower to upper inclusive."""

    bound_var: str
    lower: LinExpr
    upper: LinExpr
    body: Term

    def variables(self) -> set[str]:
        out = self.body.variables()
        out.discard(self.bound_var)
        out.update(self.lower.variables())
        out.update(self.upper.variables())
        return out


Side = Union[SumExpr, Term]


@dataclass(frozen=True)
class Identity:
    """Named parameterized equation lhs == rhs with >= 0 constraints."""

    name: str
    params: tuple[str, ...]
    lhs: Side
    rhs: Term
    constraints: tuple[LinExpr, ...] = ()

    def bound_var(self) -> Optional[str]:
        return self.lhs.bound_var if isinstance(self.lhs, SumExpr) else None


@dataclass(frozen=True)
class Substitution:
    """Maps parent parameter names to affine images over target parameters."""

    mapping: tuple[tuple[str, LinExpr], ...]
    target_params: tuple[str, ...] = ()

    @staticmethod
    def of(mapping: Mapping[str, LinExpr], target_params=()) -> "Substitution":
        return Substitution(tuple(mapping.items()), tuple(target_params))

    def as_dict(self) -> dict[str, LinExpr]:
        return dict(self.mapping)

    def apply_env(self, env: Mapping[str, int]) -> dict[str, int]:
        """Compose: the parent environment induced by a target environment."""
        return {name: image.evaluate(env) for name, image in self.mapping}


@dataclass(frozen=True)
class EvalResult:
    lhs: int
    rhs: int

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


# ---------------------------------------------------------------------------
# Evaluation


def eval_linexpr(e: LinExpr, env: Mapping[str, int]) -> int:
    return e.evaluate(env)


def eval_term(t: Term, env: Mapping[str, int]) -> int:
    # no early exit on zero: every factor is evaluated so that unbound
    # variables surface regardless of the values around them
    value = 1
    for f in t.factors:
        value *= binomial(f.upper.evaluate(env), f.lower.evaluate(env))
    if t.sign_exponent is not None and t.sign_exponent.evaluate(env) % 2 == 1:
        value = -value
    return value


def eval_side(side: Side, env: Mapping[str, int]) -> int:
    if isinstance(side, Term):
        return eval_term(side, env)
    lo = side.lower.evaluate(env)
    hi = side.upper.evaluate(env)
    total = 0
    inner = dict(env)
    for k in range(lo, hi + 1):
        inner[side.bound_var] = k
        total += eval_term(side.body, inner)
    return total


def constraints_satisfied(ident: Identity, env: Mapping[str, int]) -> bool:
    """True iff every recorded constraint evaluates >= 0.

    Constraints mentioning the bound variable are required to hold for every
    index in the summation range (vacuously for empty sums).
    """
    bv = ident.bound_var()
    pointwise = []
    for c in ident.constraints:
        if bv is not None and bv in dict(c.coeffs):
            pointwise.append(c)
        elif c.evaluate(env) < 0:
            return False
    if pointwise and isinstance(ident.lhs, SumExpr):
        lo = ident.lhs.lower.evaluate(env)
        hi = ident.lhs.upper.evaluate(env)
        inner = dict(env)
        for k in range(lo, hi + 1):
            inner[bv] = k
            for c in pointwise:
                if c.evaluate(inner) < 0:
                    return False
    return True


def eval_identity(ident: Identity, env: Mapping[str, int]) -> EvalResult:
    """Evaluate both sides exactly; raises on unbound params or violated constraints."""
    for p in ident.params:
        if p not in env:
            raise EvalError(f"identity '{ident.name}': parameter '{p}' not bound")
    if not constraints_satisfied(ident, env):
        raise ConstraintError(f"identity '{ident.name}': constraints violated at {dict(env)}")
    return EvalResult(eval_side(ident.lhs, env), eval_term(ident.rhs, env))


# ---------------------------------------------------------------------------
# Canonicalization


def _canonical_sign(e: Optional[LinExpr]) -> Optional[LinExpr]:
    if e is None:
        return None
    p = e.parity()
    return None if p == ZERO else p


def canonicalize_term(t: Term) -> Term:
    factors = tuple(sorted((f for f in t.factors if f.lower != ZERO), key=BinomFactor.key))
    return Term(_canonical_sign(t.sign_exponent), factors)


def _canonical_bound_name(taken: set[str]) -> str:
    if "k" not in taken:
        return "k"
    for i in itertools.count(1):
        name = f"k{i}"
        if name not in taken:
            return name


def _rename_bound(s: SumExpr, new: str) -> SumExpr:
    if s.bound_var == new:
        return s
    m = {s.bound_var: LinExpr.var(new)}
    body = Term(
        s.body.sign_exponent.subst(m) if s.body.sign_exponent is not None else None,
        tuple(BinomFactor(f.upper.subst(m), f.lower.subst(m)) for f in s.body.factors),
    )
    return SumExpr(new, s.lower, s.upper, body)


def canonicalize(ident: Identity) -> Identity:
    """Normalize an identity to its canonical form.

    Factors are sorted, factors with lower index identically 0 (value 1) are
    dropped, sign exponents are reduced to their mod-2 representative, and
    the bound variable is alpha-renamed to a fixed canonical name. Idempotent
    and evaluation-invariant.
    """
    lhs = ident.lhs
    if isinstance(lhs, SumExpr):
        lhs = _rename_bound(lhs, _canonical_bound_name(set(ident.params)))
        lhs = SumExpr(lhs.bound_var, lhs.lower, lhs.upper, canonicalize_term(lhs.body))
    else:
        lhs = canonicalize_term(lhs)
    constraints = tuple(sorted(set(ident.constraints), key=LinExpr.key))
    return Identity(ident.name, ident.params, lhs, canonicalize_term(ident.rhs), constraints)


# ---------------------------------------------------------------------------
# Substitution


def _subst_term(t: Term, m: Mapping[str, LinExpr]) -> Term:
    return Term(
        t.sign_exponent.subst(m) if t.sign_exponent is not None else None,
        tuple(BinomFactor(f.upper.subst(m), f.lower.subst(m)) for f in t.factors),
    )


def substitute_raw(ident: Identity, sub: Substitution, new_name: str) -> Identity:
    """Apply a substitution without canonicalizing (factor order preserved)."""
    m = sub.as_dict()
    for p in ident.params:
        if p not in m:
            raise SubstitutionError(f"substitution into '{ident.name}' misses parameter '{p}'")
    params = sub.target_params
    if not params:
        seen: dict[str, None] = {}
        for _, image in sub.mapping:
            for v in image.variables():
                seen.setdefault(v)
        params = tuple(seen)

    lhs = ident.lhs
    if isinstance(lhs, SumExpr):
        # the bound variable is not a parameter; keep it out of the image vars
        bv = lhs.bound_var
        if any(bv in image.variables() for image in m.values()) or bv in params:
            lhs = _rename_bound(lhs, _canonical_bound_name(set(params) | set(m)))
            bv = lhs.bound_var
        lhs = SumExpr(bv, lhs.lower.subst(m), lhs.upper.subst(m), _subst_term(lhs.body, m))
    else:
        lhs = _subst_term(lhs, m)
    return Identity(
        new_name,
        params,
        lhs,
        _subst_term(ident.rhs, m),
        tuple(c.subst(m) for c in ident.constraints),
    )


def substitute(ident: Identity, sub: Substitution, new_name: str) -> Identity:
    """Specialize an identity through a parameter substitution, canonicalized."""
    return canonicalize(substitute_raw(ident, sub, new_name))


def identity_substitution(ident: Identity) -> Substitution:
    return Substitution.of({p: LinExpr.var(p) for p in ident.params}, ident.params)


# ---------------------------------------------------------------------------
# Rewrite rules
#
# Each rule rewrites one or two factors of a term in place and returns the
# new term plus an optional side condition (a LinExpr that must be >= 0 for
# the rewrite to preserve values; None when unconditional).


def rewrite_trinomial_revision(t: Term, i: int, j: int) -> tuple[Term, Optional[LinExpr]]:
    """C(a,k)*C(k,c) at positions (i, j) becomes C(a,c)*C(a-c,k-c)."""
    fi, fj = t.factors[i], t.factors[j]
    if fj.upper != fi.lower:
        raise RewriteError(
            f"trinomial revision needs factor {j} upper == factor {i} lower, "
            f"got {fj.upper} vs {fi.lower}"
        )
    a, k, c = fi.upper, fi.lower, fj.lower
    factors = list(t.factors)
    factors[i] = BinomFactor(a, c)
    factors[j] = BinomFactor(a - c, k - c)
    return Term(t.sign_exponent, tuple(factors)), None


def _merge_sign(sign: Optional[LinExpr], extra: LinExpr) -> Optional[LinExpr]:
    return extra if sign is None else sign + extra


def rewrite_upper_negation(t: Term, i: int) -> tuple[Term, Optional[LinExpr]]:
    """C(n,k) becomes (-1)^k C(k-n-1,k); valid for all integers."""
    f = t.factors[i]
    factors = list(t.factors)
    factors[i] = BinomFactor(f.lower - f.upper - ONE, f.lower)
    return Term(_merge_sign(t.sign_exponent, f.lower), tuple(factors)), None


def rewrite_second_symmetry(t: Term, i: int) -> tuple[Term, Optional[LinExpr]]:
    """C(n,k) becomes (-1)^(n-k) C(-k-1,n-k); needs n-k >= 0 recorded."""
    f = t.factors[i]
    nk = f.upper - f.lower
    factors = list(t.factors)
    factors[i] = BinomFactor(-f.lower - ONE, nk)
    return Term(_merge_sign(t.sign_exponent, nk), tuple(factors)), nk


def rewrite_lower_symmetry(t: Term, i: int) -> tuple[Term, Optional[LinExpr]]:
    """C(n,k) becomes C(n,n-k); needs n >= 0 recorded."""
    f = t.factors[i]
    factors = list(t.factors)
    factors[i] = BinomFactor(f.upper, f.upper - f.lower)
    return Term(t.sign_exponent, tuple(factors)), f.upper


TERM_REWRITES = {
    "trinomial_revision": rewrite_trinomial_revision,
    "upper_negation": rewrite_upper_negation,
    "second_symmetry": rewrite_second_symmetry,
    "lower_symmetry": rewrite_lower_symmetry,
}


# ---------------------------------------------------------------------------
# Identity-level rewrite chains


@dataclass(frozen=True)
class RewriteStep:
    """One rewrite application at a factor position of one side."""

    op: str
    side: str  # "lhs" | "rhs"
    index: int
    index2: Optional[int] = None  # second position for trinomial revision


@dataclass(frozen=True)
class SubstStep:
    mapping: tuple[tuple[str, LinExpr], ...]


@dataclass(frozen=True)
class CancelSignStep:
    pass


ChainStep = Union[RewriteStep, SubstStep, CancelSignStep]


def _term_of_side(side: Side) -> Term:
    return side.body if isinstance(side, SumExpr) else side


def _with_term(side: Side, t: Term) -> Side:
    if isinstance(side, SumExpr):
        return SumExpr(side.bound_var, side.lower, side.upper, t)
    return t


def cancel_common_sign(ident: Identity) -> Identity:
    """Drop (-1)^e from both sides when the exponents agree in parity."""
    lt = _term_of_side(ident.lhs)
    rt = ident.rhs
    if lt.sign_exponent is None or rt.sign_exponent is None:
        raise RewriteError("cancel_sign: both sides must carry a sign exponent")
    if lt.sign_exponent.parity() != rt.sign_exponent.parity():
        raise RewriteError(
            f"cancel_sign: exponents {lt.sign_exponent} and {rt.sign_exponent} "
            "differ in parity"
        )
    return Identity(
        ident.name,
        ident.params,
        _with_term(ident.lhs, Term(None, lt.factors)),
        Term(None, rt.factors),
        ident.constraints,
    )


def apply_chain_step(ident: Identity, step: ChainStep) -> Identity:
    if isinstance(step, CancelSignStep):
        return cancel_common_sign(ident)
    if isinstance(step, SubstStep):
        mapping = dict(step.mapping)
        full = {p: mapping.get(p, LinExpr.var(p)) for p in ident.params}
        sub = Substitution.of(full, ident.params)
        return substitute_raw(ident, sub, ident.name)
    rule = TERM_REWRITES[step.op]
    side = ident.lhs if step.side == "lhs" else ident.rhs
    term = _term_of_side(side)
    if step.op == "trinomial_revision":
        new_term, condition = rule(term, step.index, step.index2)
    else:
        new_term, condition = rule(term, step.index)
    constraints = ident.constraints
    if condition is not None:
        constraints = constraints + (condition,)
    if step.side == "lhs":
        return Identity(ident.name, ident.params, _with_term(ident.lhs, new_term), ident.rhs, constraints)
    return Identity(ident.name, ident.params, ident.lhs, new_term, constraints)


def apply_chain(ident: Identity, steps) -> Identity:
    for step in steps:
        ident = apply_chain_step(ident, step)
    return ident


# ---------------------------------------------------------------------------
# Structural equality (never numeric)


def _unify_lin(e1: LinExpr, e2: LinExpr, pi: dict[str, str], used: set[str]) -> Iterator[None]:
    """Extend the bijection pi so that e1 maps onto e2; yields per solution."""
    if e1.const != e2.const or len(e1.coeffs) != len(e2.coeffs):
        return

    def go(idx: int, remaining: dict[str, int]) -> Iterator[None]:
        if idx == len(e1.coeffs):
            if not remaining:
                yield None
            return
        v, c = e1.coeffs[idx]
        if v in pi:
            w = pi[v]
            if remaining.get(w) == c:
                rest = dict(remaining)
                del rest[w]
                yield from go(idx + 1, rest)
            return
        for w, d in list(remaining.items()):
            if d != c or w in used:
                continue
            pi[v] = w
            used.add(w)
            rest = dict(remaining)
            del rest[w]
            yield from go(idx + 1, rest)
            del pi[v]
            used.discard(w)

    yield from go(0, dict(e2.coeffs))


def _unify_term(t1: Term, t2: Term, pi, used) -> Iterator[None]:
    s1, s2 = t1.sign_exponent, t2.sign_exponent
    if (s1 is None) != (s2 is None) or len(t1.factors) != len(t2.factors):
        return

    def factors(idx: int, left: list[BinomFactor]) -> Iterator[None]:
        if idx == len(t1.factors):
            yield None
            return
        f1 = t1.factors[idx]
        for pos, f2 in enumerate(left):
            for _ in _unify_lin(f1.upper, f2.upper, pi, used):
                for _ in _unify_lin(f1.lower, f2.lower, pi, used):
                    yield from factors(idx + 1, left[:pos] + left[pos + 1 :])

    if s1 is None:
        yield from factors(0, list(t2.factors))
    else:
        for _ in _unify_lin(s1, s2, pi, used):
            yield from factors(0, list(t2.factors))


def _unify_identity(a: Identity, b: Identity, pi, used) -> Iterator[None]:
    if isinstance(a.lhs, SumExpr) != isinstance(b.lhs, SumExpr):
        return
    if isinstance(a.lhs, SumExpr):
        # the bound variables are matched positionally, outside the bijection
        pi = dict(pi)
        pi[a.lhs.bound_var] = b.lhs.bound_var
        used = used | {b.lhs.bound_var}
        for _ in _unify_lin(a.lhs.lower, b.lhs.lower, pi, used):
            for _ in _unify_lin(a.lhs.upper, b.lhs.upper, pi, used):
                for _ in _unify_term(a.lhs.body, b.lhs.body, pi, used):
                    yield from _unify_term(a.rhs, b.rhs, pi, used)
    else:
        for _ in _unify_term(a.lhs, b.lhs, pi, used):
            yield from _unify_term(a.rhs, b.rhs, pi, used)


def structurally_equal(a: Identity, b: Identity, allow_renaming: bool = False) -> bool:
    """True iff canonical forms coincide, optionally up to renaming params.

    Compares the equation shape only (constraints and names are metadata);
    never resorts to numeric sampling.
    """
    ca, cb = canonicalize(a), canonicalize(b)
    if not allow_renaming:
        return ca.lhs == cb.lhs and ca.rhs == cb.rhs
    if len(ca.params) != len(cb.params):
        return False
    for _ in _unify_identity(ca, cb, {}, set()):
        return True
    return False
