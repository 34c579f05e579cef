"""Truncated multivariate Laurent series over exact rationals.

A series value carries, per variable, a support box (a mathematical
guarantee: no nonzero coefficient outside it) and an accuracy box (the
region in which stored coefficients equal those of the untruncated
expression). A coefficient is *known* when its exponent vector lies inside
the accuracy box, or outside the support box (then it is zero). Arithmetic
narrows accuracy exactly as far as soundness demands; any query for an
unknown coefficient raises instead of silently returning 0.

Truncation is per-variable, not total-degree: the expressions this engine
exists for mix negative powers of distinct variables with bounded positive
ranges elsewhere. Coefficients are exact (int or Fraction); Fractions only
appear when a unit with leading coefficient other than +-1 is inverted.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional, Union

from .arith import binomial

INF = float("inf")

Number = Union[int, Fraction]
Expo = tuple[int, ...]
Bound = Union[int, float]


class WindowError(Exception):
    """A coefficient outside the accuracy window was requested."""


class NonUnitError(Exception):
    """Attempt to invert a series whose lowest term is not invertible."""


class DivergentSumError(Exception):
    """A formal geometric sum whose ratio never leaves the window."""


class DegenerateWindowError(Exception):
    """Two series were compared on an empty shared accuracy region."""


def _box(vars, window: Mapping[str, tuple[int, int]]) -> tuple[tuple[Bound, ...], tuple[Bound, ...]]:
    lo = tuple(window[v][0] if v in window else -INF for v in vars)
    hi = tuple(window[v][1] if v in window else INF for v in vars)
    return lo, hi


class LaurentSeries:
    __slots__ = ("vars", "coeffs", "sup_lo", "sup_hi", "acc_lo", "acc_hi")

    def __init__(self, vars, coeffs, sup_lo, sup_hi, acc_lo, acc_hi):
        self.vars = tuple(vars)
        self.coeffs = coeffs
        self.sup_lo = tuple(sup_lo)
        self.sup_hi = tuple(sup_hi)
        self.acc_lo = tuple(acc_lo)
        self.acc_hi = tuple(acc_hi)
        self._normalize()

    # -- construction ------------------------------------------------------

    @staticmethod
    def zero(vars) -> "LaurentSeries":
        n = len(vars)
        return LaurentSeries(vars, {}, (INF,) * n, (-INF,) * n, (-INF,) * n, (INF,) * n)

    @staticmethod
    def constant(vars, value) -> "LaurentSeries":
        return LaurentSeries.monomial(vars, {}, value)

    @staticmethod
    def monomial(vars, exps: Mapping[str, int], coeff=1) -> "LaurentSeries":
        vars = tuple(vars)
        if coeff == 0:
            return LaurentSeries.zero(vars)
        unknown = set(exps) - set(vars)
        if unknown:
            raise ValueError(f"monomial uses undeclared variable(s) {sorted(unknown)}")
        e = tuple(exps.get(v, 0) for v in vars)
        n = len(vars)
        return LaurentSeries(vars, {e: coeff}, e, e, (-INF,) * n, (INF,) * n)

    # -- invariants ----------------------------------------------------------

    def _normalize(self) -> None:
        dead = [e for e, c in self.coeffs.items() if c == 0]
        for e in dead:
            del self.coeffs[e]
        if self.is_zero:
            n = len(self.vars)
            self.sup_lo, self.sup_hi = (INF,) * n, (-INF,) * n
            self.acc_lo, self.acc_hi = (-INF,) * n, (INF,) * n
            return
        exact = all(al <= sl and sh <= ah
                    for al, sl, sh, ah in zip(self.acc_lo, self.sup_lo, self.sup_hi, self.acc_hi))
        if exact:
            # fully known: tighten support to the actual table, widen accuracy
            if self.coeffs:
                keys = list(self.coeffs)
                self.sup_lo = tuple(min(e[i] for e in keys) for i in range(len(self.vars)))
                self.sup_hi = tuple(max(e[i] for e in keys) for i in range(len(self.vars)))
                n = len(self.vars)
                self.acc_lo, self.acc_hi = (-INF,) * n, (INF,) * n
            else:
                z = LaurentSeries.zero(self.vars)
                self.coeffs, self.sup_lo, self.sup_hi = z.coeffs, z.sup_lo, z.sup_hi
                self.acc_lo, self.acc_hi = z.acc_lo, z.acc_hi
        else:
            outside = [e for e in self.coeffs
                       if not all(lo <= x <= hi for x, lo, hi in zip(e, self.acc_lo, self.acc_hi))]
            for e in outside:
                del self.coeffs[e]

    @property
    def is_zero(self) -> bool:
        return not self.coeffs and all(lo > hi for lo, hi in zip(self.sup_lo, self.sup_hi))

    @property
    def is_exact(self) -> bool:
        return all(al <= sl and sh <= ah
                   for al, sl, sh, ah in zip(self.acc_lo, self.sup_lo, self.sup_hi, self.acc_hi))

    def _var_index(self, var: str) -> int:
        try:
            return self.vars.index(var)
        except ValueError:
            raise ValueError(f"series has no variable '{var}'") from None

    def _known(self, e: Expo) -> bool:
        if all(lo <= x <= hi for x, lo, hi in zip(e, self.acc_lo, self.acc_hi)):
            return True
        return any(x < lo or x > hi for x, lo, hi in zip(e, self.sup_lo, self.sup_hi))

    # -- queries -------------------------------------------------------------

    def coeff(self, monomial: Mapping[str, int]) -> Fraction:
        """Exact coefficient of the monomial; raises WindowError if unknown."""
        e = tuple(monomial.get(v, 0) for v in self.vars)
        if not self._known(e):
            pretty = " ".join(f"{v}^{x}" for v, x in zip(self.vars, e))
            raise WindowError(f"coefficient of {pretty.strip() or '1'} is outside the accuracy window")
        return Fraction(self.coeffs.get(e, 0))

    def constant_value(self) -> Fraction:
        """The value of a series with no variable dependence."""
        for e, c in self.coeffs.items():
            if any(x != 0 for x in e):
                raise ValueError("series is not constant")
        return self.coeff({})

    def items(self):
        return sorted(self.coeffs.items())

    def __repr__(self) -> str:
        terms = []
        for e, c in self.items()[:8]:
            mono = "*".join(f"{v}^{x}" for v, x in zip(self.vars, e) if x != 0)
            terms.append(f"{c}" + (f"*{mono}" if mono else ""))
        more = "..." if len(self.coeffs) > 8 else ""
        return f"<LaurentSeries {' + '.join(terms) or '0'}{more}>"

    # -- ring operations -------------------------------------------------------

    def _check_compatible(self, other: "LaurentSeries") -> None:
        if self.vars != other.vars:
            raise ValueError(f"variable mismatch: {self.vars} vs {other.vars}")

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check_compatible(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        coeffs = dict(self.coeffs)
        for e, c in other.coeffs.items():
            coeffs[e] = coeffs.get(e, 0) + c
        sup_lo = tuple(min(a, b) for a, b in zip(self.sup_lo, other.sup_lo))
        sup_hi = tuple(max(a, b) for a, b in zip(self.sup_hi, other.sup_hi))
        acc_lo = tuple(max(a, b) for a, b in zip(self.acc_lo, other.acc_lo))
        acc_hi = tuple(min(a, b) for a, b in zip(self.acc_hi, other.acc_hi))
        return LaurentSeries(self.vars, coeffs, sup_lo, sup_hi, acc_lo, acc_hi)

    def __neg__(self) -> "LaurentSeries":
        return self.scaled(-1)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def scaled(self, value) -> "LaurentSeries":
        if value == 0:
            return LaurentSeries.zero(self.vars)
        coeffs = {e: c * value for e, c in self.coeffs.items()}
        return LaurentSeries(self.vars, coeffs, self.sup_lo, self.sup_hi, self.acc_lo, self.acc_hi)

    def shifted(self, delta: Mapping[str, int]) -> "LaurentSeries":
        """Multiply by the monomial with the given exponents."""
        if self.is_zero:
            return self
        d = tuple(delta.get(v, 0) for v in self.vars)
        coeffs = {tuple(x + y for x, y in zip(e, d)): c for e, c in self.coeffs.items()}
        move = lambda bounds: tuple(b + x for b, x in zip(bounds, d))
        return LaurentSeries(self.vars, coeffs, move(self.sup_lo), move(self.sup_hi),
                             move(self.acc_lo), move(self.acc_hi))

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._check_compatible(other)
        if self.is_zero or other.is_zero:
            return LaurentSeries.zero(self.vars)
        acc_lo, acc_hi = [], []
        for i in range(len(self.vars)):
            uppers = []
            if not (self.sup_hi[i] <= self.acc_hi[i]):
                uppers.append(self.acc_hi[i] + other.sup_lo[i])
            if not (other.sup_hi[i] <= other.acc_hi[i]):
                uppers.append(other.acc_hi[i] + self.sup_lo[i])
            acc_hi.append(min(uppers) if uppers else INF)
            lowers = []
            if not (self.sup_lo[i] >= self.acc_lo[i]):
                lowers.append(self.acc_lo[i] + other.sup_hi[i])
            if not (other.sup_lo[i] >= other.acc_lo[i]):
                lowers.append(other.acc_lo[i] + self.sup_hi[i])
            acc_lo.append(max(lowers) if lowers else -INF)
        coeffs: dict[Expo, Number] = {}
        lo, hi = tuple(acc_lo), tuple(acc_hi)
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                if all(a <= x <= b for x, a, b in zip(e, lo, hi)):
                    coeffs[e] = coeffs.get(e, 0) + c1 * c2
        sup_lo = tuple(a + b for a, b in zip(self.sup_lo, other.sup_lo))
        sup_hi = tuple(a + b for a, b in zip(self.sup_hi, other.sup_hi))
        return LaurentSeries(self.vars, coeffs, sup_lo, sup_hi, lo, hi)

    def clipped(self, window: Mapping[str, tuple[int, int]]) -> "LaurentSeries":
        """Restrict accuracy to the window (coefficients outside are dropped)."""
        lo, hi = _box(self.vars, window)
        acc_lo = tuple(max(a, b) for a, b in zip(self.acc_lo, lo))
        acc_hi = tuple(min(a, b) for a, b in zip(self.acc_hi, hi))
        coeffs = {e: c for e, c in self.coeffs.items()
                  if all(a <= x <= b for x, a, b in zip(e, acc_lo, acc_hi))}
        return LaurentSeries(self.vars, coeffs, self.sup_lo, self.sup_hi, acc_lo, acc_hi)

    # -- powers ---------------------------------------------------------------

    def pow(self, e: int, window: Optional[Mapping[str, tuple[int, int]]] = None) -> "LaurentSeries":
        """Integer power; negative exponents require an invertible lowest term.

        For negative e the series must factor as c*mu*(1 + t) with mu the
        monomial at the support minimum and t supported strictly above 0;
        the binomial series in t is then truncated against `window`.
        """
        if e == 0:
            return LaurentSeries.constant(self.vars, 1)
        if e > 0:
            out = self
            for _ in range(e - 1):
                out = out * self
                if window is not None:
                    out = out.clipped(window)
            return out
        if window is None:
            raise WindowError("negative power needs a truncation window")
        return self._unit_pow(e, window)

    def _unit_factor(self):
        if self.is_zero:
            raise NonUnitError("cannot invert the zero series")
        if any(lo == -INF for lo in self.sup_lo):
            raise NonUnitError("cannot invert: support is unbounded below")
        mu = tuple(int(lo) for lo in self.sup_lo)
        if not self._known(mu):
            raise WindowError("lowest coefficient is outside the accuracy window")
        c = self.coeffs.get(mu, 0)
        if c == 0:
            raise NonUnitError("cannot invert: lowest term has zero coefficient")
        inv_c = Fraction(1, 1) / Fraction(c)
        inv_c = int(inv_c) if inv_c.denominator == 1 else inv_c
        t = self.shifted({v: -m for v, m in zip(self.vars, mu)}).scaled(inv_c)
        t = t + LaurentSeries.constant(self.vars, -1)
        if any(lo < 0 for lo in t.sup_lo):
            raise NonUnitError("cannot invert: support minimum is not a single monomial")
        if not t._known(tuple(0 for _ in self.vars)):
            raise WindowError("cannot certify the unit: constant term unknown")
        return c, mu, t

    def _unit_pow(self, e: int, window) -> "LaurentSeries":
        c, mu, t = self._unit_factor()
        win_lo, win_hi = _box(self.vars, window)
        # t has componentwise nonnegative support and no constant term, so
        # t^i has total degree >= i; beyond `depth` nothing lands in-window.
        carriers = [i for i in range(len(self.vars)) if t.sup_hi[i] > 0]
        caps = []
        for i in carriers:
            cap = win_hi[i] - e * mu[i]
            if cap == INF:
                raise WindowError(f"negative power needs a finite window for '{self.vars[i]}'")
            caps.append(max(int(cap), 0))
        if len(carriers) == 1:
            step = max(int(t.sup_lo[carriers[0]]), 1)
            depth = caps[0] // step + 1
        else:
            depth = sum(caps) + 1
        shifted_window = {v: (int(win_lo[i] - e * mu[i]) if win_lo[i] != -INF else -(10**9),
                              int(win_hi[i] - e * mu[i]))
                          for i, v in enumerate(self.vars)}
        total = LaurentSeries.constant(self.vars, 1)
        power = LaurentSeries.constant(self.vars, 1)
        for i in range(1, depth + 1):
            power = (power * t).clipped(shifted_window)
            total = total + power.scaled(binomial(e, i))
        scale = Fraction(c) ** e
        scale = int(scale) if scale.denominator == 1 else scale
        total = total.scaled(scale).shifted({v: e * m for v, m in zip(self.vars, mu)})
        total = total.clipped(window)
        # the partial sum is only a window-accurate stand-in for the true
        # series, whose support is unbounded in every variable t touches
        sup_lo = tuple(e * m for m in mu)
        sup_hi = tuple(e * m if t.sup_hi[i] <= 0 else INF for i, m in enumerate(mu))
        return LaurentSeries(self.vars, total.coeffs, sup_lo, sup_hi, total.acc_lo, total.acc_hi)

    def __pow__(self, e: int) -> "LaurentSeries":
        return self.pow(e)


# ---------------------------------------------------------------------------
# Residue extraction


def res(s: LaurentSeries, var: str) -> LaurentSeries:
    """The coefficient series of var^(-1), as a series in the other variables.

    The variable stays in the context with exponent 0. Raises WindowError if
    the -1 plane is not fully inside the accuracy window.
    """
    i = s._var_index(var)
    if -1 < s.sup_lo[i] or -1 > s.sup_hi[i]:
        return LaurentSeries.zero(s.vars)
    if not (s.acc_lo[i] <= -1 <= s.acc_hi[i]):
        raise WindowError(f"residue in '{var}': exponent -1 is outside the accuracy window")
    coeffs = {}
    for e, c in s.coeffs.items():
        if e[i] == -1:
            coeffs[e[:i] + (0,) + e[i + 1 :]] = c
    fix = lambda t, v: t[:i] + (v,) + t[i + 1 :]
    return LaurentSeries(s.vars, coeffs, fix(s.sup_lo, 0), fix(s.sup_hi, 0),
                         fix(s.acc_lo, -INF), fix(s.acc_hi, INF))


def coeff(s: LaurentSeries, monomial: Mapping[str, int]) -> Fraction:
    return s.coeff(monomial)


# ---------------------------------------------------------------------------
# Geometric collapse and the simple-pole residue rule


def _escape_count(s: LaurentSeries, window) -> int:
    """Smallest K with no monomial of s^k (k > K) inside the window box."""
    win_lo, win_hi = _box(s.vars, window)
    best = None
    for i in range(len(s.vars)):
        if s.sup_lo[i] >= 1:
            if win_hi[i] == INF:
                continue
            k = int(max(win_hi[i], 0) // s.sup_lo[i]) + 1
        elif s.sup_hi[i] <= -1:
            if win_lo[i] == -INF:
                continue
            k = int(max(-win_lo[i], 0) // -s.sup_hi[i]) + 1
        else:
            continue
        best = k if best is None else min(best, k)
    if best is None:
        raise DivergentSumError(
            "divergent formal sum: the ratio's powers never leave the window"
        )
    return best


def geometric_collapse(ratio: LaurentSeries, window: Mapping[str, tuple[int, int]]) -> LaurentSeries:
    """sum of ratio^k over k >= 0, truncated to the window.

    The ratio must have positive valuation in some direction (all powers
    eventually leave the window box); a ratio with an invertible constant
    term is a divergent formal sum and raises.
    """
    count = _escape_count(ratio, window)
    total = LaurentSeries.constant(ratio.vars, 1)
    power = LaurentSeries.constant(ratio.vars, 1)
    for _ in range(count):
        power = (power * ratio).clipped(window)
        total = total + power
    total = total.clipped(window)
    sup_lo = tuple(0 if lo >= 0 else -INF for lo in ratio.sup_lo)
    sup_hi = tuple(0 if hi <= 0 else INF for hi in ratio.sup_hi)
    return LaurentSeries(total.vars, total.coeffs, sup_lo, sup_hi, total.acc_lo, total.acc_hi)


def residue_eval_simple_pole(
    g: LaurentSeries,
    p_exp: int,
    s: LaurentSeries,
    var: str = "x",
    window: Optional[Mapping[str, tuple[int, int]]] = None,
) -> LaurentSeries:
    """Residue of g(x) * x^p_exp / (x - s) at the simple pole x = s.

    Computed formally as g(x <- s) * s^p_exp. The substituted series must be
    free of x and must leave any window under powering (valuation condition);
    g must be fully known in x.
    """
    if window is None:
        window = {}
    i = g._var_index(var)
    j = s._var_index(var)
    if not (s.is_zero or (s.sup_lo[j] >= 0 and s.sup_hi[j] <= 0)):
        raise ValueError(f"pole location must not involve '{var}'")
    _escape_count(s, window)  # valuation check: powers must leave the window
    if not (g.sup_lo[i] >= g.acc_lo[i] and g.sup_hi[i] <= g.acc_hi[i]):
        raise WindowError(f"pole evaluation needs '{var}'-slices fully inside the window")
    tables: dict[int, dict[Expo, Number]] = {}
    for e, c in g.coeffs.items():
        mono = e[:i] + (0,) + e[i + 1 :]
        tables.setdefault(e[i], {})[mono] = c
    n = len(g.vars)
    total = LaurentSeries.zero(g.vars)
    for k in sorted(tables):
        keys = list(tables[k])
        piece = LaurentSeries(g.vars, tables[k],
                              tuple(min(e[j] for e in keys) for j in range(n)),
                              tuple(max(e[j] for e in keys) for j in range(n)),
                              (-INF,) * n, (INF,) * n)
        total = total + piece * s.pow(k + p_exp, window)
    return total


# ---------------------------------------------------------------------------
# Comparison


def shared_window(a: LaurentSeries, b: LaurentSeries):
    lo = tuple(max(x, y) for x, y in zip(a.acc_lo, b.acc_lo))
    hi = tuple(min(x, y) for x, y in zip(a.acc_hi, b.acc_hi))
    if any(l > h for l, h in zip(lo, hi)):
        raise DegenerateWindowError("accuracy windows do not overlap")
    return lo, hi


def first_difference(a: LaurentSeries, b: LaurentSeries):
    """First monomial (sorted) where the two series provably differ, or None.

    Only coefficients known on both sides are compared; raises if the shared
    accuracy region is empty (a vacuous comparison is an error, not a pass).
    """
    shared_window(a, b)
    for e in sorted(set(a.coeffs) | set(b.coeffs)):
        if not (a._known(e) and b._known(e)):
            continue
        ca, cb = a.coeffs.get(e, 0), b.coeffs.get(e, 0)
        if ca != cb:
            return e, Fraction(ca), Fraction(cb)
    return None


def series_equal(a: LaurentSeries, b: LaurentSeries) -> bool:
    return first_difference(a, b) is None
