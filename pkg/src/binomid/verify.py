"""Exhaustive and randomized verification of identities over integer grids.

Grid evaluation may be sharded across worker processes; every environment
evaluation is pure and shard results merge in enumeration order, so reports
do not depend on scheduling. Failures are listed lexicographically in the
identity's declared parameter order.
"""
from __future__ import annotations

import json
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .arith import binomial
from .model import Identity, LinExpr, SumExpr, Term, eval_side, eval_term


class GridError(Exception):
    """A grid does not bind every parameter of the identity."""


@dataclass(frozen=True)
class GridSpec:
    """Inclusive integer range per parameter."""

    ranges: tuple[tuple[str, tuple[int, int]], ...]

    @staticmethod
    def of(ranges: Mapping[str, tuple[int, int]]) -> "GridSpec":
        for name, (lo, hi) in ranges.items():
            if lo > hi:
                raise GridError(f"empty range {lo}..{hi} for parameter '{name}'")
        return GridSpec(tuple(ranges.items()))

    @staticmethod
    def uniform(params, lo: int, hi: int) -> "GridSpec":
        return GridSpec.of({p: (lo, hi) for p in params})

    def as_dict(self) -> dict[str, tuple[int, int]]:
        return dict(self.ranges)

    def cardinality(self) -> int:
        total = 1
        for _, (lo, hi) in self.ranges:
            total *= hi - lo + 1
        return total

    def ordered_for(self, ident: Identity) -> list[tuple[int, int]]:
        table = self.as_dict()
        missing = [p for p in ident.params if p not in table]
        if missing:
            raise GridError(f"grid missing parameter(s) {', '.join(missing)} of '{ident.name}'")
        return [table[p] for p in ident.params]


@dataclass(frozen=True)
class Failure:
    env: dict[str, int]
    lhs: int
    rhs: int

    def as_json(self) -> dict:
        return {"env": self.env, "lhs": str(self.lhs), "rhs": str(self.rhs)}


@dataclass
class VerificationReport:
    identity: str
    grid: dict[str, tuple[int, int]]
    instances: int
    failures: list[Failure]
    elapsed_ms: int
    exploratory: list[Failure] = field(default_factory=list)
    seed: Optional[int] = None
    trials: Optional[int] = None
    bound_sensitive: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json_dict(self, include_elapsed: bool = True) -> dict:
        out: dict = {
            "identity": self.identity,
            "grid": {p: [lo, hi] for p, (lo, hi) in self.grid.items()},
            "instances": self.instances,
            "failures": [f.as_json() for f in self.failures],
        }
        if self.seed is not None:
            out["seed"] = self.seed
            out["trials"] = self.trials
            out["exploratory"] = [f.as_json() for f in self.exploratory]
        if self.bound_sensitive is not None:
            out["bound_sensitive"] = self.bound_sensitive
        if include_elapsed:
            out["elapsed_ms"] = self.elapsed_ms
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def canonical_json(self) -> str:
        """Deterministic serialization (elapsed time omitted) for comparisons."""
        return json.dumps(self.to_json_dict(include_elapsed=False), sort_keys=True)


# ---------------------------------------------------------------------------
# Compiled evaluation
#
# Parameter values live in a flat list; the bound variable (if any) occupies
# the last slot. Binomials are memoized per evaluation run: across a grid the
# same (n, k) pairs recur constantly.


def _compile_lin(e: LinExpr, slot: Mapping[str, int]):
    const = e.const
    items = tuple((slot[v], c) for v, c in e.coeffs)
    if not items:
        return lambda vals: const

    def ev(vals, _items=items, _const=const):
        total = _const
        for i, c in _items:
            total += c * vals[i]
        return total

    return ev


class _Compiled:
    def __init__(self, ident: Identity):
        self.ident = ident
        params = ident.params
        slot = {p: i for i, p in enumerate(params)}
        bv = ident.bound_var()
        if bv is not None:
            slot[bv] = len(params)
        self.bound_slot = len(params)
        self.cache: dict[tuple[int, int], int] = {}

        def compile_term(t: Term):
            sign = _compile_lin(t.sign_exponent, slot) if t.sign_exponent is not None else None
            factors = tuple((_compile_lin(f.upper, slot), _compile_lin(f.lower, slot)) for f in t.factors)
            return sign, factors

        self.rhs = compile_term(ident.rhs)
        if isinstance(ident.lhs, SumExpr):
            self.sum_lower = _compile_lin(ident.lhs.lower, slot)
            self.sum_upper = _compile_lin(ident.lhs.upper, slot)
            self.body = compile_term(ident.lhs.body)
            self.lhs_term = None
        else:
            self.lhs_term = compile_term(ident.lhs)
        bound_vars = {bv} if bv is not None else set()
        self.free_constraints = []
        self.bound_constraints = []
        for c in ident.constraints:
            target = self.bound_constraints if bound_vars & set(c.variables()) else self.free_constraints
            target.append(_compile_lin(c, slot))

    def _binom(self, n: int, k: int) -> int:
        key = (n, k)
        v = self.cache.get(key)
        if v is None:
            v = binomial(n, k)
            self.cache[key] = v
        return v

    def _term(self, compiled, vals) -> int:
        sign, factors = compiled
        value = 1
        for up, lo in factors:
            value *= self._binom(up(vals), lo(vals))
            if value == 0:
                return 0
        if sign is not None and sign(vals) % 2 == 1:
            value = -value
        return value

    def admissible(self, vals) -> bool:
        for c in self.free_constraints:
            if c(vals) < 0:
                return False
        if self.bound_constraints and self.lhs_term is None:
            lo, hi = self.sum_lower(vals), self.sum_upper(vals)
            for k in range(lo, hi + 1):
                vals[self.bound_slot] = k
                for c in self.bound_constraints:
                    if c(vals) < 0:
                        return False
        return True

    def evaluate(self, vals) -> tuple[int, int]:
        if self.lhs_term is not None:
            lhs = self._term(self.lhs_term, vals)
        else:
            lhs = 0
            for k in range(self.sum_lower(vals), self.sum_upper(vals) + 1):
                vals[self.bound_slot] = k
                lhs += self._term(self.body, vals)
        return lhs, self._term(self.rhs, vals)


def _decode(index: int, ranges) -> list[int]:
    vals = []
    for lo, hi in reversed(ranges):
        width = hi - lo + 1
        index, digit = divmod(index, width)
        vals.append(lo + digit)
    vals.reverse()
    return vals


def _grid_shard(args):
    ident, ranges, start, stop = args
    compiled = _Compiled(ident)
    checked = 0
    failures = []
    vals = [0] * (len(ident.params) + 1)
    for index in range(start, stop):
        vals[: len(ident.params)] = _decode(index, ranges)
        if not compiled.admissible(vals):
            continue
        checked += 1
        lhs, rhs = compiled.evaluate(vals)
        if lhs != rhs:
            env = dict(zip(ident.params, vals[: len(ident.params)]))
            failures.append(Failure(env, lhs, rhs))
    return checked, failures


def verify_grid(ident: Identity, grid: GridSpec, jobs: int = 1) -> VerificationReport:
    """Evaluate every admissible environment of the Cartesian grid.

    Environments violating the identity's constraints are skipped. The report
    is identical for any number of jobs (elapsed time aside).
    """
    started = time.perf_counter()
    ranges = grid.ordered_for(ident)
    total = 1
    for lo, hi in ranges:
        total *= hi - lo + 1
    if jobs <= 1 or total < 2 * jobs:
        checked, failures = _grid_shard((ident, ranges, 0, total))
    else:
        bounds = [total * i // jobs for i in range(jobs + 1)]
        tasks = [(ident, ranges, bounds[i], bounds[i + 1]) for i in range(jobs)]
        checked, failures = 0, []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for shard_checked, shard_failures in pool.map(_grid_shard, tasks):
                checked += shard_checked
                failures.extend(shard_failures)
    elapsed = int((time.perf_counter() - started) * 1000)
    grid_dict = {p: r for p, r in zip(ident.params, ranges)}
    return VerificationReport(ident.name, grid_dict, checked, failures, elapsed)


def find_first_failure(ident: Identity, grid: GridSpec) -> Optional[Failure]:
    """First failing admissible environment in enumeration order, or None."""
    ranges = grid.ordered_for(ident)
    total = 1
    for lo, hi in ranges:
        total *= hi - lo + 1
    compiled = _Compiled(ident)
    vals = [0] * (len(ident.params) + 1)
    for index in range(total):
        vals[: len(ident.params)] = _decode(index, ranges)
        if not compiled.admissible(vals):
            continue
        lhs, rhs = compiled.evaluate(vals)
        if lhs != rhs:
            return Failure(dict(zip(ident.params, vals[: len(ident.params)])), lhs, rhs)
    return None


@dataclass(frozen=True)
class BoundSensitivity:
    stated: int
    extended: int

    @property
    def equal(self) -> bool:
        return self.stated == self.extended


def bound_sensitivity(ident: Identity, env: Mapping[str, int], window: int) -> BoundSensitivity:
    """Compare the stated-bounds sum against [lower-window, upper+window].

    They agree exactly when every out-of-range summand vanishes.
    """
    if not isinstance(ident.lhs, SumExpr):
        raise ValueError(f"identity '{ident.name}' has no summation side")
    if window < 0:
        raise ValueError("window must be nonnegative")
    s = ident.lhs
    stated = eval_side(s, env)
    lo = s.lower.evaluate(env) - window
    hi = s.upper.evaluate(env) + window
    inner = dict(env)
    extended = 0
    for k in range(lo, hi + 1):
        inner[s.bound_var] = k
        extended += eval_term(s.body, inner)
    return BoundSensitivity(stated, extended)


def fuzz(ident: Identity, seed: int, trials: int, lo: int, hi: int) -> VerificationReport:
    """Randomized check over [lo, hi]^params, deterministic for a given seed.

    Failing environments that violate the identity's declared constraints are
    exploratory data (the identity makes no claim there) and are reported
    separately rather than counted as failures.
    """
    if lo > hi:
        raise ValueError(f"empty sample range {lo}..{hi}")
    started = time.perf_counter()
    rng = random.Random(seed)
    compiled = _Compiled(ident)
    failures: list[Failure] = []
    exploratory: list[Failure] = []
    vals = [0] * (len(ident.params) + 1)
    for _ in range(trials):
        point = [rng.randint(lo, hi) for _ in ident.params]
        vals[: len(ident.params)] = point
        admissible = compiled.admissible(vals)
        lhs, rhs = compiled.evaluate(vals)
        if lhs != rhs:
            failure = Failure(dict(zip(ident.params, point)), lhs, rhs)
            (failures if admissible else exploratory).append(failure)
    elapsed = int((time.perf_counter() - started) * 1000)
    grid = {p: (lo, hi) for p in ident.params}
    return VerificationReport(
        ident.name, grid, trials, failures, elapsed, exploratory=exploratory, seed=seed, trials=trials
    )
