"""Machine-checkable proof scripts for the integral-representation proofs.

A script is an ordered list of expression states with step kinds; adjacent
states share an expression (the `after` of one step is the `before` of the
next). Checking a step means evaluating both states at a concrete parameter
instance inside a truncation window and comparing coefficient tables on the
shared accuracy region. The final Recognize step certifies that the last
state is a substitution instance of a base identity and that the substituted
closed form, times the carried multiplier, reproduces the subject identity's
right-hand side.
"""
from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .dsl import parse_linexpr, parse_term
from .model import (
    Identity,
    LinExpr,
    Substitution,
    Term,
    canonicalize,
    canonicalize_term,
    eval_identity,
    eval_side,
    eval_term,
    substitute,
)
from .resexpr import (
    EvalContext,
    RNode,
    SupportBoundError,
    evaluate,
    parse_resexpr,
    split_carried_sum,
)
from .series import (
    DegenerateWindowError,
    DivergentSumError,
    LaurentSeries,
    NonUnitError,
    WindowError,
    first_difference,
)

SERIES_VARS = ("x", "y", "z")

ENGINE_ERRORS = (
    WindowError,
    NonUnitError,
    DivergentSumError,
    SupportBoundError,
    ValueError,
)


@dataclass(frozen=True)
class ProofStep:
    kind: str
    note: str
    before_text: str
    after_text: str
    before: RNode
    after: Optional[RNode]
    target: Optional[str] = None
    mapping: tuple[tuple[str, LinExpr], ...] = ()


@dataclass(frozen=True)
class ProofScript:
    name: str
    subject: Identity
    target: Identity
    params: tuple[str, ...]
    aliases: tuple[tuple[str, LinExpr], ...]
    constraints: tuple[LinExpr, ...]
    carried: Term
    steps: tuple[ProofStep, ...]
    budget_hint: LinExpr

    def alias_map(self) -> dict[str, LinExpr]:
        return dict(self.aliases)

    def instance_env(self, env: Mapping[str, int]) -> dict[str, int]:
        full = {p: env[p] for p in self.params}
        for name, expr in self.aliases:
            full[name] = expr.evaluate(full)
        return full

    def admissible(self, env: Mapping[str, int]) -> bool:
        full = self.instance_env(env)
        return all(c.evaluate(full) >= 0 for c in self.constraints)

    def instances(self, ranges: Mapping[str, tuple[int, int]]) -> list[dict[str, int]]:
        missing = [p for p in self.params if p not in ranges]
        if missing:
            raise ValueError(f"ranges missing parameter(s) {', '.join(missing)}")
        spans = [range(ranges[p][0], ranges[p][1] + 1) for p in self.params]
        out = []
        for vals in itertools.product(*spans):
            env = dict(zip(self.params, vals))
            if self.admissible(env):
                out.append(env)
        return out


def load_script(data: dict, resolve: Callable[[str], Identity]) -> ProofScript:
    """Build a ProofScript from its data form; identity names are resolved
    through the catalog. Adjacent steps share an expression by construction:
    each step's before is the previous step's after."""
    aliases = tuple((k, parse_linexpr(v)) for k, v in data.get("aliases", {}).items())
    steps: list[ProofStep] = []
    previous_text = data["start"]
    previous = parse_resexpr(previous_text)
    for raw in data["steps"]:
        kind = raw["kind"]
        if kind == "Recognize":
            mapping = tuple((k, parse_linexpr(v)) for k, v in raw["map"].items())
            steps.append(
                ProofStep(kind, raw.get("note", ""), previous_text, "", previous, None,
                          target=raw["target"], mapping=mapping)
            )
            continue
        after_text = raw["after"]
        after = parse_resexpr(after_text)
        steps.append(ProofStep(kind, raw.get("note", ""), previous_text, after_text, previous, after))
        previous_text, previous = after_text, after
    return ProofScript(
        name=data["name"],
        subject=resolve(data["proves"]),
        target=resolve(data["steps"][-1]["target"]),
        params=tuple(data["params"]),
        aliases=aliases,
        constraints=tuple(parse_linexpr(c) for c in data.get("constraints", [])),
        carried=parse_term(data["carried"]),
        steps=tuple(steps),
        budget_hint=parse_linexpr(data["budget"]),
    )


def load_script_file(path, resolve: Callable[[str], Identity]) -> ProofScript:
    with open(path, "r", encoding="utf-8") as fh:
        return load_script(json.load(fh), resolve)


# ---------------------------------------------------------------------------
# Step checking


@dataclass(frozen=True)
class StepResult:
    ok: bool
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _context(script: ProofScript, env: Mapping[str, int], window: int) -> EvalContext:
    full = script.instance_env(env)
    m = script.budget_hint.evaluate(full) + window
    budget = {v: (-m, m) for v in SERIES_VARS}
    return EvalContext(SERIES_VARS, budget, max(window, 1), full, {})


def _difference_message(diff, vars) -> str:
    e, ca, cb = diff
    mono = "*".join(f"{v}^{x}" for v, x in zip(vars, e) if x != 0) or "1"
    return f"first differing coefficient at {mono}: {ca} vs {cb}"


def check_step(
    script: ProofScript,
    index: int,
    instance: Mapping[str, int],
    window: int = 2,
    trace: Optional[Callable[[str, LaurentSeries], None]] = None,
) -> StepResult:
    """Check one step of a script at one instance.

    Expression steps compare the before/after coefficient tables on the
    intersection of their accuracy windows (a degenerate intersection is an
    error, not a pass). The Recognize step checks the substitution into the
    target identity structurally and numerically.
    """
    ctx = _context(script, instance, window)
    return _check_step_in_context(script, index, ctx, trace)


def _check_step_in_context(
    script: ProofScript,
    index: int,
    ctx: EvalContext,
    trace: Optional[Callable[[str, LaurentSeries], None]] = None,
) -> StepResult:
    step = script.steps[index]
    if step.kind == "Recognize":
        return _check_recognize(script, step, ctx)
    try:
        before = evaluate(step.before, ctx)
        if trace:
            trace(f"step {index} before", before)
        after = evaluate(step.after, ctx)
        if trace:
            trace(f"step {index} after", after)
        diff = first_difference(before, after)
    except DegenerateWindowError as exc:
        raise WindowError(f"step {index} ({step.kind}): {exc}") from exc
    except ENGINE_ERRORS as exc:
        return StepResult(False, f"{type(exc).__name__}: {exc}")
    if diff is not None:
        return StepResult(False, _difference_message(diff, ctx.vars))
    if index == 0:
        # tie the script to its subject: the opening state is the identity's lhs
        subject_lhs = eval_side(script.subject.lhs, ctx.env)
        if before.constant_value() != subject_lhs:
            return StepResult(
                False,
                f"opening state {before.constant_value()} != subject lhs {subject_lhs}",
            )
    return StepResult(True)


def _check_recognize(script: ProofScript, step: ProofStep, ctx: EvalContext) -> StepResult:
    aliases = script.alias_map()
    try:
        carried, final_sum = split_carried_sum(step.before, aliases)
    except ValueError as exc:
        return StepResult(False, f"unrecognizable final state: {exc}")
    if canonicalize_term(carried) != canonicalize_term(script.carried):
        return StepResult(False, "carried multiplier does not match the script's")

    mapping = dict(step.mapping)
    missing = [p for p in script.target.params if p not in mapping]
    if missing:
        return StepResult(False, f"recognition map misses {missing}")
    sub = Substitution.of(mapping, script.params)
    specialized = substitute(script.target, sub, f"{script.target.name}-instance")

    # (i) the final sum is structurally the substituted target's lhs
    want = canonicalize(specialized).lhs
    got_ident = Identity("state", script.params, final_sum, Term(None, ()))
    got = canonicalize(got_ident).lhs
    if got != want:
        return StepResult(False, f"final sum is not the substituted {script.target.name} lhs")

    # (ii) substituted closed form times carried multiplier gives the subject rhs
    product = Term(None, specialized.rhs.factors + script.carried.factors)
    if eval_term(product, ctx.env) != eval_term(script.subject.rhs, ctx.env):
        return StepResult(False, "substituted rhs times carried multiplier != subject rhs")

    # close the argument numerically: premise instance and subject instance hold
    if not eval_identity(specialized, ctx.env).holds:
        return StepResult(False, f"substituted {script.target.name} fails at this instance")
    if not eval_identity(script.subject, ctx.env).holds:
        return StepResult(False, "subject identity fails at this instance")
    return StepResult(True)


# ---------------------------------------------------------------------------
# Whole-script runs


@dataclass(frozen=True)
class StepFailure:
    instance: dict[str, int]
    step: int
    kind: str
    message: str

    def as_json(self) -> dict:
        return {"instance": self.instance, "step": self.step, "kind": self.kind,
                "message": self.message}


@dataclass
class ProofReport:
    script: str
    window: int
    instances: int
    step_kinds: list[str]
    step_passes: list[int]
    failures: list[StepFailure] = field(default_factory=list)
    elapsed_ms: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json_dict(self, include_elapsed: bool = True) -> dict:
        out = {
            "script": self.script,
            "window": self.window,
            "instances": self.instances,
            "steps": [
                {"kind": k, "passes": n} for k, n in zip(self.step_kinds, self.step_passes)
            ],
            "failures": [f.as_json() for f in self.failures],
        }
        if include_elapsed:
            out["elapsed_ms"] = self.elapsed_ms
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(include_elapsed=False), sort_keys=True)


def _run_instance(script: ProofScript, env, window: int) -> tuple[int, Optional[StepFailure]]:
    """Number of steps passed, and the first failure if any."""
    ctx = _context(script, env, window)
    for i in range(len(script.steps)):
        try:
            result = _check_step_in_context(script, i, ctx)
        except WindowError as exc:
            raise WindowError(f"{script.name} at {env}: {exc}") from exc
        if not result.ok:
            return i, StepFailure(dict(env), i, script.steps[i].kind, result.message)
    return len(script.steps), None


def _script_worker(args):
    script, envs, window = args
    return [_run_instance(script, env, window) for env in envs]


def run_proof_script(
    script: ProofScript,
    instances,
    window: int = 2,
    jobs: int = 1,
    trace: Optional[Callable[[str, LaurentSeries], None]] = None,
) -> ProofReport:
    """Check every step of a script at every instance.

    Instances are independent; checking stops at the first failing step per
    instance and the report merges results in instance order.
    """
    started = time.perf_counter()
    instances = list(instances)
    if trace is not None:
        for env in instances:
            for i in range(len(script.steps)):
                check_step(script, i, env, window, trace=trace)
    if jobs <= 1 or len(instances) < 2 * jobs:
        results = [_run_instance(script, env, window) for env in instances]
    else:
        bounds = [len(instances) * i // jobs for i in range(jobs + 1)]
        tasks = [(script, instances[bounds[i] : bounds[i + 1]], window) for i in range(jobs)]
        results = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(_script_worker, tasks):
                results.extend(chunk)
    passes = [0] * len(script.steps)
    failures = []
    for steps_passed, failure in results:
        for i in range(steps_passed):
            passes[i] += 1
        if failure is not None:
            failures.append(failure)
    elapsed = int((time.perf_counter() - started) * 1000)
    return ProofReport(
        script.name,
        window,
        len(instances),
        [s.kind for s in script.steps],
        passes,
        failures,
        elapsed,
    )
