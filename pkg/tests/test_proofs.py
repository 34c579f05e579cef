import dataclasses

import pytest

from binomid.dsl import parse_linexpr
from binomid.proofs import check_step, run_proof_script
from binomid.resexpr import parse_resexpr

from conftest import comb_oracle


def small_instances(script, hi=2):
    return script.instances({p: (0, hi) for p in script.params})


def test_scripts_present(catalog):
    assert set(catalog.scripts) == {"proof-eq1", "proof-eq2"}
    for script in catalog.scripts.values():
        kinds = [s.kind for s in script.steps]
        assert kinds[0] == "AlgebraicRewrite"
        assert "IntegralRep" in kinds
        assert "GeometricCollapse" in kinds
        assert "ResidueEval" in kinds
        assert "BinomExpand" in kinds
        assert "CollectResidues" in kinds
        assert kinds[-1] == "Recognize"


def test_proof_eq1_small_grid(catalog):
    script = catalog.script("proof-eq1")
    report = run_proof_script(script, small_instances(script), window=2)
    assert report.ok, report.failures[:3]
    assert all(n == report.instances for n in report.step_passes)


def test_proof_eq2_small_grid(catalog):
    script = catalog.script("proof-eq2")
    report = run_proof_script(script, small_instances(script), window=2)
    assert report.ok, report.failures[:3]
    assert all(n == report.instances for n in report.step_passes)


def test_instance_constraints_filter(catalog):
    script = catalog.script("proof-eq1")
    envs = script.instances({p: (0, 1) for p in script.params})
    # c+d-b >= 0 must hold everywhere
    for env in envs:
        assert env["c"] + env["d"] - env["b"] >= 0
    assert {"b": 1, "c": 0, "d": 0, "n": 0, "p": 0} not in envs


def test_recognize_maps_are_the_stated_ones(catalog):
    eq1_map = dict(catalog.script("proof-eq1").steps[-1].mapping)
    assert eq1_map == {
        "a": parse_linexpr("c+d-b"),
        "b": parse_linexpr("p"),
        "c": parse_linexpr("0"),
        "d": parse_linexpr("c+d+p-n"),
        "m": parse_linexpr("b-d"),
    }
    eq2_map = dict(catalog.script("proof-eq2").steps[-1].mapping)
    assert eq2_map == {
        "a": parse_linexpr("a-c"),
        "b": parse_linexpr("n-a"),
        "c": parse_linexpr("0"),
        "d": parse_linexpr("d-p-a"),
        "m": parse_linexpr("c+d-a"),
    }
    for script in catalog.scripts.values():
        assert script.target.name == "chu2gen"


def test_check_step_trivial_equality(catalog):
    # a step whose before and after coincide syntactically passes
    script = catalog.script("proof-eq1")
    idx = 2
    trivial = dataclasses.replace(
        script.steps[idx],
        after=script.steps[idx].before,
        after_text=script.steps[idx].before_text,
    )
    steps = list(script.steps)
    steps[idx] = trivial
    modified = dataclasses.replace(script, steps=tuple(steps))
    env = {"b": 1, "c": 1, "d": 1, "n": 2, "p": 1}
    assert check_step(modified, idx, env, window=2).ok


def test_collect_residues_example(catalog):
    # the double-residue expression equals the collected sum at this instance
    env = {"b": 2, "c": 1, "d": 1, "n": 2, "p": 1}
    a = env["c"] + env["d"] - env["b"]
    script = catalog.script("proof-eq1")
    assert check_step(script, 5, env, window=2).ok  # CollectResidues
    assert check_step(script, 6, env, window=2).ok  # symmetry to C(b-d+j, a+b+p-n)
    collected = sum(
        comb_oracle(a, j)
        * comb_oracle(env["p"], env["c"] - a + j)
        * comb_oracle(env["b"] - env["d"] + j, a + env["b"] + env["p"] - env["n"])
        for j in range(0, a + 1)
    )
    lhs = sum(
        comb_oracle(env["c"] + env["d"] - env["b"], k - env["p"])
        * comb_oracle(env["b"], env["n"] - k)
        * comb_oracle(k, env["c"])
        * comb_oracle(env["n"] - k, env["d"])
        for k in range(0, env["n"] + 1)
    )
    assert comb_oracle(env["b"], env["d"]) * collected == lhs


def test_binom_expand_step(catalog):
    script = catalog.script("proof-eq1")
    env = {"b": 0, "c": 1, "d": 2, "n": 1, "p": 0}  # a = 3
    assert check_step(script, 4, env, window=2).ok


def test_carried_multiplier_invariant_eq1(catalog):
    # lhs of the subject equals C(b,d) times the simplified sum
    import itertools

    for b, c, d, n, p in itertools.product(range(3), repeat=5):
        a = c + d - b
        if a < 0:
            continue
        lhs = sum(
            comb_oracle(a, k - p) * comb_oracle(b, n - k) * comb_oracle(k, c) * comb_oracle(n - k, d)
            for k in range(0, n + 1)
        )
        simplified = sum(
            comb_oracle(a, k - p) * comb_oracle(k, c) * comb_oracle(b - d, n - d - k)
            for k in range(0, n + 1)
        )
        assert lhs == comb_oracle(b, d) * simplified


def test_carried_multiplier_invariant_eq2(catalog):
    import itertools

    for a, c, d, n, p in itertools.product(range(3), repeat=5):
        if a - c < 0:
            continue
        b = c + d - a
        lhs = sum(
            comb_oracle(a, k) * comb_oracle(c + d - a, p + k) * comb_oracle(k, c) * comb_oracle(n - k, d)
            for k in range(0, a + 1)
        )
        simplified = sum(
            comb_oracle(a - c, k - c) * comb_oracle(b, p + k) * comb_oracle(n - k, d)
            for k in range(0, a + 1)
        )
        assert lhs == comb_oracle(a, c) * simplified


def mutate_step(script, idx):
    """Corrupt one step's expression; the run must fail exactly there."""
    steps = list(script.steps)
    step = steps[idx]
    if step.kind == "Recognize":
        mapping = dict(step.mapping)
        mapping["d"] = mapping["d"] + parse_linexpr("1")
        steps[idx] = dataclasses.replace(step, mapping=tuple(mapping.items()))
    else:
        text = step.after_text + "+1"
        steps[idx] = dataclasses.replace(step, after_text=text, after=parse_resexpr(text))
    return dataclasses.replace(script, steps=tuple(steps))


@pytest.mark.parametrize("script_name", ["proof-eq1", "proof-eq2"])
def test_mutation_fails_at_exactly_that_step(catalog, script_name):
    script = catalog.script(script_name)
    env = {p: 2 for p in script.params}
    assert script.admissible(env)
    for idx in range(len(script.steps)):
        mutated = mutate_step(script, idx)
        report = run_proof_script(mutated, [env], window=2)
        assert not report.ok, f"mutated step {idx} not caught"
        assert report.failures[0].step == idx, (
            f"mutated step {idx}, failed at {report.failures[0].step}: "
            f"{report.failures[0].message}"
        )


def test_run_is_deterministic_across_jobs(catalog):
    script = catalog.script("proof-eq1")
    envs = small_instances(script, hi=1)
    a = run_proof_script(script, envs, window=2, jobs=1)
    b = run_proof_script(script, envs, window=2, jobs=4)
    assert a.canonical_json() == b.canonical_json()


def test_window_doubling_agrees(catalog):
    script = catalog.script("proof-eq2")
    env = {"a": 2, "c": 1, "d": 2, "n": 2, "p": 1}
    for idx in range(len(script.steps)):
        assert check_step(script, idx, env, window=2).ok
        assert check_step(script, idx, env, window=4).ok


def test_trace_callback_invoked(catalog):
    script = catalog.script("proof-eq1")
    env = {"b": 1, "c": 1, "d": 0, "n": 1, "p": 0}
    labels = []
    run_proof_script(script, [env], window=2, trace=lambda label, s: labels.append(label))
    assert any("before" in l for l in labels)
    assert any("after" in l for l in labels)


def test_report_json_shape(catalog):
    script = catalog.script("proof-eq1")
    report = run_proof_script(script, small_instances(script, hi=1), window=2)
    data = report.to_json_dict()
    assert set(data) == {"script", "window", "instances", "steps", "failures", "elapsed_ms"}
    assert [s["kind"] for s in data["steps"]] == [s.kind for s in script.steps]


def test_loader_rejects_duplicate_adjacent_expression_mismatch(catalog):
    # loader derives each before from the previous after; mutating the data
    # between steps therefore cannot produce silently inconsistent scripts
    script = catalog.script("proof-eq1")
    for i in range(1, len(script.steps)):
        assert script.steps[i].before is script.steps[i - 1].after or script.steps[i].before_text == script.steps[i - 1].after_text
