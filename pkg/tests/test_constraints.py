from __future__ import annotations

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from theorembench.constraints import (
    Interval,
    KeyedStream,
    Membership,
    ParamBinding,
    PredicateConj,
    SamplerConfig,
    UnknownVariable,
    UnparseableConstraint,
    check_params,
    effective_constraints,
    is_prime,
    param_violations,
    parse_constraint,
    sample_binding,
    sample_params,
    splitmix64_sequence,
)
from theorembench.templates import parse_meta_template

from test_templates import minimal_payload


# published reference outputs of the splitmix64 generator
SPLITMIX64_FROM_ZERO = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)
SPLITMIX64_FROM_1234567 = (0x599ED017FB08FC85, 0x2C73F08458540FA5, 0x883EBCE5A3F27C77)


def binding(assignments, template_id="unit_test_template_001", seed=0, index=0):
    return ParamBinding(assignments=assignments, seed=seed, template_id=template_id, index=index)


def test_splitmix64_known_answer_vectors():
    assert tuple(splitmix64_sequence(0, 3)) == SPLITMIX64_FROM_ZERO
    assert tuple(splitmix64_sequence(1234567, 3)) == SPLITMIX64_FROM_1234567


def test_keyed_stream_is_deterministic():
    a = [KeyedStream("t", 7, 0, "n").next_u64() for _ in range(5)]
    b = [KeyedStream("t", 7, 0, "n").next_u64() for _ in range(5)]
    assert a == b


def test_keyed_stream_distinct_keys_diverge():
    assert KeyedStream("t", 7, 0, "n").next_u64() != KeyedStream("t", 7, 1, "n").next_u64()
    assert KeyedStream("t", 7, 0, "n").next_u64() != KeyedStream("t", 8, 0, "n").next_u64()
    assert KeyedStream("t", 7, 0, "n").next_u64() != KeyedStream("u", 7, 0, "n").next_u64()


@given(st.integers(min_value=1, max_value=10**9), st.integers(min_value=0, max_value=2**32))
def test_below_stays_in_range(bound, salt):
    stream = KeyedStream("range", salt)
    for _ in range(5):
        assert 0 <= stream.below(bound) < bound


def test_below_rejects_nonpositive_bound():
    with pytest.raises(ValueError):
        KeyedStream("x", 1).below(0)


def test_is_prime_agrees_with_sympy():
    for n in range(-3, 2000):
        assert is_prime(n) == sympy.isprime(n), n
    for n in (2**61 - 1, 2**61 + 15, 10**18 + 9, 10**18 + 7):
        assert is_prime(n) == sympy.isprime(n), n


def test_parse_membership():
    c = parse_constraint("n in [5, 7, 11, 13]")
    assert isinstance(c, Membership)
    assert c.values == (5, 7, 11, 13)
    assert c.contains(7) and not c.contains(6)


def test_parse_membership_deduplicates():
    c = parse_constraint("n in [3, 3, 5]")
    assert c.values == (3, 5)


def test_parse_interval_from_symbol():
    c = parse_constraint("$n \\in [5, 400]$")
    assert isinstance(c, Interval)
    assert (c.lo, c.hi) == (5, 400)
    assert c.contains(5) and c.contains(400) and not c.contains(401)


def test_parse_interval_unicode_symbol():
    c = parse_constraint("m ∈ [3, 7]")
    assert isinstance(c, Interval)
    assert (c.lo, c.hi) == (3, 7)


def test_symbol_with_more_than_two_values_is_membership():
    c = parse_constraint("n ∈ [3, 5, 8]")
    assert isinstance(c, Membership)
    assert c.values == (3, 5, 8)


def test_word_in_with_two_values_is_membership():
    # "in [4, 30]" lists a pool; only the symbol form means an interval
    c = parse_constraint("t in [4, 30]")
    assert isinstance(c, Membership)
    assert c.contains(4) and not c.contains(17)


def test_parse_chained_inequality():
    c = parse_constraint("10 <= k <= 99")
    assert isinstance(c, Interval)
    assert c.contains(10) and c.contains(99) and not c.contains(100)
    strict = parse_constraint("10 < k <= 99")
    assert not strict.contains(10) and strict.contains(11)


def test_parse_prime_conjunction():
    c = parse_constraint("n is a prime number, and $n \\in [5, 400]$ to ensure feasibility")
    assert isinstance(c, PredicateConj)
    assert c.contains(5) and c.contains(181) and c.contains(379)
    assert not c.contains(4) and not c.contains(400)  # 400 in range but composite


def test_interval_is_integer_only():
    from fractions import Fraction

    c = parse_constraint("n ∈ [3, 7]")
    assert not c.contains(Fraction(7, 2))
    assert c.contains(Fraction(4, 1))


@pytest.mark.parametrize(
    "text",
    ["n should feel large", "", "   ", "n in []", "n ∈ [7, 3]", "9 < k < 5"],
)
def test_unparseable_or_empty_constraints(text):
    with pytest.raises(UnparseableConstraint):
        parse_constraint(text)


def test_effective_constraints_cayley(cayley_template):
    table = effective_constraints(cayley_template)
    assert set(table) == {"n"}
    pools = [c for c in table["n"] if isinstance(c, Membership)]
    assert len(pools) == 1
    assert len(pools[0].values) == 73
    assert pools[0].values[0] == 5 and pools[0].values[-1] == 379
    assert all(is_prime(v) for v in pools[0].values)
    assert any(isinstance(c, PredicateConj) for c in table["n"])


def test_param_violations(cayley_template):
    assert param_violations(binding({"n": 181}, cayley_template.template_id), cayley_template) == []
    bad = param_violations(binding({"n": 180}, cayley_template.template_id), cayley_template)
    assert bad and all(isinstance(v, str) for v in bad)
    assert check_params(binding({"n": 181}), cayley_template)
    assert not check_params(binding({"n": 4}), cayley_template)


def test_param_violations_unknown_variable(cayley_template):
    with pytest.raises(UnknownVariable):
        param_violations(binding({"n": 181, "zz": 1}), cayley_template)


def test_sample_binding_deterministic(cayley_template):
    a = sample_binding(cayley_template, seed=7, index=0)
    b = sample_binding(cayley_template, seed=7, index=0)
    assert a == b
    assert a.template_id == cayley_template.template_id


def test_sample_binding_varies_with_index(cayley_template):
    varied = {
        tuple(sorted(sample_binding(cayley_template, seed=7, index=i).assignments.items()))
        for i in range(12)
    }
    assert len(varied) > 1


def test_sampled_values_satisfy_constraints(suite_templates):
    for t in suite_templates:
        for b in sample_params(t, SamplerConfig(seed=3, instances_per_template=8)):
            assert param_violations(b, t) == [], (t.template_id, b.assignments)


def test_sample_params_dedupes_repeated_bindings(suite_templates):
    # pools of 10 values cannot yield 40 distinct draws
    small = [t for t in suite_templates if t.template_id == "number_theory_triangular_number_001"][0]
    bindings = sample_params(small, SamplerConfig(seed=1, instances_per_template=40))
    keys = [b.key() for b in bindings]
    assert len(keys) == len(set(keys))
    assert 0 < len(keys) <= 10


def test_sample_params_is_reproducible(suite_templates):
    t = suite_templates[0]
    first = sample_params(t, SamplerConfig(seed=7, instances_per_template=10))
    again = sample_params(t, SamplerConfig(seed=7, instances_per_template=10))
    assert [b.assignments for b in first] == [b.assignments for b in again]
    assert [b.index for b in first] == [b.index for b in again]


def test_sample_binding_rejects_unsamplable_template():
    payload = minimal_payload()
    payload["param_definition"][0]["var_constraint"] = "n is pleasingly round"
    t = parse_meta_template(payload)
    with pytest.raises(UnparseableConstraint):
        sample_binding(t, seed=1, index=0)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=2**31))
def test_prime_sampling_always_prime(seed):
    payload = minimal_payload()
    payload["param_definition"][0]["var_constraint"] = "n is a prime number, and n ∈ [5, 400]"
    payload["validation_rule"][0]["rule"] = "n ∈ [5, 400]"
    t = parse_meta_template(payload)
    b = sample_binding(t, seed=seed, index=0)
    assert is_prime(b.assignments["n"])
    assert 5 <= b.assignments["n"] <= 400
