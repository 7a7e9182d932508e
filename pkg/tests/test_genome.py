import math

import pytest
from hypothesis import given, strategies as st

from evofuzz.core import NULL, ContractViolation, Individual, Kind, MethodSignature, Value, ValueType, parse_type
from evofuzz.core import validate_individual, value_is_valid, wrap_int
from evofuzz.genome import (
    ARRAY_OPS,
    LONG_STRING_LENGTH,
    MAX_ARRAY_LENGTH,
    MAX_DELTA,
    MAX_STRING_LENGTH,
    SPECIAL_CHARS,
    CrossoverKind,
    Rng,
    clone_individual,
    crossover,
    inner_single_point,
    inner_two_points,
    inner_uniform,
    mutate_individual,
    mutate_value,
    operators_for,
    random_individual,
    random_value,
    same_content,
)
from oracles import signatures, value_types

I8 = ValueType(Kind.BYTE)
I32 = ValueType(Kind.INTEGER)
STR = ValueType(Kind.STRING)
CHAR = ValueType(Kind.CHAR)


class ScriptedRng(Rng):
    """Returns scripted values for the first ``randint`` calls, then behaves normally."""

    def __init__(self, ints, seed=0):
        super().__init__(seed)
        self.script = list(ints)

    def randint(self, a, b):
        if self.script:
            v = self.script.pop(0)
            assert a <= v <= b
            return v
        return super().randint(a, b)


def test_rng_is_deterministic_and_counts_ids():
    a, b = Rng(5), Rng(5)
    assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
    assert Rng(5, stream=1).random() != Rng(5).random()
    assert [a.new_id(), a.new_id()] == [1, 2]


def test_random_generation_respects_documented_ranges():
    rng = Rng(1)
    for _ in range(500):
        s = random_value(STR, rng)
        assert s.is_null or len(s.payload) <= MAX_STRING_LENGTH
        arr = random_value(parse_type("array<i8>"), rng)
        assert arr.is_null or len(arr.payload) <= MAX_ARRAY_LENGTH
        assert not random_value(I8, rng).is_null


def test_null_rate_is_about_five_percent():
    rng = Rng(2)
    nulls = sum(random_value(STR, rng).is_null for _ in range(20000))
    assert abs(nulls / 20000 - 0.05) < 0.01


@pytest.mark.parametrize("op,expected", [("zero", 0), ("one", 1), ("max", 127), ("min", -128)])
def test_fixed_integer_operators(op, expected):
    assert mutate_value(Value(I8, 42), Rng(0), op).payload == expected


def test_integer_delta_wraps_instead_of_saturating():
    rng = Rng(3)
    for _ in range(200):
        out = mutate_value(Value(I8, 127), rng, "add").payload
        assert out in {wrap_int(127 + d, Kind.BYTE) for d in range(1, MAX_DELTA + 1)}
        assert out < 0
    assert wrap_int(127 + 1, Kind.BYTE) == -128


def test_char_operators_stay_scalar():
    rng = Rng(4)
    for op in operators_for(CHAR):
        for start in ("\x00", "퟿", "\U0010ffff", "a"):
            v = mutate_value(Value(CHAR, start), rng, op)
            assert value_is_valid(v, CHAR), (op, start, v)
    assert mutate_value(Value(CHAR, "a"), rng, "special").payload in SPECIAL_CHARS


def test_string_operators():
    rng = Rng(5)
    s = Value(STR, "hello world")
    assert len(mutate_value(s, rng, "long").payload) == LONG_STRING_LENGTH
    assert mutate_value(s, rng, "empty").payload == ""
    assert mutate_value(s, rng, "null").is_null
    assert len(mutate_value(s, rng, "truncate").payload) < len(s.payload)
    assert len(mutate_value(s, rng, "insert").payload) > len(s.payload)
    assert len(mutate_value(s, rng, "remove").payload) < len(s.payload)
    assert any(c in SPECIAL_CHARS for c in mutate_value(s, rng, "special").payload)
    # operators also apply to a null string
    for op in operators_for(STR):
        assert value_is_valid(mutate_value(Value(STR, NULL), rng, op), STR)


def test_array_operators():
    t = parse_type("array<i32>")
    rng = Rng(6)
    arr = Value(t, tuple(Value(I32, i) for i in range(5)))
    assert mutate_value(arr, rng, "empty").payload == ()
    assert mutate_value(arr, rng, "null").is_null
    for _ in range(50):
        assert 1 <= len(mutate_value(arr, rng, "add").payload) - 5 <= 4
        assert len(mutate_value(arr, rng, "remove").payload) < 5
        changed = mutate_value(arr, rng, "mutate").payload
        assert len(changed) == 5 and sum(a != b for a, b in zip(changed, arr.payload)) <= 1
    assert set(ARRAY_OPS) == set(operators_for(t))


def test_object_operators():
    t = parse_type("object:P{a:i32,b:string,c:array<i8>}")
    rng = Rng(7)
    obj = random_value(t, rng)
    while obj.is_null:
        obj = random_value(t, rng)
    assert mutate_value(obj, rng, "null").is_null
    assert value_is_valid(mutate_value(obj, rng, "construct"), t)
    for _ in range(50):
        m = mutate_value(obj, rng, "mutate")
        assert sum(not same_content([x], [y]) for x, y in zip(m.payload, obj.payload)) <= 1
    assert value_is_valid(mutate_value(Value(t, NULL), rng, "mutate"), t)


def test_unknown_operator_is_a_contract_violation():
    with pytest.raises(ContractViolation):
        mutate_value(Value(STR, "x"), Rng(0), "explode")


@given(value_types, st.integers(0, 2**32))
def test_every_operator_preserves_the_type(t, seed):
    rng = Rng(seed)
    v = random_value(t, rng)
    for op in operators_for(t):
        assert value_is_valid(mutate_value(v, rng, op), t), op


@given(signatures, st.integers(0, 2**32))
def test_mutate_individual_changes_at_most_one_parameter(sig, seed):
    rng = Rng(seed)
    ind = random_individual(sig, rng)
    child = mutate_individual(ind, rng)
    assert validate_individual(child, sig)
    assert child.id != ind.id
    diff = sum(not same_content([a], [b]) for a, b in zip(child.inputs, ind.inputs))
    assert diff <= 1


def test_zero_parameter_mutation_is_a_fresh_clone():
    rng = Rng(0)
    ind = Individual(4, (), rng.new_id())
    child = mutate_individual(ind, rng)
    assert child.inputs == () and child.method_id == 4 and child.id != ind.id
    assert clone_individual(ind, rng).id not in (ind.id, child.id)


# -- crossover ----------------------------------------------------------------------

def test_inner_single_point_on_strings():
    a, b = Value(STR, "aa"), Value(STR, "bb")
    assert inner_single_point(a, b, Rng(0), cut=1).payload == "ab"
    assert inner_single_point(a, b, Rng(0), cut=0).payload == "bb"
    # tail beyond the shorter parent comes from the second
    assert inner_single_point(Value(STR, "ab"), Value(STR, "xyz"), Rng(0), cut=2).payload == "abz"


def test_inner_crossover_on_bits():
    a, b = Value(I8, -1), Value(I8, 0)  # 11111111 and 00000000
    assert inner_single_point(a, b, Rng(0), cut=8).payload == -1
    assert inner_single_point(a, b, Rng(0), cut=0).payload == 0
    assert inner_single_point(a, b, Rng(0), cut=4).payload == wrap_int(0b11110000, Kind.BYTE)
    assert inner_two_points(a, b, Rng(0), cuts=(2, 6)).payload == 0b00111100


def test_inner_two_points_on_sequences():
    a, b = Value(STR, "AAAAAA"), Value(STR, "bbbbbb")
    assert inner_two_points(a, b, Rng(0), cuts=(2, 4)).payload == "bbAAbb"
    assert inner_two_points(a, b, Rng(0), cuts=(3, 3)).payload == "bbbbbb"


def test_inner_operators_with_null_take_one_parent_whole():
    a, b = Value(STR, NULL), Value(STR, "xyz")
    for op in (inner_single_point, inner_two_points, inner_uniform):
        seen = {op(a, b, Rng(s)).payload for s in range(40)}
        assert seen == {NULL, "xyz"}


def test_single_point_example():
    sig = MethodSignature(0, "m", (STR, I32, I32))
    p1 = Individual(0, (Value(STR, "aa"), Value(I32, 1), Value(I32, 2)), 1)
    p2 = Individual(0, (Value(STR, "bb"), Value(I32, 9), Value(I32, 8)), 2)
    # outer cut 0, inner cut 1 on the string at the boundary
    child = crossover(p1, p2, ScriptedRng((0, 1)), CrossoverKind.SINGLE_POINT)
    assert validate_individual(child, sig)
    assert [v.payload for v in child.inputs] == ["ab", 9, 8]
    # outer cut 1: string from p1, boundary param 1 is crossed bitwise, param 2 from p2
    child = crossover(p1, p2, ScriptedRng((1, 32)), CrossoverKind.SINGLE_POINT)
    assert [v.payload for v in child.inputs] == ["aa", 1, 8]


def test_two_points_with_equal_cuts_is_second_parent_except_boundary():
    rng = Rng(11)
    sig = MethodSignature(0, "m", (STR, I32, parse_type("array<i8>"), CHAR))
    for _ in range(300):
        p1, p2 = random_individual(sig, rng), random_individual(sig, rng)
        c = rng.randint(0, 4)
        child = crossover(p1, p2, ScriptedRng((c, c), seed=rng.random()), CrossoverKind.TWO_POINTS)
        differing = [i for i in range(4) if not same_content([child.inputs[i]], [p2.inputs[i]])]
        assert differing in ([], [c])


def test_two_points_takes_inner_part_from_first_parent():
    ints = (I32,) * 5
    p1 = Individual(0, tuple(Value(I32, 1) for _ in ints), 1)
    p2 = Individual(0, tuple(Value(I32, 2) for _ in ints), 2)
    # cuts 1 and 4; inner cut 0 on both boundary params hands each its trailing parent
    child = crossover(p1, p2, ScriptedRng((1, 4, 0, 0)), CrossoverKind.TWO_POINTS)
    assert [v.payload for v in child.inputs] == [2, 1, 1, 1, 2]


def test_uniform_takes_each_parameter_from_a_parent():
    rng = Rng(12)
    sig = MethodSignature(0, "m", (STR,) * 6)
    for _ in range(200):
        p1, p2 = random_individual(sig, rng), random_individual(sig, rng)
        child = crossover(p1, p2, rng, CrossoverKind.UNIFORM)
        mixed = [i for i, v in enumerate(child.inputs)
                 if not same_content([v], [p1.inputs[i]]) and not same_content([v], [p2.inputs[i]])]
        assert len(mixed) <= 1


@given(signatures, st.integers(0, 2**32), st.sampled_from(list(CrossoverKind)))
def test_crossover_output_is_valid(sig, seed, kind):
    rng = Rng(seed)
    p1, p2 = random_individual(sig, rng), random_individual(sig, rng)
    child = crossover(p1, p2, rng, kind)
    assert validate_individual(child, sig)
    assert child.id not in (p1.id, p2.id)


@given(signatures, st.integers(0, 2**32), st.sampled_from(list(CrossoverKind)))
def test_crossover_of_equal_parents_preserves_content(sig, seed, kind):
    rng = Rng(seed)
    p = random_individual(sig, rng)
    twin = clone_individual(p, rng)
    assert same_content(crossover(p, twin, rng, kind).inputs, p.inputs)


def test_crossover_kind_is_uniform_when_unspecified():
    sig = MethodSignature(0, "m", (I32, I32))
    rng = Rng(13)
    p1, p2 = random_individual(sig, rng), random_individual(sig, rng)
    counts = {k: 0 for k in CrossoverKind}
    real_choice = rng.choice

    def spy(seq):
        got = real_choice(seq)
        if isinstance(got, CrossoverKind):
            counts[got] += 1
        return got

    rng.choice = spy
    for _ in range(3000):
        crossover(p1, p2, rng)
    assert all(abs(c / 3000 - 1 / 3) < 0.04 for c in counts.values())


def test_crossover_rejects_mismatched_parents():
    rng = Rng(0)
    a = Individual(0, (Value(I8, 1),), 1)
    with pytest.raises(ContractViolation):
        crossover(a, Individual(1, (Value(I8, 1),), 2), rng)
    with pytest.raises(ContractViolation):
        crossover(a, Individual(0, (), 2), rng)


def test_same_content_treats_nan_as_equal():
    f = ValueType(Kind.DOUBLE)
    assert same_content([Value(f, math.nan)], [Value(f, math.nan)])
    assert not same_content([Value(f, 0.0)], [Value(f, math.nan)])
    assert not same_content([Value(STR, NULL)], [Value(STR, "")])
