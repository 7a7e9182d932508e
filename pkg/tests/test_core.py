import json
import math

import pytest
from hypothesis import given, strategies as st

from evofuzz.core import (
    F32_MAX,
    NULL,
    CampaignConfig,
    Community,
    ContractViolation,
    FitnessKind,
    Individual,
    Kind,
    MethodSignature,
    Population,
    SelectionKind,
    ServiceDescriptor,
    Value,
    ValueType,
    decode_value,
    encode_value,
    format_type,
    int_range,
    parse_type,
    to_f32,
    validate_individual,
    value_is_valid,
    wrap_int,
)
from evofuzz.genome import Rng, random_value, same_content
from oracles import value_types

I8 = ValueType(Kind.BYTE)
STR = ValueType(Kind.STRING)


@pytest.mark.parametrize("text", [
    "bool", "i8", "i16", "i32", "i64", "char", "f32", "f64", "string",
    "array<i8>", "array<array<string>>", "object{a:i32,b:string}",
    "object:Pair{a:i32,b:array<char>}", "object{}",
])
def test_type_expression_round_trip(text):
    assert format_type(parse_type(text)) == text


def test_type_expression_tolerates_whitespace():
    assert parse_type(" object : P { a : i32 , b : array< i8 > } ") == parse_type("object:P{a:i32,b:array<i8>}")


@pytest.mark.parametrize("bad", ["", "int", "array<>", "array<i8", "object{a:i32,a:i8}", "i8 i8", "object{a}"])
def test_bad_type_expressions_are_rejected(bad):
    with pytest.raises((ValueError, ContractViolation)):
        parse_type(bad)


@given(value_types)
def test_generated_types_round_trip(t):
    assert parse_type(format_type(t)) == t


@pytest.mark.parametrize("kind,v,expected", [
    (Kind.BYTE, 128, -128), (Kind.BYTE, -129, 127), (Kind.BYTE, 127 + 1, -128),
    (Kind.SHORT, 2**15, -2**15), (Kind.INTEGER, 2**32 + 5, 5), (Kind.LONG, -2**63 - 1, 2**63 - 1),
])
def test_wrap_int_is_twos_complement(kind, v, expected):
    assert wrap_int(v, kind) == expected


@given(st.sampled_from([Kind.BYTE, Kind.SHORT, Kind.INTEGER, Kind.LONG]), st.integers())
def test_wrap_int_lands_in_range_and_is_congruent(kind, v):
    lo, hi = int_range(kind)
    w = wrap_int(v, kind)
    assert lo <= w <= hi
    assert (w - v) % (hi - lo + 1) == 0


def test_to_f32_rounds_and_overflows():
    assert to_f32(0.1) != 0.1
    assert to_f32(to_f32(0.1)) == to_f32(0.1)
    assert to_f32(F32_MAX) == F32_MAX
    assert to_f32(1e39) == math.inf and to_f32(-1e39) == -math.inf
    assert math.isnan(to_f32(math.nan))


def test_value_validity_rules():
    assert value_is_valid(Value(I8, 5), I8)
    assert not value_is_valid(Value(I8, 200), I8)
    assert not value_is_valid(Value(I8, True), I8)
    assert not value_is_valid(Value(I8, NULL), I8)  # primitives are never null
    assert value_is_valid(Value(STR, NULL), STR)
    assert not value_is_valid(Value(STR, "a\ud800"), STR)
    ch = ValueType(Kind.CHAR)
    assert value_is_valid(Value(ch, "\U0010ffff"), ch)
    assert not value_is_valid(Value(ch, "ab"), ch)
    f32 = ValueType(Kind.FLOAT)
    assert value_is_valid(Value(f32, to_f32(0.1)), f32)
    assert not value_is_valid(Value(f32, 0.1), f32)
    arr = parse_type("array<i8>")
    assert value_is_valid(Value(arr, (Value(I8, 1),)), arr)
    assert not value_is_valid(Value(arr, (Value(STR, "x"),)), arr)
    assert not value_is_valid(Value(I8, 1), STR)


@given(value_types, st.integers(0, 2**32))
def test_random_values_are_valid_and_survive_encoding(t, seed):
    v = random_value(t, Rng(seed))
    assert value_is_valid(v, t)
    wire = json.loads(json.dumps(encode_value(v)))
    back = decode_value(wire)
    assert back.type == t
    assert same_content([back], [v])


def test_special_floats_encode_as_words():
    f64 = ValueType(Kind.DOUBLE)
    assert encode_value(Value(f64, math.inf))["v"] == "Infinity"
    assert encode_value(Value(f64, -math.inf))["v"] == "-Infinity"
    assert encode_value(Value(f64, math.nan))["v"] == "NaN"
    assert math.isnan(decode_value({"t": "f64", "v": "NaN"}).payload)
    assert encode_value(Value(STR, NULL)) == {"t": "string", "v": None}


@pytest.mark.parametrize("obj", [
    {"t": "i8", "v": 300}, {"t": "i8", "v": None}, {"t": "bool", "v": 1}, {"t": "char", "v": "ab"},
    {"t": "object{a:i8}", "v": {"b": 1}}, {"t": "array<i8>", "v": 3}, {"t": "f64", "v": "inf"},
])
def test_malformed_payloads_are_rejected(obj):
    with pytest.raises(ValueError):
        decode_value(obj)


def test_descriptor_round_trip_and_lookup():
    svc = ServiceDescriptor("svc", (MethodSignature(0, "a", (I8,)), MethodSignature(3, "b", ())))
    assert ServiceDescriptor.from_json(json.loads(json.dumps(svc.to_json()))) == svc
    assert svc.method(3).name == "b"
    with pytest.raises(KeyError):
        svc.method(1)
    with pytest.raises(ContractViolation):
        ServiceDescriptor("dup", (MethodSignature(0, "a"), MethodSignature(0, "b")))
    with pytest.raises(ContractViolation):
        ServiceDescriptor("empty", ())


def test_validate_individual_checks_method_and_arity():
    sig = MethodSignature(1, "m", (I8, STR))
    good = Individual(1, (Value(I8, 0), Value(STR, "")), 1)
    assert validate_individual(good, sig)
    assert not validate_individual(Individual(2, good.inputs, 1), sig)
    assert not validate_individual(Individual(1, good.inputs[:1], 1), sig)


def test_population_mean_fitness_and_community():
    ind = [Individual(0, (), i) for i in range(1, 4)]
    pop = Population(0, 3, ind, fitness={1: 1.0, 2: 2.0, 3: 6.0})
    assert pop.mean_fitness() == 3.0
    assert Population(1, 2).mean_fitness() == 0.0
    com = Community(ServiceDescriptor("s", (MethodSignature(0, "a"), MethodSignature(1, "b"))),
                    [pop, Population(1, 7)])
    assert com.total_target_size() == 10
    assert com.population(1).target_size == 7


def test_config_defaults():
    c = CampaignConfig()
    assert (c.population_initial_target_size, c.generations, c.max_community_size) == (10, 20, 200)
    assert (c.crossover_rate, c.mutation_rate, c.tour) == (0.8, 0.05, 5)
    assert c.fitness is FitnessKind.LEAST_BRANCH_HIT_COUNT and c.selection is SelectionKind.RANKING


def test_blackbox_config_forces_rates():
    c = CampaignConfig(blackbox=True, crossover_rate=0.5, mutation_rate=0.2)
    assert (c.crossover_rate, c.mutation_rate) == (0.0, 1.0)


@pytest.mark.parametrize("kw", [
    {"generations": None}, {"generations": 0}, {"crossover_rate": 1.5}, {"mutation_rate": -0.1},
    {"population_initial_target_size": 1}, {"tour": 0}, {"seed": -1}, {"seed": 2**64},
    {"fitness": "most-blocks"}, {"time_limit": -1.0},
])
def test_invalid_configs_are_rejected(kw):
    with pytest.raises((ContractViolation, ValueError)):
        CampaignConfig(**kw)


def test_config_json_round_trip():
    c = CampaignConfig(generations=None, test_limit=99, fitness="executed-blocks", selection="tournament", seed=7)
    assert CampaignConfig.from_json(json.loads(json.dumps(c.to_json()))) == c
