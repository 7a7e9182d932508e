"""Random input generation, per-type mutation operators and cascade crossover.

All randomness flows through an :class:`Rng`, so every operator is a pure
function of its inputs and the generator state.
"""

import math
import random
import struct
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .core import (
    F32_MAX,
    F64_MAX,
    INT_BITS,
    MAX_CODE_POINT,
    NULL,
    ContractViolation,
    Individual,
    Kind,
    MethodSignature,
    Value,
    ValueType,
    int_range,
    to_f32,
    wrap_int,
)

NULL_PROBABILITY = 0.05
MAX_STRING_LENGTH = 64
LONG_STRING_LENGTH = 4096
MAX_ARRAY_LENGTH = 8
MAX_DELTA = 35
FLOAT_RANGE = 1e6
FLOAT_SPECIAL_PROBABILITY = 0.1
NON_ASCII_PROBABILITY = 0.05

SPECIAL_CHARS = ("\x00", "\n", "\r", '"', "'", "\\", "%", ";", "{", "}", "‮")

_NON_ASCII_RANGES = ((0xA0, 0x7FF), (0x800, 0xD7FF), (0xE000, 0xFFFD), (0x10000, MAX_CODE_POINT))


class Rng(random.Random):
    """Seeded generator for one campaign stream; also hands out test ids."""

    def __init__(self, seed: int = 0, stream: int = 0):
        super().__init__(f"{seed}:{stream}")
        self._next_id = 0

    def new_id(self) -> int:
        self._next_id += 1
        return self._next_id


class CrossoverKind(str, Enum):
    SINGLE_POINT = "single-point"
    TWO_POINTS = "two-points"
    UNIFORM = "uniform"


# -- generation -------------------------------------------------------------------

def _random_char(rng: Rng) -> str:
    if rng.random() < NON_ASCII_PROBABILITY:
        lo, hi = rng.choice(_NON_ASCII_RANGES)
        return chr(rng.randint(lo, hi))
    return chr(rng.randint(0x20, 0x7E))


def random_string(rng: Rng, length: Optional[int] = None) -> str:
    if length is None:
        length = rng.randint(0, MAX_STRING_LENGTH)
    return "".join(_random_char(rng) for _ in range(length))


def _float_specials(kind: Kind) -> Tuple[float, ...]:
    top = F32_MAX if kind is Kind.FLOAT else F64_MAX
    tiny = 1.401298464324817e-45 if kind is Kind.FLOAT else 5e-324
    return (0.0, -0.0, 1.0, -1.0, top, -top, tiny)


def _random_payload(t: ValueType, rng: Rng):
    k = t.kind
    if k is Kind.BOOLEAN:
        return rng.random() < 0.5
    if k in INT_BITS:
        lo, hi = int_range(k)
        return rng.randint(lo, hi)
    if k is Kind.CHAR:
        return _random_char(rng)
    if k is Kind.FLOAT or k is Kind.DOUBLE:
        if rng.random() < FLOAT_SPECIAL_PROBABILITY:
            x = rng.choice(_float_specials(k))
        else:
            x = rng.uniform(-FLOAT_RANGE, FLOAT_RANGE)
        return to_f32(x) if k is Kind.FLOAT else x
    if k is Kind.STRING:
        return random_string(rng)
    if k is Kind.ARRAY:
        return tuple(random_value(t.element, rng) for _ in range(rng.randint(0, MAX_ARRAY_LENGTH)))
    if k is Kind.OBJECT:
        return tuple(random_value(ft, rng) for _, ft in t.fields)
    raise ContractViolation(f"unknown kind {k}")


def random_value(t: ValueType, rng: Rng) -> Value:
    if t.nullable and rng.random() < NULL_PROBABILITY:
        return Value(t, NULL)
    return Value(t, _random_payload(t, rng))


def random_individual(sig: MethodSignature, rng: Rng) -> Individual:
    return Individual(sig.method_id, tuple(random_value(p, rng) for p in sig.params), rng.new_id())


# -- mutation ---------------------------------------------------------------------

PRIMITIVE_OPS = ("random", "zero", "one", "max", "min", "add", "sub")
CHAR_OPS = PRIMITIVE_OPS + ("special",)
STRING_OPS = ("random", "long", "truncate", "insert", "remove", "special", "empty", "null")
ARRAY_OPS = ("random", "remove", "add", "mutate", "empty", "null")
OBJECT_OPS = ("null", "construct", "mutate")


def operators_for(t: ValueType) -> Tuple[str, ...]:
    if t.kind is Kind.CHAR:
        return CHAR_OPS
    if t.kind is Kind.STRING:
        return STRING_OPS
    if t.kind is Kind.ARRAY:
        return ARRAY_OPS
    if t.kind is Kind.OBJECT:
        return OBJECT_OPS
    return PRIMITIVE_OPS


def _wrap_char(cp: int) -> str:
    cp %= MAX_CODE_POINT + 1
    if 0xD800 <= cp <= 0xDFFF:
        cp -= 0x800
    return chr(cp)


def _mutate_primitive(v: Value, op: str, rng: Rng) -> Value:
    t = v.type
    k = t.kind
    p = v.payload
    if op == "random":
        return Value(t, _random_payload(t, rng))
    if k is Kind.BOOLEAN:
        if op in ("zero", "min"):
            return Value(t, False)
        if op in ("one", "max"):
            return Value(t, True)
        # add/sub on a 1-bit value: an odd delta flips it
        return Value(t, p ^ bool(rng.randint(1, MAX_DELTA) & 1))
    if k in INT_BITS:
        lo, hi = int_range(k)
        fixed = {"zero": 0, "one": 1, "max": hi, "min": lo}
        if op in fixed:
            return Value(t, fixed[op])
        delta = rng.randint(1, MAX_DELTA)
        return Value(t, wrap_int(p + delta if op == "add" else p - delta, k))
    if k is Kind.CHAR:
        fixed = {"zero": "\x00", "one": "\x01", "max": chr(MAX_CODE_POINT), "min": "\x00"}
        if op in fixed:
            return Value(t, fixed[op])
        if op == "special":
            return Value(t, rng.choice(SPECIAL_CHARS))
        delta = rng.randint(1, MAX_DELTA)
        return Value(t, _wrap_char(ord(p) + delta if op == "add" else ord(p) - delta))
    top = F32_MAX if k is Kind.FLOAT else F64_MAX
    fixed = {"zero": 0.0, "one": 1.0, "max": top, "min": -top}
    if op in fixed:
        return Value(t, fixed[op])
    delta = rng.uniform(0.0, float(MAX_DELTA))
    x = p + delta if op == "add" else p - delta
    return Value(t, to_f32(x) if k is Kind.FLOAT else x)


def _mutate_string(v: Value, op: str, rng: Rng) -> Value:
    t = v.type
    s = "" if v.is_null else v.payload
    if op == "random":
        return Value(t, random_string(rng))
    if op == "long":
        return Value(t, random_string(rng, LONG_STRING_LENGTH))
    if op == "empty":
        return Value(t, "")
    if op == "null":
        return Value(t, NULL)
    if op == "truncate":
        return Value(t, s[: rng.randint(0, max(len(s) - 1, 0))])
    if op == "insert":
        pos = rng.randint(0, len(s))
        return Value(t, s[:pos] + random_string(rng, rng.randint(1, 16)) + s[pos:])
    if op == "remove":
        if not s:
            return Value(t, s)
        i = rng.randrange(len(s))
        j = rng.randint(i + 1, len(s))
        return Value(t, s[:i] + s[j:])
    if op == "special":
        if not s:
            return Value(t, rng.choice(SPECIAL_CHARS))
        i = rng.randrange(len(s))
        return Value(t, s[:i] + rng.choice(SPECIAL_CHARS) + s[i + 1:])
    raise ContractViolation(f"unknown string operator {op!r}")


def _mutate_array(v: Value, op: str, rng: Rng) -> Value:
    t = v.type
    items = [] if v.is_null else list(v.payload)
    if op == "random":
        return Value(t, _random_payload(t, rng))
    if op == "empty":
        return Value(t, ())
    if op == "null":
        return Value(t, NULL)
    if op == "remove":
        if items:
            for _ in range(rng.randint(1, len(items))):
                del items[rng.randrange(len(items))]
        return Value(t, tuple(items))
    if op == "add":
        for _ in range(rng.randint(1, 4)):
            items.insert(rng.randint(0, len(items)), random_value(t.element, rng))
        return Value(t, tuple(items))
    if op == "mutate":
        if not items:
            return Value(t, (random_value(t.element, rng),))
        i = rng.randrange(len(items))
        items[i] = mutate_value(items[i], rng)
        return Value(t, tuple(items))
    raise ContractViolation(f"unknown array operator {op!r}")


def _mutate_object(v: Value, op: str, rng: Rng) -> Value:
    t = v.type
    if op == "null":
        return Value(t, NULL)
    if op == "construct" or v.is_null or not t.fields:
        return Value(t, _random_payload(t, rng))
    if op == "mutate":
        fields = list(v.payload)
        i = rng.randrange(len(fields))
        fields[i] = mutate_value(fields[i], rng)
        return Value(t, tuple(fields))
    raise ContractViolation(f"unknown object operator {op!r}")


def mutate_value(v: Value, rng: Rng, op: Optional[str] = None) -> Value:
    """Apply one fuzz operator, chosen uniformly from the type's list unless given."""
    if op is None:
        op = rng.choice(operators_for(v.type))
    k = v.type.kind
    if k is Kind.STRING:
        return _mutate_string(v, op, rng)
    if k is Kind.ARRAY:
        return _mutate_array(v, op, rng)
    if k is Kind.OBJECT:
        return _mutate_object(v, op, rng)
    return _mutate_primitive(v, op, rng)


def mutate_individual(ind: Individual, rng: Rng) -> Individual:
    if not ind.inputs:
        return Individual(ind.method_id, (), rng.new_id())
    pos = rng.randrange(len(ind.inputs))
    inputs = list(ind.inputs)
    inputs[pos] = mutate_value(inputs[pos], rng)
    return Individual(ind.method_id, tuple(inputs), rng.new_id())


def clone_individual(ind: Individual, rng: Rng) -> Individual:
    return Individual(ind.method_id, ind.inputs, rng.new_id())


# -- crossover --------------------------------------------------------------------
#
# Points inside a value: bits for primitives (most significant first),
# characters for strings, elements for arrays, fields for objects.

_BIT_WIDTH = {Kind.BOOLEAN: 1, Kind.CHAR: 21, Kind.FLOAT: 32, Kind.DOUBLE: 64, **INT_BITS}


def _to_bits(v: Value) -> int:
    k = v.type.kind
    p = v.payload
    if k is Kind.BOOLEAN:
        return int(p)
    if k is Kind.CHAR:
        return ord(p)
    if k is Kind.FLOAT:
        return struct.unpack(">I", struct.pack(">f", p))[0]
    if k is Kind.DOUBLE:
        return struct.unpack(">Q", struct.pack(">d", p))[0]
    return p & ((1 << INT_BITS[k]) - 1)


def _from_bits(t: ValueType, bits: int) -> Value:
    k = t.kind
    if k is Kind.BOOLEAN:
        return Value(t, bool(bits))
    if k is Kind.CHAR:
        return Value(t, _wrap_char(bits))
    if k is Kind.FLOAT:
        return Value(t, struct.unpack(">f", struct.pack(">I", bits))[0])
    if k is Kind.DOUBLE:
        return Value(t, struct.unpack(">d", struct.pack(">Q", bits))[0])
    return Value(t, wrap_int(bits, k))


def _sequence(v: Value):
    return v.payload


def _rebuild(t: ValueType, parts) -> Value:
    if t.kind is Kind.STRING:
        return Value(t, "".join(parts) if not isinstance(parts, str) else parts)
    return Value(t, tuple(parts))


def _null_pick(a: Value, b: Value, rng: Rng) -> Optional[Value]:
    if a.is_null or b.is_null:
        return a if rng.random() < 0.5 else b
    return None


def inner_single_point(a: Value, b: Value, rng: Rng, cut: Optional[int] = None) -> Value:
    """Points before ``cut`` come from ``a``, the rest (including any tail) from ``b``."""
    picked = _null_pick(a, b, rng)
    if picked is not None:
        return picked
    t = a.type
    if t.kind in _BIT_WIDTH:
        width = _BIT_WIDTH[t.kind]
        if cut is None:
            cut = rng.randint(0, width)
        low = (1 << (width - cut)) - 1
        return _from_bits(t, (_to_bits(a) & ~low & ((1 << width) - 1)) | (_to_bits(b) & low))
    sa, sb = _sequence(a), _sequence(b)
    if cut is None:
        cut = rng.randint(0, min(len(sa), len(sb)))
    return _rebuild(t, sa[:cut] + sb[cut:])


def inner_two_points(a: Value, b: Value, rng: Rng, cuts: Optional[Tuple[int, int]] = None) -> Value:
    """Points in ``[c1, c2)`` come from ``a``, everything outside from ``b``."""
    picked = _null_pick(a, b, rng)
    if picked is not None:
        return picked
    t = a.type
    if t.kind in _BIT_WIDTH:
        width = _BIT_WIDTH[t.kind]
        c1, c2 = cuts if cuts is not None else sorted((rng.randint(0, width), rng.randint(0, width)))
        # bit positions counted from the most significant end
        inner = ((1 << (width - c1)) - 1) & ~((1 << (width - c2)) - 1)
        return _from_bits(t, (_to_bits(a) & inner) | (_to_bits(b) & ~inner & ((1 << width) - 1)))
    sa, sb = _sequence(a), _sequence(b)
    shortest = min(len(sa), len(sb))
    c1, c2 = cuts if cuts is not None else sorted((rng.randint(0, shortest), rng.randint(0, shortest)))
    return _rebuild(t, sb[:c1] + sa[c1:c2] + sb[c2:])


def inner_uniform(a: Value, b: Value, rng: Rng) -> Value:
    """Every point independently from either parent; a surplus tail follows a coin flip."""
    picked = _null_pick(a, b, rng)
    if picked is not None:
        return picked
    t = a.type
    if t.kind in _BIT_WIDTH:
        width = _BIT_WIDTH[t.kind]
        mask = rng.getrandbits(width)
        return _from_bits(t, (_to_bits(a) & mask) | (_to_bits(b) & ~mask & ((1 << width) - 1)))
    sa, sb = _sequence(a), _sequence(b)
    shortest = min(len(sa), len(sb))
    parts = [sa[i] if rng.random() < 0.5 else sb[i] for i in range(shortest)]
    tail = sa[shortest:] if rng.random() < 0.5 else sb[shortest:]
    if t.kind is Kind.STRING:
        return Value(t, "".join(parts) + tail)
    return Value(t, tuple(parts) + tuple(tail))


def crossover(
    p1: Individual,
    p2: Individual,
    rng: Rng,
    kind: Optional[CrossoverKind] = None,
) -> Individual:
    """Cascade crossover: pick a point among the parameters, then cross the
    boundary parameter(s) at their own granularity."""
    if p1.method_id != p2.method_id:
        raise ContractViolation(f"crossover of method {p1.method_id} with method {p2.method_id}")
    if len(p1.inputs) != len(p2.inputs):
        raise ContractViolation("crossover parents have different arity")
    if kind is None:
        kind = rng.choice(list(CrossoverKind))
    a, b = p1.inputs, p2.inputs
    n = len(a)
    out: List[Value]
    if kind is CrossoverKind.SINGLE_POINT:
        c = rng.randint(0, n)
        out = list(a[:c]) + list(b[c:])
        if c < n:
            out[c] = inner_single_point(a[c], b[c], rng)
    elif kind is CrossoverKind.TWO_POINTS:
        c1, c2 = sorted((rng.randint(0, n), rng.randint(0, n)))
        out = list(b[:c1]) + list(a[c1:c2]) + list(b[c2:])
        if c1 == c2:
            if c1 < n:
                out[c1] = inner_two_points(a[c1], b[c1], rng)
        else:
            out[c1] = inner_single_point(b[c1], a[c1], rng)
            if c2 < n:
                out[c2] = inner_single_point(a[c2], b[c2], rng)
    else:
        out = [x if rng.random() < 0.5 else y for x, y in zip(a, b)]
        if n:
            j = rng.randrange(n)
            out[j] = inner_uniform(a[j], b[j], rng)
    return Individual(p1.method_id, tuple(out), rng.new_id())


def _equal_or_nan(x: float, y: float) -> bool:
    return x == y or (math.isnan(x) and math.isnan(y))


def same_content(a: Sequence[Value], b: Sequence[Value]) -> bool:
    """Structural equality that treats NaN payloads as equal to themselves."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if x.type != y.type:
            return False
        if x.is_null or y.is_null:
            if not (x.is_null and y.is_null):
                return False
        elif x.type.kind in (Kind.FLOAT, Kind.DOUBLE):
            if not _equal_or_nan(x.payload, y.payload):
                return False
        elif x.type.kind in (Kind.ARRAY, Kind.OBJECT):
            if not same_content(x.payload, y.payload):
                return False
        elif x.payload != y.payload:
            return False
    return True
