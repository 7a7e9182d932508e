"""Domain types shared by the fuzzer: typed values, signatures, individuals,
populations, communities, coverage records and campaign configuration.

Values carry their declared type so that mutation and crossover always know
what they are operating on, including for null references.
"""

import math
import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple


class ContractViolation(Exception):
    """Raised when a caller breaks a documented precondition."""


class Kind(str, Enum):
    BOOLEAN = "bool"
    BYTE = "i8"
    SHORT = "i16"
    INTEGER = "i32"
    LONG = "i64"
    CHAR = "char"
    FLOAT = "f32"
    DOUBLE = "f64"
    STRING = "string"
    ARRAY = "array"
    OBJECT = "object"


INT_BITS = {Kind.BYTE: 8, Kind.SHORT: 16, Kind.INTEGER: 32, Kind.LONG: 64}
FLOAT_KINDS = (Kind.FLOAT, Kind.DOUBLE)
PRIMITIVE_KINDS = (
    Kind.BOOLEAN, Kind.BYTE, Kind.SHORT, Kind.INTEGER, Kind.LONG,
    Kind.CHAR, Kind.FLOAT, Kind.DOUBLE,
)
NULLABLE_KINDS = (Kind.STRING, Kind.ARRAY, Kind.OBJECT)

MAX_CODE_POINT = 0x10FFFF
F32_MAX = struct.unpack(">f", b"\x7f\x7f\xff\xff")[0]
F64_MAX = 1.7976931348623157e308


class _Null:
    """The null reference. A singleton so identity checks work everywhere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NULL"

    def __reduce__(self):
        return (_Null, ())


NULL = _Null()


@dataclass(frozen=True)
class ValueType:
    kind: Kind
    element: Optional["ValueType"] = None
    class_name: str = ""
    fields: Tuple[Tuple[str, "ValueType"], ...] = ()

    def __post_init__(self):
        if self.kind is Kind.ARRAY and self.element is None:
            raise ContractViolation("array type needs an element type")
        if self.kind is Kind.OBJECT:
            names = [n for n, _ in self.fields]
            if len(set(names)) != len(names):
                raise ContractViolation(f"duplicate field names in {self.class_name or 'object'}")

    @property
    def nullable(self) -> bool:
        return self.kind in NULLABLE_KINDS

    def __str__(self):
        return format_type(self)


def int_range(kind: Kind) -> Tuple[int, int]:
    bits = INT_BITS[kind]
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def wrap_int(v: int, kind: Kind) -> int:
    """Two's-complement wraparound into the bit width of ``kind``."""
    bits = INT_BITS[kind]
    v &= (1 << bits) - 1
    if v >> (bits - 1):
        v -= 1 << bits
    return v


def to_f32(x: float) -> float:
    """Round a Python float to the nearest binary32 value (overflow goes to inf)."""
    try:
        return struct.unpack(">f", struct.pack(">f", x))[0]
    except OverflowError:
        return math.copysign(math.inf, x)


def is_scalar(cp: int) -> bool:
    return 0 <= cp <= MAX_CODE_POINT and not 0xD800 <= cp <= 0xDFFF


_SURROGATE = re.compile("[\ud800-\udfff]")


# -- type expressions ---------------------------------------------------------

_SCALAR_NAMES = {k.value: k for k in PRIMITIVE_KINDS + (Kind.STRING,)}


def parse_type(text: str) -> ValueType:
    """Parse a type expression such as ``array<i8>`` or ``object:Point{x:i32,y:i32}``."""
    parser = _TypeParser(text)
    t = parser.parse()
    parser.skip_ws()
    if parser.pos != len(text):
        raise ValueError(f"trailing characters in type expression {text!r} at {parser.pos}")
    return t


class _TypeParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if not self.text.startswith(ch, self.pos):
            raise ValueError(f"expected {ch!r} at {self.pos} in type expression {self.text!r}")
        self.pos += len(ch)

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] in "_.$"):
            self.pos += 1
        if start == self.pos:
            raise ValueError(f"expected identifier at {start} in type expression {self.text!r}")
        return self.text[start:self.pos]

    def parse(self) -> ValueType:
        name = self.ident()
        if name in _SCALAR_NAMES:
            return ValueType(_SCALAR_NAMES[name])
        if name == "array":
            self.expect("<")
            elem = self.parse()
            self.expect(">")
            return ValueType(Kind.ARRAY, element=elem)
        if name == "object":
            self.skip_ws()
            class_name = ""
            if self.text.startswith(":", self.pos):
                self.pos += 1
                class_name = self.ident()
            self.expect("{")
            fields: List[Tuple[str, ValueType]] = []
            self.skip_ws()
            if not self.text.startswith("}", self.pos):
                while True:
                    fname = self.ident()
                    self.expect(":")
                    fields.append((fname, self.parse()))
                    self.skip_ws()
                    if self.text.startswith(",", self.pos):
                        self.pos += 1
                        continue
                    break
            self.expect("}")
            return ValueType(Kind.OBJECT, class_name=class_name, fields=tuple(fields))
        raise ValueError(f"unknown type {name!r} in type expression {self.text!r}")


def format_type(t: ValueType) -> str:
    if t.kind is Kind.ARRAY:
        return f"array<{format_type(t.element)}>"
    if t.kind is Kind.OBJECT:
        inner = ",".join(f"{n}:{format_type(ft)}" for n, ft in t.fields)
        prefix = f"object:{t.class_name}" if t.class_name else "object"
        return f"{prefix}{{{inner}}}"
    return t.kind.value


# -- values -------------------------------------------------------------------

@dataclass(frozen=True)
class Value:
    """A typed datum.

    Payloads: ``bool`` for booleans, ``int`` for the integer kinds, a
    one-character ``str`` for chars, ``float`` for both float kinds (binary32
    values are kept rounded), ``str`` for strings, a tuple of ``Value`` for
    arrays, a tuple of field ``Value`` in declaration order for objects, or
    :data:`NULL` for nullable kinds.
    """

    type: ValueType
    payload: Any

    @property
    def is_null(self) -> bool:
        return self.payload is NULL

    def __str__(self):
        return f"{format_type(self.type)}:{encode_payload(self)!r}"


def value_is_valid(v: Value, t: ValueType) -> bool:
    if v.type != t:
        return False
    p = v.payload
    k = t.kind
    if p is NULL:
        return k in NULLABLE_KINDS
    if k is Kind.BOOLEAN:
        return isinstance(p, bool)
    if k in INT_BITS:
        if isinstance(p, bool) or not isinstance(p, int):
            return False
        lo, hi = int_range(k)
        return lo <= p <= hi
    if k is Kind.CHAR:
        return isinstance(p, str) and len(p) == 1 and is_scalar(ord(p))
    if k is Kind.FLOAT:
        return isinstance(p, float) and (math.isnan(p) or to_f32(p) == p)
    if k is Kind.DOUBLE:
        return isinstance(p, float)
    if k is Kind.STRING:
        return isinstance(p, str) and _SURROGATE.search(p) is None
    if k is Kind.ARRAY:
        return isinstance(p, tuple) and all(value_is_valid(e, t.element) for e in p)
    if k is Kind.OBJECT:
        return (
            isinstance(p, tuple)
            and len(p) == len(t.fields)
            and all(value_is_valid(fv, ft) for fv, (_, ft) in zip(p, t.fields))
        )
    return False


def encode_payload(v: Value) -> Any:
    """JSON-compatible encoding of a value's payload (the ``v`` of the wire format)."""
    p = v.payload
    if p is NULL:
        return None
    k = v.type.kind
    if k in FLOAT_KINDS:
        if math.isnan(p):
            return "NaN"
        if math.isinf(p):
            return "Infinity" if p > 0 else "-Infinity"
        return p
    if k is Kind.ARRAY:
        return [encode_payload(e) for e in p]
    if k is Kind.OBJECT:
        return {name: encode_payload(fv) for fv, (name, _) in zip(p, v.type.fields)}
    return p


_FLOAT_WORDS = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}


def decode_payload(raw: Any, t: ValueType) -> Value:
    """Inverse of :func:`encode_payload`; raises ``ValueError`` on malformed input."""
    k = t.kind
    if raw is None:
        if k not in NULLABLE_KINDS:
            raise ValueError(f"null is not allowed for {format_type(t)}")
        return Value(t, NULL)
    if k is Kind.BOOLEAN:
        if not isinstance(raw, bool):
            raise ValueError(f"expected bool, got {raw!r}")
        return Value(t, raw)
    if k in INT_BITS:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ValueError(f"expected integer for {k.value}, got {raw!r}")
        lo, hi = int_range(k)
        if not lo <= raw <= hi:
            raise ValueError(f"{raw} out of range for {k.value}")
        return Value(t, raw)
    if k is Kind.CHAR:
        if not (isinstance(raw, str) and len(raw) == 1 and is_scalar(ord(raw))):
            raise ValueError(f"expected a single character, got {raw!r}")
        return Value(t, raw)
    if k in FLOAT_KINDS:
        if isinstance(raw, str) and raw in _FLOAT_WORDS:
            x = _FLOAT_WORDS[raw]
        elif isinstance(raw, (int, float)) and not isinstance(raw, bool):
            x = float(raw)
        else:
            raise ValueError(f"expected number for {k.value}, got {raw!r}")
        return Value(t, to_f32(x) if k is Kind.FLOAT else x)
    if k is Kind.STRING:
        if not isinstance(raw, str):
            raise ValueError(f"expected string, got {raw!r}")
        return Value(t, raw)
    if k is Kind.ARRAY:
        if not isinstance(raw, list):
            raise ValueError(f"expected list for {format_type(t)}, got {raw!r}")
        return Value(t, tuple(decode_payload(e, t.element) for e in raw))
    if k is Kind.OBJECT:
        if not isinstance(raw, dict) or set(raw) != {n for n, _ in t.fields}:
            raise ValueError(f"expected fields {[n for n, _ in t.fields]} for {format_type(t)}, got {raw!r}")
        return Value(t, tuple(decode_payload(raw[n], ft) for n, ft in t.fields))
    raise ValueError(f"cannot decode kind {k}")


def encode_value(v: Value) -> Dict[str, Any]:
    return {"t": format_type(v.type), "v": encode_payload(v)}


def decode_value(obj: Dict[str, Any]) -> Value:
    return decode_payload(obj["v"], parse_type(obj["t"]))


# -- service model --------------------------------------------------------------

@dataclass(frozen=True)
class MethodSignature:
    method_id: int
    name: str
    params: Tuple[ValueType, ...] = ()


@dataclass(frozen=True)
class ServiceDescriptor:
    name: str
    methods: Tuple[MethodSignature, ...]

    def __post_init__(self):
        if not self.methods:
            raise ContractViolation(f"service {self.name!r} has no methods")
        ids = [m.method_id for m in self.methods]
        if len(set(ids)) != len(ids):
            raise ContractViolation(f"duplicate method ids in service {self.name!r}")

    def method(self, method_id: int) -> MethodSignature:
        for m in self.methods:
            if m.method_id == method_id:
                return m
        raise KeyError(method_id)

    def to_json(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "methods": [
                {"id": m.method_id, "name": m.name, "params": [format_type(p) for p in m.params]}
                for m in self.methods
            ],
        }

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "ServiceDescriptor":
        return cls(
            name=obj["name"],
            methods=tuple(
                MethodSignature(int(m["id"]), m["name"], tuple(parse_type(p) for p in m["params"]))
                for m in obj["methods"]
            ),
        )


@dataclass(frozen=True)
class Individual:
    method_id: int
    inputs: Tuple[Value, ...]
    id: int

    def content(self) -> Tuple[int, list]:
        """Identity-free view used to compare individuals by content."""
        return self.method_id, [encode_value(v) for v in self.inputs]


def validate_individual(ind: Individual, sig: MethodSignature) -> bool:
    if ind.method_id != sig.method_id or len(ind.inputs) != len(sig.params):
        return False
    return all(value_is_valid(v, t) for v, t in zip(ind.inputs, sig.params))


@dataclass
class Population:
    method_id: int
    target_size: int
    individuals: List[Individual] = field(default_factory=list)
    offspring: List[Individual] = field(default_factory=list)
    fitness: Dict[int, float] = field(default_factory=dict)

    def mean_fitness(self) -> float:
        if not self.individuals:
            return 0.0
        return sum(self.fitness.get(i.id, 0.0) for i in self.individuals) / len(self.individuals)


@dataclass
class Community:
    service: ServiceDescriptor
    populations: List[Population]

    def population(self, method_id: int) -> Population:
        for p in self.populations:
            if p.method_id == method_id:
                return p
        raise KeyError(method_id)

    def total_target_size(self) -> int:
        return sum(p.target_size for p in self.populations)


# -- execution ------------------------------------------------------------------

class Outcome(str, Enum):
    NORMAL = "ok"
    HANDLED_EXCEPTION = "exception"
    CRASH = "crash"


@dataclass(frozen=True)
class ExecutionResult:
    blocks: FrozenSet[str]
    branches: Dict[str, int]
    outcome: Outcome = Outcome.NORMAL
    log: str = ""
    duration_ms: float = 0.0


@dataclass
class GlobalCoverageState:
    """Cumulative coverage over all tests executed so far in one campaign."""

    block_exec_count: Dict[str, int] = field(default_factory=dict)
    branch_hit_count: Dict[str, int] = field(default_factory=dict)
    tests_executed: int = 0


# -- configuration ----------------------------------------------------------------

class FitnessKind(str, Enum):
    EXECUTED_BLOCKS = "executed-blocks"
    LEAST_EXECUTED = "least-executed"
    LEAST_BRANCH_HIT_COUNT = "least-branch-hit-count"


class SelectionKind(str, Enum):
    FITNESS_PROPORTIONATE = "fitness-proportionate"
    RANKING = "ranking"
    TOURNAMENT = "tournament"


@dataclass
class CampaignConfig:
    """Genetic-algorithm parameters. Defaults follow the reference setup.

    Stop limits are combined: the campaign ends as soon as any limit that is
    set is reached. ``generations`` and ``time_limit`` are checked between
    generations, ``failure_limit`` and ``test_limit`` after every test.
    """

    population_initial_target_size: int = 10
    generations: Optional[int] = 20
    time_limit: Optional[float] = None
    failure_limit: Optional[int] = None
    test_limit: Optional[int] = None
    max_community_size: int = 200
    crossover_rate: float = 0.8
    mutation_rate: float = 0.05
    tour: int = 5
    fitness: FitnessKind = FitnessKind.LEAST_BRANCH_HIT_COUNT
    selection: SelectionKind = SelectionKind.RANKING
    seed: int = 0
    blackbox: bool = False
    community: bool = True

    def __post_init__(self):
        self.fitness = FitnessKind(self.fitness)
        self.selection = SelectionKind(self.selection)
        if self.blackbox:
            self.crossover_rate = 0.0
            self.mutation_rate = 1.0
        if self.population_initial_target_size < 2:
            raise ContractViolation("population-initial-target-size must be at least 2")
        if self.max_community_size < 1 or self.tour < 1:
            raise ContractViolation("max-community-size and tour must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractViolation(f"{name} must be a probability")
        limits = (self.generations, self.time_limit, self.failure_limit, self.test_limit)
        if all(x is None for x in limits):
            raise ContractViolation("at least one stop condition is required")
        if any(x is not None and x <= 0 for x in limits):
            raise ContractViolation("stop limits must be positive")
        if not 0 <= self.seed < 2**64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")

    def to_json(self) -> Dict[str, Any]:
        out = dict(self.__dict__)
        out["fitness"] = self.fitness.value
        out["selection"] = self.selection.value
        return out

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "CampaignConfig":
        return cls(**obj)
