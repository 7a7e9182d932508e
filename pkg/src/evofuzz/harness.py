"""Fuzz targets.

A :class:`SyntheticService` is a set of methods whose bodies are DAGs of
guarded basic blocks, loaded from a JSON target file. Executing a call walks
the graph from the method's entry block and reports the covered blocks and the
``from→to`` edges taken (``⊥`` marks leaving the method).

:class:`ProcessHarness` drives an external target over a newline-delimited
JSON protocol on its standard streams; :func:`serve` is the matching server
for synthetic targets.
"""

import json
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, IO, List, Optional, Sequence, Tuple, Union

from .core import (
    INT_BITS,
    NULL,
    ExecutionResult,
    Individual,
    Kind,
    MethodSignature,
    Outcome,
    ServiceDescriptor,
    Value,
    ValueType,
    decode_value,
    encode_value,
    format_type,
    parse_type,
    value_is_valid,
    ContractViolation,
)
from .genome import Rng

TERMINAL = "⊥"
MAX_ATOMS = 4
DEFAULT_TIMEOUT = 5.0


class TargetError(ValueError):
    """A target file that does not parse or does not validate."""


@dataclass(frozen=True)
class Call:
    method_id: int
    inputs: Tuple[Value, ...]

    @classmethod
    def of(cls, ind: Individual) -> "Call":
        return cls(ind.method_id, ind.inputs)


# -- guards -----------------------------------------------------------------------

_FAIL = object()
_CMP_OPS = ("==", "!=", "<", "<=")
_STR_OPS = ("prefix", "contains")


@dataclass(frozen=True)
class BlockDef:
    block_id: str
    guard: Any = "always"
    on_true: Optional[str] = None
    on_false: Optional[str] = None
    effect: Optional[str] = None


def _projected_type(proj: Any, t: ValueType, where: str) -> Tuple[Callable[[Value], Any], ValueType]:
    """Return (projection function, projected type). Projections yield the
    payload, :data:`NULL`, or ``_FAIL`` when the projection does not apply."""
    if proj in (None, "value"):
        return (lambda v: v.payload), t
    if proj == "length":
        if t.kind not in (Kind.STRING, Kind.ARRAY):
            raise TargetError(f"{where}: length projection on {format_type(t)}")

        def length(v):
            return _FAIL if v.payload is NULL else len(v.payload)
        return length, ValueType(Kind.INTEGER)
    if isinstance(proj, dict) and "elem" in proj:
        if t.kind is not Kind.ARRAY:
            raise TargetError(f"{where}: element projection on {format_type(t)}")
        k = proj["elem"]
        if not isinstance(k, int) or k < 0:
            raise TargetError(f"{where}: element index must be a nonnegative integer")

        def elem(v):
            p = v.payload
            if p is NULL or k >= len(p):
                return _FAIL
            return p[k].payload
        return elem, t.element
    if isinstance(proj, dict) and "field" in proj:
        if t.kind is not Kind.OBJECT:
            raise TargetError(f"{where}: field projection on {format_type(t)}")
        names = [n for n, _ in t.fields]
        if proj["field"] not in names:
            raise TargetError(f"{where}: unknown field {proj['field']!r} of {format_type(t)}")
        i = names.index(proj["field"])

        def fld(v):
            p = v.payload
            return _FAIL if p is NULL else p[i].payload
        return fld, t.fields[i][1]
    raise TargetError(f"{where}: unknown projection {proj!r}")


def _check_literal(lit: Any, t: ValueType, op: str, where: str) -> Any:
    if lit is None:
        if op not in ("==", "!=") or not t.nullable:
            raise TargetError(f"{where}: null literal only compares (==, !=) nullable values")
        return None
    k = t.kind
    if op in _STR_OPS:
        if k is not Kind.STRING or not isinstance(lit, str):
            raise TargetError(f"{where}: {op} needs a string value and literal")
        return lit
    if k is Kind.BOOLEAN and isinstance(lit, bool):
        return lit
    if k in INT_BITS and isinstance(lit, int) and not isinstance(lit, bool):
        return lit
    if k in (Kind.FLOAT, Kind.DOUBLE) and isinstance(lit, (int, float)) and not isinstance(lit, bool):
        return float(lit)
    if k is Kind.CHAR:
        if isinstance(lit, str) and len(lit) == 1:
            return lit
        if isinstance(lit, int) and not isinstance(lit, bool):
            return chr(lit)
    if k is Kind.STRING and isinstance(lit, str):
        return lit
    raise TargetError(f"{where}: literal {lit!r} does not match {format_type(t)}")


def _compile_atom(atom: Any, sig: MethodSignature, where: str) -> Callable[[Sequence[Value]], bool]:
    if not isinstance(atom, dict):
        raise TargetError(f"{where}: expected a comparison object, got {atom!r}")
    i = atom.get("param")
    if not isinstance(i, int) or not 0 <= i < len(sig.params):
        raise TargetError(
            f"{where}: param {i!r} out of range for method {sig.name!r} ({len(sig.params)} params)"
        )
    project, ptype = _projected_type(atom.get("proj"), sig.params[i], where)
    op = atom.get("op")
    if op not in _CMP_OPS + _STR_OPS:
        raise TargetError(f"{where}: unknown operator {op!r}")
    if ptype.kind in (Kind.ARRAY, Kind.OBJECT) and atom.get("lit") is not None:
        raise TargetError(f"{where}: compare arrays and objects through a projection")
    lit = _check_literal(atom.get("lit"), ptype, op, where)

    if lit is None:
        want_null = op == "=="

        def null_check(args):
            got = project(args[i])
            return got is not _FAIL and (got is NULL) == want_null
        return null_check

    def atom_fn(args):
        got = project(args[i])
        if got is _FAIL or got is NULL:
            return False
        if op == "==":
            return got == lit
        if op == "!=":
            return got != lit
        if op == "<":
            return got < lit
        if op == "<=":
            return got <= lit
        if op == "prefix":
            return got.startswith(lit)
        return lit in got
    return atom_fn


def compile_guard(guard: Any, sig: MethodSignature, where: str) -> Callable[[Sequence[Value]], bool]:
    """Compile a guard expression for one method's parameter list."""
    if guard == "always":
        return lambda args: True
    if guard == "never":
        return lambda args: False
    if isinstance(guard, dict) and ("and" in guard or "or" in guard):
        conj = "and" in guard
        atoms = guard["and" if conj else "or"]
        if not isinstance(atoms, list) or not 1 <= len(atoms) <= MAX_ATOMS:
            raise TargetError(f"{where}: a conjunction/disjunction takes 1..{MAX_ATOMS} atoms")
        fns = [_compile_atom(a, sig, f"{where}[{k}]") for k, a in enumerate(atoms)]
        if conj:
            return lambda args: all(f(args) for f in fns)
        return lambda args: any(f(args) for f in fns)
    return _compile_atom(guard, sig, where)


# -- service ------------------------------------------------------------------------

@dataclass
class SyntheticService:
    descriptor: ServiceDescriptor
    blocks: Dict[str, BlockDef]
    entry: Dict[int, str]
    _guards: Dict[Tuple[int, str], Callable] = field(default_factory=dict, repr=False)

    def execute(self, call: Call) -> ExecutionResult:
        return execute(self, call)

    def to_json(self) -> Dict[str, Any]:
        out = self.descriptor.to_json()
        out["blocks"] = [
            {
                "id": b.block_id,
                "guard": b.guard,
                "on_true": b.on_true,
                "on_false": b.on_false,
                **({"effect": b.effect} if b.effect else {}),
            }
            for b in self.blocks.values()
        ]
        out["entry"] = {str(m): bid for m, bid in sorted(self.entry.items())}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, ensure_ascii=False) + "\n"


def _reachable(blocks: Dict[str, BlockDef], start: str) -> List[str]:
    seen: Dict[str, None] = {}
    stack = [start]
    while stack:
        b = stack.pop()
        if b in seen:
            continue
        seen[b] = None
        d = blocks[b]
        for nxt in (d.on_true, d.on_false):
            if nxt is not None:
                stack.append(nxt)
    return list(seen)


def _find_cycle(blocks: Dict[str, BlockDef]) -> Optional[List[str]]:
    white, grey, black = 0, 1, 2
    color = {b: white for b in blocks}
    for root in blocks:
        if color[root] != white:
            continue
        path: List[str] = []
        stack = [(root, iter((blocks[root].on_true, blocks[root].on_false)))]
        color[root] = grey
        path.append(root)
        while stack:
            node, it = stack[-1]
            nxt = next(it, "__done__")
            if nxt == "__done__":
                stack.pop()
                path.pop()
                color[node] = black
                continue
            if nxt is None:
                continue
            if color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            if color[nxt] == white:
                color[nxt] = grey
                path.append(nxt)
                stack.append((nxt, iter((blocks[nxt].on_true, blocks[nxt].on_false))))
    return None


_EFFECTS = {None: Outcome.NORMAL, "raise-handled": Outcome.HANDLED_EXCEPTION, "crash": Outcome.CRASH}


def parse_target(obj: Any, source: str = "<target>") -> SyntheticService:
    """Validate a decoded target document and build the service."""
    if not isinstance(obj, dict):
        raise TargetError(f"{source}: top level must be an object")
    try:
        methods = []
        for k, m in enumerate(obj["methods"]):
            try:
                params = tuple(parse_type(p) for p in m.get("params", []))
            except (ValueError, ContractViolation) as e:
                raise TargetError(f"{source}: methods[{k}].params: {e}") from None
            methods.append(MethodSignature(int(m["id"]), str(m["name"]), params))
        try:
            descriptor = ServiceDescriptor(str(obj["name"]), tuple(methods))
        except ContractViolation as e:
            raise TargetError(f"{source}: {e}") from None

        blocks: Dict[str, BlockDef] = {}
        for k, b in enumerate(obj["blocks"]):
            bid = b["id"]
            if not isinstance(bid, str) or not bid or bid == TERMINAL:
                raise TargetError(f"{source}: blocks[{k}].id must be a nonempty string")
            if bid in blocks:
                raise TargetError(f"{source}: blocks[{k}]: duplicate block id {bid!r}")
            effect = b.get("effect")
            if effect not in _EFFECTS:
                raise TargetError(f"{source}: blocks[{k}].effect: unknown effect {effect!r}")
            blocks[bid] = BlockDef(bid, b.get("guard", "always"), b.get("on_true"), b.get("on_false"), effect)
        entry_raw = obj["entry"]
    except (KeyError, TypeError) as e:
        raise TargetError(f"{source}: missing or malformed field {e}") from None

    for k, b in enumerate(blocks.values()):
        for name in ("on_true", "on_false"):
            nxt = getattr(b, name)
            if nxt is not None and nxt not in blocks:
                raise TargetError(f"{source}: blocks[{k}] ({b.block_id!r}).{name}: dangling reference {nxt!r}")

    cycle = _find_cycle(blocks)
    if cycle:
        raise TargetError(f"{source}: block cycle {' -> '.join(cycle)}")

    entry: Dict[int, str] = {}
    for mid, bid in entry_raw.items():
        try:
            mid = int(mid)
            descriptor.method(mid)
        except (ValueError, KeyError):
            raise TargetError(f"{source}: entry: unknown method id {mid!r}") from None
        if bid not in blocks:
            raise TargetError(f"{source}: entry[{mid}]: unknown block {bid!r}")
        entry[mid] = bid
    missing = [m.method_id for m in descriptor.methods if m.method_id not in entry]
    if missing:
        raise TargetError(f"{source}: entry: no entry block for methods {missing}")

    index = {bid: k for k, bid in enumerate(blocks)}
    guards: Dict[Tuple[int, str], Callable] = {}
    for sig in descriptor.methods:
        for bid in _reachable(blocks, entry[sig.method_id]):
            where = f"{source}: blocks[{index[bid]}] ({bid!r}).guard for method {sig.name!r}"
            guards[(sig.method_id, bid)] = compile_guard(blocks[bid].guard, sig, where)
    return SyntheticService(descriptor, blocks, entry, guards)


def load_target(path: Union[str, Path]) -> SyntheticService:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise TargetError(f"{path}: not UTF-8: {e}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise TargetError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_target(obj, str(path))


def list_methods(svc: SyntheticService) -> ServiceDescriptor:
    return svc.descriptor


def check_call(descriptor: ServiceDescriptor, call: Call) -> MethodSignature:
    try:
        sig = descriptor.method(call.method_id)
    except KeyError:
        raise ContractViolation(f"unknown method id {call.method_id}") from None
    if len(call.inputs) != len(sig.params) or not all(
        value_is_valid(v, t) for v, t in zip(call.inputs, sig.params)
    ):
        raise ContractViolation(f"call does not match signature of {sig.name!r}")
    return sig


def execute(svc: SyntheticService, call: Call, check: bool = True) -> ExecutionResult:
    if check:
        check_call(svc.descriptor, call)
    args = call.inputs
    mid = call.method_id
    blocks = svc.blocks
    guards = svc._guards
    covered = []
    branches: Dict[str, int] = {}
    bid: Optional[str] = svc.entry[mid]
    last = bid
    while bid is not None:
        covered.append(bid)
        last = bid
        taken = guards[(mid, bid)](args)
        b = blocks[bid]
        nxt = b.on_true if taken else b.on_false
        edge = f"{bid}→{nxt if nxt is not None else TERMINAL}"
        branches[edge] = branches.get(edge, 0) + 1
        bid = nxt
    effect = blocks[last].effect
    outcome = _EFFECTS[effect]
    log = "" if effect is None else f"{effect} at block {last}"
    return ExecutionResult(frozenset(covered), branches, outcome, log)


# -- benchmark families ---------------------------------------------------------------

# Gate constants are drawn from the byte boundary values that the mutation
# operators can produce in one step (zero, one, min, max), so each gate is
# reachable by a single mutation of a prefix that already passes.
GATE_BYTES = (-128, 0, 1, 127)


def _eq_elem(k: int, c: int) -> Dict[str, Any]:
    return {"param": 0, "proj": {"elem": k}, "op": "==", "lit": c}


def gate_chain(depth: int, rng: Rng) -> SyntheticService:
    """One method taking a byte array; block i+1 requires element i to equal a
    hidden constant, so ``depth`` gates guard ``depth + 1`` blocks."""
    if depth < 1:
        raise ValueError("depth must be positive")
    consts = [rng.choice(GATE_BYTES) for _ in range(depth)]
    blocks = [
        {"id": f"g{i}", "guard": _eq_elem(i, consts[i]), "on_true": f"g{i + 1}", "on_false": None}
        for i in range(depth)
    ]
    blocks.append({"id": f"g{depth}", "guard": "always", "on_true": None, "on_false": None})
    doc = {
        "name": f"gate-chain-{depth}",
        "methods": [{"id": 0, "name": "check", "params": ["array<i8>"]}],
        "blocks": blocks,
        "entry": {"0": "g0"},
    }
    return parse_target(doc, doc["name"])


_STUB_SIGNATURES = (
    [], ["i32"], ["string"], ["bool", "i64"], ["i32", "i32"], ["string", "i16"],
    ["f64"], ["array<i32>"], ["char", "string"], ["object:Pair{a:i32,b:string}"],
)


def shared_core(methods: int, core_depth: int, rng: Rng, precheck: bool = True) -> SyntheticService:
    """``methods`` methods share one common block; all but one reach only a
    one-block stub, the remaining one guards a ``core_depth``-deep byte chain.

    With ``precheck`` the deep method first rejects empty input in a block of
    its own, so it executes more code than a stub even before any gate opens.
    """
    if methods < 2 or core_depth < 1:
        raise ValueError("need at least 2 methods and a positive core depth")
    deep = rng.randrange(methods)
    consts = [rng.choice(GATE_BYTES) for _ in range(core_depth)]
    sigs, blocks, entry = [], [{"id": "shared", "guard": "always", "on_true": None, "on_false": None}], {}
    for m in range(methods):
        if m == deep:
            sigs.append({"id": m, "name": "process", "params": ["array<i8>"]})
            for i in range(core_depth):
                blocks.append({"id": f"deep{i}", "guard": _eq_elem(i, consts[i]),
                               "on_true": f"deep{i + 1}", "on_false": "shared"})
            blocks.append({"id": f"deep{core_depth}", "guard": "always", "on_true": "shared", "on_false": None})
            entry[str(m)] = "deep0"
            if precheck:
                blocks.append({"id": "parse", "guard": {"param": 0, "proj": "length", "op": "!=", "lit": 0},
                               "on_true": "deep0", "on_false": "shared"})
                entry[str(m)] = "parse"
        else:
            params = list(_STUB_SIGNATURES[rng.randrange(len(_STUB_SIGNATURES))])
            sigs.append({"id": m, "name": f"get{m}", "params": params})
            blocks.append({"id": f"stub{m}", "guard": "always", "on_true": "shared", "on_false": None})
            entry[str(m)] = f"stub{m}"
    doc = {"name": f"shared-core-{methods}-{core_depth}", "methods": sigs, "blocks": blocks, "entry": entry}
    return parse_target(doc, doc["name"])


def dead_branch(fraction: float, rng: Optional[Rng] = None, size: int = 20) -> SyntheticService:
    """A method whose non-entry blocks are split into a live spine and dead
    chains hanging off always-false guards; ``fraction`` of them are dead."""
    if not 0.0 <= fraction <= 1.0 or size < 2:
        raise ValueError("fraction must lie in [0, 1] and size must be at least 2")
    others = size - 1
    n_dead = round(fraction * others)
    n_live = size - n_dead
    live = [f"s{i}" for i in range(n_live)]
    dead = [f"x{i}" for i in range(n_dead)]
    anchors = {}
    for k, x in enumerate(dead):
        anchors.setdefault(live[k % n_live], []).append(x)
    blocks = []
    for i, s in enumerate(live):
        nxt = live[i + 1] if i + 1 < n_live else None
        chain = anchors.get(s)
        if chain:
            blocks.append({"id": s, "guard": "never", "on_true": chain[0], "on_false": nxt})
            for j, x in enumerate(chain):
                blocks.append({"id": x, "guard": "always",
                               "on_true": chain[j + 1] if j + 1 < len(chain) else None, "on_false": None})
        else:
            blocks.append({"id": s, "guard": "always", "on_true": nxt, "on_false": None})
    doc = {
        "name": f"dead-branch-{fraction:g}",
        "methods": [{"id": 0, "name": "configure", "params": ["i32", "string"]},
                    {"id": 1, "name": "status", "params": []}],
        "blocks": blocks + [{"id": "st", "guard": "always", "on_true": None, "on_false": None}],
        "entry": {"0": "s0", "1": "st"},
    }
    return parse_target(doc, doc["name"])


def trivial(rng: Optional[Rng] = None) -> SyntheticService:
    doc = {
        "name": "trivial",
        "methods": [{"id": 0, "name": "ping", "params": ["i32"]}],
        "blocks": [{"id": "b0", "guard": "always", "on_true": None, "on_false": None}],
        "entry": {"0": "b0"},
    }
    return parse_target(doc, doc["name"])


def generate_benchmark(family: str, rng: Rng, **params) -> SyntheticService:
    if family == "gate-chain":
        return gate_chain(params.get("depth", 8), rng)
    if family == "shared-core":
        return shared_core(params.get("methods", 11), params.get("core_depth", 8), rng,
                           params.get("precheck", True))
    if family == "dead-branch":
        return dead_branch(params.get("fraction", 0.5), rng, params.get("size", 20))
    if family == "trivial":
        return trivial(rng)
    raise ValueError(f"unknown benchmark family {family!r}")


# -- wire protocol ------------------------------------------------------------------

def encode_request(sig: MethodSignature, call: Call) -> str:
    req = {"method": sig.name, "id": sig.method_id, "args": [encode_value(v) for v in call.inputs]}
    return json.dumps(req, ensure_ascii=False, separators=(",", ":"))


def encode_response(res: ExecutionResult) -> str:
    resp = {
        "blocks": sorted(res.blocks),
        "branches": [{"e": e, "n": n} for e, n in sorted(res.branches.items())],
        "outcome": res.outcome.value,
        "log": res.log,
    }
    return json.dumps(resp, ensure_ascii=False, separators=(",", ":"))


def decode_response(line: str) -> ExecutionResult:
    obj = json.loads(line)
    branches = {}
    for item in obj["branches"]:
        n = int(item["n"])
        if n < 1:
            raise ValueError(f"hit count must be positive, got {n}")
        branches[str(item["e"])] = n
    return ExecutionResult(frozenset(str(b) for b in obj["blocks"]), branches,
                           Outcome(obj["outcome"]), str(obj.get("log", "")))


def _resolve_method(descriptor: ServiceDescriptor, req: Dict[str, Any]) -> MethodSignature:
    if "id" in req:
        return descriptor.method(int(req["id"]))
    types = [a["t"] for a in req["args"]]
    for m in descriptor.methods:
        if m.name == req["method"] and [format_type(p) for p in m.params] == types:
            return m
    raise KeyError(req["method"])


def serve(svc: SyntheticService, instream: IO[str], outstream: IO[str]) -> None:
    """Answer protocol requests for ``svc`` until end of input.

    ``{"describe": true}`` returns the service descriptor; every other line is
    a call request. Malformed requests get an ``{"error": ...}`` reply.
    """
    for line in instream:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if req.get("describe"):
                reply = json.dumps(svc.descriptor.to_json(), ensure_ascii=False)
            else:
                sig = _resolve_method(svc.descriptor, req)
                call = Call(sig.method_id, tuple(decode_value(a) for a in req["args"]))
                reply = encode_response(execute(svc, call))
        except (ValueError, KeyError, TypeError, ContractViolation) as e:
            reply = json.dumps({"error": f"{type(e).__name__}: {e}"})
        outstream.write(reply + "\n")
        outstream.flush()


class ProcessHarness:
    """Runs calls against an external process speaking the line protocol.

    A missing or late reply (``timeout`` seconds) or a dead process is
    reported as a crash; the process is restarted for the next call.
    """

    def __init__(self, command: Sequence[str], descriptor: Optional[ServiceDescriptor] = None,
                 timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self.restarts = 0
        self.descriptor = descriptor if descriptor is not None else self._describe()

    def _start(self):
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()

    @staticmethod
    def _pump(stream, lines):
        for line in stream:
            lines.put(line)
        lines.put(None)

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None
            self.restarts += 1

    def _roundtrip(self, request: str) -> Optional[str]:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._kill()
            return None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise TimeoutError from None
        if line is None:
            self._kill()
        return line

    def _describe(self) -> ServiceDescriptor:
        try:
            line = self._roundtrip(json.dumps({"describe": True}))
        except TimeoutError:
            line = None
        if line is None:
            raise TargetError(f"{' '.join(self.command)}: no descriptor from target process")
        return ServiceDescriptor.from_json(json.loads(line))

    def execute(self, call: Call) -> ExecutionResult:
        sig = check_call(self.descriptor, call)
        start = time.perf_counter()
        try:
            line = self._roundtrip(encode_request(sig, call))
        except TimeoutError:
            return ExecutionResult(frozenset(), {}, Outcome.CRASH,
                                   f"timeout after {self.timeout:g}s", 1000 * (time.perf_counter() - start))
        elapsed = 1000 * (time.perf_counter() - start)
        if line is None:
            return ExecutionResult(frozenset(), {}, Outcome.CRASH, "target process exited", elapsed)
        try:
            res = decode_response(line)
        except (ValueError, KeyError, TypeError) as e:
            return ExecutionResult(frozenset(), {}, Outcome.CRASH, f"protocol error: {e}", elapsed)
        return ExecutionResult(res.blocks, res.branches, res.outcome, res.log, elapsed)

    def close(self):
        if self._proc is not None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
