"""
Declarative scenario configuration.

A scenario is a JSON document naming the referendum size, deadlines, seed,
per-participant votes and behaviours, and (for integrity tests) tamper
injections applied to the ledger after a given tick. Every problem found is
collected and reported together before anything runs.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from modules.crypto_suite import ParticipantId, available_suites
from modules.field_sss import SharingError, check_modulus
from modules.participants import (
    Behavior,
    DoubleVote,
    Honest,
    Impersonate,
    Inactive,
    InvalidVote,
    OffSchedule,
    PartialDistribution,
    SyntacticGarbage,
    VOTER_BEHAVIORS,
    WORKER_BEHAVIORS,
    WrongIntermediate,
)
from utils.config import DEFAULT_CRYPTO_SUITE, DEFAULT_DEADLINES, DEFAULT_MODULUS, DEFAULT_OPTIONS, DEFAULT_QUESTION
from utils.logger import get_logger


class ScenarioConfigError(ValueError):
    """Scenario does not validate; .diagnostics lists every `field: message`."""

    def __init__(self, diagnostics: List[str]):
        super().__init__("Invalid scenario:\n  " + "\n  ".join(diagnostics))
        self.diagnostics = list(diagnostics)


# Published schema: key -> (expected type, required). Nested objects are
# described by the *_SCHEMA tables below.
SCENARIO_SCHEMA: Dict[str, Tuple[type, bool]] = {
    "name": (str, True),
    "k": (int, True),
    "n": (int, True),
    "t": (int, True),
    "modulus": (int, False),
    "deadlines": (dict, False),
    "seed": (int, True),
    "question": (str, False),
    "options": (dict, False),
    "crypto": (str, False),
    "workers": (list, False),
    "participants": (list, False),
    "tamper": (list, False),
}
DEADLINES_SCHEMA = {"q12": (int, True), "q23": (int, True), "q34": (int, True)}
OPTIONS_SCHEMA = {"+1": (str, True), "-1": (str, True)}
PARTICIPANT_SCHEMA = {
    "index": (int, True),
    "vote": (int, False),
    "behavior": (dict, False),
    "worker_behavior": (dict, False),
}
TAMPER_SCHEMA = {"after_tick": (int, True), "seq": (int, True), "mutation": (dict, True)}
MUTATION_SCHEMA = {"kind": (str, True), "offset": (int, False)}

# Behaviour kind -> allowed extra keys
BEHAVIOR_KEYS = {
    Honest.KIND: {},
    Inactive.KIND: {},
    PartialDistribution.KIND: {"workers": list},
    SyntacticGarbage.KIND: {},
    Impersonate.KIND: {"target": int},
    InvalidVote.KIND: {"value": int},
    WrongIntermediate.KIND: {"offset": int, "apply_to": str},
    DoubleVote.KIND: {"sequence": list},
    OffSchedule.KIND: {"tick": int},
}
VOTER_KINDS = {behavior.KIND for behavior in VOTER_BEHAVIORS}
WORKER_KINDS = {behavior.KIND for behavior in WORKER_BEHAVIORS}
MUTATION_KINDS = ("flip-byte", "truncate", "identity")


@dataclass(frozen=True)
class BehaviorSpec:
    """Behaviour as written in the scenario; ids are resolved at run time."""

    kind: str = Honest.KIND
    options: Dict[str, Any] = field(default_factory=dict)

    def build(self, voter_ids: Sequence[ParticipantId]) -> Behavior:
        o = self.options
        if self.kind == Inactive.KIND:
            return Inactive()
        if self.kind == PartialDistribution.KIND:
            return PartialDistribution(tuple(o.get("workers", ())))
        if self.kind == SyntacticGarbage.KIND:
            return SyntacticGarbage()
        if self.kind == Impersonate.KIND:
            return Impersonate(voter_ids[o["target"]])
        if self.kind == InvalidVote.KIND:
            return InvalidVote(o["value"])
        if self.kind == WrongIntermediate.KIND:
            return WrongIntermediate(o.get("offset", 1), o.get("apply_to", "r"))
        if self.kind == DoubleVote.KIND:
            return DoubleVote(tuple((int(v), int(at)) for v, at in o["sequence"]))
        if self.kind == OffSchedule.KIND:
            return OffSchedule(o["tick"])
        return Honest()


@dataclass(frozen=True)
class ParticipantSpec:
    index: int
    vote: Optional[int] = None
    behavior: BehaviorSpec = field(default_factory=BehaviorSpec)
    worker_behavior: BehaviorSpec = field(default_factory=BehaviorSpec)


@dataclass(frozen=True)
class TamperInjection:
    after_tick: int
    seq: int
    kind: str
    offset: int = 0

    def mutate(self, stored: bytes) -> Optional[bytes]:
        """Mutation handed to Ledger.tamper_for_test."""
        if self.kind == "flip-byte":
            data = bytearray(stored)
            data[self.offset % len(data)] ^= 0x01
            return bytes(data)
        return stored


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    k: int
    n: int
    t: int
    seed: int
    modulus: int = DEFAULT_MODULUS
    deadlines: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_DEADLINES))
    question: str = DEFAULT_QUESTION
    options: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_OPTIONS))
    crypto: str = DEFAULT_CRYPTO_SUITE
    workers: Tuple[int, ...] = ()
    participants: Tuple[ParticipantSpec, ...] = ()
    tamper: Tuple[TamperInjection, ...] = ()

    @property
    def worker_indices(self) -> Tuple[int, ...]:
        return self.workers or tuple(range(self.n))

    def participant(self, index: int) -> ParticipantSpec:
        for spec in self.participants:
            if spec.index == index:
                return spec
        return ParticipantSpec(index)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


class _Diagnostics:
    def __init__(self):
        self.messages: List[str] = []

    def add(self, where: str, message: str):
        self.messages.append(f"{where}: {message}")

    def check_object(self, where: str, data: Any, schema: Dict[str, Tuple[type, bool]]) -> bool:
        """Type and key checks for one JSON object; False when it is unusable."""
        if not isinstance(data, dict):
            self.add(where, f"expected an object, got {type(data).__name__}")
            return False
        for key in data:
            if key not in schema:
                self.add(f"{where}.{key}" if where else key, "unknown key")
        ok = True
        for key, (kind, required) in schema.items():
            path = f"{where}.{key}" if where else key
            if key not in data:
                if required:
                    self.add(path, "missing required key")
                    ok = False
                continue
            value = data[key]
            # bool is an int subclass; never accept it for numeric fields
            if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
                self.add(path, f"expected {kind.__name__}, got {type(value).__name__}")
                ok = False
        return ok


def _parse_behavior(where: str, data: Optional[dict], allowed: set, k: int, n: int,
                    diagnostics: _Diagnostics) -> BehaviorSpec:
    if data is None:
        return BehaviorSpec()
    kind = data.get("kind")
    if kind not in allowed:
        diagnostics.add(f"{where}.kind", f"must be one of {sorted(allowed)}, got {kind!r}")
        return BehaviorSpec()
    options = {key: value for key, value in data.items() if key != "kind"}
    expected = BEHAVIOR_KEYS[kind]
    for key, value in options.items():
        if key not in expected:
            diagnostics.add(f"{where}.{key}", f"unknown key for behavior {kind}")
        elif not isinstance(value, expected[key]) or isinstance(value, bool):
            diagnostics.add(f"{where}.{key}", f"expected {expected[key].__name__}")

    if kind == PartialDistribution.KIND:
        positions = options.get("workers", [])
        if not all(isinstance(p, int) and 0 <= p < n for p in positions):
            diagnostics.add(f"{where}.workers", f"worker positions must lie in [0, {n})")
    if kind == Impersonate.KIND:
        target = options.get("target")
        if not isinstance(target, int) or not 0 <= target < k:
            diagnostics.add(f"{where}.target", f"must be a voter index in [0, {k})")
    if kind == InvalidVote.KIND and "value" not in options:
        diagnostics.add(f"{where}.value", "missing required key")
    if kind == WrongIntermediate.KIND and options.get("apply_to", "r") not in ("r", "c", "both"):
        diagnostics.add(f"{where}.apply_to", "must be r, c or both")
    if kind == DoubleVote.KIND:
        sequence = options.get("sequence")
        if not isinstance(sequence, list) or not sequence or not all(
                isinstance(e, list) and len(e) == 2 and e[0] in (1, -1) and isinstance(e[1], int)
                for e in sequence):
            diagnostics.add(f"{where}.sequence", "must be a non-empty list of [vote, tick] with vote +1 or -1")
    if kind == OffSchedule.KIND and not isinstance(options.get("tick"), int):
        diagnostics.add(f"{where}.tick", "missing required key")
    return BehaviorSpec(kind, options)


def parse_scenario(data: Any) -> ScenarioConfig:
    """
    Validate a decoded JSON scenario and build the config.

    Raises:
        ScenarioConfigError: with every diagnostic found
    """
    diagnostics = _Diagnostics()
    if not diagnostics.check_object("", data, SCENARIO_SCHEMA):
        raise ScenarioConfigError(diagnostics.messages)

    k, n, t = data["k"], data["n"], data["t"]
    modulus = data.get("modulus", DEFAULT_MODULUS)
    if k < 1:
        diagnostics.add("k", "at least one voter is required")
    if t < 2:
        diagnostics.add("t", "threshold must be at least 2")
    if n > k:
        diagnostics.add("n", f"{n} workers exceed {k} voters")
    if n < 2 * t - 1:
        diagnostics.add("n", f"{n} workers < 2t-1 = {2 * t - 1}")
    try:
        check_modulus(modulus, max(k, 1))
    except SharingError as e:
        diagnostics.add("modulus", str(e))

    deadlines = dict(DEFAULT_DEADLINES)
    if "deadlines" in data and diagnostics.check_object("deadlines", data["deadlines"], DEADLINES_SCHEMA):
        deadlines = dict(data["deadlines"])
        if deadlines["q12"] < 0:
            diagnostics.add("deadlines.q12", "must be non-negative")
        if deadlines["q23"] <= deadlines["q12"] + 1:
            diagnostics.add("deadlines.q23", "must leave at least one vote tick after q12")
        if deadlines["q34"] <= deadlines["q23"]:
            diagnostics.add("deadlines.q34", "must be later than q23")

    options = dict(DEFAULT_OPTIONS)
    if "options" in data and diagnostics.check_object("options", data["options"], OPTIONS_SCHEMA):
        options = dict(data["options"])

    crypto = data.get("crypto", DEFAULT_CRYPTO_SUITE)
    if crypto not in available_suites():
        diagnostics.add("crypto", f"must be one of {available_suites()}")

    workers: Tuple[int, ...] = ()
    if "workers" in data:
        workers = tuple(data["workers"])
        if len(workers) != n:
            diagnostics.add("workers", f"must list exactly n={n} voter indices")
        if len(set(workers)) != len(workers) or not all(isinstance(w, int) and 0 <= w < k for w in workers):
            diagnostics.add("workers", f"must be distinct voter indices in [0, {k})")

    participants = []
    seen = set()
    for position, entry in enumerate(data.get("participants", [])):
        where = f"participants[{position}]"
        if not diagnostics.check_object(where, entry, PARTICIPANT_SCHEMA):
            continue
        index = entry["index"]
        if not 0 <= index < k:
            diagnostics.add(f"{where}.index", f"must lie in [0, {k})")
        if index in seen:
            diagnostics.add(f"{where}.index", f"voter {index} listed twice")
        seen.add(index)
        vote = entry.get("vote")
        if vote is not None and vote not in (1, -1):
            diagnostics.add(f"{where}.vote", "must be +1 or -1")
        behavior = _parse_behavior(f"{where}.behavior", entry.get("behavior"), VOTER_KINDS, k, n, diagnostics)
        worker_behavior = _parse_behavior(f"{where}.worker_behavior", entry.get("worker_behavior"),
                                          WORKER_KINDS, k, n, diagnostics)
        if "worker_behavior" in entry and index not in (workers or range(n)):
            diagnostics.add(f"{where}.worker_behavior", f"voter {index} is not a worker")
        participants.append(ParticipantSpec(index, vote, behavior, worker_behavior))

    tamper = []
    for position, entry in enumerate(data.get("tamper", [])):
        where = f"tamper[{position}]"
        if not diagnostics.check_object(where, entry, TAMPER_SCHEMA):
            continue
        mutation = entry["mutation"]
        if not diagnostics.check_object(f"{where}.mutation", mutation, MUTATION_SCHEMA):
            continue
        if mutation["kind"] not in MUTATION_KINDS:
            diagnostics.add(f"{where}.mutation.kind", f"must be one of {list(MUTATION_KINDS)}")
        if entry["seq"] < 0:
            diagnostics.add(f"{where}.seq", "must be non-negative")
        tamper.append(TamperInjection(entry["after_tick"], entry["seq"], mutation["kind"], mutation.get("offset", 0)))

    if diagnostics.messages:
        raise ScenarioConfigError(diagnostics.messages)

    return ScenarioConfig(
        name=data["name"],
        k=k,
        n=n,
        t=t,
        seed=data["seed"],
        modulus=modulus,
        deadlines=deadlines,
        question=data.get("question", DEFAULT_QUESTION),
        options=options,
        crypto=crypto,
        workers=workers,
        participants=tuple(participants),
        tamper=tuple(tamper),
    )


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a scenario file."""
    logger = get_logger()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioConfigError([f"{path}: file not found"])
    except json.JSONDecodeError as e:
        raise ScenarioConfigError([f"{path}: not valid JSON ({e.msg} at line {e.lineno})"])
    config = parse_scenario(data)
    logger.info(f"Loaded scenario '{config.name}' from {path}")
    return config
