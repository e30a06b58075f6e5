"""Operational semantics of a 2qcfa debate verifier.

A verifier is a finite classical control with a small quantum register,
a read-only input tape ``¢w$`` and a public communication cell holding
``(verifier symbol, P1 symbol, P0 symbol)``. Communication states write a
symbol and collect one symbol from each debater; reading states apply a
register operation, broadcast its outcome and then move the head.

Transition tables are plain mappings. Hand-written machines use dicts
(with ``*`` wildcards on the input and communication symbols); compiled
machines use :class:`LazyTable`, which computes entries on demand.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, NamedTuple

from .linalg import div
from .quantum import (
    ACCEPT,
    CONTINUE,
    REJECT,
    RESTART,
    CoinFlip,
    Measure,
    OperationElement,
    RotationStep,
    RotationTracker,
    Superoperator,
    canonical_direction,
    check_completeness,
    identity,
    mat_vec,
    q1_probability,
    squared_norm,
)

LEFT_END = "¢"
RIGHT_END = "$"
BLANK = "_"
WILDCARD = "*"
MOVES = {"left": -1, "stay-put": 0, "right": 1}

READING = "reading"
COMMUNICATION = "communication"
HALT_ACCEPT = "accept"
HALT_REJECT = "reject"


class MachineError(RuntimeError):
    """Runtime failure of a machine: missing entry, head off tape, bad strategy."""


class SpecIncomplete(MachineError):
    def __init__(self, table: str, key: tuple):
        super().__init__(f"{table} has no entry for {key!r}")
        self.table = table
        self.key = key


class SequenceExhausted(MachineError):
    pass


class UndefinedRatio(ZeroDivisionError):
    """Both accept and reject mass are zero: the debate never halts."""


class LazyTable(Mapping):
    """A transition table whose entries are computed by ``fn(key)``.

    ``fn`` raises KeyError for undefined keys. Iteration needs an
    ``enumerate_keys`` callable and is only used for materialization.
    """

    def __init__(self, fn: Callable[[tuple], Any], enumerate_keys: Callable[[], Iterable[tuple]] | None = None):
        self._fn = fn
        self._enumerate = enumerate_keys
        self._cache: dict = {}

    def __getitem__(self, key):
        try:
            return self._cache[key]
        except KeyError:
            pass
        value = self._fn(key)
        self._cache[key] = value
        return value

    def __iter__(self) -> Iterator:
        if self._enumerate is None:
            raise TypeError("this lazy table cannot be enumerated")
        return iter(self._enumerate())

    def __len__(self) -> int:
        return sum(1 for _ in self)


@dataclass(frozen=True, eq=False)
class VerifierSpec:
    """The 8-tuple ``(Q, S, Sigma, Gamma, delta, q1, s1, s_a, s_r)``.

    ``register`` is ``"vector"`` (a rational state vector over
    ``quantum_states``) or ``"rotation"`` (``len(quantum_states)//2``
    rotation qubits). Classical states are any hashable values.
    """

    name: str
    quantum_states: tuple[str, ...]
    reading_states: Any
    communication_states: Any
    accept_state: Hashable
    reject_state: Hashable
    input_alphabet: tuple[str, ...]
    comm_alphabet: tuple[str, ...]
    delta_c: Mapping
    delta_q: Mapping
    delta_s: Mapping
    initial_classical: Hashable
    initial_quantum: int = 0
    register: str = "vector"
    rotation_unit: Fraction = Fraction(1)
    metadata: dict = field(default_factory=dict)

    @property
    def qubits(self) -> int:
        return len(self.quantum_states) // 2 if self.register == "rotation" else 0

    def kind(self, state) -> str:
        if state == self.accept_state:
            return HALT_ACCEPT
        if state == self.reject_state:
            return HALT_REJECT
        if state in self.communication_states:
            return COMMUNICATION
        if state in self.reading_states:
            return READING
        raise MachineError(f"unknown classical state {state!r}")

    def initial_register(self) -> tuple:
        if self.register == "rotation":
            return (0,) * self.qubits
        return tuple(int(i == self.initial_quantum) for i in range(len(self.quantum_states)))

    def lookup_c(self, state, sym):
        return _lookup(self.delta_c, "delta_c", (state, sym), wild=(1,))

    def lookup_q(self, state, sym, gp, gr):
        return _lookup(self.delta_q, "delta_q", (state, sym, gp, gr), wild=(1, 2, 3))

    def lookup_s(self, state, sym, gp, gr, outcome):
        return _lookup(self.delta_s, "delta_s", (state, sym, gp, gr, outcome), wild=(1, 2, 3))


def _lookup(table: Mapping, name: str, key: tuple, wild: tuple[int, ...]):
    if isinstance(table, LazyTable):
        try:
            return table[key]
        except KeyError:
            raise SpecIncomplete(name, key) from None
    value = table.get(key)
    if value is not None:
        return value
    # most specific wildcard first
    for count in range(1, len(wild) + 1):
        for positions in itertools.combinations(wild, count):
            probe = tuple(WILDCARD if i in positions else k for i, k in enumerate(key))
            value = table.get(probe)
            if value is not None:
                return value
    raise SpecIncomplete(name, key)


class MachineConfig(NamedTuple):
    classical_state: Hashable
    head_pos: int
    register: tuple
    p1_state: Hashable
    p0_state: Hashable
    comm_cell: tuple[str, str, str]


@dataclass(frozen=True)
class PublicEvent:
    kind: str  # verifier-wrote | debaters-wrote | outcome-observed | restart | halt
    payload: Any = None

    def to_line(self) -> str:
        return json.dumps({"kind": self.kind, "payload": self.payload}, ensure_ascii=False)


@dataclass(frozen=True)
class Branch:
    """One successor of :func:`step`.

    ``prob`` is relative to the current configuration (1 for deterministic
    moves); ``kind`` is ``continue``, ``accept``, ``reject`` or ``restart``.
    """

    prob: Any
    kind: str
    config: MachineConfig | None
    events: tuple[PublicEvent, ...]


def tape_of(w: str) -> str:
    return LEFT_END + w + RIGHT_END


def initial_config(spec: VerifierSpec, p1, p0) -> MachineConfig:
    return MachineConfig(
        spec.initial_classical, 0, spec.initial_register(), p1.initial(), p0.initial(), (BLANK, BLANK, BLANK)
    )


def _broadcast(p1, p0, s1, s0, event: PublicEvent):
    return p1.observe(s1, event), p0.observe(s0, event)


def _emit(strategy, state):
    out = strategy.emit(state)
    if out is None or out[0] is None:
        raise MachineError(f"strategy {strategy!r} produced no symbol")
    return out


def communicate(spec: VerifierSpec, cfg: MachineConfig, tape: str, p1, p0):
    """Deterministic communication move; returns the new config and its events."""
    sym = tape[cfg.head_pos]
    target, gamma = spec.lookup_c(cfg.classical_state, sym)
    e1 = PublicEvent("verifier-wrote", gamma)
    s1, s0 = _broadcast(p1, p0, cfg.p1_state, cfg.p0_state, e1)
    gp, s1 = _emit(p1, s1)
    gr, s0 = _emit(p0, s0)
    e2 = PublicEvent("debaters-wrote", [gp, gr])
    s1, s0 = _broadcast(p1, p0, s1, s0, e2)
    new = cfg._replace(classical_state=target, p1_state=s1, p0_state=s0, comm_cell=(gamma, gp, gr))
    return new, (e1, e2)


def register_branches(spec: VerifierSpec, op, reg: tuple):
    """Yield ``(outcome, relative probability, new register)`` for every possible outcome."""
    if isinstance(op, Superoperator):
        if spec.register != "vector":
            raise MachineError("superoperator applied to a rotation register")
        norm = squared_norm(reg)
        for i, element in enumerate(op.elements):
            w = mat_vec(element.matrix, reg)
            p = squared_norm(w)
            if p:
                yield i, Fraction(p) / norm, canonical_direction(w)[0]
    elif isinstance(op, RotationStep):
        if spec.register != "rotation":
            raise MachineError("rotation applied to a vector register")
        yield 0, 1, tuple(k + u for k, u in zip(reg, op.units))
    elif isinstance(op, Measure):
        if spec.register != "rotation":
            raise MachineError("qubit measurement on a vector register")
        k = reg[op.qubit]
        reset = reg[: op.qubit] + (0,) + reg[op.qubit + 1 :]
        if k == 0:
            yield 0, 1, reg
        else:
            p1 = q1_probability(RotationTracker(k, spec.rotation_unit))
            yield 0, 1 - p1, reset
            yield 1, p1, reset
    elif isinstance(op, CoinFlip):
        share = Fraction(1, len(op.actions))
        for i in op.outcomes:
            yield i, share, reg
    else:
        raise MachineError(f"unsupported register operation {op!r}")


def read_move(spec: VerifierSpec, cfg: MachineConfig, tape: str, p1, p0, op, outcome: int, new_reg: tuple):
    """Classical part of a reading move once ``outcome`` is known."""
    state = cfg.classical_state
    sym = tape[cfg.head_pos]
    _, gp, gr = cfg.comm_cell
    event = PublicEvent("outcome-observed", outcome)
    s1, s0 = _broadcast(p1, p0, cfg.p1_state, cfg.p0_state, event)
    action = op.action(outcome)
    if action != CONTINUE:
        return action, None, (event,)
    target, move = spec.lookup_s(state, sym, gp, gr, outcome)
    if target == spec.accept_state:
        return ACCEPT, None, (event,)
    if target == spec.reject_state:
        return REJECT, None, (event,)
    head = cfg.head_pos + MOVES[move]
    if not 0 <= head < len(tape):
        raise MachineError(f"head leaves the tape from {cfg.head_pos} in state {state!r}")
    new = MachineConfig(target, head, new_reg, s1, s0, cfg.comm_cell)
    return CONTINUE, new, (event,)


def step(spec: VerifierSpec, cfg: MachineConfig, tape: str, p1, p0) -> list[Branch]:
    """All successors of a non-halting configuration, with their probabilities.

    Outcomes that lead to the same action class are kept separate here;
    callers group them (all restart outcomes count as one restart).
    """
    kind = spec.kind(cfg.classical_state)
    if kind == COMMUNICATION:
        new, events = communicate(spec, cfg, tape, p1, p0)
        return [Branch(1, CONTINUE, new, events)]
    if kind != READING:
        raise MachineError("step called on a halting configuration")
    state = cfg.classical_state
    sym = tape[cfg.head_pos]
    _, gp, gr = cfg.comm_cell
    op = spec.lookup_q(state, sym, gp, gr)
    out = []
    for outcome, prob, new_reg in register_branches(spec, op, cfg.register):
        if prob == 0:
            continue
        action, new, events = read_move(spec, cfg, tape, p1, p0, op, outcome, new_reg)
        out.append(Branch(prob, action, new, events))
    return out


# --- validation -------------------------------------------------------------


def _states(collection) -> list:
    try:
        return list(collection)
    except TypeError:
        return []


def validate(spec: VerifierSpec, max_entries: int = 200_000) -> list[str]:
    """Return a list of defects; empty iff the spec is well formed.

    Lazy tables are checked over the entries they enumerate; dict tables
    are additionally checked for totality.
    """
    defects: list[str] = []
    if spec.accept_state == spec.reject_state:
        defects.append("distinct-halting-states: s_a equals s_r")
    reading = set(_states(spec.reading_states))
    comm = set(_states(spec.communication_states))
    halting = {spec.accept_state, spec.reject_state}
    if reading & comm or (reading | comm) & halting:
        defects.append("state-partition: reading, communication and halting states overlap")
    if spec.register not in ("vector", "rotation"):
        defects.append(f"register-kind: unknown register {spec.register!r}")
    if spec.register == "rotation" and len(spec.quantum_states) % 2:
        defects.append("register-kind: rotation registers need two quantum states per qubit")
    if spec.register == "vector" and not 0 <= spec.initial_quantum < len(spec.quantum_states):
        defects.append("initial-quantum-state: q1 not in Q")
    try:
        spec.kind(spec.initial_classical)
    except MachineError:
        defects.append("initial-classical-state: s1 not in S")
    sigma = list(spec.input_alphabet) + [LEFT_END, RIGHT_END]
    gammas = list(spec.comm_alphabet)

    def known(state) -> bool:
        try:
            spec.kind(state)
            return True
        except MachineError:
            return False

    # delta_c
    seen_ops: dict[int, Any] = {}
    lazy = any(isinstance(t, LazyTable) for t in (spec.delta_c, spec.delta_q, spec.delta_s))
    if not lazy:
        for s in comm:
            for a in sigma:
                try:
                    target, g = spec.lookup_c(s, a)
                except SpecIncomplete:
                    defects.append(f"delta_c-total: no entry for ({s!r}, {a!r})")
                    continue
                if target not in reading:
                    defects.append(f"delta_c-target: ({s!r}, {a!r}) goes to non-reading state {target!r}")
                if g not in gammas:
                    defects.append(f"delta_c-symbol: ({s!r}, {a!r}) writes {g!r} outside Gamma")
    # delta_q / delta_s
    q_items: Iterable
    if lazy:
        q_items = itertools.islice(spec.delta_q.items(), max_entries)
    else:
        q_items = list(spec.delta_q.items())
    for key, op in q_items:
        state, sym = key[0], key[1]
        defects.extend(_check_op(spec, key, op, seen_ops))
        for outcome in op.outcomes:
            if op.action(outcome) != CONTINUE:
                continue
            try:
                target, move = spec.lookup_s(*key, outcome)
            except SpecIncomplete:
                defects.append(f"delta_s-total: no entry for {key + (outcome,)!r}")
                continue
            if not known(target):
                defects.append(f"delta_s-target: {key + (outcome,)!r} goes to unknown state {target!r}")
            if move not in MOVES:
                defects.append(f"delta_s-move: {key + (outcome,)!r} has move {move!r}")
            elif (sym == LEFT_END and MOVES[move] < 0) or (sym == RIGHT_END and MOVES[move] > 0):
                defects.append(f"head-bounds: {key + (outcome,)!r} moves the head off the tape")
        if not lazy and state not in reading:
            defects.append(f"delta_q-source: {key!r} is keyed on a non-reading state")
    if not lazy:
        for s in reading:
            for a in sigma:
                for gp in gammas + [BLANK]:
                    for gr in gammas + [BLANK]:
                        try:
                            spec.lookup_q(s, a, gp, gr)
                        except SpecIncomplete:
                            defects.append(f"delta_q-total: no entry for ({s!r}, {a!r}, {gp!r}, {gr!r})")
    return defects


def _check_op(spec: VerifierSpec, key, op, seen: dict) -> list[str]:
    if id(op) in seen:
        return []
    seen[id(op)] = op
    if isinstance(op, Superoperator):
        if spec.register != "vector":
            return [f"register-mixing: superoperator on rotation register at {key!r}"]
        if op.dim != len(spec.quantum_states):
            return [f"superoperator-dimension: {op.dim} != |Q| at {key!r}"]
        if not check_completeness(op):
            return [f"completeness: superoperator {op.name or key!r} violates sum E^T E = I"]
        return []
    if isinstance(op, (RotationStep, Measure)):
        if spec.register != "rotation":
            return [f"register-mixing: rotation operation on vector register at {key!r}"]
        if isinstance(op, RotationStep) and len(op.units) != spec.qubits:
            return [f"rotation-arity: {len(op.units)} units for {spec.qubits} qubits at {key!r}"]
        if isinstance(op, Measure) and not 0 <= op.qubit < spec.qubits:
            return [f"rotation-arity: qubit {op.qubit} out of range at {key!r}"]
        return []
    if isinstance(op, CoinFlip):
        return []
    return [f"unknown-operation: {op!r} at {key!r}"]


# --- ratios and derandomization ---------------------------------------------------


def overall_acceptance(p_accept, p_reject):
    """Overall acceptance of a program with restart: ``p_a / (p_a + p_r)``."""
    if p_accept + p_reject == 0:
        raise UndefinedRatio("accept and reject mass are both zero")
    return div(p_accept, p_accept + p_reject)


def is_classical_coin(op) -> bool:
    """True for operations whose outcomes carry no amplitude information."""
    if isinstance(op, CoinFlip):
        return True
    if isinstance(op, Superoperator):
        for e in op.elements:
            m = e.matrix
            c = m[0][0]
            if any(m[i][j] != (c if i == j else 0) for i in range(len(m)) for j in range(len(m))):
                return False
        return True
    return False


def _resolve(op, outcome: int):
    if isinstance(op, CoinFlip):
        return CoinFlip((op.actions[outcome],), name=f"{op.name}[{outcome}]")
    element = op.elements[outcome]
    return Superoperator(
        (OperationElement(identity(op.dim), element.action, element.label),),
        name=f"{op.name}[{outcome}]",
    )


def derandomize(spec: VerifierSpec, sequence) -> VerifierSpec:
    """Hard-wire a sequence of coin outcomes into a classical verifier.

    Classical states become ``(state, index)``; the ``index``-th coin flip
    of a run is resolved to ``sequence[index]``. Running past the end of
    the sequence raises :class:`SequenceExhausted`.
    """
    sequence = tuple(sequence)
    ops = spec.delta_q.values() if not isinstance(spec.delta_q, LazyTable) else []
    multi = [op for op in ops if len(op.outcomes) > 1]
    for op in multi:
        if not is_classical_coin(op):
            raise ValueError("derandomize needs a verifier whose only randomness is classical coins")
    if not multi and not sequence:
        return spec

    def wrap(s, i):
        return s if s in (spec.accept_state, spec.reject_state) else (s, i)

    def dc(key):
        (s, i), sym = key
        target, g = spec.lookup_c(s, sym)
        return wrap(target, i), g

    def dq(key):
        (s, i), sym, gp, gr = key
        op = spec.lookup_q(s, sym, gp, gr)
        if len(op.outcomes) == 1:
            return op
        if i >= len(sequence):
            raise SequenceExhausted(f"coin flip #{i + 1} needed but only {len(sequence)} outcomes supplied")
        return _resolve(op, sequence[i])

    def ds(key):
        (s, i), sym, gp, gr, outcome = key
        op = spec.lookup_q(s, sym, gp, gr)
        if len(op.outcomes) == 1:
            target, move = spec.lookup_s(s, sym, gp, gr, outcome)
            return wrap(target, i), move
        target, move = spec.lookup_s(s, sym, gp, gr, sequence[i])
        return wrap(target, i + 1), move

    class _Wrapped:
        def __init__(self, base):
            self.base = set(_states(base))

        def __contains__(self, item):
            return isinstance(item, tuple) and len(item) == 2 and item[0] in self.base

    return replace(
        spec,
        name=f"{spec.name}/derandomized",
        reading_states=_Wrapped(spec.reading_states),
        communication_states=_Wrapped(spec.communication_states),
        delta_c=LazyTable(dc),
        delta_q=LazyTable(dq),
        delta_s=LazyTable(ds),
        initial_classical=(spec.initial_classical, 0),
        metadata={**spec.metadata, "derandomized_with": list(sequence)},
    )
