"""Compilers from Turing machines to 2qcfa debate verifiers.

The verifiers built here use a four-state rational register. Amplitude 1
is a constant reference; amplitudes 2-4 hold base-``m`` encodings of
configuration strings. Every symbol a debater transmits is charged exactly
one superoperator whose main element carries the factor ``1/d``.

Computing token ``j`` of ``next(c)`` needs token ``j+1`` of ``c``, so the
operator for a token is applied when the following token arrives. At the
second ``$`` of a block the two outstanding operators are applied back to
back without moving the head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, NamedTuple

from .linalg import NotPositiveSemidefinite, psd_completion
from .machine import LEFT_END, RIGHT_END, LazyTable, VerifierSpec
from .quantum import (
    ACCEPT,
    CONTINUE,
    FAIR_COIN_4,
    REJECT,
    RESTART,
    OperationElement,
    Superoperator,
    check_completeness,
    completeness_residual,
    identity,
)
from .tm import (
    BLANK,
    SEPARATOR,
    EncodingParams,
    SingleTapeTM,
    composite,
    local_next_token,
    split_composite,
)

POLL = "?"
SILENT = "-"
QUANTUM_STATES = ("q1", "q2", "q3", "q4")

MAIN_KINDS = (
    "first-block-digit",
    "digit-pair",
    "finish-shorter",
    "finish-longer",
    "blank-pad",
    "scale",
    "transition-check",
    "halt-decide",
    "advance",
)


class CompileError(ValueError):
    pass


# --- operation elements ---------------------------------------------------------


def _scaled(rows, d: int):
    f = Fraction(1, d)
    return tuple(tuple(f * x for x in row) for row in rows)


def build_main_element(
    kind: str,
    enc: EncodingParams,
    sigma: str | None = None,
    gamma: str | None = None,
    decision: str | None = None,
) -> OperationElement:
    """The main operation element of one kind, with prefactor ``1/d``.

    ``sigma``/``gamma`` are the tokens being appended to amplitudes 3/4
    (``digit-pair``) or to amplitude 2 (``first-block-digit`` uses
    ``gamma``). ``decision`` is the halting action for ``halt-decide`` and
    the action taken against the traced debater for ``transition-check``.
    """
    m, d = enc.m, enc.d
    need = {
        "first-block-digit": ("gamma",),
        "digit-pair": ("sigma", "gamma"),
        "halt-decide": ("decision",),
        "transition-check": ("decision",),
    }.get(kind, ())
    given = {"sigma": sigma, "gamma": gamma, "decision": decision}
    missing = [k for k in need if given[k] is None]
    extra = [k for k, v in given.items() if v is not None and k not in need]
    if kind not in MAIN_KINDS:
        raise CompileError(f"unknown element kind {kind!r}")
    if missing or extra:
        raise CompileError(f"{kind}: missing {missing} / unexpected {extra}")
    hash_digit = enc.e(BLANK)
    if kind == "first-block-digit":
        rows = [(1, 0, 0, 0), (enc.e(gamma), m, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)]
    elif kind == "blank-pad":
        rows = [(1, 0, 0, 0), (hash_digit, m, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)]
    elif kind == "digit-pair":
        rows = [(1, 0, 0, 0), (0, 1, 0, 0), (enc.e(sigma), 0, m, 0), (enc.e(gamma), 0, 0, m)]
    elif kind in ("finish-shorter", "scale"):
        rows = identity(4)
    elif kind == "finish-longer":
        rows = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (hash_digit, 0, 0, m)]
    elif kind == "transition-check":
        rows = [(0, 0, 0, 0), (0, 1, -1, 0), (0, 0, 0, 0), (0, 0, 0, 0)]
    elif kind == "halt-decide":
        rows = [(1, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)]
    else:  # advance
        rows = [(1, 0, 0, 0), (0, 0, 0, 1), (0, 0, 0, 0), (0, 0, 0, 0)]
    action = CONTINUE
    if kind in ("halt-decide", "transition-check"):
        if decision not in (ACCEPT, REJECT):
            raise CompileError(f"{kind}: decision must be accept or reject")
        action = decision
    label = kind if sigma is None and gamma is None else f"{kind}({sigma or ''},{gamma or ''})"
    return OperationElement(_scaled(rows, d), action, label)


def complete_superoperator(mains, d: int | None = None, name: str = "") -> Superoperator:
    """Append restart elements so that ``sum E^T E = I`` holds exactly."""
    mains = tuple(mains)
    residual = completeness_residual(mains)
    try:
        aux = psd_completion(residual)
    except NotPositiveSemidefinite as exc:
        hint = f" (d={d} is too small; use a larger d)" if d else ""
        raise CompileError(f"main elements exceed the identity{hint}") from exc
    elements = mains + tuple(
        OperationElement(a, RESTART, f"aux{i + 1}") for i, a in enumerate(aux)
    )
    op = Superoperator(elements, name or "+".join(e.label for e in mains))
    if not check_completeness(op):  # pragma: no cover - psd_completion is exact
        raise CompileError("completion failed")
    return op


def choose_d(tm_or_size, m: int) -> int:
    """Smallest power of two that is at least ``max(2m+1, 2E+2)``.

    ``E`` is the largest digit in use (``|Gamma|`` for the stream alphabet of
    ``tm``, or the integer passed directly).
    """
    size = tm_or_size if isinstance(tm_or_size, int) else len(tm_or_size.stream_alphabet())
    bound = max(2 * m + 1, 2 * size + 2)
    return 1 << math.ceil(math.log2(bound))


def encoding_for(tm, m: int, d: int | None = None, strict: bool = True) -> EncodingParams:
    d = d or choose_d(tm, m)
    return EncodingParams.build(tm.stream_alphabet(), m, d, extra=tm.halting_tokens(), strict=strict)


# --- classical control ------------------------------------------------------------

AGREE, TRACE1, TRACE0 = "agree", "P1", "P0"


class Ctx(NamedTuple):
    """Finite classical memory between two received symbols."""

    mode: str  # agree | P1 | P0
    first: bool  # processing c1
    check: str | None  # first-configuration checker: first | mid | hash | dollar | dollar2
    pos: str  # start | body | d1 (first $ seen)
    prev2: str | None
    prev1: str | None
    heads: int
    longer: bool
    halt: str | None  # accept | reject once next(c) is seen to halt


START_CTX = Ctx(AGREE, True, "first", "start", None, None, 0, False, None)


@dataclass(frozen=True)
class Plan:
    """What a reading state does with one received symbol.

    ``ops`` are applied in order with the head fixed. Afterwards either
    ``goto`` holds ``(comm_ctx, move)``, ``decide`` holds a halting state,
    or ``branch`` pairs outcomes of the last op with the context to read on in.
    """

    ops: tuple
    goto: tuple | None = None
    decide: str | None = None
    branch: tuple | None = None


IDENTITY_OP = Superoperator((OperationElement(identity(4), CONTINUE, "identity"),), "identity")


class StateClass:
    """Container test for lazily defined classical state sets."""

    def __init__(self, predicate: Callable[[Any], bool], label: str):
        self._pred = predicate
        self.label = label

    def __contains__(self, item) -> bool:
        try:
            return bool(self._pred(item))
        except Exception:
            return False

    def __repr__(self) -> str:
        return f"StateClass({self.label})"


def _against(mode: str) -> str:
    """Decision that goes against the debater followed in ``mode``."""
    return REJECT if mode == TRACE1 else ACCEPT


class _V1Builder:
    def __init__(self, tm: SingleTapeTM, enc: EncodingParams, fact1: bool):
        self.tm = tm
        self.enc = enc
        self.fact1 = fact1
        self.gamma = frozenset(tm.stream_alphabet())
        self.ops: dict = {}

    # superoperators are shared between table entries
    def op(self, kind: str, **kw) -> Superoperator:
        key = (kind, tuple(sorted(kw.items())))
        op = self.ops.get(key)
        if op is None:
            mains = [build_main_element(kind, self.enc, **kw)]
            op = complete_superoperator(mains, self.enc.d, mains[0].label)
            self.ops[key] = op
        return op

    def traced_final(self, against: str, halt: str | None) -> Superoperator:
        key = ("traced-final", against, halt)
        op = self.ops.get(key)
        if op is None:
            check = build_main_element("transition-check", self.enc, decision=against)
            second = (
                build_main_element("halt-decide", self.enc, decision=halt)
                if halt
                else build_main_element("advance", self.enc)
            )
            op = complete_superoperator([check, second], self.enc.d)
            self.ops[key] = op
        return op

    def next_token(self, left, mid, right) -> str:
        return local_next_token(self.tm.delta, left, mid, right)

    # one received symbol ------------------------------------------------------

    def plan(self, ctx: Ctx, sym: str, gp: str, gr: str) -> Plan:
        if ctx.mode == AGREE:
            if ctx.first:
                bad1 = self.first_config_violation(ctx, sym, gp)
                bad0 = self.first_config_violation(ctx, sym, gr)
                if bad1 or bad0:
                    return Plan((IDENTITY_OP,), decide=REJECT if bad1 else ACCEPT)
            if gp != gr:
                # a fair coin picks the debater to follow from here on
                return Plan(
                    (FAIR_COIN_4,),
                    branch=((0, ctx._replace(mode=TRACE1)), (1, ctx._replace(mode=TRACE1)),
                            (2, ctx._replace(mode=TRACE0)), (3, ctx._replace(mode=TRACE0))),
                )
            g = gp
        else:
            g = gp if ctx.mode == TRACE1 else gr
            if ctx.first and self.first_config_violation(ctx, sym, g):
                return Plan((IDENTITY_OP,), decide=_against(ctx.mode))
        return self.process(ctx, sym, g)

    def first_config_violation(self, ctx: Ctx, sym: str, g: str) -> bool:
        return g != self.expected_first(ctx, sym)

    def expected_first(self, ctx: Ctx, sym: str) -> str:
        c = ctx.check
        if c == "first":
            return composite(self.tm.start, BLANK if sym == RIGHT_END else sym)
        if c == "mid":
            return BLANK if sym == RIGHT_END else sym
        if c == "hash":
            return BLANK
        return SEPARATOR

    def next_check(self, ctx: Ctx, sym: str) -> tuple[str | None, str]:
        """Checker state and head move after a correct c1 symbol."""
        c = ctx.check
        if c == "first":
            return ("hash", "stay-put") if sym == RIGHT_END else ("mid", "right")
        if c == "mid":
            return ("dollar", "stay-put") if sym == RIGHT_END else ("mid", "right")
        if c == "hash":
            return "dollar", "stay-put"
        if c == "dollar":
            return "dollar2", "stay-put"
        return None, "stay-put"

    def violation(self, ctx: Ctx) -> Plan:
        # in agreement both debaters sent the same bad stream; either verdict is fine
        return Plan((IDENTITY_OP,), decide=REJECT if ctx.mode == AGREE else _against(ctx.mode))

    def digit_op(self, ctx: Ctx, sigma: str, gamma: str) -> Superoperator:
        if ctx.first:
            return self.op("first-block-digit", gamma=gamma)
        return self.op("digit-pair", sigma=sigma, gamma=gamma)

    def halting_of(self, token: str) -> str | None:
        parts = split_composite(token)
        if parts is None:
            return None
        if parts[0] == self.tm.accept:
            return ACCEPT
        if parts[0] == self.tm.reject:
            return REJECT
        return None

    def process(self, ctx: Ctx, sym: str, g: str) -> Plan:
        check, move = (None, "stay-put")
        if ctx.first:
            check, move = self.next_check(ctx, sym)
        if ctx.pos == "d1":
            if g != SEPARATOR:
                return self.violation(ctx)
            if ctx.first:
                finish = self.op("blank-pad") if ctx.longer else self.op("finish-shorter")
                final = self.op("halt-decide", decision=ctx.halt) if ctx.halt else self.op("scale")
            else:
                finish = self.op("finish-longer") if ctx.longer else self.op("finish-shorter")
                if ctx.mode == AGREE:
                    final = self.op("halt-decide", decision=ctx.halt) if ctx.halt else self.op("advance")
                else:
                    final = self.traced_final(_against(ctx.mode), ctx.halt)
            nxt = Ctx(ctx.mode, False, None, "start", None, None, 0, False, None)
            return Plan((finish, final), goto=(nxt, move))
        if g == SEPARATOR:
            if ctx.pos != "body" or ctx.prev1 != BLANK or ctx.heads != 1:
                return self.violation(ctx)
            gamma = self.next_token(ctx.prev2, ctx.prev1, None)
            halt = ctx.halt or self.halting_of(gamma)
            nxt = ctx._replace(check=check, pos="d1", longer=gamma != BLANK, halt=halt)
            return Plan((self.digit_op(ctx, ctx.prev1, gamma),), goto=(nxt, move))
        if g not in self.gamma:
            return self.violation(ctx)
        heads = ctx.heads + (split_composite(g) is not None)
        if heads > 1:
            return self.violation(ctx)
        if ctx.pos == "start":
            nxt = ctx._replace(check=check, pos="body", prev2=None, prev1=g, heads=heads)
            return Plan((IDENTITY_OP,), goto=(nxt, move))
        gamma = self.next_token(ctx.prev2, ctx.prev1, g)
        halt = ctx.halt or self.halting_of(gamma)
        nxt = ctx._replace(check=check, prev2=ctx.prev1, prev1=g, heads=heads, halt=halt)
        return Plan((self.digit_op(ctx, ctx.prev1, gamma),), goto=(nxt, move))

    # transition tables -------------------------------------------------------------

    @lru_cache(maxsize=None)
    def cached_plan(self, ctx: Ctx, sym: str, gp: str, gr: str) -> Plan:
        return self.plan(ctx, sym, gp, gr)

    def delta_c(self, key):
        state, sym = key
        if not (isinstance(state, tuple) and state[0] == "C"):
            raise KeyError(key)
        return ("R", state[1], 0), POLL

    def delta_q(self, key):
        state, sym, gp, gr = key
        if state == ("I",):
            return IDENTITY_OP
        tag, ctx, k = state
        if tag != "R":
            raise KeyError(key)
        return self.cached_plan(ctx, sym, gp, gr).ops[k]

    def delta_s(self, key):
        state, sym, gp, gr, outcome = key
        if state == ("I",):
            return ("C", self.start_ctx), "right"
        _, ctx, k = state
        plan = self.cached_plan(ctx, sym, gp, gr)
        if k + 1 < len(plan.ops):
            return ("R", ctx, k + 1), "stay-put"
        if plan.decide:
            return plan.decide, "stay-put"
        if plan.branch:
            return ("R", dict(plan.branch)[outcome], 0), "stay-put"
        nxt, move = plan.goto
        return ("C", nxt), move

    @property
    def start_ctx(self) -> Ctx:
        return START_CTX._replace(mode=TRACE1) if self.fact1 else START_CTX


def _enumerate_v1(b: _V1Builder, alphabet: tuple[str, ...], sigma: tuple[str, ...]):
    """Reachable delta_q keys (breadth first over all symbol choices)."""

    def gen():
        yield (("I",), LEFT_END, "_", "_")
        frontier = [b.start_ctx]
        seen_ctx = set(frontier)
        while frontier:
            ctx = frontier.pop()
            for sym in sigma:
                for gp in alphabet:
                    for gr in alphabet:
                        if b.fact1 and gr != SILENT:
                            continue
                        plan = b.cached_plan(ctx, sym, gp, gr)
                        for k in range(len(plan.ops)):
                            yield (("R", ctx, k), sym, gp, gr)
                        targets = []
                        if plan.goto:
                            targets.append(plan.goto[0])
                        if plan.branch:
                            targets.extend(c for _, c in plan.branch)
                        for t in targets:
                            if t not in seen_ctx:
                                seen_ctx.add(t)
                                frontier.append(t)

    return gen


def _is_comm(state) -> bool:
    return isinstance(state, tuple) and len(state) == 2 and state[0] == "C"


def _is_read(state) -> bool:
    return state == ("I",) or (isinstance(state, tuple) and len(state) == 3 and state[0] == "R")


def _build_v1(tm: SingleTapeTM, m: int, fact1: bool, strict: bool, d: int | None, name: str) -> VerifierSpec:
    enc = encoding_for(tm, m, d, strict)
    b = _V1Builder(tm, enc, fact1)
    comm = tuple(sorted(b.gamma)) + (SEPARATOR, SILENT)
    sigma = tuple(tm.input_alphabet) + (LEFT_END, RIGHT_END)
    spec = VerifierSpec(
        name=name,
        quantum_states=QUANTUM_STATES,
        reading_states=StateClass(_is_read, "reading"),
        communication_states=StateClass(_is_comm, "communication"),
        accept_state=ACCEPT,
        reject_state=REJECT,
        input_alphabet=tuple(tm.input_alphabet),
        comm_alphabet=comm + (POLL,),
        delta_c=LazyTable(b.delta_c),
        delta_q=LazyTable(b.delta_q, _enumerate_v1(b, comm, sigma)),
        delta_s=LazyTable(b.delta_s),
        initial_classical=("I",),
        metadata={"tm": tm, "encoding": enc, "m": m, "d": enc.d, "builder": b, "kind": "fact1" if fact1 else "theorem1"},
    )
    return spec


def build_theorem1_verifier(tm: SingleTapeTM, m: int, strict: bool = True, d: int | None = None) -> VerifierSpec:
    """Two-debater verifier with rational amplitudes for a decider ``tm``.

    ``strict=False`` allows ``m <= |Gamma|``; the encoding is then no longer
    injective, but a single-symbol substitution still moves the encoding
    by at least ``m``.
    """
    return _build_v1(tm, m, False, strict, d, f"theorem1[{tm.name},m={m}]")


def build_fact1_verifier(tm: SingleTapeTM, m: int, strict: bool = True, d: int | None = None) -> VerifierSpec:
    """Single-prover verifier: P1 is followed from the start and P0 is ignored."""
    return _build_v1(tm, m, True, strict, d, f"fact1[{tm.name},m={m}]")


def all_superoperators(spec: VerifierSpec) -> list[Superoperator]:
    """Every superoperator the compiled verifier can ever apply."""
    b = spec.metadata["builder"]
    if isinstance(b, _V1Builder):
        tokens = sorted(b.gamma)
        targets = tokens + list(b.tm.halting_tokens())
        for g in targets:
            b.op("first-block-digit", gamma=g)
            for s in tokens:
                b.op("digit-pair", sigma=s, gamma=g)
        for kind in ("finish-shorter", "finish-longer", "blank-pad", "scale", "advance"):
            b.op(kind)
        for dec in (ACCEPT, REJECT):
            b.op("halt-decide", decision=dec)
            for halt in (None, ACCEPT, REJECT):
                b.traced_final(dec, halt)
        return [IDENTITY_OP, FAIR_COIN_4] + list(b.ops.values())
    return b.all_superoperators()


# --- zero-error verifier for linear-space alternating machines -----------------------

RESTART_OP = Superoperator((OperationElement(identity(4), RESTART, "restart"),), "restart")
CHOICES = ("0", "1")


class Ctx0(NamedTuple):
    mode: str  # agree | P1 | P0
    first: bool
    stage: str  # slot | body | final | dollar | d1
    owner: str  # debater announcing the choice in the next slot
    choice: str | None  # choice announced for the current block
    direction: int  # +1 right, -1 left
    bounces: int  # endmarker arrivals during this block
    prev2: str | None
    prev1: str | None
    heads: int
    halt: str | None


class _V0Builder(_V1Builder):
    """Zero-error verifier for a ``LinearSpaceATM``.

    Block ``i`` of each stream is ``x c_i $ $`` where ``x`` is the choice
    (``0``/``1``) made in ``c_i``, sent by the owner of ``c_i`` while the
    other debater sends ``-``. Every body token moves the head one cell;
    a configuration must fill exactly ``k`` endmarker-to-endmarker sweeps
    (``k*(n+1)`` cells) and then the final blank.
    """

    def __init__(self, atm, enc: EncodingParams):
        super().__init__(atm, enc, fact1=False)
        self.atm = atm
        self.k = atm.space_factor

    @property
    def start_ctx(self) -> Ctx0:
        return Ctx0(AGREE, True, "slot", TRACE1, None, 1, 0, None, None, 0, None)

    def next_token(self, left, mid, right, choice: str) -> str:
        c = int(choice)
        return local_next_token(lambda q, s: self.atm.delta(q, s, c), left, mid, right)

    def decide_against(self, bad1: bool, bad0: bool) -> Plan:
        return Plan((IDENTITY_OP,), decide=REJECT if bad1 else ACCEPT)

    def plan(self, ctx: Ctx0, sym: str, gp: str, gr: str) -> Plan:
        if ctx.stage == "slot":
            own, other = (gp, gr) if ctx.owner == TRACE1 else (gr, gp)
            bad_own, bad_other = own not in CHOICES, other != SILENT
            if bad_own or bad_other:
                bad1 = bad_own if ctx.owner == TRACE1 else bad_other
                bad0 = bad_other if ctx.owner == TRACE1 else bad_own
                return self.decide_against(bad1, bad0)
            nxt = ctx._replace(stage="body", choice=own)
            return Plan((IDENTITY_OP,), goto=(nxt, _MOVE[ctx.direction]))
        if ctx.mode == AGREE:
            if ctx.first:
                bad1 = self.first_violation(ctx, sym, gp)
                bad0 = self.first_violation(ctx, sym, gr)
                if bad1 or bad0:
                    return self.decide_against(bad1, bad0)
            if gp != gr:
                return Plan(
                    (FAIR_COIN_4,),
                    branch=((0, ctx._replace(mode=TRACE1)), (1, ctx._replace(mode=TRACE1)),
                            (2, ctx._replace(mode=TRACE0)), (3, ctx._replace(mode=TRACE0))),
                )
            g = gp
        else:
            g = gp if ctx.mode == TRACE1 else gr
            if ctx.first and self.first_violation(ctx, sym, g):
                return Plan((IDENTITY_OP,), decide=_against(ctx.mode))
        return self.process(ctx, sym, g)

    def first_violation(self, ctx: Ctx0, sym: str, g: str) -> bool:
        if ctx.stage == "body":
            if ctx.prev1 is None:
                want = composite(self.atm.start, sym if sym not in (LEFT_END, RIGHT_END) else BLANK)
            elif ctx.bounces == 0 and sym not in (LEFT_END, RIGHT_END):
                want = sym
            else:
                want = BLANK
        elif ctx.stage == "final":
            want = BLANK
        else:
            want = SEPARATOR
        return g != want

    def process(self, ctx: Ctx0, sym: str, g: str) -> Plan:
        if ctx.stage == "d1":
            if g != SEPARATOR:
                return self.violation(ctx)
            finish = self.op("finish-shorter")
            if ctx.mode == AGREE:
                if ctx.halt:
                    final = self.op("halt-decide", decision=ctx.halt)
                else:
                    final = self.op("scale") if ctx.first else self.op("advance")
            elif ctx.first:
                final = RESTART_OP
            else:
                final = self.traced_check(_against(ctx.mode))
            owner = TRACE0 if ctx.owner == TRACE1 else TRACE1
            nxt = Ctx0(ctx.mode, False, "slot", owner, None, ctx.direction, 0, None, None, 0, None)
            return Plan((finish, final), goto=(nxt, "stay-put"))
        if ctx.stage == "dollar":
            if g != SEPARATOR:
                return self.violation(ctx)
            gamma = self.next_token(ctx.prev2, ctx.prev1, None, ctx.choice)
            halt = ctx.halt or self.halting_of(gamma)
            nxt = ctx._replace(stage="d1", halt=halt)
            return Plan((self.digit_op(ctx, ctx.prev1, gamma),), goto=(nxt, "stay-put"))
        # a configuration token
        if g not in self.gamma:
            return self.violation(ctx)
        heads = ctx.heads + (split_composite(g) is not None)
        if heads > 1:
            return self.violation(ctx)
        if ctx.stage == "final":
            if g != BLANK or heads != 1:
                return self.violation(ctx)
            stage, direction, bounces, move = "dollar", ctx.direction, ctx.bounces, "stay-put"
        else:
            direction, bounces = ctx.direction, ctx.bounces
            if sym in (LEFT_END, RIGHT_END):
                bounces += 1
                direction = -direction
            if bounces == self.k:
                stage, move = "final", "stay-put"
            else:
                stage, move = "body", _MOVE[direction]
        ops = (IDENTITY_OP,)
        halt = ctx.halt
        if ctx.prev1 is not None:
            gamma = self.next_token(ctx.prev2, ctx.prev1, g, ctx.choice)
            halt = halt or self.halting_of(gamma)
            ops = (self.digit_op(ctx, ctx.prev1, gamma),)
        nxt = ctx._replace(
            stage=stage, direction=direction, bounces=bounces, prev2=ctx.prev1, prev1=g, heads=heads, halt=halt
        )
        return Plan(ops, goto=(nxt, move))

    def traced_check(self, against: str) -> Superoperator:
        key = ("traced-check", against)
        op = self.ops.get(key)
        if op is None:
            check = build_main_element("transition-check", self.enc, decision=against)
            op = complete_superoperator([check], self.enc.d)
            self.ops[key] = op
        return op

    def delta_s(self, key):
        state, sym, gp, gr, outcome = key
        if state == ("I",):
            return ("C", self.start_ctx), "stay-put"
        return super().delta_s(key)

    def all_superoperators(self) -> list[Superoperator]:
        tokens = sorted(self.gamma)
        for g in tokens + list(self.atm.halting_tokens()):
            self.op("first-block-digit", gamma=g)
            for s in tokens:
                self.op("digit-pair", sigma=s, gamma=g)
        for kind in ("finish-shorter", "scale", "advance"):
            self.op(kind)
        for dec in (ACCEPT, REJECT):
            self.op("halt-decide", decision=dec)
            self.traced_check(dec)
        return [IDENTITY_OP, FAIR_COIN_4, RESTART_OP] + list(self.ops.values())


_MOVE = {1: "right", -1: "left"}


def build_theorem3_verifier(atm, k: int | None = None, m: int | None = None, d: int | None = None) -> VerifierSpec:
    """Zero-error debate verifier for a linear-space alternating machine.

    ``k`` defaults to the machine's own space factor and must agree with it.
    """
    if k is not None and k != atm.space_factor:
        raise CompileError(f"space factor {k} does not match the machine's {atm.space_factor}")
    gamma = atm.stream_alphabet()
    m = m or len(gamma) + 1
    enc = EncodingParams.build(gamma, m, d or choose_d(len(gamma), m), extra=atm.halting_tokens())
    b = _V0Builder(atm, enc)
    comm = tuple(sorted(b.gamma)) + (SEPARATOR, SILENT) + CHOICES
    sigma = tuple(atm.input_alphabet) + (LEFT_END, RIGHT_END)
    return VerifierSpec(
        name=f"theorem3[{atm.name},k={atm.space_factor}]",
        quantum_states=QUANTUM_STATES,
        reading_states=StateClass(_is_read, "reading"),
        communication_states=StateClass(_is_comm, "communication"),
        accept_state=ACCEPT,
        reject_state=REJECT,
        input_alphabet=tuple(atm.input_alphabet),
        comm_alphabet=comm + (POLL,),
        delta_c=LazyTable(b.delta_c),
        delta_q=LazyTable(b.delta_q, _enumerate_v1(b, comm, sigma)),
        delta_s=LazyTable(b.delta_s),
        initial_classical=("I",),
        metadata={"atm": atm, "encoding": enc, "m": m, "d": enc.d, "builder": b, "kind": "theorem3"},
    )
