"""Rotation-qubit debate verifiers that halt in expected polynomial time.

Each verifier polls one debater for a certificate symbol at a time and
checks block lengths with rotation qubits: the qubit turns by one unit
(``c * sqrt(2) * pi``) per symbol of one block and back per symbol of the
other, so equal lengths return it exactly to ``q0``. A clean scan ends in
the random-walk gadget, which halts on the verifier's default verdict with
a small exactly known probability and restarts otherwise.

Tables are finite and materialized eagerly (with ``*`` wildcards for the
ignored debater), so these specs validate completely and can be dumped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import mpmath

from .machine import LEFT_END, RIGHT_END, WILDCARD, VerifierSpec
from .quantum import (
    ACCEPT,
    CONTINUE,
    REJECT,
    RESTART,
    CoinFlip,
    Measure,
    RotationStep,
    min_q1_probability,
)

POLL = "?"
SILENT = "-"
UNARY = "1"
ENDS = (LEFT_END, RIGHT_END)


@dataclass(frozen=True)
class WalkParams:
    """Random-walk halting gadget.

    ``reject_side`` is the verdict reached when the gadget halts; the
    gadget halts with probability ``(1/2)**attenuation / (n+1)**2``.
    """

    n: int
    reject_side: str = REJECT
    attenuation: int = 2

    def __post_init__(self):
        if self.reject_side not in (ACCEPT, REJECT):
            raise ValueError("reject_side must be accept or reject")
        if self.n < 0 or self.attenuation < 0:
            raise ValueError("n and attenuation must be non-negative")

    @property
    def p_walk(self) -> Fraction:
        return Fraction(1, (1 << self.attenuation) * (self.n + 1) ** 2)


def calibrate_attenuation(n: int, max_steps: int, unit: Fraction = Fraction(1), floor: bool = False) -> int:
    """Fewest extra coin flips making ``p_walk`` at most half the smallest q1 probability.

    The smallest q1 probability is taken over ``1 <= |k| <= max_steps``;
    with ``floor`` the analytic bound ``1/(2 max_steps^2)`` is used instead.
    """
    if max_steps < 1:
        return 0
    if floor:
        target = mpmath.mpf(1) / (4 * max_steps**2)
    else:
        target = min_q1_probability(max_steps, Fraction(unit)) / 2
    a = 0
    while mpmath.mpf(1) / ((1 << a) * (n + 1) ** 2) > target:
        a += 1
    return a


# --- plan-based programs ----------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    """Register operations applied with the head fixed, then one transition.

    ``goto`` is ``(state, move)``; ``decide`` is a halting verdict.
    ``branch`` (for a single coin op) maps outcomes to ``(state, move)``.
    """

    ops: tuple
    goto: tuple | None = None
    decide: str | None = None
    branch: tuple | None = None


class _Program:
    """A finite verifier given by a ``react`` function, tabulated by search."""

    def __init__(self, name: str, qubits: int, talker: str, cert_alphabet: tuple[str, ...], unit: Fraction):
        self.name = name
        self.qubits = qubits
        self.talker = talker
        self.cert = cert_alphabet
        self.unit = Fraction(unit)
        self.noop = RotationStep((0,) * qubits, "noop")
        self.restart = CoinFlip((RESTART,), "restart")
        self.coin = CoinFlip((CONTINUE, CONTINUE), "coin")
        self.heads = CoinFlip((CONTINUE, RESTART), "heads")

    def rot(self, **units) -> RotationStep:
        vec = [0] * self.qubits
        for q, u in units.items():
            vec[int(q[1:])] += u
        return RotationStep(tuple(vec), "rot" + "".join(f"{q}{u:+d}" for q, u in sorted(units.items()) if u))

    def measure(self, qubit: int, on_q1: str) -> Measure:
        return Measure(qubit, on_q1, f"measure{qubit}")

    # to be provided per language
    initial: Any = ("start",)

    def react(self, state, sym: str, g: str | None) -> Step:
        raise NotImplementedError

    # walk gadget ---------------------------------------------------------------------

    def walk(self, verdict: str, attenuation: int) -> tuple:
        return ("walk-seek", verdict, attenuation)

    def walk_react(self, state, sym: str) -> Step:
        tag, verdict, a = state[0], state[1], state[2]
        if tag == "walk-seek":
            if sym == LEFT_END:
                return Step((self.noop,), goto=(("walk-A", verdict, a), "right"))
            return Step((self.noop,), goto=(state, "left"))
        if tag in ("walk-A", "walk-B"):
            win, lose = (RIGHT_END, LEFT_END) if tag == "walk-A" else (LEFT_END, RIGHT_END)
            if sym == lose:
                return Step((self.restart,))
            if sym == win:
                if tag == "walk-A":
                    return Step((self.noop,), goto=(("walk-B", verdict, a), "left"))
                if a == 0:
                    return Step((self.noop,), decide=verdict)
                return Step((self.noop,), goto=(("walk-H", verdict, a, 1), "stay-put"))
            return Step((self.coin,), branch=((0, (state, "left")), (1, (state, "right"))))
        # walk-H: a run of heads
        j = state[3]
        if j == a:
            return Step((self.heads,), decide=verdict)
        return Step((self.heads,), goto=(("walk-H", verdict, a, j + 1), "stay-put"))

    # tabulation ----------------------------------------------------------------------

    def step_for(self, state, sym: str, g: str | None) -> Step:
        if state[0] == "chain":
            # the head stays put while a plan runs, so other symbols are unreachable
            return state[1] if sym == state[2] else Step((self.noop,), decide=REJECT)
        if str(state[0]).startswith("walk-"):
            return self.walk_react(state, sym)
        return self.react(state, sym, g)

    def build(self, input_alphabet: tuple[str, ...], metadata: dict) -> VerifierSpec:
        sigma = tuple(input_alphabet) + ENDS
        gammas = tuple(self.cert) + (SILENT,)
        delta_c: dict = {}
        delta_q: dict = {}
        delta_s: dict = {}
        reading: set = set()
        comm: set = set()
        queue = deque([("R", self.initial)])
        seen = {queue[0]}

        def visit(s):
            if s in (ACCEPT, REJECT) or s in seen:
                return
            seen.add(s)
            queue.append(s)

        def key_for(state, sym, g):
            if g is None or g == WILDCARD:
                return (state, sym, WILDCARD, WILDCARD)
            return (state, sym, g, WILDCARD) if self.talker == "P1" else (state, sym, WILDCARD, g)

        while queue:
            s = queue.popleft()
            if s[0] == "C":
                comm.add(s)
                target = ("R", ("got", s[1]))
                delta_c[(s, WILDCARD)] = (target, POLL)
                visit(target)
                continue
            reading.add(s)
            base = s[1]
            uses_g = base[0] == "got"
            for sym in sigma:
                for g in list(gammas) + [WILDCARD] if uses_g else [None]:
                    if uses_g:
                        plan = self.step_for(base[1], sym, None if g == WILDCARD else g)
                    else:
                        plan = self.step_for(base, sym, None)
                    key = key_for(s, sym, g)
                    op = plan.ops[0]
                    delta_q[key] = op
                    for outcome in op.outcomes:
                        if op.action(outcome) != CONTINUE:
                            continue
                        if len(plan.ops) > 1:
                            # the rest of the plan no longer depends on what was read
                            rest = Step(plan.ops[1:], plan.goto, plan.decide, plan.branch)
                            target, move = ("R", ("chain", rest, sym)), "stay-put"
                        elif plan.decide:
                            target, move = plan.decide, "stay-put"
                        elif plan.branch:
                            nxt, move = dict(plan.branch)[outcome]
                            target = self._wrap(nxt)
                        else:
                            nxt, move = plan.goto
                            target = self._wrap(nxt)
                        delta_s[key + (outcome,)] = (target, move)
                        visit(target)
        return VerifierSpec(
            name=self.name,
            quantum_states=tuple(f"q{i}{b}" for i in range(self.qubits) for b in "01"),
            reading_states=frozenset(reading),
            communication_states=frozenset(comm),
            accept_state=ACCEPT,
            reject_state=REJECT,
            input_alphabet=tuple(input_alphabet),
            comm_alphabet=gammas + (POLL,),
            delta_c=delta_c,
            delta_q=delta_q,
            delta_s=delta_s,
            initial_classical=("R", self.initial),
            register="rotation",
            rotation_unit=self.unit,
            metadata=metadata,
        )

    @staticmethod
    def _wrap(state):
        """Polling contexts become communication states; everything else reads."""
        if isinstance(state, tuple) and state and state[0] == "poll":
            return ("C", state[1])
        return ("R", state)


def _probe_lengths(prog: _Program, state, sym: str, small: dict[int, str], then) -> Step:
    """Preamble deciding inputs of length ``< len(small)`` classically.

    ``state`` is ``("start", i)`` with the head on cell ``i``; ``small[n]``
    is the verdict for length ``n``. Afterwards the head walks back to the
    left endmarker and ``then`` takes over.
    """
    i = state[1]
    if (i == 0) != (sym == LEFT_END):
        # unreachable: the probe starts on the left end and only moves right
        return Step((prog.noop,), decide=REJECT)
    if i > 0 and sym == RIGHT_END:
        return Step((prog.noop,), decide=small[i - 1])
    if i < len(small):
        return Step((prog.noop,), goto=(("start", i + 1), "right"))
    return Step((prog.noop,), goto=(("rewind", then), "left"))


def _rewind(prog: _Program, state, sym: str) -> Step:
    if sym == LEFT_END:
        return Step((prog.noop,), goto=state[1])
    return Step((prog.noop,), goto=(state, "left"))


# --- UPRIME -------------------------------------------------------------------------------


class _UPrime(_Program):
    """P0 claims ``n = i*j`` with ``i, j >= 2`` by sending ``j`` alternating blocks ``a^i``/``b^i``.

    Scan context: ``(letter, single, blocks)`` with ``single`` true while
    the current block has length one and ``blocks`` capped at 2. Qubit 0
    compares each a-block with the next b-block, qubit 1 each b-block with
    the next a-block. Catching P0 means accept; a clean scan walks to reject.
    """

    initial = ("start", 0)

    def __init__(self, attenuation: int, unit: Fraction):
        super().__init__("uprime", 2, "P0", ("a", "b"), unit)
        self.a = attenuation

    def react(self, state, sym, g):
        tag = state[0]
        if tag == "start":
            # n = 0 and n = 1 are not prime
            return _probe_lengths(self, state, sym, {0: REJECT, 1: REJECT}, (("poll", (None, False, 0)), "right"))
        if tag == "rewind":
            return _rewind(self, state, sym)
        letter, single, blocks = state
        if sym == RIGHT_END:
            if single or blocks < 2:
                return Step((self.noop,), decide=ACCEPT)
            q = 0 if letter == "b" else 1
            return Step((self.measure(q, ACCEPT),), goto=(self.walk(REJECT, self.a), "stay-put"))
        if g not in ("a", "b"):
            return Step((self.noop,), decide=ACCEPT)
        if letter is None:
            if g != "a":
                return Step((self.noop,), decide=ACCEPT)
            return Step((self.rot(q0=1),), goto=(("poll", ("a", True, 1)), "right"))
        if g == letter:
            units = self._units(g, blocks)
            return Step((self.rot(**units),), goto=(("poll", (letter, False, blocks)), "right"))
        if single:
            return Step((self.noop,), decide=ACCEPT)
        ops = []
        if letter == "b":
            ops.append(self.measure(0, ACCEPT))
        elif blocks >= 2:
            ops.append(self.measure(1, ACCEPT))
        nb = min(blocks + 1, 2)
        ops.append(self.rot(**self._units(g, nb)))
        return Step(tuple(ops), goto=(("poll", (g, True, nb)), "right"))

    @staticmethod
    def _units(g: str, blocks: int) -> dict:
        if g == "a":
            return {"q0": 1, "q1": -1} if blocks >= 2 else {"q0": 1}
        return {"q0": -1, "q1": 1}


# --- USQUARE ------------------------------------------------------------------------------


class _USquare(_Program):
    """P1 sends ``m`` alternating blocks of length ``m``.

    Qubits 0/1 check adjacent blocks as for UPRIME; qubit 2 turns forward
    per symbol of the first block and back once per block.
    """

    initial = ("start", 0)

    def __init__(self, attenuation: int, unit: Fraction):
        super().__init__("usquare", 3, "P1", ("a", "b"), unit)
        self.a = attenuation

    def react(self, state, sym, g):
        tag = state[0]
        if tag == "start":
            return _probe_lengths(self, state, sym, {0: REJECT}, (("poll", (None, 0)), "right"))
        if tag == "rewind":
            return _rewind(self, state, sym)
        letter, blocks = state
        if sym == RIGHT_END:
            ops = []
            if letter == "b":
                ops.append(self.measure(0, REJECT))
            elif blocks >= 2:
                ops.append(self.measure(1, REJECT))
            ops.append(self.measure(2, REJECT))
            return Step(tuple(ops), goto=(self.walk(ACCEPT, self.a), "stay-put"))
        if g not in ("a", "b") or (letter is None and g != "a"):
            return Step((self.noop,), decide=REJECT)
        if g == letter:
            units = _UPrime._units(g, blocks)
            if blocks == 1:
                units["q2"] = 1
            return Step((self.rot(**units),), goto=(("poll", (letter, blocks)), "right"))
        ops = []
        if letter == "b":
            ops.append(self.measure(0, REJECT))
        elif letter == "a" and blocks >= 2:
            ops.append(self.measure(1, REJECT))
        nb = min(blocks + 1, 2)
        units = _UPrime._units(g, nb)
        units["q2"] = -1 + (1 if nb == 1 else 0)
        ops.append(self.rot(**units))
        return Step(tuple(ops), goto=(("poll", (g, nb)), "right"))


# --- UPOWER -------------------------------------------------------------------------------


class _UPower(_Program):
    """P1 sends blocks of lengths ``1, 2, 4, ...`` totalling ``n - 1``.

    The pair (block t, block t+1) is checked by qubit ``(t+1) % 2`` with
    ``+2`` units per symbol of block t and ``-1`` per symbol of block t+1.
    Context: ``(letter, parity of the block index, first block done)``.
    """

    initial = ("start", 0)

    def __init__(self, attenuation: int, unit: Fraction):
        super().__init__("upower", 2, "P1", ("a", "b"), unit)
        self.a = attenuation

    def react(self, state, sym, g):
        tag = state[0]
        if tag == "start":
            # the scan reads n-1 symbols: start polling with the head on cell 2
            return _probe_lengths(self, state, sym, {0: REJECT, 1: REJECT}, (("skip",), "right"))
        if tag == "rewind":
            return _rewind(self, state, sym)
        if tag == "skip":
            if sym == RIGHT_END:
                # unreachable: inputs shorter than 2 were decided by the probe
                return Step((self.noop,), decide=REJECT)
            return Step((self.noop,), goto=(("poll", (None, 0, False)), "right"))
        letter, t, later = state
        # t: index of the current block mod 2 (block 1 has t = 1)
        if sym == RIGHT_END:
            if letter is None:
                return Step((self.noop,), decide=REJECT)
            ops = (self.measure(self._qubit(t - 1), REJECT),) if later else ()
            return Step(ops + (self.noop,), goto=(self.walk(ACCEPT, self.a), "stay-put"))
        if g not in ("a", "b") or (letter is None and g != "a"):
            return Step((self.noop,), decide=REJECT)
        if letter is None:
            return Step((self.rot(**{f"q{self._qubit(1)}": 2}),), goto=(("poll", ("a", 1, False)), "right"))
        if g == letter:
            if not later:
                # the first block has length exactly one
                return Step((self.noop,), decide=REJECT)
            units = {f"q{self._qubit(t - 1)}": -1, f"q{self._qubit(t)}": 2}
            return Step((self.rot(**units),), goto=(("poll", (letter, t, True)), "right"))
        ops = []
        if later:
            ops.append(self.measure(self._qubit(t - 1), REJECT))
        nt = 1 - t
        units = {f"q{self._qubit(nt - 1)}": -1, f"q{self._qubit(nt)}": 2}
        ops.append(self.rot(**units))
        return Step(tuple(ops), goto=(("poll", (g, nt, True)), "right"))

    @staticmethod
    def _qubit(t: int) -> int:
        """Qubit holding the pair that starts at a block with index parity ``t``."""
        return t % 2


# --- UFIB -------------------------------------------------------------------------------------


class _UFib(_Program):
    """P1 sends ``F1#F2#...#F(i-3)!F(i-2)#F(i-1)`` in unary.

    Member ``k >= 3`` is checked by qubit ``k % 3``: every symbol of member
    ``k`` turns qubit ``k % 3`` back and qubits ``(k+1) % 3``, ``(k+2) % 3``
    forward. Members 1 and 2 must have length one. Before ``!`` the head
    restarts at the left end for each member, so no member may outgrow the
    input; after ``!`` the head runs on across both remaining members and
    the scan ends when it reaches the right end.

    Context: ``(phase, k mod 3, k capped at 3, length capped at 2, members after !)``.
    """

    initial = ("start", 0)

    def __init__(self, attenuation: int, unit: Fraction):
        super().__init__("ufib", 3, "P1", ("a", "#", "!"), unit)
        self.a = attenuation

    def react(self, state, sym, g):
        tag = state[0]
        if tag == "start":
            first = ("poll", ("A", 1, 1, 0, 0))
            return _probe_lengths(self, state, sym, {0: REJECT, 1: ACCEPT, 2: ACCEPT}, (first, "stay-put"))
        if tag == "rewind":
            return _rewind(self, state, sym)
        phase, kmod, ksmall, length, after = state
        if sym == RIGHT_END and phase == "B":
            # n symbols have been spent after '!': the last member ends here
            if after < 2:
                return Step((self.noop,), decide=REJECT)
            ops = self._member_end(kmod, ksmall, length)
            if ops is None:
                return Step((self.noop,), decide=REJECT)
            return Step(ops + (self.noop,), goto=(self.walk(ACCEPT, self.a), "stay-put"))
        if g == "a":
            if phase == "A" and sym == RIGHT_END:
                return Step((self.noop,), decide=REJECT)
            units = {f"q{(kmod + 1) % 3}": 1 if ksmall >= 2 else 0, f"q{(kmod + 2) % 3}": 1}
            if ksmall >= 3:
                units[f"q{kmod}"] = -1
            nxt = (phase, kmod, ksmall, min(length + 1, 2), after)
            return Step((self.rot(**units),), goto=(("poll", nxt), "right"))
        if g in ("#", "!"):
            if phase == "B" and (g == "!" or after >= 2):
                return Step((self.noop,), decide=REJECT)
            ops = self._member_end(kmod, ksmall, length)
            if ops is None:
                return Step((self.noop,), decide=REJECT)
            nk = ((kmod + 1) % 3, min(ksmall + 1, 3), 0)
            if phase == "A" and g == "#":
                return Step(ops + (self.noop,), goto=(("rewind", (("poll", ("A",) + nk + (0,)), "stay-put")), "stay-put"))
            if phase == "A":
                return Step(ops + (self.noop,), goto=(("rewind", (("poll", ("B",) + nk + (1,)), "right")), "stay-put"))
            return Step(ops + (self.noop,), goto=(("poll", ("B",) + nk + (2,)), "stay-put"))
        return Step((self.noop,), decide=REJECT)

    def _member_end(self, kmod: int, ksmall: int, length: int):
        """Checks closing member ``k``; None for a classical violation."""
        if length == 0:
            return None
        if ksmall <= 2:
            return () if length == 1 else None
        return (self.measure(kmod, REJECT),)


# --- PAL ----------------------------------------------------------------------------------------


class _Pal(_Program):
    """P1 stays silent; P0 names a mismatch position ``i`` as ``a^i #`` twice.

    The head counts the first copy from the left to read ``w_i`` and the
    second from the right to read ``w_(n+1-i)``; one qubit checks the two
    counts agree. Equal symbols walk to accept; different ones walk to
    reject at half the rate.
    """

    initial = ("start", 0)

    def __init__(self, attenuation: int, unit: Fraction):
        super().__init__("pal", 1, "P0", ("a", "#"), unit)
        self.a = attenuation

    def react(self, state, sym, g):
        tag = state[0]
        if tag == "start":
            return _probe_lengths(self, state, sym, {0: ACCEPT, 1: ACCEPT}, (("poll", ("one",)), "stay-put"))
        if tag == "rewind":
            return _rewind(self, state, sym)
        if tag == "seek-right":
            if sym == RIGHT_END:
                return Step((self.noop,), goto=(("poll", state[1]), "stay-put"))
            return Step((self.noop,), goto=(state, "right"))
        if state[0] == "one":
            if g == "a":
                if sym == RIGHT_END:
                    return Step((self.noop,), decide=ACCEPT)
                return Step((self.rot(q0=1),), goto=(("poll", ("one",)), "right"))
            if g == "#" and sym not in ENDS:
                return Step((self.noop,), goto=(("seek-right", ("two", sym)), "stay-put"))
            return Step((self.noop,), decide=ACCEPT)
        first = state[1]
        if g == "a":
            if sym == LEFT_END:
                return Step((self.noop,), decide=ACCEPT)
            return Step((self.rot(q0=-1),), goto=(("poll", state), "left"))
        if g == "#" and sym not in ENDS:
            if sym == first:
                return Step((self.measure(0, ACCEPT),), goto=(self.walk(ACCEPT, self.a), "stay-put"))
            return Step((self.measure(0, ACCEPT),), goto=(self.walk(REJECT, self.a + 1), "stay-put"))
        return Step((self.noop,), decide=ACCEPT)


# --- builders -------------------------------------------------------------------------------------

def _attenuation(n: int | None, k_factor: int, attenuation: int | None, unit, calibrate: str) -> int:
    if attenuation is not None:
        return attenuation
    if n is None:
        return 2 * k_factor
    return calibrate_attenuation(n, max(1, k_factor * n), unit, floor=(calibrate == "floor"))


def _build(cls, name: str, k_factor: int, alphabet, n, attenuation, unit, calibrate) -> VerifierSpec:
    a = _attenuation(n, k_factor, attenuation, unit, calibrate)
    prog = cls(a, unit)
    spec = prog.build(alphabet, {"language": name, "attenuation": a, "n": n, "calibration": calibrate})
    return spec


def build_uprime_verifier(n: int | None = None, attenuation: int | None = None, unit=Fraction(1), calibrate: str = "true-min"):
    return _build(_UPrime, "uprime", 1, (UNARY,), n, attenuation, unit, calibrate)


def build_usquare_verifier(n: int | None = None, attenuation: int | None = None, unit=Fraction(1), calibrate: str = "true-min"):
    return _build(_USquare, "usquare", 1, (UNARY,), n, attenuation, unit, calibrate)


def build_upower_verifier(n: int | None = None, attenuation: int | None = None, unit=Fraction(1), calibrate: str = "true-min"):
    return _build(_UPower, "upower", 2, (UNARY,), n, attenuation, unit, calibrate)


def build_ufib_verifier(n: int | None = None, attenuation: int | None = None, unit=Fraction(1), calibrate: str = "true-min"):
    return _build(_UFib, "ufib", 2, (UNARY,), n, attenuation, unit, calibrate)


def build_pal_verifier(n: int | None = None, attenuation: int | None = None, unit=Fraction(1), calibrate: str = "true-min"):
    return _build(_Pal, "pal", 1, ("0", "1"), n, attenuation, unit, calibrate)


BUILDERS = {
    "uprime": build_uprime_verifier,
    "usquare": build_usquare_verifier,
    "upower": build_upower_verifier,
    "ufib": build_ufib_verifier,
    "pal": build_pal_verifier,
}


def random_walk_subroutine(p: WalkParams, unit=Fraction(1)) -> VerifierSpec:
    """The gadget on its own: walk, then halt with ``p.reject_side`` or restart."""

    class _Walk(_Program):
        initial = ("walk-seek", p.reject_side, p.attenuation)

        def react(self, state, sym, g):  # pragma: no cover - only walk states exist
            raise KeyError(state)

    prog = _Walk("walk", 1, "P1", (), unit)
    return prog.build((UNARY,), {"walk": p})


def member(language: str, w: str) -> bool:
    """Ground truth membership for the bundled languages."""
    n = len(w)
    if language == "pal":
        return w == w[::-1]
    if language == "uprime":
        return n >= 2 and all(n % p for p in range(2, int(n**0.5) + 1))
    if language == "usquare":
        r = int(round(n**0.5))
        return n > 0 and r * r == n
    if language == "upower":
        return n >= 2 and n & (n - 1) == 0
    if language == "ufib":
        a, b = 1, 2
        while a < n:
            a, b = b, a + b
        return n >= 1 and a == n
    raise ValueError(f"unknown language {language!r}")
