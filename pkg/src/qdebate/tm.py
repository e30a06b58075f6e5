"""Turing machines, alternating Turing machines and their configuration strings.

A configuration is described as a tuple of tokens, one per tape cell.
The scanned cell is written as the composite token ``"state@symbol"``;
every description ends with a plain blank ``#`` and the head never sits on
that final cell. With this layout the ``j``-th token of ``next(c)``
depends only on tokens ``j-1, j, j+1`` of ``c``, which is what lets a
finite-state verifier compute successors on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

BLANK = "#"
SEPARATOR = "$"
MOVE_DELTA = {"L": -1, "S": 0, "R": 1}


class TMError(ValueError):
    pass


def composite(state: str, symbol: str) -> str:
    return f"{state}@{symbol}"


def split_composite(token: str) -> tuple[str, str] | None:
    if "@" not in token:
        return None
    state, symbol = token.split("@", 1)
    return state, symbol


@dataclass(frozen=True)
class SingleTapeTM:
    name: str
    states: tuple[str, ...]
    input_alphabet: tuple[str, ...]
    tape_alphabet: tuple[str, ...]
    transitions: Mapping[tuple[str, str], tuple[str, str, str]]
    start: str
    accept: str
    reject: str
    blank: str = BLANK

    def __post_init__(self) -> None:
        problems = tm_defects(self)
        if problems:
            raise TMError("; ".join(problems))

    @property
    def halting(self) -> frozenset[str]:
        return frozenset((self.accept, self.reject))

    def delta(self, state: str, symbol: str) -> tuple[str, str, str]:
        try:
            return self.transitions[(state, symbol)]
        except KeyError:
            raise TMError(f"{self.name}: no transition for ({state}, {symbol})") from None

    def stream_alphabet(self) -> tuple[str, ...]:
        """Tokens a configuration description may contain (halting states excluded)."""
        live = [q for q in self.states if q not in self.halting]
        return tuple(self.tape_alphabet) + tuple(composite(q, s) for q in live for s in self.tape_alphabet)

    def halting_tokens(self) -> tuple[str, ...]:
        return tuple(composite(q, s) for q in (self.accept, self.reject) for s in self.tape_alphabet)


def tm_defects(tm) -> list[str]:
    out = []
    if tm.blank not in tm.tape_alphabet:
        out.append("blank symbol missing from tape alphabet")
    if not set(tm.input_alphabet) <= set(tm.tape_alphabet) - {tm.blank}:
        out.append("input alphabet must be a subset of the non-blank tape symbols")
    if tm.accept == tm.reject:
        out.append("accept and reject states coincide")
    for name in tuple(tm.states) + tuple(tm.tape_alphabet):
        if "@" in name or name == SEPARATOR or " " in name:
            out.append(f"reserved character in name {name!r}")
    for key, value in tm.transitions.items():
        if key[0] in (tm.accept, tm.reject):
            out.append(f"halting state {key[0]} has outgoing transitions")
        moves = value if isinstance(value[0], tuple) else (value,)
        for q, s, mv in moves:
            if q not in tm.states or s not in tm.tape_alphabet or mv not in MOVE_DELTA:
                out.append(f"bad transition {key} -> {value}")
    for q in tm.states:
        if q in (tm.accept, tm.reject):
            continue
        for s in tm.tape_alphabet:
            if (q, s) not in tm.transitions:
                out.append(f"missing transition for ({q}, {s})")
    return out


@dataclass(frozen=True)
class Configuration:
    state: str
    cells: tuple[str, ...]
    head: int

    def description(self) -> tuple[str, ...]:
        return tuple(
            composite(self.state, s) if i == self.head else s for i, s in enumerate(self.cells)
        )

    def __len__(self) -> int:
        return len(self.cells)


def parse_description(tokens: Sequence[str]) -> Configuration:
    heads = [i for i, t in enumerate(tokens) if split_composite(t)]
    if len(heads) != 1:
        raise TMError(f"description needs exactly one head token, found {len(heads)}")
    i = heads[0]
    state, symbol = split_composite(tokens[i])
    cells = tuple(tokens[:i]) + (symbol,) + tuple(tokens[i + 1 :])
    return Configuration(state, cells, i)


def start_configuration(tm: SingleTapeTM, w: str) -> Configuration:
    cells = list(w) + [tm.blank]
    if len(cells) < 2:
        cells.append(tm.blank)
    return Configuration(tm.start, tuple(cells), 0)


def next_configuration(tm: SingleTapeTM, c: Configuration) -> Configuration:
    """The legitimate successor of ``c``; its length grows by at most one."""
    if c.state in tm.halting:
        raise TMError("halting configurations have no successor")
    q, y, mv = tm.delta(c.state, c.cells[c.head])
    return _apply_move(c, q, y, mv, tm.blank)


def _apply_move(c: Configuration, q: str, y: str, mv: str, blank: str) -> Configuration:
    cells = list(c.cells)
    cells[c.head] = y
    head = max(0, c.head + MOVE_DELTA[mv])
    if head >= len(cells) - 1:
        cells.append(blank)
    return Configuration(q, tuple(cells), head)


def local_next_token(delta, left: str | None, mid: str, right: str | None) -> str:
    """Token ``j`` of ``next(c)`` from tokens ``j-1, j, j+1`` of ``c``.

    ``delta(state, symbol)`` returns ``(state', write, move)``; ``left`` is
    None at the first cell and ``right`` is None past the last one. If the
    window is inconsistent (several head tokens) the first matching rule wins;
    such descriptions are rejected elsewhere.
    """
    here = split_composite(mid)
    if here is not None:
        q2, y, mv = delta(*here)
        if mv == "R" or (mv == "L" and left is not None):
            return y
        return composite(q2, y)
    if left is not None:
        lc = split_composite(left)
        if lc is not None:
            q2, _, mv = delta(*lc)
            if mv == "R":
                return composite(q2, mid)
    if right is not None:
        rc = split_composite(right)
        if rc is not None:
            q2, _, mv = delta(*rc)
            if mv == "L":
                return composite(q2, mid)
    return mid


def local_next_description(delta, tokens: Sequence[str], blank: str = BLANK) -> tuple[str, ...]:
    """``next(c)`` assembled purely from three-token windows (plus the blank tail)."""
    n = len(tokens)
    out = [
        local_next_token(delta, tokens[j - 1] if j else None, tokens[j], tokens[j + 1] if j + 1 < n else None)
        for j in range(n)
    ]
    if out[-1] != blank:
        out.append(blank)
    return tuple(out)


def run(tm: SingleTapeTM, w: str, max_steps: int = 100_000) -> list[Configuration]:
    """The full computation of ``tm`` on ``w`` including the halting configuration."""
    c = start_configuration(tm, w)
    out = [c]
    for _ in range(max_steps):
        if c.state in tm.halting:
            return out
        c = next_configuration(tm, c)
        out.append(c)
    raise TMError(f"{tm.name} did not halt on {w!r} within {max_steps} steps")


def decides(tm: SingleTapeTM, w: str) -> bool:
    return run(tm, w)[-1].state == tm.accept


def history_stream(tm: SingleTapeTM, w: str) -> Iterator[str]:
    """Lazily yield ``c1 $ $ c2 $ $ ... c_{h-1} $ $`` token by token."""
    c = start_configuration(tm, w)
    while c.state not in tm.halting:
        yield from c.description()
        yield SEPARATOR
        yield SEPARATOR
        c = next_configuration(tm, c)


# --- encoding -------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingParams:
    """Base-``m`` digit encoding of description strings.

    ``symbol_order`` maps each token to its digit. Tokens of the debater
    stream get digits ``1..|Gamma|`` and ``m`` must exceed ``|Gamma|``.
    ``extra`` tokens (halting-state heads) get digit 0: they only occur in
    the last successor of a history, whose encoding is never compared.
    """

    m: int
    symbol_order: Mapping[str, int]
    d: int = 1
    stream_size: int = 0

    @classmethod
    def build(cls, stream: Sequence[str], m: int, d: int = 1, extra: Sequence[str] = (), strict: bool = True):
        if strict and m <= len(stream):
            raise ValueError(f"base m={m} must exceed the stream alphabet size {len(stream)}")
        if m < 2:
            raise ValueError("base must be at least 2")
        order = {tok: i + 1 for i, tok in enumerate(stream)}
        for tok in extra:
            order.setdefault(tok, 0)
        return cls(m, order, d, len(stream))

    def e(self, token: str) -> int:
        try:
            return self.symbol_order[token]
        except KeyError:
            raise ValueError(f"symbol {token!r} outside the encoding alphabet") from None

    @property
    def max_digit(self) -> int:
        return max(self.symbol_order.values())


def encode_string(x: Sequence[str], p: EncodingParams) -> int:
    value = 0
    for token in x:
        value = value * p.m + p.e(token)
    return value


# --- alternating machines ----------------------------------------------------------


@dataclass(frozen=True)
class LinearSpaceATM:
    """A binary-branching ATM using at most ``k*(n+1)`` tape cells.

    ``transitions[(q, s)]`` is a pair ``(choice0, choice1)`` of
    ``(state, write, move)`` triples.
    """

    name: str
    existential: tuple[str, ...]
    universal: tuple[str, ...]
    input_alphabet: tuple[str, ...]
    tape_alphabet: tuple[str, ...]
    transitions: Mapping[tuple[str, str], tuple[tuple[str, str, str], tuple[str, str, str]]]
    start: str
    accept: str
    reject: str
    space_factor: int = 1
    blank: str = BLANK

    def __post_init__(self) -> None:
        problems = atm_defects(self)
        if problems:
            raise TMError("; ".join(problems))

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(self.existential) + tuple(self.universal) + (self.accept, self.reject)

    @property
    def halting(self) -> frozenset[str]:
        return frozenset((self.accept, self.reject))

    def delta(self, state: str, symbol: str, choice: int) -> tuple[str, str, str]:
        try:
            return self.transitions[(state, symbol)][choice]
        except KeyError:
            raise TMError(f"{self.name}: no transition for ({state}, {symbol})") from None

    def owner(self, state: str) -> str:
        """``P1`` moves in existential states, ``P0`` in universal ones."""
        return "P1" if state in self.existential else "P0"

    def cells(self, n: int) -> int:
        return self.space_factor * (n + 1)

    def stream_alphabet(self) -> tuple[str, ...]:
        live = tuple(self.existential) + tuple(self.universal)
        return tuple(self.tape_alphabet) + tuple(composite(q, s) for q in live for s in self.tape_alphabet)

    def halting_tokens(self) -> tuple[str, ...]:
        return tuple(composite(q, s) for q in (self.accept, self.reject) for s in self.tape_alphabet)


def atm_defects(atm: LinearSpaceATM) -> list[str]:
    out = tm_defects(_AsTM(atm))
    if set(atm.existential) & set(atm.universal):
        out.append("a state is both existential and universal")
    if atm.start not in atm.existential:
        out.append("start state must be existential")
    if atm.space_factor < 1:
        out.append("space factor must be positive")
    for (q, _), pair in atm.transitions.items():
        if len(pair) != 2:
            out.append(f"transition from {q} must offer exactly two choices")
            continue
        for q2, _, _ in pair:
            if q2 in atm.halting:
                continue
            if (q in atm.existential) == (q2 in atm.existential):
                out.append(f"transition {q} -> {q2} breaks strict alternation")
    return out


@dataclass(frozen=True)
class _AsTM:
    atm: LinearSpaceATM

    def __getattr__(self, item):
        return getattr(self.atm, item)

    @property
    def states(self):
        return self.atm.states


def atm_start(atm: LinearSpaceATM, w: str) -> Configuration:
    cells = list(w) + [atm.blank] * (atm.cells(len(w)) - len(w)) + [atm.blank]
    return Configuration(atm.start, tuple(cells), 0)


def atm_next(atm: LinearSpaceATM, c: Configuration, choice: int) -> Configuration:
    if c.state in atm.halting:
        raise TMError("halting configurations have no successor")
    q, y, mv = atm.delta(c.state, c.cells[c.head], choice)
    cells = list(c.cells)
    cells[c.head] = y
    head = max(0, c.head + MOVE_DELTA[mv])
    if head >= len(cells) - 1:
        raise TMError(f"{atm.name} leaves its {len(cells) - 1}-cell work space")
    return Configuration(q, tuple(cells), head)


@dataclass
class GameSolution:
    atm: LinearSpaceATM
    word: str
    value: dict[Configuration, bool] = field(default_factory=dict)

    @property
    def accepts(self) -> bool:
        return self.value[atm_start(self.atm, self.word)]

    def best_choice(self, c: Configuration) -> int:
        """Choice that is optimal for the player who owns ``c``."""
        want = self.atm.owner(c.state) == "P1"
        for choice in (0, 1):
            if self.value[atm_next(self.atm, c, choice)] == want:
                return choice
        return 0


def solve_game(atm: LinearSpaceATM, w: str) -> GameSolution:
    """Exhaustive game-tree evaluation; raises if some play never halts."""
    sol = GameSolution(atm, w)
    on_path: set[Configuration] = set()

    def value(c: Configuration) -> bool:
        if c in sol.value:
            return sol.value[c]
        if c.state == atm.accept:
            return True
        if c.state == atm.reject:
            return False
        if c in on_path:
            raise TMError(f"{atm.name} has a non-halting play on {w!r}")
        on_path.add(c)
        kids = [value(atm_next(atm, c, ch)) for ch in (0, 1)]
        on_path.discard(c)
        v = any(kids) if c.state in atm.existential else all(kids)
        sol.value[c] = v
        return v

    start = atm_start(atm, w)
    value(start)
    # halting children are looked up by best_choice
    stack = [start]
    seen = set()
    while stack:
        c = stack.pop()
        if c in seen or c.state in atm.halting:
            continue
        seen.add(c)
        for ch in (0, 1):
            nxt = atm_next(atm, c, ch)
            if nxt.state in atm.halting:
                sol.value[nxt] = nxt.state == atm.accept
            else:
                stack.append(nxt)
    return sol


def atm_play(atm: LinearSpaceATM, w: str, choices: Sequence[int]) -> list[Configuration]:
    """Configurations visited when the ``i``-th move uses ``choices[i]``."""
    c = atm_start(atm, w)
    out = [c]
    for ch in choices:
        if c.state in atm.halting:
            break
        c = atm_next(atm, c, ch)
        out.append(c)
    return out
