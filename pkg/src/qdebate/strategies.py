"""Debater strategies.

A strategy is a deterministic reactive object with three methods:

* ``initial()`` returns the state at the start of every round,
* ``observe(state, event)`` folds a public event into the state,
* ``emit(state)`` returns ``(symbol, new_state)`` when the verifier polls.

States are small hashable values so the exact engine can merge identical
configurations. The engine restarts a round from ``initial()``, and
``observe`` also resets on an explicit restart event.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .tm import (
    BLANK,
    SEPARATOR,
    LinearSpaceATM,
    SingleTapeTM,
    TMError,
    atm_next,
    atm_start,
    next_configuration,
    parse_description,
    run,
    solve_game,
    split_composite,
    start_configuration,
)

SILENT = "-"
P1, P0 = "P1", "P0"


class StrategyError(ValueError):
    pass


class Strategy:
    role: str = P1
    name: str = "strategy"

    def initial(self):
        raise NotImplementedError

    def observe(self, state, event):
        if event.kind == "restart":
            return self.initial()
        return state

    def emit(self, state):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{self.name} {self.role}>"


@dataclass(eq=False, repr=False)
class StreamStrategy(Strategy):
    """Plays a fixed symbol sequence, then ``tail`` forever (or loops)."""

    symbols: tuple[str, ...]
    role: str = P1
    name: str = "stream"
    loop: bool = False
    tail: str = SEPARATOR

    def initial(self):
        return 0

    def emit(self, state):
        n = len(self.symbols)
        if self.loop and n:
            return self.symbols[state % n], (state + 1) % n
        if state < n:
            return self.symbols[state], state + 1
        return self.tail, state

    def prefix(self, count: int) -> list[str]:
        out, s = [], self.initial()
        for _ in range(count):
            sym, s = self.emit(s)
            out.append(sym)
        return out


def silent(role: str = P0) -> StreamStrategy:
    return StreamStrategy((), role, "silent", tail=SILENT)


def scripted(path_or_text: str | Path, role: str = P1, loop: bool = False) -> StreamStrategy:
    """Symbols from a file (or literal text): whitespace separated, or one per character."""
    path = Path(path_or_text)
    text = path.read_text() if path.exists() else str(path_or_text)
    tokens = text.split()
    if len(tokens) == 1:
        tokens = list(tokens[0])
    return StreamStrategy(tuple(tokens), role, f"scripted:{path.name if path.exists() else 'text'}", loop=loop)


# --- Turing machine histories --------------------------------------------------------


def _blocks(configs) -> tuple[str, ...]:
    out: list[str] = []
    for c in configs:
        out.extend(c.description())
        out.extend((SEPARATOR, SEPARATOR))
    return tuple(out)


def honest_history(role: str, tm: SingleTapeTM, w: str) -> StreamStrategy:
    """Stream ``c1 $$ c2 $$ ... c_{h-1} $$`` of ``tm`` on ``w``."""
    configs = run(tm, w)[:-1]
    return StreamStrategy(_blocks(configs), role, "honest")


@dataclass(frozen=True)
class Corruption:
    """Replace token ``position`` (0-based) of configuration ``block`` (1-based)."""

    block: int
    position: int
    symbol: str


def spurious_configs(tm: SingleTapeTM, w: str, errors: Sequence[Corruption], max_steps: int = 10_000):
    """Configurations of a history that follows ``tm`` except at the corrupted blocks.

    After a corruption the history continues legitimately from the corrupted
    configuration. Corruptions must keep the final blank and the single head.
    """
    errors = sorted(errors, key=lambda e: e.block)
    by_block = {e.block: e for e in errors}
    if len(by_block) != len(errors):
        raise StrategyError("at most one corruption per block")
    c = start_configuration(tm, w)
    out = []
    for i in itertools.count(1):
        if c.state in tm.halting:
            break
        if i > max_steps:
            raise StrategyError("corrupted history does not halt")
        e = by_block.get(i)
        if e is not None:
            desc = list(c.description())
            if not 0 <= e.position < len(desc) - 1:
                raise StrategyError("corruption must keep the final blank of the configuration")
            desc[e.position] = e.symbol
            try:
                c = parse_description(desc)
            except TMError as exc:
                raise StrategyError(f"corruption breaks the configuration format: {exc}") from None
            if c.state in tm.halting:
                raise StrategyError("corruption may not introduce a halting state")
        out.append(c)
        c = next_configuration(tm, c)
    if any(e.block > len(out) for e in errors):
        raise StrategyError("corruption beyond the end of the history")
    return out, c


def spurious_history(role: str, tm: SingleTapeTM, w: str, error_spec) -> StreamStrategy:
    """History with one or more single-token corruptions.

    ``error_spec`` is a :class:`Corruption`, a sequence of them, or None
    (no corruption, i.e. the honest history).
    """
    if error_spec is None:
        errors: list[Corruption] = []
    elif isinstance(error_spec, Corruption):
        errors = [error_spec]
    else:
        errors = list(error_spec)
    configs, _ = spurious_configs(tm, w, errors)
    return StreamStrategy(_blocks(configs), role, "spurious")


def single_error_family(tm: SingleTapeTM, w: str, role: str, flip_only: bool = True):
    """All single-token corruptions of blocks ``>= 2`` whose history still halts.

    With ``flip_only`` only corruptions whose history ends with the wrong
    decision for ``role`` are kept.
    """
    honest = run(tm, w)
    truth = honest[-1].state == tm.accept
    alphabet = [t for t in tm.stream_alphabet()]
    out = []
    for i, c in enumerate(honest[:-1], start=1):
        if i == 1:
            continue
        desc = c.description()
        for pos in range(len(desc) - 1):
            for sym in alphabet:
                if sym == desc[pos]:
                    continue
                if (split_composite(sym) is None) != (split_composite(desc[pos]) is None):
                    continue
                err = Corruption(i, pos, sym)
                try:
                    _, last = spurious_configs(tm, w, [err], max_steps=4 * len(honest) + 50)
                except StrategyError:
                    continue
                verdict = last.state == tm.accept
                if flip_only and verdict == truth:
                    continue
                if flip_only and verdict != (role == P1):
                    continue
                out.append(err)
    return out


def staller(role: str, tm: SingleTapeTM | None, w: str = "", after_blocks: int | float = 0) -> StreamStrategy:
    """Honest for ``after_blocks`` blocks, then an endless configuration without ``$``."""
    if after_blocks == float("inf"):
        return honest_history(role, tm, w)
    prefix: tuple[str, ...] = ()
    if tm is not None and after_blocks:
        configs = run(tm, w)[:-1][: int(after_blocks)]
        prefix = _blocks(configs)
    return StreamStrategy(prefix, role, "staller", tail=BLANK)


# --- alternating machine games ---------------------------------------------------------


@dataclass(eq=False, repr=False)
class ATMGameStrategy(Strategy):
    """Plays the configuration stream of an ATM game.

    Each block is ``x c_i $ $``: ``x`` is the choice made in ``c_i`` when
    this debater owns ``c_i`` and ``-`` otherwise. Choices of the opponent
    are read from the public event log. ``policy`` is ``"optimal"`` or a
    sequence of this debater's own choices, repeated cyclically.

    ``corrupt`` optionally maps a block index to ``(position, symbol)``;
    ``stall_at`` turns block ``i`` into an endless run of blanks;
    ``length_delta`` at block ``i`` adds or drops tokens before the final
    blank; ``slot_fault`` at block ``i`` sends a malformed choice slot.
    """

    atm: LinearSpaceATM
    word: str
    role: str = P1
    policy: object = "optimal"
    name: str = "atm-game"
    corrupt: dict = field(default_factory=dict)
    stall_at: int | None = None
    length_delta: dict = field(default_factory=dict)
    slot_fault: int | None = None

    def __post_init__(self):
        self.solution = solve_game(self.atm, self.word) if self.policy == "optimal" else None
        self._configs: dict = {}

    # state: (choices announced so far, index into the current block; 0 is the slot)
    def initial(self):
        return ((), 0)

    def config(self, choices: tuple[str, ...]):
        c = self._configs.get(choices)
        if c is None:
            if not choices:
                c = atm_start(self.atm, self.word)
            else:
                prev = self.config(choices[:-1])
                c = atm_next(self.atm, prev, int(choices[-1]))
            self._configs[choices] = c
        return c

    def block_symbols(self, choices: tuple[str, ...]) -> tuple[str, ...]:
        """Tokens of block ``len(choices)`` after its slot."""
        i = len(choices)
        c = self.config(choices[:-1])
        desc = list(c.description())
        if i in self.corrupt:
            pos, sym = self.corrupt[i]
            desc[pos] = sym
        if i in self.length_delta:
            delta = self.length_delta[i]
            body = desc[:-1]
            body = body + [BLANK] * delta if delta > 0 else body[: len(body) + delta]
            desc = body + [BLANK]
        return tuple(desc) + (SEPARATOR, SEPARATOR)

    def my_choice(self, choices: tuple[str, ...]) -> str:
        c = self.config(choices)
        if self.solution is not None:
            return str(self.solution.best_choice(c))
        own = sum(1 for j in range(len(choices)) if self._owner(j) == self.role)
        if not self.policy:
            raise StrategyError("empty choice script")
        return str(self.policy[own % len(self.policy)])

    def _owner(self, block_index0: int) -> str:
        return P1 if block_index0 % 2 == 0 else P0

    def emit(self, state):
        choices, idx = state
        if idx == 0:
            block = len(choices) + 1
            if self.slot_fault == block:
                return ("-" if self._owner(len(choices)) == self.role else "0"), state
            if self._owner(len(choices)) == self.role and self.config(choices).state not in self.atm.halting:
                return self.my_choice(choices), state
            return SILENT, state
        block = len(choices)
        if self.stall_at == block:
            return BLANK, state
        syms = self.block_symbols(choices)
        sym = syms[idx - 1]
        nxt = idx + 1 if idx < len(syms) else 0
        return sym, (choices, nxt)

    def observe(self, state, event):
        if event.kind == "restart":
            return self.initial()
        if event.kind != "debaters-wrote":
            return state
        choices, idx = state
        if idx != 0:
            return state
        gp, gr = event.payload
        owner = self._owner(len(choices))
        announced = gp if owner == P1 else gr
        if announced not in ("0", "1"):
            return state
        if self.config(choices).state in self.atm.halting:
            return state
        return (choices + (announced,), 1)


def atm_game_strategy(role: str, atm: LinearSpaceATM, w: str, policy="optimal", **faults) -> ATMGameStrategy:
    return ATMGameStrategy(atm, w, role, policy, **faults)


def atm_family(atm: LinearSpaceATM, w: str, role: str, max_blocks: int = 4) -> list[ATMGameStrategy]:
    """Adversaries for ``role``: legal but arbitrary play plus protocol faults."""
    out: list[ATMGameStrategy] = []
    for script in itertools.product("01", repeat=(max_blocks + 1) // 2):
        out.append(ATMGameStrategy(atm, w, role, tuple(script), name=f"script{''.join(script)}"))
    cells = atm.cells(len(w)) + 1
    for block in range(1, max_blocks + 1):
        out.append(ATMGameStrategy(atm, w, role, name=f"stall{block}", stall_at=block))
        out.append(ATMGameStrategy(atm, w, role, name=f"long{block}", length_delta={block: 1}))
        out.append(ATMGameStrategy(atm, w, role, name=f"short{block}", length_delta={block: -1}))
        out.append(ATMGameStrategy(atm, w, role, name=f"slot{block}", slot_fault=block))
        for pos in range(cells - 1):
            for sym in atm.tape_alphabet:
                out.append(ATMGameStrategy(atm, w, role, name=f"corrupt{block}.{pos}{sym}", corrupt={block: (pos, sym)}))
    return out


# --- certificates for the rotation verifiers -------------------------------------------


def _fib(k: int) -> int:
    a, b = 1, 1
    for _ in range(k - 1):
        a, b = b, a + b
    return a


def certificate(language: str, **params) -> tuple[str, ...]:
    """One copy of the certificate the honest debater repeats forever."""
    if language == "uprime":
        i, j = params["i"], params["j"]
        if i < 1 or j < 1:
            raise StrategyError("block length and count must be positive")
        return tuple("".join(("a" if b % 2 == 0 else "b") * i for b in range(j)))
    if language == "usquare":
        m = params["m"]
        if m < 1:
            raise StrategyError("m must be positive")
        return tuple("".join(("a" if b % 2 == 0 else "b") * m for b in range(m)))
    if language == "upower":
        m = params["m"]
        if m < 1:
            raise StrategyError("exponent must be positive")
        return tuple("".join(("a" if b % 2 == 0 else "b") * (1 << b) for b in range(m)))
    if language == "ufib":
        # members F_1 .. F_{i-1} of the input F_i; '!' before F_{i-2}
        i = params["i"]
        if i < 4:
            raise StrategyError("small Fibonacci indices are decided without a certificate")
        members = ["a" * _fib(k) for k in range(1, i)]
        text = "#".join(members[: i - 3]) + "!" + "#".join(members[i - 3 :])
        return tuple(text)
    if language == "pal":
        # a claimed mismatch position, sent in unary twice
        pos = params["i"]
        if pos < 1:
            raise StrategyError("position must be positive")
        return tuple("a" * pos + "#" + "a" * pos + "#")
    raise StrategyError(f"unknown language {language!r}")


def certificate_strategy(language: str, role: str | None = None, **params) -> StreamStrategy:
    role = role or {"uprime": P0, "pal": P0}.get(language, P1)
    loop = language != "pal"
    return StreamStrategy(certificate(language, **params), role, f"{language}-certificate", loop=loop, tail=SILENT)


def stream_of(symbols: Iterable[str], role: str, loop: bool = True, name: str = "stream") -> StreamStrategy:
    return StreamStrategy(tuple(symbols), role, name, loop=loop, tail=SILENT)


def _alternating(lengths: Sequence[int], first: str = "a") -> str:
    letters = "ab" if first == "a" else "ba"
    return "".join(letters[b % 2] * k for b, k in enumerate(lengths))


def _nudged(lengths: Sequence[int]):
    """Every variant with one block one longer or one shorter."""
    for b in range(len(lengths)):
        for delta in (-1, 1):
            if lengths[b] + delta >= 0:
                yield tuple(lengths[:b]) + (lengths[b] + delta,) + tuple(lengths[b + 1 :])


def _block_variants(grid) -> dict[str, str]:
    out: dict[str, str] = {}
    for lengths in grid:
        lengths = tuple(lengths)
        out.setdefault("blocks" + ",".join(map(str, lengths)), _alternating(lengths))
        for v in _nudged(lengths):
            text = _alternating([k for k in v if k])
            if text:
                out.setdefault("nudge" + ",".join(map(str, v)), text)
        out.setdefault("b-first" + ",".join(map(str, lengths)), _alternating(lengths, "b"))
    return out


def _fib_members(count: int) -> list[int]:
    return [_fib(k) for k in range(1, count + 1)]


def _fib_text(lengths: Sequence[int], bang: int | None) -> str:
    """Members joined by '#', with '!' before member index ``bang`` (0-based)."""
    text = ""
    for idx, k in enumerate(lengths):
        if idx:
            text += "!" if idx == bang else "#"
        text += "a" * k
    return text


def rotation_family(language: str, n: int) -> list[StreamStrategy]:
    """Named adversaries against the rotation verifiers at input length ``n``.

    The adversary is the debater whose claim is false: P0 for UPRIME and
    PAL, P1 otherwise. Every certificate is repeated forever.
    """
    role = P0 if language in ("uprime", "pal") else P1
    scripts: dict[str, str] = {}
    if language in ("uprime", "usquare"):
        grid = [(i,) * j for i in range(1, n + 2) for j in range(1, n + 2) if i * j <= n + 2]
        scripts.update(_block_variants(grid))
    elif language == "upower":
        grid = [tuple(1 << b for b in range(m)) for m in range(1, n.bit_length() + 2)]
        grid += [(1,) + (k,) * j for k in range(1, n) for j in range(1, n) if 1 + k * j <= n]
        scripts.update(_block_variants(grid))
    elif language == "ufib":
        for count in range(2, 8):
            lengths = _fib_members(count)
            if sum(lengths) > 2 * n + 2:
                break
            variants = [tuple(lengths)] + list(_nudged(lengths))
            for v in variants:
                for bang in range(1, len(v)):
                    name = "fib" + ",".join(map(str, v)) + f"!{bang}"
                    scripts[name] = _fib_text(v, bang)
                scripts["nobang" + ",".join(map(str, v))] = _fib_text(v, None)
        for k in range(1, n + 1):
            scripts[f"flat{k}"] = _fib_text([1, 1, k, n - k], 2)
    elif language == "pal":
        for i in range(n + 2):
            for j in range(n + 2):
                scripts[f"pos{i},{j}"] = "a" * i + "#" + "a" * j + "#"
        scripts["no-separator"] = "a" * (n + 2)
    else:
        raise StrategyError(f"unknown language {language!r}")
    scripts["invalid"] = "c"
    scripts["single"] = "a"
    out = [StreamStrategy(tuple(text), role, name, loop=language != "pal", tail=SILENT) for name, text in scripts.items()]
    out.append(silent(role))
    return out


__all__ = [
    "ATMGameStrategy",
    "Corruption",
    "StreamStrategy",
    "atm_family",
    "atm_game_strategy",
    "certificate",
    "certificate_strategy",
    "honest_history",
    "rotation_family",
    "scripted",
    "silent",
    "single_error_family",
    "spurious_history",
    "staller",
    "stream_of",
]
