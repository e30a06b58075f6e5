"""Plain-text machine files: single-tape TMs, linear-space ATMs and verifiers.

The format is line based. ``#`` at the start of a line begins a comment;
everything else is whitespace-separated tokens. A file opens with
``kind: tm``, ``kind: atm`` or ``kind: verifier`` followed by ``key: value``
headers, then body lines::

    kind: tm
    name: parity
    states: even odd acc rej
    input: 0 1
    tape: 0 1 #
    blank: #
    start: even
    accept: acc
    reject: rej
    delta even 0 -> even 0 R

ATM transitions list both choices separated by ``|``. Verifier files
declare register operations by name (``superop``/``element``/``row``
blocks, or ``rotate``/``measure``/``coin`` one-liners) and reference them
from ``delta-q`` lines. Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .machine import VerifierSpec, validate
from .quantum import (
    ACTIONS,
    CoinFlip,
    Measure,
    OperationElement,
    RotationStep,
    Superoperator,
    format_rational,
    parse_rational,
)
from .tm import LinearSpaceATM, SingleTapeTM, TMError, atm_defects, tm_defects


class SpecFileError(ValueError):
    """A syntax error or a list of validation defects, with positions when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, defects=()):
        self.line = line
        self.column = column
        self.defects = list(defects)
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[list[_Tok]]:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        toks, col = [], 0
        for part in raw.split():
            col = raw.index(part, col)
            toks.append(_Tok(part, lineno, col + 1))
            col += len(part)
        lines.append(toks)
    return lines


def _err(tok: _Tok, message: str) -> SpecFileError:
    return SpecFileError(message, tok.line, tok.col)


HEADERS = {
    "tm": ("name", "states", "input", "tape", "blank", "start", "accept", "reject"),
    "atm": ("name", "existential", "universal", "input", "tape", "blank", "start", "accept", "reject", "space"),
    "verifier": (
        "name",
        "register",
        "quantum",
        "initial-quantum",
        "unit",
        "reading",
        "communication",
        "accept",
        "reject",
        "input",
        "comm",
        "initial",
    ),
}
OPTIONAL = {"tm": {"blank"}, "atm": {"blank", "space"}, "verifier": {"initial-quantum", "unit"}}
LIST_KEYS = {"states", "input", "tape", "existential", "universal", "quantum", "reading", "communication", "comm"}


def _headers(lines):
    if not lines or lines[0][0].text != "kind:":
        tok = lines[0][0] if lines else _Tok("", 1, 1)
        raise _err(tok, "file must start with 'kind: tm|atm|verifier'")
    first = lines[0]
    if len(first) != 2 or first[1].text not in HEADERS:
        raise _err(first[-1], "kind must be tm, atm or verifier")
    kind = first[1].text
    heads: dict[str, Any] = {}
    body = []
    for toks in lines[1:]:
        head = toks[0]
        if head.text.endswith(":"):
            key = head.text[:-1]
            if body:
                raise _err(head, "headers must precede transitions")
            if key not in HEADERS[kind]:
                raise _err(head, f"unknown key {key!r} for kind {kind}")
            if key in heads:
                raise _err(head, f"duplicate key {key!r}")
            vals = toks[1:]
            if key not in LIST_KEYS and len(vals) != 1:
                raise _err(head, f"key {key!r} takes exactly one value")
            heads[key] = vals if key in LIST_KEYS else vals[0]
        else:
            body.append(toks)
    for key in HEADERS[kind]:
        if key not in heads and key not in OPTIONAL[kind]:
            raise SpecFileError(f"missing key {key!r}", first[0].line, 1)
    return kind, heads, body


def _texts(toks) -> tuple[str, ...]:
    return tuple(t.text for t in toks)


def _int(tok: _Tok) -> int:
    try:
        return int(tok.text)
    except ValueError:
        raise _err(tok, f"expected an integer, got {tok.text!r}") from None


def _rational(tok: _Tok) -> Fraction:
    try:
        return parse_rational(tok.text)
    except (ValueError, ZeroDivisionError) as exc:
        raise _err(tok, f"bad rational {tok.text!r}: {exc}") from None


def _triple(toks, at: _Tok):
    if len(toks) != 3:
        raise _err(at, "a move is 'state write move'")
    return _texts(toks)


def _arrow(toks, keyword: str, lhs: int):
    if len(toks) < lhs + 2 or toks[lhs + 1].text != "->":
        raise _err(toks[0], f"{keyword} lines read '{keyword} <{lhs} tokens> -> ...'")
    return toks[1 : lhs + 1], toks[lhs + 2 :]


def _parse_tm(heads, body) -> SingleTapeTM:
    transitions = {}
    for toks in body:
        if toks[0].text != "delta":
            raise _err(toks[0], f"unexpected {toks[0].text!r}")
        lhs, rhs = _arrow(toks, "delta", 2)
        key = _texts(lhs)
        if key in transitions:
            raise _err(toks[0], f"duplicate transition for {key}")
        transitions[key] = _triple(rhs, toks[0])
    try:
        return SingleTapeTM(
            heads["name"].text,
            _texts(heads["states"]),
            _texts(heads["input"]),
            _texts(heads["tape"]),
            transitions,
            heads["start"].text,
            heads["accept"].text,
            heads["reject"].text,
            heads["blank"].text if "blank" in heads else "#",
        )
    except TMError as exc:
        raise SpecFileError("invalid tm", defects=str(exc).split("; ")) from None


def _parse_atm(heads, body) -> LinearSpaceATM:
    transitions = {}
    for toks in body:
        if toks[0].text != "delta":
            raise _err(toks[0], f"unexpected {toks[0].text!r}")
        lhs, rhs = _arrow(toks, "delta", 2)
        bars = [i for i, t in enumerate(rhs) if t.text == "|"]
        if len(bars) != 1:
            raise _err(toks[0], "an ATM transition lists two choices separated by '|'")
        key = _texts(lhs)
        if key in transitions:
            raise _err(toks[0], f"duplicate transition for {key}")
        transitions[key] = (_triple(rhs[: bars[0]], toks[0]), _triple(rhs[bars[0] + 1 :], toks[0]))
    try:
        return LinearSpaceATM(
            heads["name"].text,
            _texts(heads["existential"]),
            _texts(heads["universal"]),
            _texts(heads["input"]),
            _texts(heads["tape"]),
            transitions,
            heads["start"].text,
            heads["accept"].text,
            heads["reject"].text,
            _int(heads["space"]) if "space" in heads else 1,
            heads["blank"].text if "blank" in heads else "#",
        )
    except TMError as exc:
        raise SpecFileError("invalid atm", defects=str(exc).split("; ")) from None


def _parse_verifier(heads, body) -> VerifierSpec:
    ops: dict[str, Any] = {}
    delta_c, delta_q, delta_s = {}, {}, {}
    register = heads["register"].text
    if register not in ("vector", "rotation"):
        raise _err(heads["register"], "register must be vector or rotation")
    quantum = _texts(heads["quantum"])
    dim = len(quantum)
    i = 0
    while i < len(body):
        toks = body[i]
        word = toks[0].text
        if word == "superop":
            if len(toks) != 2:
                raise _err(toks[0], "superop takes a name")
            name = toks[1].text
            elements = []
            i += 1
            while i < len(body) and body[i][0].text == "element":
                head = body[i]
                if len(head) not in (2, 3) or head[1].text not in ACTIONS:
                    raise _err(head[0], "element takes an action and an optional label")
                rows = []
                i += 1
                while i < len(body) and body[i][0].text == "row":
                    row = body[i][1:]
                    if len(row) != dim:
                        raise _err(body[i][0], f"row needs {dim} entries")
                    rows.append(tuple(_rational(t) for t in row))
                    i += 1
                if len(rows) != dim:
                    raise _err(head[0], f"element needs {dim} rows")
                elements.append(OperationElement(tuple(rows), head[1].text, head[2].text if len(head) == 3 else ""))
            if not elements:
                raise _err(toks[0], "superop without elements")
            _define(ops, toks[1], Superoperator(tuple(elements), name))
            continue
        if word == "rotate":
            _define(ops, toks[1], RotationStep(tuple(_int(t) for t in toks[2:]), toks[1].text))
        elif word == "measure":
            if len(toks) != 4 or toks[3].text not in ACTIONS:
                raise _err(toks[0], "measure NAME QUBIT ACTION")
            _define(ops, toks[1], Measure(_int(toks[2]), toks[3].text, toks[1].text))
        elif word == "coin":
            if len(toks) < 3 or any(t.text not in ACTIONS for t in toks[2:]):
                raise _err(toks[0], "coin NAME ACTION...")
            _define(ops, toks[1], CoinFlip(_texts(toks[2:]), toks[1].text))
        elif word == "delta-c":
            lhs, rhs = _arrow(toks, "delta-c", 2)
            if len(rhs) != 2:
                raise _err(toks[0], "delta-c maps to 'state symbol'")
            _put(delta_c, _texts(lhs), _texts(rhs), toks[0])
        elif word == "delta-q":
            lhs, rhs = _arrow(toks, "delta-q", 4)
            if len(rhs) != 1 or rhs[0].text not in ops:
                raise _err(rhs[0] if rhs else toks[0], "delta-q maps to one declared operation")
            _put(delta_q, _texts(lhs), ops[rhs[0].text], toks[0])
        elif word == "delta-s":
            lhs, rhs = _arrow(toks, "delta-s", 5)
            if len(rhs) != 2:
                raise _err(toks[0], "delta-s maps to 'state move'")
            key = _texts(lhs[:4]) + (_int(lhs[4]),)
            _put(delta_s, key, _texts(rhs), toks[0])
        else:
            raise _err(toks[0], f"unexpected {word!r}")
        i += 1
    spec = VerifierSpec(
        name=heads["name"].text,
        quantum_states=quantum,
        reading_states=frozenset(_texts(heads["reading"])),
        communication_states=frozenset(_texts(heads["communication"])),
        accept_state=heads["accept"].text,
        reject_state=heads["reject"].text,
        input_alphabet=_texts(heads["input"]),
        comm_alphabet=_texts(heads["comm"]),
        delta_c=delta_c,
        delta_q=delta_q,
        delta_s=delta_s,
        initial_classical=heads["initial"].text,
        initial_quantum=_int(heads["initial-quantum"]) if "initial-quantum" in heads else 0,
        register=register,
        rotation_unit=_rational(heads["unit"]) if "unit" in heads else Fraction(1),
        metadata={"ops": ops},
    )
    defects = validate(spec)
    if defects:
        raise SpecFileError("invalid verifier", defects=defects)
    return spec


def _define(ops, tok: _Tok, op) -> None:
    if tok.text in ops:
        raise _err(tok, f"operation {tok.text!r} defined twice")
    ops[tok.text] = op


def _put(table, key, value, at: _Tok) -> None:
    if key in table:
        raise _err(at, f"duplicate entry for {key}")
    table[key] = value


def parse_machine_spec(text: str):
    """Parse and validate a TM, ATM or verifier document."""
    kind, heads, body = _headers(_tokenize(text))
    if kind == "tm":
        return _parse_tm(heads, body)
    if kind == "atm":
        return _parse_atm(heads, body)
    return _parse_verifier(heads, body)


def load(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return parse_machine_spec(fh.read())


# --- dumping -----------------------------------------------------------------------------


def dump(obj) -> str:
    """Canonical text for a TM, ATM or verifier (sorted, one entry per line)."""
    if isinstance(obj, LinearSpaceATM):
        return _dump_atm(obj)
    if isinstance(obj, SingleTapeTM):
        return _dump_tm(obj)
    if isinstance(obj, VerifierSpec):
        return _dump_verifier(obj)
    raise TypeError(f"cannot dump {type(obj).__name__}")


def normalize(text: str) -> str:
    return dump(parse_machine_spec(text))


def _dump_tm(tm: SingleTapeTM) -> str:
    out = [
        "kind: tm",
        f"name: {tm.name}",
        "states: " + " ".join(tm.states),
        "input: " + " ".join(tm.input_alphabet),
        "tape: " + " ".join(tm.tape_alphabet),
        f"blank: {tm.blank}",
        f"start: {tm.start}",
        f"accept: {tm.accept}",
        f"reject: {tm.reject}",
    ]
    for (q, s), move in sorted(tm.transitions.items()):
        out.append(f"delta {q} {s} -> " + " ".join(move))
    return "\n".join(out) + "\n"


def _dump_atm(atm: LinearSpaceATM) -> str:
    out = [
        "kind: atm",
        f"name: {atm.name}",
        "existential: " + " ".join(atm.existential),
        "universal: " + " ".join(atm.universal),
        "input: " + " ".join(atm.input_alphabet),
        "tape: " + " ".join(atm.tape_alphabet),
        f"blank: {atm.blank}",
        f"start: {atm.start}",
        f"accept: {atm.accept}",
        f"reject: {atm.reject}",
        f"space: {atm.space_factor}",
    ]
    for (q, s), (c0, c1) in sorted(atm.transitions.items()):
        out.append(f"delta {q} {s} -> " + " ".join(c0) + " | " + " ".join(c1))
    return "\n".join(out) + "\n"


def _names_for(spec: VerifierSpec) -> dict:
    """Token names for classical states; built verifiers use tuples, so number those."""
    states = set(spec.reading_states) | set(spec.communication_states) | {spec.accept_state, spec.reject_state}
    if all(isinstance(s, str) and s and not any(c.isspace() for c in s) for s in states):
        return {s: s for s in states}
    names = {spec.accept_state: "accept", spec.reject_state: "reject"}
    rest = sorted((s for s in states if s not in names), key=repr)
    names.update({s: f"s{i}" for i, s in enumerate(rest)})
    return names


def _op_line(name: str, op) -> list[str]:
    if isinstance(op, Superoperator):
        lines = [f"superop {name}"]
        for e in op.elements:
            lines.append(f"element {e.action}" + (f" {e.label}" if e.label else ""))
            for row in e.matrix:
                lines.append("row " + " ".join(format_rational(x) for x in row))
        return lines
    if isinstance(op, RotationStep):
        return [f"rotate {name} " + " ".join(map(str, op.units))]
    if isinstance(op, Measure):
        return [f"measure {name} {op.qubit} {op.on_q1}"]
    if isinstance(op, CoinFlip):
        return [f"coin {name} " + " ".join(op.actions)]
    raise TypeError(f"cannot dump operation {op!r}")


def _dump_verifier(spec: VerifierSpec) -> str:
    if not isinstance(spec.delta_q, dict):
        raise TypeError("only verifiers with explicit tables can be dumped")
    names = _names_for(spec)
    ops: dict[Any, str] = {}
    for op in spec.delta_q.values():
        if op not in ops:
            base = (getattr(op, "name", "") or "op").replace(" ", "_")
            candidate = base
            while candidate in ops.values():
                candidate = f"{base}.{len(ops)}"
            ops[op] = candidate

    def st(s):
        return names.get(s, s)  # wildcards pass through

    out = [
        "kind: verifier",
        f"name: {spec.name}",
        f"register: {spec.register}",
        "quantum: " + " ".join(spec.quantum_states),
        f"initial-quantum: {spec.initial_quantum}",
        f"unit: {format_rational(spec.rotation_unit)}",
        "reading: " + " ".join(sorted(st(s) for s in spec.reading_states)),
        "communication: " + " ".join(sorted(st(s) for s in spec.communication_states)),
        f"accept: {st(spec.accept_state)}",
        f"reject: {st(spec.reject_state)}",
        "input: " + " ".join(spec.input_alphabet),
        "comm: " + " ".join(spec.comm_alphabet),
        f"initial: {st(spec.initial_classical)}",
    ]
    for op, name in sorted(ops.items(), key=lambda kv: kv[1]):
        out.extend(_op_line(name, op))
    for (s, a), (t, g) in sorted(((st(k[0]), k[1]), (st(v[0]), v[1])) for k, v in spec.delta_c.items()):
        out.append(f"delta-c {s} {a} -> {t} {g}")
    for key, name in sorted(((st(k[0]),) + k[1:], ops[v]) for k, v in spec.delta_q.items()):
        out.append("delta-q " + " ".join(key) + f" -> {name}")
    rows = sorted(((st(k[0]),) + k[1:4] + (str(k[4]),), (st(v[0]), v[1])) for k, v in spec.delta_s.items())
    for key, (t, mv) in rows:
        out.append("delta-s " + " ".join(key) + f" -> {t} {mv}")
    return "\n".join(out) + "\n"


def defects_of(obj) -> list[str]:
    if isinstance(obj, LinearSpaceATM):
        return atm_defects(obj)
    if isinstance(obj, SingleTapeTM):
        return tm_defects(obj)
    return validate(obj)


__all__ = ["SpecFileError", "defects_of", "dump", "load", "normalize", "parse_machine_spec"]
