"""Exact and sampled execution of debate rounds.

The exact engine enumerates the configuration graph of one round (every
configuration reachable from the restart configuration, with exact
transition probabilities), then pushes probability mass through its
strongly connected components in topological order. Acyclic parts are a
plain forward pass; cyclic parts (random-walk gadgets) are absorbed by an
exact sparse solve. Nodes left unexpanded by the caps carry the residual.

Two sampled engines exist. ``direct`` steps the machine, measuring the
register with :func:`~qdebate.quantum.apply_sampled`. ``graph`` walks the
memoized configuration graph inside the compiled kernel and is used for
large Monte Carlo runs.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import networkx as nx
import numpy as np

from . import kernel
from .linalg import solve_left_sparse
from .machine import (
    COMMUNICATION,
    HALT_ACCEPT,
    HALT_REJECT,
    READING,
    MachineConfig,
    MachineError,
    PublicEvent,
    VerifierSpec,
    communicate,
    initial_config,
    read_move,
    step,
    tape_of,
)
from .quantum import (
    ACCEPT,
    CONTINUE,
    REJECT,
    RESTART,
    CoinFlip,
    Measure,
    RotationStep,
    RotationTracker,
    Superoperator,
    apply_sampled,
    canonical_direction,
    q1_probability,
)

log = logging.getLogger(__name__)

TERMINALS = (ACCEPT, REJECT, RESTART)
_TERMINAL_CODE = {ACCEPT: -1, REJECT: -2, RESTART: -3}


@dataclass(frozen=True)
class Caps:
    max_steps: int = 10**6  # per sampled round
    max_restarts: int = 10**5  # per sampled debate
    max_nodes: int = 200_000  # exact exploration
    residual_tol: float = 1e-6  # relative to halting mass


DEFAULT_CAPS = Caps()


@dataclass
class RoundGraph:
    spec: VerifierSpec
    word: str
    configs: list[MachineConfig]
    edges: list[list[tuple[Any, Any]]]  # per expanded node: (prob, target id or terminal name)
    complete: bool

    @property
    def expanded(self) -> int:
        return len(self.edges)


def explore(spec: VerifierSpec, w: str, p1, p0, caps: Caps = DEFAULT_CAPS) -> RoundGraph:
    """Breadth-first enumeration of one round's configuration graph."""
    tape = tape_of(w)
    start = initial_config(spec, p1, p0)
    configs = [start]
    index = {start: 0}
    edges: list[list[tuple[Any, Any]]] = []
    queue = deque([0])
    while queue:
        u = queue.popleft()
        if len(edges) >= caps.max_nodes:
            break
        # BFS order means node ids are expanded in order
        assert u == len(edges)
        merged: dict[Any, Any] = {}
        for br in step(spec, configs[u], tape, p1, p0):
            if br.kind == CONTINUE:
                v = index.get(br.config)
                if v is None:
                    v = len(configs)
                    index[br.config] = v
                    configs.append(br.config)
                    queue.append(v)
                key = v
            else:
                key = br.kind
            merged[key] = merged.get(key, 0) + br.prob
        edges.append(list((p, t) for t, p in merged.items()))
    complete = len(edges) == len(configs)
    return RoundGraph(spec, w, configs, edges, complete)


@dataclass
class RoundDistribution:
    p_accept: Any
    p_reject: Any
    p_restart: Any
    residual: Any
    expected_steps: Any
    visits: dict[int, Any] = field(repr=False, default_factory=dict)
    graph: RoundGraph | None = field(repr=False, default=None)

    @property
    def p_halt(self):
        return self.p_accept + self.p_reject

    def converged(self, tol: float = DEFAULT_CAPS.residual_tol) -> bool:
        if self.residual == 0:
            return True
        return self.p_halt > 0 and self.residual < tol * self.p_halt


def solve_round(graph: RoundGraph) -> RoundDistribution:
    """Exact absorption probabilities and expected step count of one round."""
    n_exp = graph.expanded
    g = nx.DiGraph()
    g.add_nodes_from(range(n_exp))
    for u, outs in enumerate(graph.edges):
        for _, t in outs:
            if isinstance(t, int) and t < n_exp:
                g.add_edge(u, t)
    cond = nx.condensation(g)
    inflow: dict[int, Any] = {0: Fraction(1)}
    visits: dict[int, Any] = {}
    term = {ACCEPT: Fraction(0), REJECT: Fraction(0), RESTART: Fraction(0)}
    residual: Any = Fraction(0)

    def push(u, x):
        nonlocal residual
        for p, t in graph.edges[u]:
            flow = x * p
            if isinstance(t, str):
                term[t] = term[t] + flow
            elif t >= n_exp:
                residual = residual + flow
            elif t not in members_of:
                inflow[t] = inflow.get(t, 0) + flow

    for c in nx.topological_sort(cond):
        members = sorted(cond.nodes[c]["members"])
        members_of = set(members)
        b = {u: inflow.pop(u) for u in members if u in inflow}
        if not b:
            continue
        if len(members) == 1 and not g.has_edge(members[0], members[0]):
            u = members[0]
            visits[u] = b[u]
            push(u, b[u])
            continue
        q = {
            u: {t: p for p, t in graph.edges[u] if isinstance(t, int) and t in members_of}
            for u in members
        }
        x = solve_left_sparse(members, q, b)
        for u in members:
            visits[u] = x[u]
            push(u, x[u])
    # frontier nodes that received mass directly
    for u, x in inflow.items():
        if u >= n_exp:
            residual = residual + x
    expected_steps = sum(visits.values(), Fraction(0))
    return RoundDistribution(term[ACCEPT], term[REJECT], term[RESTART], residual, expected_steps, visits, graph)


def exact_round(spec: VerifierSpec, w: str, p1, p0, caps: Caps = DEFAULT_CAPS) -> RoundDistribution:
    dist = solve_round(explore(spec, w, p1, p0, caps))
    if not dist.converged(caps.residual_tol):
        log.warning("exact round for %s on %r not converged: residual %s", spec.name, w, float(dist.residual))
    return dist


# --- sampled execution ------------------------------------------------------------


@dataclass(frozen=True)
class RoundResult:
    kind: str  # accept | reject | restart | budget-exhausted
    steps_used: int


@dataclass(frozen=True)
class Decision:
    result: str  # accept | reject | no-decision
    rounds: int
    steps: int


def _sample_register(spec: VerifierSpec, op, reg: tuple, rng):
    if isinstance(op, Superoperator):
        outcome, vec = apply_sampled(reg, op, rng)
        return outcome, canonical_direction(vec)[0]
    if isinstance(op, RotationStep):
        return 0, tuple(k + u for k, u in zip(reg, op.units))
    if isinstance(op, Measure):
        k = reg[op.qubit]
        reset = reg[: op.qubit] + (0,) + reg[op.qubit + 1 :]
        if k == 0:
            return 0, reg
        p = float(q1_probability(RotationTracker(k, spec.rotation_unit)))
        return (1 if rng.random() < p else 0), reset
    if isinstance(op, CoinFlip):
        return int(rng.random() * len(op.actions)), reg
    raise MachineError(f"unsupported register operation {op!r}")


def sample_round(spec: VerifierSpec, w: str, p1, p0, rng, caps: Caps = DEFAULT_CAPS, log_to=None) -> RoundResult:
    """One sampled round, stepping the machine directly.

    ``log_to`` is an optional pair of lists receiving every public event
    as delivered to P1 and to P0 respectively.
    """
    tape = tape_of(w)
    cfg = initial_config(spec, p1, p0)
    for steps in range(1, caps.max_steps + 1):
        kind = spec.kind(cfg.classical_state)
        if kind == COMMUNICATION:
            cfg, events = communicate(spec, cfg, tape, p1, p0)
            action = CONTINUE
        elif kind == READING:
            sym = tape[cfg.head_pos]
            _, gp, gr = cfg.comm_cell
            op = spec.lookup_q(cfg.classical_state, sym, gp, gr)
            outcome, reg = _sample_register(spec, op, cfg.register, rng)
            action, new, events = read_move(spec, cfg, tape, p1, p0, op, outcome, reg)
            cfg = new
        else:  # pragma: no cover - halting states are never current
            raise MachineError("round started in a halting state")
        if log_to is not None:
            for e in events:
                log_to[0].append(e.to_line())
                log_to[1].append(e.to_line())
        if action != CONTINUE:
            if log_to is not None:
                final = PublicEvent("restart" if action == RESTART else "halt", action)
                log_to[0].append(final.to_line())
                log_to[1].append(final.to_line())
            return RoundResult(action, steps)
    return RoundResult("budget-exhausted", caps.max_steps)


def run_round(spec: VerifierSpec, w: str, p1, p0, engine: str = "exact", caps: Caps = DEFAULT_CAPS, rng=None):
    """One round: a :class:`RoundDistribution` (``exact``) or a :class:`RoundResult` (``sampled``)."""
    if engine == "exact":
        return exact_round(spec, w, p1, p0, caps)
    if engine == "sampled":
        if rng is None:
            raise ValueError("the sampled engine needs an rng")
        return sample_round(spec, w, p1, p0, rng, caps)
    raise ValueError(f"unknown engine {engine!r}")


def run_debate(spec: VerifierSpec, w: str, p1, p0, rng, caps: Caps = DEFAULT_CAPS) -> Decision:
    """Repeat rounds from a fresh register until one halts or the restart cap is hit."""
    total = 0
    for rounds in range(1, caps.max_restarts + 1):
        res = sample_round(spec, w, p1, p0, rng, caps)
        total += res.steps_used
        if res.kind in (ACCEPT, REJECT):
            return Decision(res.kind, rounds, total)
        if res.kind == "budget-exhausted":
            return Decision("no-decision", rounds, total)
    return Decision("no-decision", caps.max_restarts, total)


@dataclass
class CompiledGraph:
    offsets: np.ndarray
    targets: np.ndarray
    cumprob: np.ndarray


def compile_graph(graph: RoundGraph) -> CompiledGraph:
    """Flatten a complete round graph into CSR arrays for the sampling kernel."""
    if not graph.complete:
        raise ValueError("graph exploration hit its cap; cannot compile")
    offsets = [0]
    targets: list[int] = []
    cum: list[float] = []
    for outs in graph.edges:
        acc = 0.0
        for i, (p, t) in enumerate(outs):
            acc += float(p)
            targets.append(_TERMINAL_CODE[t] if isinstance(t, str) else t)
            cum.append(2.0 if i == len(outs) - 1 else acc)
        offsets.append(len(targets))
    return CompiledGraph(
        np.asarray(offsets, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
        np.asarray(cum, dtype=np.float64),
    )


def sample_debates_graph(graph: RoundGraph, trials: int, seed: int, caps: Caps = DEFAULT_CAPS, backend=None):
    """Monte Carlo debates over a memoized round graph.

    Returns ``(decisions, rounds, steps)`` arrays; decisions are 1 (accept),
    0 (reject) or -1 (no decision).
    """
    cg = compile_graph(graph)
    impl = backend or kernel.simulate
    return impl(cg.offsets, cg.targets, cg.cumprob, 0, trials, seed, caps.max_restarts, caps.max_steps)


def sample_debates_direct(spec: VerifierSpec, w: str, p1, p0, trials: int, seed: int, caps: Caps = DEFAULT_CAPS):
    decisions = np.empty(trials, dtype=np.int8)
    rounds = np.empty(trials, dtype=np.int64)
    steps = np.empty(trials, dtype=np.int64)
    code = {ACCEPT: 1, REJECT: 0, "no-decision": -1}
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        d = run_debate(spec, w, p1, p0, rng, caps)
        decisions[t], rounds[t], steps[t] = code[d.result], d.rounds, d.steps
    return decisions, rounds, steps
