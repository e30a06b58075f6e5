"""Exact and sampled debate reports, growth fits and CSV output.

Probabilities stay exact where the engine produced them exactly:
:class:`~fractions.Fraction` for vector-register machines and coin-only
rounds, :class:`mpmath.mpf` once a rotation measurement is involved. The
CSV writer stores both losslessly so reports re-parse to identical values.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import mpmath
import numpy as np

from .engine import DEFAULT_CAPS, Caps, exact_round, explore, sample_debates_direct, sample_debates_graph
from .linalg import div
from .machine import UndefinedRatio, overall_acceptance

CSV_VERSION = "qdebate-report v1"
COLUMNS = (
    "scenario",
    "n",
    "p_accept",
    "p_reject",
    "p_restart",
    "residual",
    "overall",
    "mean_rounds",
    "ci_low",
    "ci_high",
    "seed",
)
COMPLETE_MARKER = "#complete"


class ReportError(ValueError):
    pass


# --- numbers --------------------------------------------------------------------------


def to_mpf(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def format_number(x) -> str:
    """Lossless text: ``num/den`` for rationals, ``man*2^exp`` for mpf, blank for None."""
    if x is None:
        return ""
    if isinstance(x, bool):
        raise ReportError("booleans are not numbers here")
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        if not man and exp:
            raise ReportError(f"non-finite value {x}")
        return f"{'-' if sign else ''}{int(man)}*2^{exp}"
    if isinstance(x, float):
        return repr(x)
    raise ReportError(f"cannot format {type(x).__name__}")


_MPF_RE = re.compile(r"^(-?)(\d+)\*2\^(-?\d+)$")


def parse_number(text: str):
    text = text.strip()
    if not text:
        return None
    m = _MPF_RE.match(text)
    if m:
        man = int(m.group(2))
        return mpmath.mpf((int(bool(m.group(1))), man, int(m.group(3)), man.bit_length()))
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+/\d+", text):
        num, den = text.split("/")
        if int(den) == 0:
            raise ReportError(f"zero denominator in {text!r}")
        return Fraction(int(num), int(den))
    try:
        return float(text)
    except ValueError:
        raise ReportError(f"not a number: {text!r}") from None


# --- reports ----------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ReportError("Wilson interval needs at least one trial")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class MonteCarloSummary:
    trials: int
    accepts: int
    rejects: int
    no_decision: int
    mean_rounds: float
    sd_rounds: float
    mean_steps: float
    ci_low: float | None
    ci_high: float | None

    @property
    def accept_frequency(self) -> float | None:
        decided = self.accepts + self.rejects
        return self.accepts / decided if decided else None

    @property
    def reject_frequency(self) -> float | None:
        decided = self.accepts + self.rejects
        return self.rejects / decided if decided else None


@dataclass
class DebateReport:
    scenario: str
    n: int
    p_accept: Any = None
    p_reject: Any = None
    p_restart: Any = None
    residual: Any = None
    overall: Any = None
    expected_rounds: Any = None
    expected_steps: Any = None
    mean_rounds: Any = None  # exact expected rounds, or the sampled mean
    ci: tuple = (None, None)
    converged: bool | None = None
    flags: tuple[str, ...] = ()
    mc: MonteCarloSummary | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def undefined_ratio(self) -> bool:
        return "undefined-ratio" in self.flags

    def row(self) -> dict[str, str]:
        values = (
            self.scenario,
            self.n,
            self.p_accept,
            self.p_reject,
            self.p_restart,
            self.residual,
            self.overall,
            self.mean_rounds,
            self.ci[0],
            self.ci[1],
            self.metadata.get("seed"),
        )
        return {col: v if isinstance(v, str) else format_number(v) for col, v in zip(COLUMNS, values)}

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario} (n={self.n})"]
        for name in ("p_accept", "p_reject", "p_restart", "residual", "overall", "expected_rounds"):
            v = getattr(self, name)
            if v is not None:
                lines.append(f"  {name:<16}{_show(v)}")
        if self.mc is not None:
            m = self.mc
            lines.append(
                f"  monte carlo      {m.trials} trials: {m.accepts} accept, {m.rejects} reject, "
                f"{m.no_decision} undecided; mean rounds {m.mean_rounds:.4g}"
            )
            if m.ci_low is not None:
                lines.append(f"  accept 95% CI    [{m.ci_low:.4f}, {m.ci_high:.4f}]")
        if self.flags:
            lines.append("  flags            " + ", ".join(self.flags))
        return "\n".join(lines)


def _show(v) -> str:
    if isinstance(v, Fraction) and v.denominator != 1:
        return f"{v} (~{float(v):.6g})"
    if isinstance(v, mpmath.mpf):
        return mpmath.nstr(v, 12)
    return str(v)


def report_from_row(row: dict[str, str]) -> DebateReport:
    """Inverse of :meth:`DebateReport.row` for the exact columns."""
    missing = [c for c in COLUMNS if c not in row]
    if missing:
        raise ReportError(f"missing columns {missing}")
    seed = parse_number(row["seed"])
    return DebateReport(
        scenario=row["scenario"],
        n=int(row["n"]),
        p_accept=parse_number(row["p_accept"]),
        p_reject=parse_number(row["p_reject"]),
        p_restart=parse_number(row["p_restart"]),
        residual=parse_number(row["residual"]),
        overall=parse_number(row["overall"]),
        mean_rounds=parse_number(row["mean_rounds"]),
        ci=(parse_number(row["ci_low"]), parse_number(row["ci_high"])),
        metadata={} if seed is None else {"seed": seed},
    )


def exact_report(spec, w: str, p1, p0, caps: Caps = DEFAULT_CAPS, scenario: str | None = None) -> DebateReport:
    """Exact one-round distribution plus the overall acceptance ratio."""
    dist = exact_round(spec, w, p1, p0, caps)
    flags = []
    converged = dist.converged(caps.residual_tol)
    if not converged:
        flags.append("not-converged")
    try:
        overall = overall_acceptance(dist.p_accept, dist.p_reject)
        halt = dist.p_accept + dist.p_reject
        rounds = div(Fraction(1), halt)
        steps = div(dist.expected_steps, halt)
    except UndefinedRatio:
        overall = rounds = steps = None
        flags.append("undefined-ratio")
    return DebateReport(
        scenario=scenario or spec.name,
        n=len(w),
        p_accept=dist.p_accept,
        p_reject=dist.p_reject,
        p_restart=dist.p_restart,
        residual=dist.residual,
        overall=overall,
        expected_rounds=rounds,
        expected_steps=steps,
        mean_rounds=rounds,
        converged=converged,
        flags=tuple(flags),
        metadata={"verifier": spec.name, "input": w, "p1": repr(p1), "p0": repr(p0), "caps": caps},
    )


def monte_carlo(
    spec,
    w: str,
    p1,
    p0,
    seed: int,
    trials: int,
    caps: Caps = DEFAULT_CAPS,
    scenario: str | None = None,
    method: str = "auto",
    backend=None,
) -> DebateReport:
    """Seeded sampled debates.

    ``method`` is ``graph`` (explore the round once, then sample the
    compiled graph), ``direct`` (step the machine every trial) or ``auto``
    (graph when exploration completes within the node cap).
    """
    if trials < 1:
        raise ReportError("trials must be positive")
    used = method
    if method in ("auto", "graph"):
        graph = explore(spec, w, p1, p0, caps)
        if graph.complete:
            decisions, rounds, steps = sample_debates_graph(graph, trials, seed, caps, backend)
            used = "graph"
        elif method == "graph":
            raise ReportError("round graph exceeds the node cap")
        else:
            used = "direct"
    if used == "direct":
        decisions, rounds, steps = sample_debates_direct(spec, w, p1, p0, trials, seed, caps)
    decisions = np.asarray(decisions)
    accepts = int(np.sum(decisions == 1))
    rejects = int(np.sum(decisions == 0))
    undecided = int(np.sum(decisions == -1))
    flags = []
    if accepts + rejects == 0:
        flags.append("no-decision")
        ci = (None, None)
    else:
        ci = wilson_interval(accepts, accepts + rejects)
    summary = MonteCarloSummary(
        trials=trials,
        accepts=accepts,
        rejects=rejects,
        no_decision=undecided,
        mean_rounds=float(np.mean(rounds)),
        sd_rounds=float(np.std(rounds, ddof=1)) if trials > 1 else 0.0,
        mean_steps=float(np.mean(steps)),
        ci_low=ci[0],
        ci_high=ci[1],
    )
    return DebateReport(
        scenario=scenario or spec.name,
        n=len(w),
        overall=summary.accept_frequency,
        mean_rounds=summary.mean_rounds,
        ci=ci,
        flags=tuple(flags),
        mc=summary,
        metadata={"verifier": spec.name, "input": w, "p1": repr(p1), "p0": repr(p0), "seed": seed, "method": used},
    )


# --- growth -----------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    residuals: tuple[float, ...]
    local_slopes: tuple[float, ...]
    polynomial: bool


def growth_fit(series: Iterable[tuple[float, float]]) -> GrowthFit:
    """Least-squares slope of ``log(steps)`` against ``log(n)``.

    The fit is flagged non-polynomial when the slopes between consecutive
    points keep increasing and the last exceeds the first by more than one.
    """
    pts = [(float(n), float(v)) for n, v in series]
    if len(pts) < 4:
        raise ReportError("growth_fit needs at least 4 points")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ReportError("growth_fit needs positive n and values")
    pts.sort()
    xs = np.log([n for n, _ in pts])
    ys = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = tuple(float(r) for r in ys - (slope * xs + intercept))
    local = tuple(float((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])) for i in range(len(pts) - 1))
    increasing = all(b > a for a, b in zip(local, local[1:]))
    polynomial = not (increasing and local[-1] - local[0] > 1.0)
    return GrowthFit(float(slope), float(intercept), residuals, local, polynomial)


# --- csv -----------------------------------------------------------------------------------


def write_csv(reports: Sequence[DebateReport], out=None) -> str:
    """CSV with a version comment line and a trailing completeness row."""
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    buf.write(f"{COMPLETE_MARKER},{len(reports)}\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> list[DebateReport]:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {CSV_VERSION}":
        raise ReportError("missing or unknown CSV version line")
    if not lines[-1].startswith(COMPLETE_MARKER + ","):
        raise ReportError("CSV is incomplete (no completeness marker)")
    count = int(lines[-1].split(",", 1)[1])
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:-1])))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ReportError(f"unexpected columns {reader.fieldnames}")
    reports = [report_from_row(row) for row in reader]
    if len(reports) != count:
        raise ReportError(f"marker says {count} rows, found {len(reports)}")
    return reports


def same_values(a: DebateReport, b: DebateReport) -> bool:
    """Field-by-field equality of the serialized columns."""
    return a.row() == b.row()


__all__ = [
    "COLUMNS",
    "CSV_VERSION",
    "DebateReport",
    "GrowthFit",
    "MonteCarloSummary",
    "ReportError",
    "exact_report",
    "format_number",
    "growth_fit",
    "monte_carlo",
    "parse_number",
    "read_csv",
    "same_values",
    "to_mpf",
    "wilson_interval",
    "write_csv",
]
