"""``qdebate`` command line: validate machine files, run and sweep debates.

Subcommands::

    qdebate validate FILE
    qdebate exact --verifier theorem1 --tm parity.tm --m 10 --input 11 --p0 spurious:block=2
    qdebate run   --verifier uprime --n 15 --p0 honest --seed 7 --trials 10000
    qdebate sweep --verifier upower --n 2:16 --p1 family:rotation
    qdebate list

Strategies are written ``name[:key=value,...]``. A ``--config`` file holds
``key = value`` lines using the flag names; flags override the file.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import math
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

from . import analysis, compile as compile_, polytime, strategies as st
from .engine import Caps
from .machine import VerifierSpec
from .quantum import parse_rational
from .specfile import SpecFileError, defects_of, load
from .tm import LinearSpaceATM, SingleTapeTM, TMError

TM_VERIFIERS = ("theorem1", "fact1")
ATM_VERIFIERS = ("theorem3",)
VERIFIERS = TM_VERIFIERS + ATM_VERIFIERS + tuple(polytime.BUILDERS) + ("file",)
STRATEGIES = {
    "honest": "the truthful debater's play (history, optimal game play or certificate)",
    "silent": "always sends '-'",
    "spurious": "history with one corrupted token: block=B[,pos=P,sym=S]",
    "staller": "honest for after=B blocks, then never finishes a configuration",
    "policy": "ATM game with scripted own choices: choices=0110",
    "certificate": "explicit certificate parameters, e.g. i=3,j=5",
    "stream": "fixed symbols repeated forever: text=aabb",
    "script": "symbols read from a file: path=FILE[,loop=1]",
    "family": "sweep only: single-error, atm or rotation adversaries",
}


class UsageError(Exception):
    pass


def data_path(name: str) -> Path:
    """A bundled fixture by file name (``bundled/`` prefix optional)."""
    name = name.removeprefix("bundled/")
    return Path(str(resources.files("qdebate") / "data" / name))


def resolve_file(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = data_path(name)
    if bundled.exists():
        return bundled
    raise UsageError(f"no such file: {name}")


def bundled_fixtures() -> list[str]:
    root = resources.files("qdebate") / "data"
    return sorted(p.name for p in root.iterdir() if not p.name.startswith("."))


# --- scenarios -------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    verifier: str = ""
    spec: str | None = None
    tm: str | None = None
    atm: str | None = None
    m: int | None = None
    k: int | None = None
    d: int | None = None
    strict: bool = True
    input: str | None = None
    n: int | None = None
    p1: str | None = None
    p0: str | None = None
    seed: int = 0
    trials: int = 1000
    attenuation: int | None = None
    unit: str = "1"
    calibrate: str = "true-min"
    max_steps: int = Caps.max_steps
    max_restarts: int = Caps.max_restarts
    max_nodes: int = Caps.max_nodes
    scenario: str | None = None

    def caps(self) -> Caps:
        return Caps(max_steps=self.max_steps, max_restarts=self.max_restarts, max_nodes=self.max_nodes)

    def word(self) -> str:
        if self.input is not None and self.n is not None:
            raise UsageError("give either --input or --n, not both")
        if self.input is not None:
            return "" if self.input in ("", "-") else self.input
        if self.n is not None:
            if self.n < 0:
                raise UsageError("--n must be non-negative")
            return polytime.UNARY * self.n
        raise UsageError("an input is required (--input or --n)")


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(key: str, value: str):
    kind = str(_FIELD_TYPES[key])
    try:
        if "bool" in kind:
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("1", "true", "yes")
        if "int" in kind:
            return int(value)
    except ValueError:
        raise UsageError(f"{key} expects {kind}, got {value!r}") from None
    return value


def parse_config(text: str) -> dict[str, Any]:
    """Strict ``key = value`` document; ``#`` starts a comment line."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise UsageError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _load_kind(path: str, kind):
    obj = load(resolve_file(path))
    if not isinstance(obj, kind):
        raise UsageError(f"{path} does not hold a {kind.__name__}")
    return obj


def build_verifier(cfg: ScenarioConfig, word: str):
    """The verifier for ``cfg``; returns ``(spec, machine or None)``."""
    v = cfg.verifier
    if v in TM_VERIFIERS:
        if not cfg.tm:
            raise UsageError(f"{v} needs --tm")
        tm = _load_kind(cfg.tm, SingleTapeTM)
        m = cfg.m if cfg.m is not None else 10
        build = compile_.build_theorem1_verifier if v == "theorem1" else compile_.build_fact1_verifier
        return build(tm, m, strict=cfg.strict, d=cfg.d), tm
    if v in ATM_VERIFIERS:
        if not cfg.atm:
            raise UsageError(f"{v} needs --atm")
        atm = _load_kind(cfg.atm, LinearSpaceATM)
        return compile_.build_theorem3_verifier(atm, cfg.k, cfg.m, cfg.d), atm
    if v in polytime.BUILDERS:
        unit = parse_rational(cfg.unit)
        spec = polytime.BUILDERS[v](n=len(word), attenuation=cfg.attenuation, unit=unit, calibrate=cfg.calibrate)
        return spec, None
    if v == "file":
        if not cfg.spec:
            raise UsageError("--verifier file needs --spec")
        return _load_kind(cfg.spec, VerifierSpec), None
    raise UsageError(f"unknown verifier {v!r}; choose from {', '.join(VERIFIERS)}")


def parse_strategy_text(text: str) -> tuple[str, dict[str, str]]:
    name, _, rest = text.partition(":")
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise UsageError(f"strategy parameter {item!r} must be key=value")
            params[key.strip()] = value.strip()
    if name not in STRATEGIES:
        raise UsageError(f"unknown strategy {name!r}")
    return name, params


def _int_param(params, key, default=None) -> int:
    if key not in params:
        if default is None:
            raise UsageError(f"strategy parameter {key} is required")
        return default
    try:
        return int(params[key])
    except ValueError:
        raise UsageError(f"strategy parameter {key} must be an integer") from None


def honest_certificate(language: str, n: int) -> dict[str, int] | None:
    """Certificate parameters for the truthful talker, or None when it has nothing to claim."""
    if language == "uprime":
        for i in range(2, math.isqrt(n) + 1):
            if n % i == 0:
                return {"i": i, "j": n // i}
        return None
    if language == "usquare":
        r = math.isqrt(n)
        return {"m": r} if n > 0 and r * r == n else None
    if language == "upower":
        return {"m": n.bit_length() - 1} if n >= 2 and n & (n - 1) == 0 else None
    if language == "ufib":
        i = 4
        while st._fib(i) < n:
            i += 1
        return {"i": i} if n >= 3 and st._fib(i) == n else None
    raise UsageError(f"no certificate for {language}")


def make_strategy(text: str | None, role: str, cfg: ScenarioConfig, spec, machine, word: str):
    v = cfg.verifier
    if text is None:
        text = _default_strategy(v, role)
    name, params = parse_strategy_text(text)
    if name == "silent":
        return st.silent(role)
    if name == "stream":
        return st.stream_of(params.get("text", ""), role)
    if name == "script":
        if "path" not in params:
            raise UsageError("script needs path=FILE")
        return st.scripted(resolve_file(params["path"]), role, loop=params.get("loop", "0") == "1")
    if name == "family":
        raise UsageError("families are only available to the sweep subcommand")
    if v in TM_VERIFIERS:
        if name == "honest":
            return st.honest_history(role, machine, word)
        if name == "staller":
            return st.staller(role, machine, word, _int_param(params, "after", 1))
        if name == "spurious":
            block = _int_param(params, "block")
            if "pos" in params or "sym" in params:
                err = st.Corruption(block, _int_param(params, "pos"), params.get("sym", ""))
            else:
                family = [e for e in st.single_error_family(machine, word, role) if e.block == block]
                if not family:
                    raise UsageError(f"no decision-flipping corruption of block {block} for {role}")
                err = family[0]
            try:
                return st.spurious_history(role, machine, word, err)
            except st.StrategyError as exc:
                raise UsageError(str(exc)) from None
    if v in ATM_VERIFIERS:
        if name == "honest":
            return st.atm_game_strategy(role, machine, word)
        if name == "policy":
            return st.atm_game_strategy(role, machine, word, tuple(params.get("choices", "")))
    if v in polytime.BUILDERS:
        if name == "honest":
            if v == "pal":
                mismatch = next((i + 1 for i in range(len(word)) if word[i] != word[-1 - i]), None)
                params_ = None if mismatch is None else {"i": mismatch}
            else:
                params_ = honest_certificate(v, len(word))
            if params_ is None:
                return st.silent(role)
            return st.certificate_strategy(v, role, **params_)
        if name == "certificate":
            return st.certificate_strategy(v, role, **{k: _int_param(params, k) for k in params})
    raise UsageError(f"strategy {name!r} does not apply to verifier {v!r}")


def _default_strategy(verifier: str, role: str) -> str:
    if verifier == "fact1" and role == st.P0:
        return "silent"
    if verifier in polytime.BUILDERS:
        talker = st.P0 if verifier in ("uprime", "pal") else st.P1
        return "honest" if role == talker else "silent"
    if verifier == "file":
        return "silent"
    return "honest"


def family_strategies(text: str, role: str, cfg: ScenarioConfig, machine, word: str):
    kind = text.partition(":")[2]
    if kind == "single-error":
        return [st.spurious_history(role, machine, word, e) for e in st.single_error_family(machine, word, role)]
    if kind == "atm":
        return st.atm_family(machine, word, role)
    if kind == "rotation":
        return [s for s in st.rotation_family(cfg.verifier, len(word)) if s.role == role]
    raise UsageError(f"unknown family {kind!r}")


# --- execution --------------------------------------------------------------------------------


def _scenario_name(cfg: ScenarioConfig, word: str, p1, p0) -> str:
    if cfg.scenario:
        return cfg.scenario
    shown = f"n={len(word)}" if cfg.n is not None else (word or "eps")
    return f"{cfg.verifier}/{shown}/{getattr(p1, 'name', p1)}/{getattr(p0, 'name', p0)}"


def run_scenario(cfg: ScenarioConfig, mode: str) -> analysis.DebateReport:
    word = cfg.word()
    spec, machine = build_verifier(cfg, word)
    p1 = make_strategy(cfg.p1, st.P1, cfg, spec, machine, word)
    p0 = make_strategy(cfg.p0, st.P0, cfg, spec, machine, word)
    name = _scenario_name(cfg, word, p1, p0)
    if mode == "exact":
        report = analysis.exact_report(spec, word, p1, p0, cfg.caps(), name)
        report.metadata["seed"] = None
        return report
    return analysis.monte_carlo(spec, word, p1, p0, cfg.seed, cfg.trials, cfg.caps(), name)


def _n_values(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        if ":" in part:
            lo, _, hi = part.partition(":")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _sweep_jobs(cfg: ScenarioConfig, n_values: list[int], m_values: list[int | None]):
    """``(cfg, strategy index or None for P1, for P0)`` per scenario, in a fixed order."""
    jobs = []
    for m in m_values:
        for n in n_values:
            base = replace(cfg, m=m if m is not None else cfg.m, n=None, input=None)
            if cfg.verifier in polytime.BUILDERS and cfg.verifier != "pal":
                scenarios = [replace(base, n=n)]
            else:
                alphabet = ("0", "1") if cfg.verifier == "pal" else _input_alphabet(base)
                words = ("".join(p) for p in itertools.product(alphabet, repeat=n))
                scenarios = [replace(base, input=w or "-") for w in words]
            for one in scenarios:
                for roles in _family_indices(one):
                    jobs.append((one, roles))
    return jobs


def _input_alphabet(cfg: ScenarioConfig) -> tuple[str, ...]:
    if cfg.verifier in TM_VERIFIERS:
        return _load_kind(cfg.tm, SingleTapeTM).input_alphabet
    if cfg.verifier in ATM_VERIFIERS:
        return _load_kind(cfg.atm, LinearSpaceATM).input_alphabet
    raise UsageError("sweeps over --verifier file need explicit inputs")


def _family_indices(cfg: ScenarioConfig):
    word = cfg.word()
    sizes = []
    for text, role in ((cfg.p1, st.P1), (cfg.p0, st.P0)):
        if text and text.startswith("family"):
            _, machine = build_verifier(cfg, word)
            sizes.append(range(len(family_strategies(text, role, cfg, machine, word))))
        else:
            sizes.append([None])
    return list(itertools.product(*sizes))


def _run_sweep_job(job) -> analysis.DebateReport:
    cfg, (i1, i0) = job
    word = cfg.word()
    spec, machine = build_verifier(cfg, word)
    chosen = []
    for text, role, idx in ((cfg.p1, st.P1, i1), (cfg.p0, st.P0, i0)):
        if idx is None:
            chosen.append(make_strategy(text, role, cfg, spec, machine, word))
        else:
            chosen.append(family_strategies(text, role, cfg, machine, word)[idx])
    p1, p0 = chosen
    name = _scenario_name(replace(cfg, scenario=None), word, p1, p0)
    report = analysis.exact_report(spec, word, p1, p0, cfg.caps(), name)
    return report


# --- entry point ------------------------------------------------------------------------------


def _add_scenario_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--config", help="key = value scenario file")
    p.add_argument("--verifier", help=f"one of {', '.join(VERIFIERS)}")
    p.add_argument("--spec", help="verifier file for --verifier file")
    p.add_argument("--tm", help="single-tape TM file (bundled names allowed)")
    p.add_argument("--atm", help="linear-space ATM file")
    p.add_argument("--k", type=int, help="space factor of the ATM")
    p.add_argument("--d", type=int, help="override the scaling constant")
    p.add_argument("--non-strict", dest="strict", action="store_false", default=None, help="allow m <= |stream alphabet|")
    p.add_argument("--attenuation", type=int)
    p.add_argument("--unit", help="rotation unit c as num/den")
    p.add_argument("--calibrate", choices=("true-min", "floor"))
    p.add_argument("--p1", help="P1 strategy")
    p.add_argument("--p0", help="P0 strategy")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--max-restarts", type=int)
    p.add_argument("--max-nodes", type=int)
    p.add_argument("--out", help="CSV output path (default stdout)")
    if sweep:
        p.add_argument("--n", dest="n_values", required=True, help="lengths: 4,8 or 2:6")
        p.add_argument("--m", dest="m_values", help="comma-separated m values")
        p.add_argument("--jobs", type=int, default=1)
    else:
        p.add_argument("--m", type=int)
        p.add_argument("--input")
        p.add_argument("--n", type=int, help="unary input length")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--scenario")


def _config_from(args) -> ScenarioConfig:
    values: dict[str, Any] = {}
    if args.config:
        values.update(parse_config(resolve_file(args.config).read_text(encoding="utf-8")))
    for f in fields(ScenarioConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if not values.get("verifier"):
        raise UsageError("--verifier is required")
    return ScenarioConfig(**values)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    try:
        obj = load(resolve_file(args.file))
    except SpecFileError as exc:
        print(f"{args.file}: {exc}")
        for d in exc.defects:
            print(f"  defect: {d}")
        return 1
    defects = defects_of(obj)
    for d in defects:
        print(f"  defect: {d}")
    print(f"{args.file}: {type(obj).__name__} {getattr(obj, 'name', '')}: {'ok' if not defects else f'{len(defects)} defects'}")
    return 0 if not defects else 1


def cmd_list(args) -> int:
    print("verifiers:")
    for v in VERIFIERS:
        print(f"  {v}")
    print("strategies:")
    for name, doc in STRATEGIES.items():
        print(f"  {name:<12}{doc}")
    print("fixtures:")
    for f in bundled_fixtures():
        print(f"  bundled/{f}")
    return 0


def cmd_single(args, mode: str) -> int:
    cfg = _config_from(args)
    report = run_scenario(cfg, mode)
    text = analysis.write_csv([report])
    _emit(text, args.out)
    if args.out:
        print(report.to_text(), file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    m_values = [int(x) for x in args.m_values.split(",")] if args.m_values else [None]
    jobs = _sweep_jobs(cfg, _n_values(args.n_values), m_values)
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            reports = list(pool.map(_run_sweep_job, jobs))
    else:
        reports = [_run_sweep_job(j) for j in jobs]
    _emit(analysis.write_csv(reports), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdebate", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="check a machine file")
    v.add_argument("file")
    sub.add_parser("list", help="bundled verifiers, strategies and fixtures")
    _add_scenario_flags(sub.add_parser("run", help="Monte Carlo debates"))
    _add_scenario_flags(sub.add_parser("exact", help="exact round distribution"))
    _add_scenario_flags(sub.add_parser("sweep", help="exact reports over a grid"), sweep=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "list":
            return cmd_list(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_single(args, args.command)
    except (UsageError, SpecFileError, TMError, st.StrategyError, compile_.CompileError, analysis.ReportError) as exc:
        print(f"qdebate: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
