"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected again at the end of the pytest run; running this file
with ``pytest -s`` shows them inline as well.
"""

import itertools
import math
import time
from fractions import Fraction

import mpmath
import pytest

from qdebate import cli
from qdebate.analysis import exact_report, growth_fit, monte_carlo, to_mpf
from qdebate.compile import (
    all_superoperators,
    build_fact1_verifier,
    build_theorem1_verifier,
    build_theorem3_verifier,
)
from qdebate.engine import compile_graph, exact_round, explore, solve_round
from qdebate.kernel import simulate
from qdebate.polytime import BUILDERS, WalkParams, member, random_walk_subroutine
from qdebate.quantum import Superoperator, canonical_direction, check_completeness, min_q1_probability
from qdebate.specfile import dump, load, normalize, parse_machine_spec
from qdebate.strategies import (
    atm_family,
    atm_game_strategy,
    certificate_strategy,
    honest_history,
    rotation_family,
    silent,
    single_error_family,
    spurious_history,
    stream_of,
)
from qdebate.tm import decides, encode_string, next_configuration, run, solve_game


def words(max_len, alphabet="01"):
    for n in range(max_len + 1):
        yield from map("".join, itertools.product(alphabet, repeat=n))


def ratio(num, den):
    return to_mpf(num) / to_mpf(den)


# 1 -----------------------------------------------------------------------------------


def test_c01_completeness(data_dir, verdict):
    t0 = time.perf_counter()
    tm = load(data_dir / "parity.tm")
    atm = load(data_dir / "v0_atm.spec")
    specs = [
        build_theorem1_verifier(tm, 10),
        build_theorem1_verifier(tm, 3, strict=False),
        build_fact1_verifier(tm, 10),
        build_theorem3_verifier(atm),
    ]
    ops = [op for s in specs for op in all_superoperators(s)]
    coin = load(data_dir / "coin.verifier")
    ops += [op for op in coin.delta_q.values() if isinstance(op, Superoperator)]
    failures = [op.name for op in ops if not check_completeness(op)]
    elapsed = time.perf_counter() - t0
    ok = not failures and len(ops) > 0
    verdict("criterion 1 (completeness)", ok, f"{len(ops)} superoperators, {len(failures)} incomplete, {elapsed:.2f}s")
    assert ok, failures


# 2 -----------------------------------------------------------------------------------


def _block_final_nodes(graph):
    out = []
    for u, cfg in enumerate(graph.configs):
        st = cfg.classical_state
        if isinstance(st, tuple) and len(st) == 3 and st[0] == "R" and st[2] == 1 and st[1].pos == "d1":
            out.append(u)
    return out


def test_c02_state_vector_trace(data_dir, verdict):
    tm = load(data_dir / "parity.tm")
    spec = build_theorem1_verifier(tm, 10)
    enc = spec.metadata["encoding"]
    d = enc.d

    def e(c):
        return encode_string(c.description(), enc)

    checked, bad = 0, []
    for w in words(4):
        g = explore(spec, w, honest_history("P1", tm, w), honest_history("P0", tm, w))
        dist = solve_round(g)
        cs = run(tm, w)
        finals = _block_final_nodes(g)
        if len(finals) != len(cs) - 1:
            bad.append((w, "block count"))
            continue
        length = 0
        for i, u in enumerate(finals):
            c, nc = cs[i], cs[i + 1]
            length += len(c.description()) + 2
            if i == 0:
                amps = [1, e(nc), 0, 0]
            else:
                amps = [1, e(next_configuration(tm, cs[i - 1])), e(c), e(nc)]
            scale = Fraction(1, d) ** (length - 1)
            expected = [scale * a for a in amps]
            got_dir = g.configs[u].register
            same = canonical_direction(expected)[0] == tuple(got_dir) and dist.visits[u] == sum(x * x for x in expected)
            checked += 1
            if not same:
                bad.append((w, i))
    ok = checked > 0 and not bad
    verdict("criterion 2 (state-vector trace)", ok, f"{checked} blocks checked exactly, {len(bad)} mismatches")
    assert ok, bad[:5]


# 3 -----------------------------------------------------------------------------------


@pytest.mark.parametrize("m,strict", [(3, False), (10, True)])
def test_c03_single_error_bound(data_dir, verdict, m, strict):
    tm = load(data_dir / "parity.tm")
    spec = build_theorem1_verifier(tm, m, strict=strict)
    bound = Fraction(1, m * m + 1)
    worst, count, ineq_fail = Fraction(0), 0, []
    for w in words(3):
        truth = decides(tm, w)
        liar = "P0" if truth else "P1"
        for err in single_error_family(tm, w, liar):
            adv = spurious_history(liar, tm, w, err)
            hon = honest_history("P1" if liar == "P0" else "P0", tm, w)
            p1, p0 = (adv, hon) if liar == "P1" else (hon, adv)
            d = exact_round(spec, w, p1, p0)
            wrong = d.p_reject if truth else d.p_accept
            right = d.p_accept if truth else d.p_reject
            worst = max(worst, wrong / (wrong + right))
            if right < m * m * wrong:
                ineq_fail.append((w, err))
            count += 1
    ok = count > 0 and worst <= bound and not ineq_fail
    verdict(
        f"criterion 3 (single-error bound, m={m})",
        ok,
        f"{count} adversaries, worst ratio {float(worst):.6g} <= {bound}, p2 >= m^2 p1 failures {len(ineq_fail)}",
    )
    assert ok


# 4 -----------------------------------------------------------------------------------


def test_c04_single_prover_completeness(data_dir, verdict):
    tm = load(data_dir / "parity.tm")
    spec = build_fact1_verifier(tm, 10)
    checked, bad = 0, []
    for w in words(4):
        if not decides(tm, w):
            continue
        d = exact_round(spec, w, honest_history("P1", tm, w), silent("P0"))
        checked += 1
        if d.p_reject != 0 or d.p_accept == 0 or d.p_accept / (d.p_accept + d.p_reject) != 1:
            bad.append(w)
    ok = checked > 0 and not bad
    verdict("criterion 4 (single-prover completeness)", ok, f"{checked} members, reject mass exactly 0 on all")
    assert ok, bad


# 5 -----------------------------------------------------------------------------------


def test_c05_zero_error(data_dir, verdict):
    t0 = time.perf_counter()
    atm = load(data_dir / "v0_atm.spec")
    spec = build_theorem3_verifier(atm)
    count, wrong_cases, no_right = 0, [], []
    for w in words(6):
        truth = solve_game(atm, w).accepts
        liar = "P0" if truth else "P1"
        honest = atm_game_strategy("P1" if liar == "P0" else "P0", atm, w)
        for adv in atm_family(atm, w, liar, max_blocks=4):
            p1, p0 = (adv, honest) if liar == "P1" else (honest, adv)
            d = exact_round(spec, w, p1, p0)
            wrong = d.p_reject if truth else d.p_accept
            right = d.p_accept if truth else d.p_reject
            count += 1
            if wrong != 0:
                wrong_cases.append((w, adv.name))
            if right <= 0:
                no_right.append((w, adv.name))
    elapsed = time.perf_counter() - t0
    ok = count > 0 and not wrong_cases and not no_right and elapsed < 300
    verdict(
        "criterion 5 (zero error, alternating machine)",
        ok,
        f"{count} debates, wrong mass nonzero in {len(wrong_cases)}, correct mass zero in {len(no_right)}, {elapsed:.0f}s",
    )
    assert ok


# 6 -----------------------------------------------------------------------------------


def test_c06_rotation_bound(verdict):
    bad = []
    with mpmath.workprec(128):
        root2pi = mpmath.sqrt(2) * mpmath.pi
        for n in range(1, 65):
            floor = mpmath.mpf(1) / (2 * n * n)
            direct = min(mpmath.sin(k * root2pi) ** 2 for k in range(1, n + 1))
            library = min_q1_probability(n, bits=128)
            if direct < floor or library < floor:
                bad.append(n)
            if abs(direct - library) > mpmath.mpf(2) ** -100:
                bad.append(("routes disagree", n))
    ok = not bad
    verdict("criterion 6 (rotation bound, n <= 64)", ok, "sin^2(k sqrt2 pi) >= 1/(2n^2) at 128 bits, two routes")
    assert ok, bad


# 7 -----------------------------------------------------------------------------------


def test_c07_walk_gadget(verdict):
    trials = 100_000
    details, ok = [], True
    for n in (2, 4, 8):
        p = WalkParams(n, "reject", 2)
        analytic = Fraction(1, 4) * Fraction(1, (n + 1) ** 2)
        spec = random_walk_subroutine(p)
        g = explore(spec, "1" * n, silent("P1"), silent("P0"))
        exact = solve_round(g)
        cg = compile_graph(g)
        dec, _, _ = simulate(cg.offsets, cg.targets, cg.cumprob, 0, trials, 20 + n, 1, 10**6)
        freq = float((dec >= 0).mean())
        sigma = math.sqrt(float(analytic) * (1 - float(analytic)) / trials)
        z = abs(freq - float(analytic)) / sigma
        good = p.p_walk == analytic and exact.p_halt == analytic and z <= 3 and not (dec == 1).any()
        ok &= good
        details.append(f"n={n} freq {freq:.5f} vs {float(analytic):.5f} ({z:.2f} sigma)")
    symbolic = all(Fraction(1, 4) * Fraction(1, (n + 1) ** 2) <= Fraction(1, 4 * n * n) for n in range(1, 10**4 + 1))
    ok &= symbolic
    verdict("criterion 7 (walk gadget)", ok, "; ".join(details) + f"; p_walk <= 1/(4n^2) for n <= 10^4: {symbolic}")
    assert ok


# 8 -----------------------------------------------------------------------------------


def _factor(n):
    i = next(i for i in range(2, n) if n % i == 0)
    return i, n // i


HONEST_CASES = (
    [("uprime", n, silent("P1"), certificate_strategy("uprime", i=_factor(n)[0], j=_factor(n)[1])) for n in (4, 6, 9, 15)]
    + [("usquare", m * m, certificate_strategy("usquare", m=m), silent("P0")) for m in (1, 2, 3, 4)]
    + [("upower", 2**m, certificate_strategy("upower", m=m), silent("P0")) for m in (1, 2, 3, 4)]
    + [("ufib", n, certificate_strategy("ufib", i=i), silent("P0")) for i, n in ((5, 5), (6, 8), (7, 13))]
)


def test_c08_honest_rotation_verifiers(verdict):
    bad = []
    for lang, n, p1, p0 in HONEST_CASES:
        d = exact_round(BUILDERS[lang](n=n), "1" * n, p1, p0)
        if member(lang, "1" * n):
            good = d.p_reject == 0 and d.p_accept > 0
        else:
            good = d.p_accept == 0 and d.p_reject > 0
        if not good:
            bad.append((lang, n))
    ok = not bad
    verdict("criterion 8 (honest certificates)", ok, f"{len(HONEST_CASES)} cases decided with probability exactly 1")
    assert ok, bad


# 9 -----------------------------------------------------------------------------------


def _worst_family(lang, w):
    spec = BUILDERS[lang](n=len(w))
    truth = member(lang, w)
    worst = mpmath.mpf(0)
    for adv in rotation_family(lang, len(w)):
        p1, p0 = (silent("P1"), adv) if adv.role == "P0" else (adv, silent("P0"))
        d = exact_round(spec, w, p1, p0)
        wrong = d.p_reject if truth else d.p_accept
        worst = max(worst, ratio(wrong, d.p_accept + d.p_reject))
    return worst


def test_c09_family_soundness(verdict):
    t0 = time.perf_counter()
    third = mpmath.mpf(1) / 3
    results = {}
    for lang, ns in (("uprime", (5, 7, 11, 13)), ("usquare", (5, 8)), ("upower", (6, 12)), ("ufib", (6, 9))):
        for n in ns:
            results[f"{lang} n={n}"] = _worst_family(lang, "1" * n)
    pal_worst = mpmath.mpf(0)
    for w in words(8):
        if member("pal", w):
            pal_worst = max(pal_worst, _worst_family("pal", w))
        else:
            # the verifier ignores P1; the liar cannot move the outcome away from the honest certificate
            mismatch = next(i for i in range(len(w)) if w[i] != w[-1 - i]) + 1
            spec = BUILDERS["pal"](n=len(w))
            for liar in (silent("P1"), stream_of("a#", "P1")):
                d = exact_round(spec, w, liar, certificate_strategy("pal", i=mismatch))
                pal_worst = max(pal_worst, ratio(d.p_accept, d.p_accept + d.p_reject))
    results["pal len<=8"] = pal_worst
    worst_name = max(results, key=results.get)
    ok = all(v <= third for v in results.values())
    verdict(
        "criterion 9 (adversarial families)",
        ok,
        f"worst wrong-side probability {float(results[worst_name]):.4f} ({worst_name}), {time.perf_counter() - t0:.0f}s",
    )
    assert ok, {k: float(v) for k, v in results.items()}


# 10 ----------------------------------------------------------------------------------


def _steps_per_decision(lang, n, p1, p0, w=None):
    d = exact_round(BUILDERS[lang](n=n), w or "1" * n, p1, p0)
    return ratio(d.expected_steps, d.p_accept + d.p_reject)


GROWTH = {
    "uprime": [(n, silent("P1"), certificate_strategy("uprime", i=_factor(n)[0], j=_factor(n)[1]), None) for n in (4, 8, 16, 32, 64)],
    "usquare": [(m * m, certificate_strategy("usquare", m=m), silent("P0"), None) for m in (2, 3, 4, 6, 8)],
    "upower": [(2**m, certificate_strategy("upower", m=m), silent("P0"), None) for m in (2, 3, 4, 5, 6)],
    "ufib": [(n, certificate_strategy("ufib", i=i), silent("P0"), None) for i, n in ((5, 5), (6, 8), (7, 13), (8, 21), (9, 34), (10, 55))],
    "pal": [(n, silent("P1"), certificate_strategy("pal", i=1), "0" * (n - 1) + "1") for n in (4, 8, 16, 32, 64)],
}


def test_c10_polynomial_time(verdict):
    slopes = {}
    for lang, cases in GROWTH.items():
        series = [(n, _steps_per_decision(lang, n, p1, p0, w)) for n, p1, p0, w in cases]
        slopes[lang] = growth_fit(series).slope
    mc_ok, mc_detail = True, []
    for lang, n, p1, p0 in (("upower", 8, certificate_strategy("upower", m=3), silent("P0")),
                            ("uprime", 4, silent("P1"), certificate_strategy("uprime", i=2, j=2))):
        spec = BUILDERS[lang](n=n)
        exact = exact_report(spec, "1" * n, p1, p0)
        mc = monte_carlo(spec, "1" * n, p1, p0, seed=11, trials=2000).mc
        se = mc.sd_rounds / math.sqrt(mc.trials)
        z = abs(mc.mean_rounds - float(exact.expected_rounds)) / se
        mc_ok &= z <= 3
        mc_detail.append(f"{lang} n={n} rounds {mc.mean_rounds:.1f} vs {float(exact.expected_rounds):.1f} ({z:.2f} sigma)")
    ok = all(s <= 3.2 for s in slopes.values()) and mc_ok
    shown = ", ".join(f"{k} {v:.2f}" for k, v in slopes.items())
    verdict("criterion 10 (polynomial time)", ok, f"slopes {shown}; " + "; ".join(mc_detail))
    assert ok


# 11 ----------------------------------------------------------------------------------


def test_c11_determinism_round_trip(tmp_path, data_dir, verdict):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        code = cli.main(["run", "--verifier", "upower", "--n", "8", "--seed", "42", "--trials", "300", "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    sweeps = []
    for jobs in ("1", "3"):
        path = tmp_path / f"sweep{jobs}.csv"
        assert cli.main(["sweep", "--verifier", "pal", "--n", "0:4", "--jobs", jobs, "--out", str(path)]) == 0
        sweeps.append(path.read_bytes())
    identical = outs[0] == outs[1] and sweeps[0] == sweeps[1]
    fixtures = sorted(p for p in data_dir.iterdir() if p.is_file())
    round_trip = []
    for p in fixtures:
        obj = load(p)
        text = dump(obj)
        again = dump(parse_machine_spec(text))
        round_trip.append(text == again and normalize(text) == text and type(parse_machine_spec(text)) is type(obj))
    ok = identical and len(fixtures) > 0 and all(round_trip)
    verdict(
        "criterion 11 (determinism and round trip)",
        ok,
        f"same-seed CSV identical: {identical}; {sum(round_trip)}/{len(fixtures)} fixtures round-trip",
    )
    assert ok
