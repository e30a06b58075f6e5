import json
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from qdebate import kernel
from qdebate.engine import (
    Caps,
    compile_graph,
    exact_round,
    explore,
    run_debate,
    run_round,
    sample_debates_direct,
    sample_debates_graph,
    sample_round,
)
from qdebate.polytime import build_upower_verifier, build_uprime_verifier
from qdebate.specfile import load
from qdebate.strategies import certificate_strategy, silent, stream_of


@pytest.fixture(scope="module")
def coin(data_dir):
    return load(data_dir / "coin.verifier")


def test_exact_round_masses_sum_to_one(coin):
    d = run_round(coin, "1", stream_of("0", "P1"), silent("P0"))
    assert d.p_accept + d.p_reject + d.p_restart + d.residual == 1
    assert d.converged()
    # steps: communicate, measure, and one more read on half the mass
    assert d.expected_steps == 2 + Fraction(1, 2)


def test_run_round_engines(coin):
    rng = np.random.default_rng(0)
    r = run_round(coin, "1", stream_of("1", "P1"), silent("P0"), engine="sampled", rng=rng)
    assert r.kind == "accept"
    with pytest.raises(ValueError):
        run_round(coin, "1", silent("P1"), silent("P0"), engine="sampled")
    with pytest.raises(ValueError):
        run_round(coin, "1", silent("P1"), silent("P0"), engine="quantum")


def test_sample_round_logs_public_events(coin):
    logs = ([], [])
    sample_round(coin, "1", stream_of("1", "P1"), silent("P0"), np.random.default_rng(1), log_to=logs)
    assert logs[0] == logs[1]
    assert json.loads(logs[0][-1]) == {"kind": "halt", "payload": "accept"}


def test_budget_caps(coin):
    spec = build_uprime_verifier(n=4)
    p0 = certificate_strategy("uprime", i=2, j=2)
    r = sample_round(spec, "1111", silent("P1"), p0, np.random.default_rng(0), Caps(max_steps=5))
    assert r.kind == "budget-exhausted"
    d = run_debate(spec, "1111", silent("P1"), p0, np.random.default_rng(0), Caps(max_restarts=1, max_steps=10**6))
    assert d.rounds == 1


def test_sampled_matches_exact_frequencies():
    spec = build_uprime_verifier(n=4)
    p1, p0 = silent("P1"), certificate_strategy("uprime", i=2, j=2)
    d = exact_round(spec, "1111", p1, p0)
    rng = np.random.default_rng(5)
    results = [sample_round(spec, "1111", p1, p0, rng).kind for _ in range(3000)]
    p = float(d.p_reject)
    freq = results.count("reject") / len(results)
    assert abs(freq - p) <= 4 * (p * (1 - p) / len(results)) ** 0.5
    assert "accept" not in results


def test_graph_and_direct_sampling_agree_in_distribution():
    spec = build_upower_verifier(n=2)
    p1, p0 = certificate_strategy("upower", m=1), silent("P0")
    g = explore(spec, "11", p1, p0)
    dec_g, rounds_g, _ = sample_debates_graph(g, 300, seed=3)
    dec_d, rounds_d, _ = sample_debates_direct(spec, "11", p1, p0, 300, seed=3)
    assert (dec_g == 1).all() and (dec_d == 1).all()
    se = np.hypot(rounds_g.std(), rounds_d.std()) / np.sqrt(300)
    assert abs(rounds_g.mean() - rounds_d.mean()) < 4 * se


def test_incomplete_graph_cannot_compile():
    spec = build_upower_verifier(n=8)
    g = explore(spec, "1" * 8, certificate_strategy("upower", m=3), silent("P0"), Caps(max_nodes=10))
    assert not g.complete
    with pytest.raises(ValueError):
        compile_graph(g)


# --- kernel backends ------------------------------------------------------------------


def _graph():
    spec = build_uprime_verifier(n=6)
    return compile_graph(explore(spec, "1" * 6, silent("P1"), certificate_strategy("uprime", i=2, j=3)))


@pytest.mark.skipif(kernel.compiled_simulate is None, reason="compiled kernel not built")
def test_compiled_and_python_kernels_identical():
    cg = _graph()
    args = (cg.offsets, cg.targets, cg.cumprob, 0, 200, 99, 10**5, 10**6)
    for a, b in zip(kernel.python_simulate(*args), kernel.compiled_simulate(*args)):
        assert a.dtype == b.dtype
        assert np.array_equal(a, b)


def test_kernel_is_seed_deterministic():
    cg = _graph()
    args = (cg.offsets, cg.targets, cg.cumprob, 0, 50, 7, 10**5, 10**6)
    first = kernel.simulate(*args)
    second = kernel.simulate(*args)
    other = kernel.simulate(*args[:5], 8, *args[6:])
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    assert not np.array_equal(first[1], other[1])


def test_pure_python_switch():
    code = "from qdebate import kernel; print(kernel.BACKEND, kernel.simulate is kernel.python_simulate)"
    env = dict(os.environ, QDL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "True"]
