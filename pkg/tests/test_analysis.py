import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdebate.analysis import (
    ReportError,
    exact_report,
    format_number,
    growth_fit,
    monte_carlo,
    parse_number,
    read_csv,
    same_values,
    to_mpf,
    wilson_interval,
    write_csv,
)
from qdebate.engine import Caps
from qdebate.machine import VerifierSpec
from qdebate.quantum import RESTART, CoinFlip
from qdebate.specfile import load
from qdebate.strategies import silent, stream_of


@pytest.fixture(scope="module")
def coin(data_dir):
    return load(data_dir / "coin.verifier")


def _always_restart():
    return VerifierSpec(
        name="loop",
        quantum_states=(),
        reading_states={"r"},
        communication_states={"c"},
        accept_state="acc",
        reject_state="rej",
        input_alphabet=("1",),
        comm_alphabet=("-",),
        delta_c={("c", "*"): ("r", "-")},
        delta_q={("r", "*", "*", "*"): CoinFlip((RESTART,), name="again")},
        delta_s={},
        initial_classical="c",
        register="rotation",
    )


@given(st.fractions())
def test_fraction_text_round_trip(x):
    assert parse_number(format_number(x)) == x


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_mpf_text_round_trip(x):
    with mpmath.workprec(200):
        v = mpmath.mpf(x) / 3
        assert parse_number(format_number(v)) == v


def test_number_edge_cases():
    assert format_number(None) == "" and parse_number(" ") is None
    assert format_number(Fraction(6, 3)) == "2"
    assert parse_number("-3") == -3
    assert to_mpf(Fraction(1, 4)) == mpmath.mpf("0.25")
    for bad in ("1/0", "abc"):
        with pytest.raises(ReportError):
            parse_number(bad)
    with pytest.raises(ReportError):
        format_number(True)
    with pytest.raises(ReportError):
        format_number(mpmath.inf)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and math.isclose(lo + hi, 1.0)
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ReportError):
        wilson_interval(0, 0)


def test_exact_report_flags(coin):
    r = exact_report(coin, "1", stream_of("0", "P1"), silent("P0"))
    assert r.overall == 0 and r.flags == ()
    assert r.expected_rounds == Fraction(4, 3)
    r = exact_report(_always_restart(), "1", silent("P1"), silent("P0"))
    assert r.undefined_ratio and r.overall is None and r.p_restart == 1
    r = exact_report(coin, "1", stream_of("0", "P1"), silent("P0"), Caps(max_nodes=1))
    assert "not-converged" in r.flags


def test_monte_carlo_is_seeded(coin):
    p1, p0 = stream_of("0", "P1"), silent("P0")
    a = monte_carlo(coin, "1", p1, p0, seed=4, trials=200)
    b = monte_carlo(coin, "1", p1, p0, seed=4, trials=200)
    assert same_values(a, b)
    assert a.mc.rejects == 200 and a.overall == 0.0
    direct = monte_carlo(coin, "1", p1, p0, seed=4, trials=50, method="direct")
    assert direct.metadata["method"] == "direct" and direct.mc.rejects == 50
    with pytest.raises(ReportError):
        monte_carlo(coin, "1", p1, p0, seed=4, trials=0)


def test_growth_fit():
    fit = growth_fit([(n, 5 * n**2) for n in (2, 4, 8, 16, 32)])
    assert math.isclose(fit.slope, 2.0) and fit.polynomial
    fit = growth_fit([(n, 2.0**n) for n in (2, 4, 8, 16)])
    assert not fit.polynomial
    with pytest.raises(ReportError):
        growth_fit([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ReportError):
        growth_fit([(0, 1), (2, 2), (3, 3), (4, 4)])


def test_csv_round_trip(coin):
    reports = [
        exact_report(coin, "1", stream_of("0", "P1"), silent("P0"), scenario="zero"),
        exact_report(_always_restart(), "1", silent("P1"), silent("P0"), scenario="loop"),
        monte_carlo(coin, "1", stream_of("1", "P1"), silent("P0"), seed=1, trials=20, scenario="mc"),
    ]
    text = write_csv(reports)
    back = read_csv(text)
    assert len(back) == 3
    assert all(same_values(a, b) for a, b in zip(reports, back))
    assert write_csv(back) == text


def test_csv_rejects_damage(coin):
    text = write_csv([exact_report(coin, "1", stream_of("0", "P1"), silent("P0"))])
    with pytest.raises(ReportError, match="version"):
        read_csv(text.replace("v1", "v9"))
    with pytest.raises(ReportError, match="incomplete"):
        read_csv(text.rsplit("#complete", 1)[0])
    with pytest.raises(ReportError, match="marker"):
        read_csv(text.replace("#complete,1", "#complete,2"))
