from dataclasses import replace
from fractions import Fraction

import pytest

from qdebate.engine import exact_round
from qdebate.machine import (
    SequenceExhausted,
    UndefinedRatio,
    VerifierSpec,
    derandomize,
    is_classical_coin,
    overall_acceptance,
    validate,
)
from qdebate.polytime import build_uprime_verifier
from qdebate.quantum import ACCEPT, REJECT, CoinFlip, OperationElement, Superoperator, identity
from qdebate.specfile import load
from qdebate.strategies import silent, stream_of


@pytest.fixture(scope="module")
def coin(data_dir):
    return load(data_dir / "coin.verifier")


def test_coin_fixture_is_valid(coin):
    assert validate(coin) == []


def test_coin_fixture_rounds(coin):
    d = exact_round(coin, "01", stream_of("1", "P1"), silent("P0"))
    assert (d.p_accept, d.p_reject, d.p_restart) == (1, 0, 0)
    d = exact_round(coin, "01", stream_of("0", "P1"), silent("P0"))
    assert (d.p_accept, d.p_reject, d.p_restart) == (0, Fraction(3, 4), Fraction(1, 4))
    assert overall_acceptance(d.p_accept, d.p_reject) == 0


def test_validate_reports_defects(coin):
    broken = Superoperator((OperationElement(identity(2, Fraction(1, 2))),), "half")
    table = dict(coin.delta_q)
    table[("r1", "*", "*", "*")] = broken
    defects = validate(replace(coin, delta_q=table))
    assert any(d.startswith("completeness") for d in defects)

    table = {k: v for k, v in coin.delta_q.items() if k[0] != "r1"}
    defects = validate(replace(coin, delta_q=table))
    assert any(d.startswith("delta_q-total") for d in defects)

    defects = validate(replace(coin, reject_state=coin.accept_state))
    assert any(d.startswith("distinct-halting-states") for d in defects)


def test_rotation_ops_on_vector_register_flagged(coin):
    spec = build_uprime_verifier(n=4)
    assert validate(spec) == []
    defects = validate(replace(spec, register="vector", quantum_states=("a", "b")))
    assert any(d.startswith("register-mixing") for d in defects)


def test_overall_acceptance():
    assert overall_acceptance(Fraction(1, 8), Fraction(3, 8)) == Fraction(1, 4)
    with pytest.raises(UndefinedRatio):
        overall_acceptance(0, 0)


def _coin_spec():
    flip = CoinFlip((ACCEPT, REJECT, "continue"), name="die")
    return VerifierSpec(
        name="die",
        quantum_states=(),
        reading_states={"r", "again"},
        communication_states={"c"},
        accept_state="acc",
        reject_state="rej",
        input_alphabet=("1",),
        comm_alphabet=("?", "-"),
        delta_c={("c", "*"): ("r", "?")},
        delta_q={("r", "*", "*", "*"): flip, ("again", "*", "*", "*"): flip},
        delta_s={("r", "*", "*", "*", 2): ("again", "stay-put"), ("again", "*", "*", "*", 2): ("rej", "stay-put")},
        initial_classical="c",
        register="rotation",
    )


def test_derandomize_fixes_coin_outcomes():
    spec = _coin_spec()
    assert validate(spec) == []
    d = exact_round(spec, "1", silent("P1"), silent("P0"))
    assert d.p_accept == Fraction(1, 3) + Fraction(1, 9)
    for seq, expected in (((0,), ACCEPT), ((1,), REJECT), ((2, 0), ACCEPT), ((2, 2), REJECT)):
        fixed = derandomize(spec, seq)
        d = exact_round(fixed, "1", silent("P1"), silent("P0"))
        assert (d.p_accept, d.p_reject) == ((1, 0) if expected == ACCEPT else (0, 1))
    with pytest.raises(SequenceExhausted):
        exact_round(derandomize(spec, (2,)), "1", silent("P1"), silent("P0"))


def test_quantum_coins_cannot_be_derandomized(coin):
    assert not is_classical_coin(coin.delta_q[("r0", "*", "*", "*")])
    assert is_classical_coin(CoinFlip())
    with pytest.raises(ValueError):
        derandomize(coin, (0,))
