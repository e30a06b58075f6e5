import pytest

from qdebate.machine import PublicEvent
from qdebate.polytime import member
from qdebate.specfile import load
from qdebate.strategies import (
    Corruption,
    StrategyError,
    atm_family,
    atm_game_strategy,
    certificate,
    certificate_strategy,
    honest_history,
    rotation_family,
    scripted,
    silent,
    single_error_family,
    spurious_configs,
    spurious_history,
    staller,
    stream_of,
)
from qdebate.tm import decides, history_stream, run


@pytest.fixture(scope="module")
def parity(data_dir):
    return load(data_dir / "parity.tm")


@pytest.fixture(scope="module")
def game(data_dir):
    return load(data_dir / "v0_atm.spec")


def test_stream_basics(tmp_path):
    s = stream_of("ab", "P1")
    assert s.prefix(5) == ["a", "b", "a", "b", "a"]
    assert silent().prefix(2) == ["-", "-"]
    f = tmp_path / "cert.txt"
    f.write_text("x y  z\n")
    assert scripted(f).prefix(4) == ["x", "y", "z", "$"]
    assert scripted("abc", loop=True).prefix(4) == ["a", "b", "c", "a"]


def test_restart_resets_state():
    s = stream_of("abc", "P1", loop=False)
    state = s.initial()
    _, state = s.emit(state)
    assert s.observe(state, PublicEvent("restart")) == s.initial()


def test_honest_history_matches_stream(parity):
    for w in ("", "1", "0110"):
        h = honest_history("P1", parity, w)
        expected = list(history_stream(parity, w))
        assert list(h.symbols) == expected


def test_spurious_history_changes_one_token(parity):
    err = Corruption(2, 0, "1")
    w = "00"
    honest = list(honest_history("P1", parity, w).symbols)
    bad = list(spurious_history("P1", parity, w, err).symbols)
    block2 = honest.index("$") + 2
    assert bad[:block2] == honest[:block2]
    assert bad[block2] == "1" and honest[block2] == "0"
    assert spurious_history("P1", parity, w, None).symbols == tuple(honest)
    with pytest.raises(StrategyError):
        spurious_configs(parity, w, [Corruption(1, 0, "1"), Corruption(1, 1, "1")])
    with pytest.raises(StrategyError):
        spurious_configs(parity, w, [Corruption(40, 0, "1")])


def test_single_error_family_flips_the_verdict(parity):
    for w in ("1", "11", "101"):
        truth = decides(parity, w)
        liar = "P0" if truth else "P1"
        fam = single_error_family(parity, w, liar)
        assert fam
        for err in fam:
            configs, last = spurious_configs(parity, w, [err])
            assert (last.state == parity.accept) != truth
            assert err.block >= 2
        # the truthful side has nothing to gain from a flipped history
        assert single_error_family(parity, w, "P1" if liar == "P0" else "P0") == []


def test_staller_never_finishes(parity):
    s = staller("P1", parity, "11", 1)
    first_block = len(run(parity, "11")[0].description()) + 2
    tail = s.prefix(first_block + 50)[first_block:]
    assert set(tail) == {"#"}
    assert staller("P1", parity, "11", float("inf")).symbols == honest_history("P1", parity, "11").symbols


def test_atm_strategy_announces_own_choices(game):
    w = "01"
    p1 = atm_game_strategy("P1", game, w)
    p0 = atm_game_strategy("P0", game, w)
    sym, _ = p1.emit(p1.initial())
    assert sym in ("0", "1")
    sym, _ = p0.emit(p0.initial())
    assert sym == "-"
    fam = atm_family(game, w, "P0", max_blocks=2)
    names = {a.name for a in fam}
    assert {"stall1", "long2", "short1", "slot2"} <= names
    assert any(n.startswith("script") for n in names)


def test_certificates():
    assert "".join(certificate("uprime", i=3, j=5)) == "aaabbbaaabbbaaa"
    assert "".join(certificate("usquare", m=2)) == "aabb"
    assert "".join(certificate("upower", m=3)) == "abbaaaa"
    assert "".join(certificate("ufib", i=6)) == "a#a#aa!aaa#aaaaa"
    assert "".join(certificate("pal", i=2)) == "aa#aa#"
    for bad in (dict(language="uprime", i=0, j=2), dict(language="ufib", i=3), dict(language="zz")):
        with pytest.raises(StrategyError):
            certificate(**bad)
    assert certificate_strategy("uprime", i=2, j=2).role == "P0"
    assert certificate_strategy("usquare", m=2).role == "P1"


@pytest.mark.parametrize("lang", ["uprime", "usquare", "upower", "ufib", "pal"])
def test_rotation_family_shape(lang):
    fam = rotation_family(lang, 6)
    assert len({a.name for a in fam}) == len(fam)
    roles = {a.role for a in fam}
    assert roles == ({"P0"} if lang in ("uprime", "pal") else {"P1"})
    assert any(a.name == "silent" for a in fam)
    assert any(a.name == "invalid" for a in fam)


def test_rotation_family_contains_honest_shapes():
    # the families include the honest certificate for a neighbouring member
    names = {a.name for a in rotation_family("usquare", 8)}
    assert "blocks3,3,3" in names
    assert member("usquare", "1" * 9)
