import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcsfluct import InvalidAlphabetError, SizeCapError
from lcsfluct.lcs import is_subsequence, lcs_bitparallel, lcs_dp, lcs_lpp_oracle, lcs_oracle

ENGINES = {
    "dp": lcs_dp,
    "bitparallel": lambda a, b: lcs_bitparallel(a, b, 26),
    "lpp": lcs_lpp_oracle,
    "oracle": lcs_oracle,
}


@pytest.mark.parametrize("engine", ENGINES)
@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("heinrich", "enerico", 5),
        ("101010111111", "001010011110", 9),
        ("ab", "ba", 1),
        ("abc", "abc", 3),
        ("abc", "xyz", 0),
        ("abc", "", 0),
        ("", "", 0),
    ],
)
def test_known_values(engine, a, b, expected):
    assert ENGINES[engine](a, b) == expected


def test_bitparallel_identity(rng):
    for n in (1, 63, 64, 65, 500):
        s = rng.integers(0, 2, n)
        assert lcs_bitparallel(s, s, 2) == n


def test_bitparallel_letters_beyond_k():
    # masks must not silently drop letters the caller did not announce
    assert lcs_bitparallel(np.array([5, 5]), np.array([5, 1, 5]), 2) == 2


def test_bitparallel_matches_dp(rng):
    for _ in range(300):
        k = int(rng.choice([2, 4, 20]))
        a = rng.integers(0, k, int(rng.integers(0, 300)))
        b = rng.integers(0, k, int(rng.integers(0, 300)))
        assert lcs_bitparallel(a, b, k) == lcs_dp(a, b)


def test_lpp_matches_dp(rng):
    for _ in range(500):
        k = int(rng.choice([2, 3, 4]))
        a = rng.integers(0, k, int(rng.integers(0, 65)))
        b = rng.integers(0, k, int(rng.integers(0, 65)))
        assert lcs_lpp_oracle(a, b) == lcs_dp(a, b)


def test_invalid_alphabet():
    with pytest.raises(InvalidAlphabetError):
        lcs_bitparallel("ab", "ba", 1)


def test_oracle_cap():
    with pytest.raises(SizeCapError):
        lcs_oracle("a" * 15, "a" * 20)
    assert lcs_oracle("a" * 14, "a" * 30) == 14


letters = st.lists(st.integers(0, 2), max_size=40)


@settings(max_examples=200, deadline=None)
@given(letters, letters)
def test_symmetry_and_bounds(a, b):
    v = lcs_bitparallel(a, b, 3)
    assert v == lcs_bitparallel(b, a, 3) == lcs_dp(a, b)
    assert 0 <= v <= min(len(a), len(b))
    assert (v == len(a)) == is_subsequence(a, b)


@settings(max_examples=200, deadline=None)
@given(letters, letters, st.integers(0, 2))
def test_append_monotone(a, b, c):
    base = lcs_dp(a, b)
    for a2, b2 in ((a + [c], b), (a, b + [c])):
        assert base <= lcs_dp(a2, b2) <= base + 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=40), letters, st.data())
def test_single_substitution_lipschitz(a, b, data):
    i = data.draw(st.integers(0, len(a) - 1))
    c = data.draw(st.integers(0, 2))
    a2 = list(a)
    a2[i] = c
    assert abs(lcs_dp(a2, b) - lcs_dp(a, b)) <= 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=10), st.lists(st.integers(0, 1), max_size=12))
def test_oracle_matches_dp(a, b):
    assert lcs_oracle(a, b) == lcs_dp(a, b)
