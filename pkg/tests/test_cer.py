from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asrswitch.errors import DomainError
from asrswitch.evaluation.cer import cer, edit_distance


def brute_force_distance(a: str, b: str) -> int:
    """Top-down recursion over the full edit tree, memoized; no row reuse."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            d(i + 1, j + 1) + (a[i] != b[j]),
            d(i + 1, j) + 1,
            d(i, j + 1) + 1,
        )

    return d(0, 0)


class TestCer:
    def test_identical(self):
        assert cer("abc", "abc") == 0.0

    def test_all_deleted(self):
        assert cer("abc", "") == 1.0

    def test_sub_and_insert(self):
        assert brute_force_distance("abc", "axcd") == 2
        assert cer("abc", "axcd") == pytest.approx(2 / 3)

    def test_can_exceed_one(self):
        assert cer("a", "xyz") == 3.0

    def test_empty_reference(self):
        with pytest.raises(DomainError, match="empty reference"):
            cer("", "abc")

    def test_unicode_characters(self):
        assert cer("音声認識", "音声任識") == 0.25

    def test_sequences(self):
        assert edit_distance(["a", "b"], ["a", "c", "b"]) == 1

    @given(st.text(alphabet="abcd", max_size=12), st.text(alphabet="abcd", max_size=12))
    def test_matches_brute_force(self, a, b):
        assert edit_distance(a, b) == brute_force_distance(a, b)

    @given(st.text(max_size=10), st.text(max_size=10))
    def test_symmetric_distance(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)
