from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from popproto.predicates import ParseError, input_domain, parse_predicate, parse_ranges


class TestPredicate:
    def test_threshold(self):
        p = parse_predicate("x>=3")
        assert [p({"x": v}) for v in range(5)] == [False, False, False, True, True]
        assert p.variables == ["x"]

    def test_linear_with_both_sides(self):
        p = parse_predicate("2*x - 3 y + 1 > y")
        assert p({"x": 2, "y": 1}) and not p({"x": 1, "y": 1})

    @pytest.mark.parametrize("sep", ["&", "&&", " and ", "∧"])
    def test_conjunction(self, sep):
        p = parse_predicate(f"x>=1{sep}y>=1")
        assert p({"x": 1, "y": 2}) and not p({"x": 0, "y": 2})
        assert len(p.atoms) == 2

    def test_unicode_and_equality(self):
        assert parse_predicate("x ≥ 2")({"x": 2})
        assert parse_predicate("x ≤ 2")({"x": 2})
        assert parse_predicate("x = 2")({"x": 2}) and not parse_predicate("x == 2")({"x": 3})

    def test_missing_variable_is_zero(self):
        assert parse_predicate("x + y >= 1")({"x": 1})

    @pytest.mark.parametrize("bad", ["", "x", "x >= ", "x >= 1 >= 2", "2* >= 1", "x y >= 1", "x >= $"])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            parse_predicate(bad)

    @given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-20, 20),
           st.integers(0, 9), st.integers(0, 9))
    def test_matches_python(self, a, b, c, x, y):
        p = parse_predicate(f"{a}*x + {b}*y + {c} > 0".replace("+ -", "- "))
        assert p({"x": x, "y": y}) == (a * x + b * y + c > 0)


class TestRanges:
    def test_example(self):
        assert parse_ranges("x=1..6,y=0..3") == {"x": range(1, 7), "y": range(0, 4)}

    def test_single_value(self):
        assert parse_ranges("x=4") == {"x": range(4, 5)}

    @pytest.mark.parametrize("bad", ["", "x=5..1", "x=1..2,x=3", "x:1..3", "x=-1..2"])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            parse_ranges(bad)

    def test_domain_skips_empty_population(self):
        dom = input_domain(parse_ranges("x=0..1,y=0..1"))
        assert dom == [{"x": 0, "y": 1}, {"x": 1, "y": 0}, {"x": 1, "y": 1}]
        assert len(input_domain(parse_ranges("x=0..1,y=0..1"), allow_empty=True)) == 4

    def test_domain_all_zero_rejected(self):
        with pytest.raises(ParseError):
            input_domain(parse_ranges("x=0"))
