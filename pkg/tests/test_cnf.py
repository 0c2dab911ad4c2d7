import io
from collections import Counter

import pytest
from hypothesis import given, strategies as st
from pysat.formula import CNF

from ucsat.cnf import CnfBuilder, CnfError, parse_dimacs, unit_propagate


def test_fresh_vars_count_up():
    b = CnfBuilder()
    assert b.fresh_var() == 1
    assert b.fresh_var() == 2
    for _ in range(8):
        b.fresh_var()
    assert b.num_vars == 10


def test_add_clause():
    b = CnfBuilder()
    x1, x2 = b.fresh_vars(2)
    b.add_clause([x1, -x2])
    assert b.num_clauses == 1
    assert b.clauses[0] == (1, -2)


def test_empty_clause_rejected():
    b = CnfBuilder()
    with pytest.raises(CnfError):
        b.add_clause([])


def test_unallocated_literal_rejected():
    b = CnfBuilder()
    b.fresh_vars(4)
    with pytest.raises(CnfError):
        b.add_clause([5])


def test_tautologies_kept():
    b = CnfBuilder()
    x = b.fresh_var()
    b.add_clause([x, -x])
    assert b.clauses == [(x, -x)]


def test_export_example():
    b = CnfBuilder()
    b.fresh_vars(3)
    b.add_clause([1, -2])
    b.add_clause([-1, 2, 3])
    assert b.export_dimacs() == "p cnf 3 2\n1 -2 0\n-1 2 3 0\n"


def test_export_empty():
    assert CnfBuilder().export_dimacs() == "p cnf 0 0\n"


def test_export_to_sink():
    b = CnfBuilder()
    b.add_clause([b.fresh_var()])
    sink = io.StringIO()
    assert b.export_dimacs(sink) is None
    assert sink.getvalue() == "p cnf 1 1\n1 0\n"


def test_round_trip_through_external_parser():
    b = CnfBuilder()
    b.fresh_vars(5)
    b.add_clauses([[1, -2], [-1, 2, 3], [4, 5, -3], [-5]])
    ext = CNF(from_string=b.export_dimacs())
    assert ext.nv == b.num_vars
    assert [tuple(c) for c in ext.clauses] == b.clauses


clause_lists = st.lists(
    st.lists(st.integers(1, 12).flatmap(lambda v: st.sampled_from([v, -v])), min_size=1, max_size=5),
    max_size=30,
)


@given(clause_lists)
def test_reparse_gives_same_multiset(clauses):
    b = CnfBuilder()
    b.fresh_vars(12)
    b.add_clauses(clauses)
    nv, parsed = parse_dimacs(b.export_dimacs())
    assert nv == b.num_vars
    assert Counter(parsed) == Counter(tuple(c) for c in clauses)
    header = b.export_dimacs().splitlines()[0].split()
    assert (int(header[2]), int(header[3])) == (b.num_vars, b.num_clauses)


def test_guard_appends_literals():
    b = CnfBuilder()
    x, g = b.fresh_vars(2)
    with b.guarded(-g):
        b.add_clause([x])
    b.add_clause([x])
    assert b.clauses == [(x, -g), (x,)]


def test_folding_constants():
    b = CnfBuilder()
    x = b.fresh_var()
    t = b.true
    n = b.num_clauses
    b.add_folded([x, t])
    assert b.num_clauses == n
    b.add_folded([x, -t])
    assert b.clauses[-1] == (x,)
    b.add_folded([-t])
    assert b.clauses[-1] == (-t,)


def test_counters_monotone_and_tags():
    b = CnfBuilder()
    with b.tagged("a"):
        x = b.fresh_var()
        b.add_clause([x])
    with b.tagged("a"):
        b.add_clause([-x])
    assert b.stats() == {"a": {"vars": 1, "clauses": 2}}


def test_unit_propagation():
    clauses = [(-1, 2), (-2, 3), (-3, -4, 5)]
    value, conflict = unit_propagate(clauses, [1, 4])
    assert not conflict
    assert value == {1: True, 2: True, 3: True, 4: True, 5: True}
    _, conflict = unit_propagate(clauses + [(-5,)], [1, 4])
    assert conflict


def test_parse_rejects_bad_header():
    with pytest.raises(CnfError):
        parse_dimacs("p cnf 1 2\n1 0\n")
