"""Acceptance suite: one line per criterion at its stated tolerance and runtime."""

import pytest

from mcnls.acceptance import CRITERIA, DEFAULT_SEED, c09_decoupling, c13_determinism

_first = {}


def _run(fn):
    return fn(DEFAULT_SEED, jobs=1) if fn is c09_decoupling else fn(DEFAULT_SEED)


@pytest.mark.parametrize("fn", CRITERIA, ids=[f.__name__ for f in CRITERIA])
def test_criterion(fn, capsys):
    r = _run(fn)
    _first[r.id] = r
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()


def test_c13_determinism(capsys):
    # reuse the first pass when the criteria above ran in this session
    first = [_first.get(i + 1) or _run(f) for i, f in enumerate(CRITERIA)]
    r = c13_determinism(DEFAULT_SEED, first=first)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()
