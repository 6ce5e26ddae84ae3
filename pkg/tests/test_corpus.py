"""Corpus catalog sanity."""

import pytest

from htmsi import corpus
from htmsi.engine import run
from htmsi.program import Backend


def test_names_and_exhaustive_filter():
    every = corpus.names()
    fast = corpus.names(exhaustive_only=True)
    assert len(every) >= 10
    assert set(fast) < set(every)
    assert "mixed-quartet" in every and "mixed-quartet" not in fast


def test_every_entry_builds_under_every_backend():
    for name in corpus.names():
        for backend in Backend:
            program = corpus.build(name, backend=backend)
            # the promoted entry keeps promote_reads' "+promoted" marker
            assert program.name.replace("+", "-") == name
            assert program.backend is backend
            assert len(program.threads) >= 2


def test_retries_override():
    default = corpus.build("dirty-window")
    assert default.retry.max_retries == corpus.CORPUS["dirty-window"].retries
    assert corpus.build("dirty-window", max_retries=7).retry.max_retries == 7


def test_unknown_name_raises():
    with pytest.raises(KeyError):
        corpus.build("no-such-program")


def test_check_field_values():
    assert all(e.check in ("si", "serializable") for e in corpus.CORPUS.values())
    assert corpus.CORPUS["write-skew-promoted"].check == "serializable"


def test_entries_complete_under_round_robin():
    # every program, every backend, must run to completion on the default
    # scheduler; this is the cheap smoke version of the exhaustive sweeps
    for name in corpus.names():
        for backend in Backend:
            r = run(corpus.build(name, backend=backend))
            expected = sum(len(t) for t in corpus.build(name).threads)
            assert r.committed == expected, f"{name}/{backend.value}"
