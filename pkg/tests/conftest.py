import numpy as np
import pytest

from privmark.runtime import run_session
from privmark.sharing import PartyId, deal, reveal_to
from privmark.toy import random_world


def run3(program, **kw):
    """Run ``program`` on three in-memory parties; returns the SessionResult."""
    kw.setdefault("seed", 1)
    return run_session(program, **kw)


def dealt(party, value, dealer=PartyId.P1, frac_bits=0, boolean=False):
    """Deal a public test value from ``dealer`` (all parties know it here)."""
    value = np.asarray(value)
    return deal(party, party.ring.element(value) if value.dtype != np.uint64 else value, dealer, value.shape,
                frac_bits, boolean)


def open_p1(party, x):
    return reveal_to(party, x, PartyId.P1)


@pytest.fixture(scope="session")
def small_world():
    return random_world(seed=5, vocab_size=60, filler_size=40, dim=16)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)
    assert ok, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
