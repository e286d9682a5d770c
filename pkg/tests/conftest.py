"""Collects acceptance outcomes and prints one line per criterion after the run.

Acceptance tests carry ``@pytest.mark.acceptance(n)`` and may add short
notes through the ``note`` fixture. A criterion passes only when every test
attached to it passed; an expected failure counts as a failed criterion.
"""
from __future__ import annotations

from collections import defaultdict

import pytest

_OUTCOMES: dict = defaultdict(list)


@pytest.fixture
def note(request):
    """Append a free-text note to the criterion summary line."""
    notes = []
    request.node.user_properties.append(("notes", notes))
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed and not hasattr(rep, "wasxfail")
        notes = [n for key, value in item.user_properties if key == "notes" for n in value]
        if not ok:
            reason = getattr(rep, "wasxfail", "") or (rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else "")
            notes.append(f"{item.name} failed: {reason.splitlines()[0] if reason else 'see report'}")
        _OUTCOMES[mark.args[0]].append((ok, notes))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        results = _OUTCOMES[n]
        status = "PASS" if all(ok for ok, _ in results) else "FAIL"
        detail = "; ".join(x for _, notes in results for x in notes)
        terminalreporter.write_line(f"CRITERION {n} {status}: {detail}")
