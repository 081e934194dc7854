import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radioforge.config import load_config  # noqa: E402


@pytest.fixture(scope="session")
def reference_config():
    return load_config(None)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    ran = {int(r.nodeid.split("::test_c")[1][:2]) for key in ("passed", "failed", "error")
           for r in terminalreporter.stats.get(key, []) if "test_acceptance.py::test_c" in r.nodeid}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        ok, detail = mod.RESULTS.get(n, (False, "did not complete (error before the checks ran)"))
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {mod.NAMES[n]}: {detail}")
