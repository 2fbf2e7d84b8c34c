import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    """Every packaged demo run once through the CLI: ``{name: (exit code, seconds, dir)}``."""
    from obstacle1d.cli import demo_names, main

    root = tmp_path_factory.mktemp("demos")
    out = {}
    for name in demo_names():
        start = time.perf_counter()
        rc = main(["run", name, "--out", str(root)])
        out[name] = (rc, time.perf_counter() - start, root / name)
    return out


ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 12


@pytest.fixture
def accept(request):
    """Record one ``criterion N: PASS|FAIL detail`` line and return the verdict."""
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash.setdefault(ACCEPTANCE_KEY, {})[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, None)
    if lines is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(lines.get(n, f"criterion {n:2d}: FAIL  (did not complete)"))
