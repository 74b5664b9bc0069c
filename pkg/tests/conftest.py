import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from difflab import harness  # noqa: E402
from difflab.config import default_config  # noqa: E402

ACCEPTANCE_SEEDS = (1, 2, 3)
_CRITERIA: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    _CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def run_default(root: Path, seed: int, **overrides):
    cfg = default_config().with_overrides(output_dir=root / f"seed_{seed}", seed=seed, **overrides)
    code = harness.cmd_run(cfg)
    return cfg, code


class Runs(dict):
    """``{seed: (cfg, exit_code)}`` plus the wall time spent producing them."""

    elapsed: float = 0.0


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory):
    """The default spec run once per acceptance seed."""
    root = tmp_path_factory.mktemp("default_runs")
    start = time.perf_counter()
    runs = Runs((s, run_default(root, s)) for s in ACCEPTANCE_SEEDS)
    runs.elapsed = time.perf_counter() - start
    return runs
