import os

import pytest

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    # collect per-criterion outcomes from the acceptance module
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call":
        _ACCEPTANCE_RESULTS[report.nodeid] = report.outcome.upper()
    elif report.when == "setup" and report.outcome == "skipped":
        _ACCEPTANCE_RESULTS[report.nodeid] = "SKIPPED"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE_RESULTS):
        name = nodeid.split("::")[-1]
        outcome = _ACCEPTANCE_RESULTS[nodeid]
        terminalreporter.write_line(f"{outcome:8s} {name}")


@pytest.fixture(scope="session")
def data_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def kitti_tracking_root() -> str | None:
    """Local KITTI tracking data root, when present (else None)."""
    candidates = [os.environ.get("KITTI_TRACKING_ROOT", "")]
    candidates.append(os.path.join(os.path.dirname(__file__), "..", "data", "kitti_tracking"))
    for root in candidates:
        if root and os.path.isdir(os.path.join(root, "label_02")):
            return root
    return None
