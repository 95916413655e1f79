import pytest

from qcsp.model import Crane, Task, make_instance


@pytest.fixture
def two_task():
    """One crane at bay 1, tasks at bays 1 and 3; optimum 14 by [1, 2]."""
    return make_instance([Task(1, 1, 5), Task(2, 3, 7)], [Crane(1, 0, 1, 0)], bays=3)


@pytest.fixture
def conflict():
    """Two cranes that both want bay 5 first."""
    return make_instance(
        [Task(1, 5, 10), Task(2, 5, 10), Task(3, 2, 3), Task(4, 8, 3)],
        [Crane(1, 0, 4, 0), Crane(2, 0, 6, 0)],
        bays=10,
    )


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record the outcome of one acceptance criterion for the summary."""
    store = request.config.stash[ACCEPTANCE]

    def record(number: int, title: str, status: str, detail: str = ""):
        store[number] = (title, status, detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, status, detail = store[number]
        line = f"[{status}] {number}. {title}"
        terminalreporter.write_line(f"{line} -- {detail}" if detail else line)
