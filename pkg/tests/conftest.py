import pytest

from msd.datasets.generate import make_dataset


@pytest.fixture(scope="session")
def shapes_ds():
    return make_dataset("shapes2d16", seed=0)


@pytest.fixture(scope="session")
def ts_ds():
    return make_dataset("ts24", seed=0)


@pytest.fixture(scope="session")
def analytic(shapes_ds):
    from msd.models.registry import build_model

    model = build_model("analytic", shapes_ds.manifest)
    model.finalize(shapes_ds.subset("train")[0])
    return model


@pytest.fixture(scope="session")
def oracle(shapes_ds):
    from msd.judges.oracle import OracleJudge

    return OracleJudge(shapes_ds.manifest)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Records one pass/fail line per acceptance criterion; lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
