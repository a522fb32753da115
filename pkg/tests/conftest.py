import numpy as np
import pytest

from exposure_lens import OccId, ShareTable, TaskMatrix
from exposure_lens.tables import OccOutcomeTable

# Populated by tests/test_acceptance.py; rendered as one line per
# criterion at the end of the run.
ACCEPTANCE_DETAILS: dict[str, str] = {}
_ACCEPTANCE_OUTCOMES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_OUTCOMES[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_OUTCOMES):
        outcome = _ACCEPTANCE_OUTCOMES[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        detail = ACCEPTANCE_DETAILS.get(name, "")
        terminalreporter.write_line(f"{status}  {name}  {detail}")


def occ(code: str) -> OccId:
    return OccId(code)


def share_table(label, mapping, **kwargs):
    return ShareTable.from_shares(label, {occ(k): v for k, v in mapping.items()}, **kwargs)


def outcome_table(label, values, weights=None):
    values = {occ(k): v for k, v in values.items()}
    if weights is None:
        weights = {o: 1.0 for o in values}
    else:
        weights = {occ(k): v for k, v in weights.items()}
    return OccOutcomeTable(label, values, weights)


def task_matrix(label, rows, **kwargs):
    parsed = [(occ(code), task, q, qp, tau) for code, task, q, qp, tau in rows]
    return TaskMatrix.from_rows(label, parsed, **kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_task_matrix(rng, n_occ=5, n_tasks=4, label="sim"):
    """Random valid task matrix with distinct q and q_p."""
    rows = []
    codes = [f"15{1000 + i}" for i in range(n_occ)]
    for code in codes:
        q = rng.dirichlet(np.ones(n_tasks))
        q_p = rng.dirichlet(np.ones(n_tasks))
        tau = rng.uniform(0, 1, n_tasks)
        for k in range(n_tasks):
            rows.append((code, f"t{k}", float(q[k]), float(q_p[k]), float(tau[k])))
    return task_matrix(label, rows)
