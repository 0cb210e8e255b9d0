import numpy as np
import pytest

from dfgnn.graph import build_graph
from dfgnn.ingest import IngestConfig, ingest
from dfgnn.synthetic import planted_ratings


def random_signed_edges(rng, num_users, num_items, density=0.4, neg_frac=0.4):
    """Random signed edge list with at most one sign per pair."""
    edges = []
    for u in range(num_users):
        for i in range(num_items):
            if rng.random() < density:
                edges.append((u, i, -1 if rng.random() < neg_frac else 1))
    return edges


def random_graph(rng, max_users=8, max_items=8, density=0.4):
    nu = int(rng.integers(1, max_users + 1))
    ni = int(rng.integers(1, max_items + 1))
    return build_graph(nu, ni, random_signed_edges(rng, nu, ni, density))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted_split():
    records, _, _ = planted_ratings(num_users=60, num_items=60, per_user=15, seed=3)
    return ingest(records, IngestConfig(seed=3))


# one summary line per acceptance criterion

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::test_criterion_", 1)[1]
        _criteria[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[0])):
        outcome, secs = _criteria[name]
        num, _, label = name.partition("_")
        status = "PASS" if outcome == "passed" else "FAIL" if outcome == "failed" else "SKIP"
        terminalreporter.write_line(f"criterion {num} {status} ({label}, {secs:.1f}s)")
