import numpy as np
import pytest

from lts_curriculum.hetero_graph import HeteroGraph, generate_synthetic, simple_spec


def tiny_graph(seed=0, n_target=8, n_author=5, dim=3, classes=3, p=0.35):
    """Random two-type graph with two relations; small enough for finite differences."""
    rng = np.random.default_rng(seed)

    def edges(ns, nd, same):
        m = rng.random((ns, nd)) < p
        if same:
            np.fill_diagonal(m, False)
        s, d = np.nonzero(m)
        return np.stack([s, d], axis=1)

    perm = rng.permutation(n_target)
    k = max(1, n_target // 2)
    return HeteroGraph(
        node_types=(("paper", n_target), ("author", n_author)),
        features={"paper": rng.standard_normal((n_target, dim)), "author": None},
        relations=(("cites", "paper", "paper"), ("writes", "author", "paper")),
        edges={"cites": edges(n_target, n_target, True), "writes": edges(n_author, n_target, False)},
        target_type="paper",
        labels=rng.integers(0, classes, n_target),
        splits={"train": np.sort(perm[:k]), "val": np.sort(perm[k:k + 2]), "test": np.sort(perm[k + 2:])},
        num_classes=classes,
    )


@pytest.fixture
def small_graph():
    return tiny_graph()


@pytest.fixture(scope="session")
def synthetic_graph():
    return generate_synthetic(simple_spec(400, 2, 5.0, 0.05, 0.005), seed=7)


ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
