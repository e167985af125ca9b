import numpy as np
import pytest

from skipfree.models import MmrwModel, OFFSETS, QueueRates, build_three_queue, validate

_ACCEPTANCE_KEY = "_skipfree_acceptance_lines"


@pytest.fixture(scope="session")
def queue_low():
    return build_three_queue(QueueRates((0.1, 0.2, 0.3), (1.0, 1.0, 1.0)))


@pytest.fixture(scope="session")
def queue_high():
    return build_three_queue(QueueRates((0.1, 0.2, 0.6), (1.0, 1.0, 1.0)))


def random_triplet(rng, n, down=0.45, stay=0.3, up=0.25, mass=1.0, density=1.0):
    """Irreducible triplet with per-row down/stay/up masses; rows sum to ``mass``."""
    blocks = []
    for share in (down, stay, up):
        M = rng.uniform(0.05, 1.0, (n, n))
        if density < 1.0:
            M *= rng.uniform(size=(n, n)) < density
            M[np.arange(n), rng.integers(0, n, n)] += 0.1
        blocks.append(M / M.sum(axis=1, keepdims=True) * share)
    total = sum(B.sum(axis=1) for B in blocks)
    return [B * (mass / total)[:, None] for B in blocks]


def drift_of(A_m, A_0, A_1):
    from skipfree.phase import stationary_distribution
    pi = stationary_distribution(A_m + A_0 + A_1)
    return float(pi @ (A_1 - A_m).sum(axis=1))


def random_valid_model(rng, s0=2):
    """Every block positive, down moves favoured; resampled until validate() passes."""
    factor = {-1: 0.42, 0: 0.33, 1: 0.25}
    while True:
        raw = {k: rng.uniform(0.05, 1.0, (s0, s0)) * np.prod([factor[v] for v in k]) for k in OFFSETS}
        rows = sum(M.sum(axis=1) for M in raw.values())
        model = MmrwModel(s0, {k: M / rows[:, None] for k, M in raw.items()})
        if validate(model).ok:
            return model


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def acceptance(request):
    """Record a one-line verdict for the acceptance summary."""
    lines = request.config.__dict__.setdefault(_ACCEPTANCE_KEY, [])

    def record(label, ok, detail=""):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get(_ACCEPTANCE_KEY)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
