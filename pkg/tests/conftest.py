import random

import pytest

from hypothesis import HealthCheck, settings

from hamdec.graphcore import Multidigraph

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def derangement(n, rng):
    while True:
        perm = list(range(n))
        rng.shuffle(perm)
        if all(perm[v] != v for v in range(n)):
            return perm


def regular_multidigraph(n, r, rng, max_mult=4):
    """Union of ``r`` random derangements, retried until multiplicities stay within ``max_mult``."""
    while True:
        edges = [(v, perm[v]) for _ in range(r) for perm in [derangement(n, rng)] for v in range(n)]
        G = Multidigraph.from_edges(n, edges)
        if G.max_multiplicity() <= max_mult:
            return G


def random_pair_edges(m, prob, seed, offset=None):
    """Same recipe as scripts/derive_oracles.py."""
    rng = random.Random(seed)
    offset = m if offset is None else offset
    return {(a, offset + b) for a in range(m) for b in range(m) if rng.random() < prob}


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record and print one PASS/FAIL line, then fail the test if the criterion did."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        request.config.acceptance_lines.append(line)
        assert ok, line

    return record
