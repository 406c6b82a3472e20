import heapq
import itertools
import math

import numpy as np
import pytest

from mixedrates.sources import all_sequences, as_mixture, log_probs


def brute_probs(source, n):
    """P(y) for every sequence, by direct enumeration."""
    k = as_mixture(source).alphabet_size
    return np.exp(log_probs(source, all_sequences(k, n)))


def brute_top_mass(probs, M):
    return math.fsum(sorted(probs, reverse=True)[:M])


def allocations(M, k):
    """Every (m_1..m_k) of non-negative ints summing to M, as rows."""
    rows = []
    for bars in itertools.combinations(range(M + k - 1), k - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(M + k - 2 - prev)
        rows.append(row)
    return np.array(rows, dtype=float)


def brute_resolvability(probs, M):
    alloc = allocations(M, len(probs))
    return float(np.abs(alloc / M - np.asarray(probs)[None, :]).sum(axis=1).min())


def element_lpt(probs, M):
    """Greedy: heaviest element first, each into the currently lightest bin."""
    bins = [0.0] * M
    heapq.heapify(bins)
    for p in sorted(probs, reverse=True):
        heapq.heappush(bins, heapq.heappop(bins) + p)
    return math.fsum(abs(b - 1.0 / M) for b in bins)


def brute_intrinsic(probs, M):
    best = math.inf
    for assign in itertools.product(range(M), repeat=len(probs)):
        loads = [0.0] * M
        for p, u in zip(probs, assign):
            loads[u] += p
        best = min(best, math.fsum(abs(x - 1.0 / M) for x in loads))
    return best


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
