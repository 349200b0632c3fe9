import numpy as np
import pytest

from d2dpredict.propagation import GainMatrixSet


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per criterion; printed in the terminal summary."""
    lines = request.config._acceptance_lines

    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def make_gains(direct, cross=None, cue=None) -> GainMatrixSet:
    """GainMatrixSet from pair-level gains.

    ``cross[q, n]`` is DUE_T(q) -> DUE_R(n) (diagonal ignored), ``cue[m, n]`` is
    CUE m -> DUE_R(n). Unspecified UE-UE gains get a negligible 1e-20.
    """
    direct = np.asarray(direct, dtype=float)
    N = len(direct)
    cross = np.full((N, N), 1e-20) if cross is None else np.asarray(cross, dtype=float)
    cue = np.zeros((0, N)) if cue is None else np.asarray(cue, dtype=float)
    M = len(cue)
    U = 2 * N + M
    d2d = np.full((U, U), 1e-20)
    for q in range(N):
        for n in range(N):
            g = direct[n] if q == n else cross[q, n]
            d2d[2 * q, 2 * n + 1] = d2d[2 * n + 1, 2 * q] = g
    for m in range(M):
        for n in range(N):
            d2d[2 * N + m, 2 * n + 1] = d2d[2 * n + 1, 2 * N + m] = cue[m, n]
    np.fill_diagonal(d2d, 1.0)
    return GainMatrixSet(np.full((U, 1), 1e-9), d2d, N, M)
