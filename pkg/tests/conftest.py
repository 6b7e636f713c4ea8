import numpy as np
import pytest


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of scalar ``f`` at array ``x`` (x is restored)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        fp = f(x)
        flat[k] = old - h
        fm = f(x)
        flat[k] = old
        gflat[k] = (fp - fm) / (2 * h)
    return grad


def rel_err(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = []


def record(criterion, title, ok, detail=""):
    """Log one acceptance line for the end-of-run summary and return ``ok``."""
    ACCEPTANCE.append(f"criterion {criterion:>2}  {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
