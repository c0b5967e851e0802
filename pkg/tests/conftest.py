import math

import numpy as np
import pytest

from mechkit.expr import Expr


def np_eval(e: Expr, env: dict) -> float:
    """Reference evaluator built on numpy, independent of mechkit's own."""
    k = e.kind
    if k == "const":
        return e.value
    if k in ("var", "param"):
        return env[e.name]
    if k == "unary":
        return -np_eval(e.children[0], env)
    if k == "binary":
        a, b = (np_eval(c, env) for c in e.children)
        return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[e.op](a, b)
    args = [np_eval(c, env) for c in e.children]
    if e.name == "pow":
        return np.power(args[0], args[1])
    return getattr(np, {"abs": "abs"}.get(e.name, e.name))(*args)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


HALF_PI = math.pi / 2


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion, shown even when output is captured

ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, title: str, passed: bool, detail: str) -> str:
    line = f"criterion {n:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
