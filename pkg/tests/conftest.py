import random

import mpmath
import pytest

from equiaffine import corpus_chart
from equiaffine.dsl import BinOp, Call, Neg, Num, Pow, Var, eval_float

MP_FNS = {
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "sinh": mpmath.sinh,
    "cosh": mpmath.cosh,
    "sqrt": mpmath.sqrt,
}

# charts exercised by the acceptance criteria
FAMILY = ("cc", "parabolas")
UNIQUE = ("gradgraph", "gradgraph2")
NEGATIVE = ("perturbed", "perturbed2")
CORPUS = FAMILY + UNIQUE + NEGATIVE + ("cubic_lagrangian", "negdef")


def random_expr(rng: random.Random, depth: int = 3):
    """A random expression tree over u, v built from the DSL node types."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.4:
            return Var("u")
        if r < 0.8:
            return Var("v")
        return Num(round(rng.uniform(-2, 2), 3))
    kind = rng.choice(["bin", "bin", "bin", "pow", "call", "neg"])
    if kind == "bin":
        op = rng.choice("+-*/")
        right = random_expr(rng, depth - 1)
        if op == "/":
            # keep denominators away from zero
            right = BinOp("+", Num(2.0), Call("sin", right))
        return BinOp(op, random_expr(rng, depth - 1), right)
    if kind == "pow":
        return Pow(random_expr(rng, depth - 1), rng.randint(2, 3))
    if kind == "neg":
        return Neg(random_expr(rng, depth - 1))
    fn = rng.choice(["sin", "cos", "exp", "log", "sinh", "cosh", "sqrt"])
    arg = random_expr(rng, depth - 1)
    if fn in ("log", "sqrt"):
        arg = BinOp("+", Num(1.5), Pow(arg, 2))
    elif fn in ("exp", "sinh", "cosh"):
        arg = Call("sin", arg)
    return Call(fn, arg)


def mp_partial(node, u: float, v: float, a: int, b: int) -> float:
    """High-precision numerical partial derivative via mpmath."""
    with mpmath.workdps(40):
        f = lambda x, y: eval_float(node, x, y, MP_FNS)  # noqa: E731
        return float(mpmath.diff(f, (mpmath.mpf(u), mpmath.mpf(v)), (a, b)))


@pytest.fixture(scope="session")
def charts():
    return {name: corpus_chart(name) for name in CORPUS + ("plane",)}


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
