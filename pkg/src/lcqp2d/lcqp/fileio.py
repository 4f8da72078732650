"""Plain-text LCQP problem files.

Layout (comments start with '#', blank lines are skipped):

    lcqp 1
    n 3
    m_e 1
    m_i 4
    k 1
    Q            followed by n rows of n floats
    g            followed by one row of n floats
    A            (m_e rows; section present only when m_e > 0)
    b
    C            (m_i rows; present only when m_i > 0)
    d
    lb           ("-inf"/"inf" allowed)
    ub
    pairs        (k rows "i j": 0-based indices into C; present when k > 0)

A pair row (i, j) declares 0 <= C_i x + d_i  perp  C_j x + d_j >= 0. The
writer appends the pair sides to C, so a round trip may grow C by rows
that are redundant as plain inequalities.
"""

from __future__ import annotations

import numpy as np

from .problem import LcqpProblem


class ProblemFormatError(ValueError):
    pass


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def load_problem(text: str) -> LcqpProblem:
    lines = list(_tokens(text))
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ProblemFormatError("unexpected end of file")
        pos += 1
        return lines[pos - 1]

    def header(name):
        lineno, line = take()
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise ProblemFormatError(f"line {lineno}: expected '{name} <int>', got {line!r}")
        try:
            return int(parts[1])
        except ValueError:
            raise ProblemFormatError(f"line {lineno}: bad integer in {line!r}") from None

    def keyword(name):
        lineno, line = take()
        if line != name:
            raise ProblemFormatError(f"line {lineno}: expected section {name!r}, got {line!r}")

    def floats(count):
        lineno, line = take()
        vals = line.split()
        if len(vals) != count:
            raise ProblemFormatError(f"line {lineno}: expected {count} numbers")
        try:
            return [float(v) for v in vals]
        except ValueError:
            raise ProblemFormatError(f"line {lineno}: bad number") from None

    def matrix(rows, cols):
        return np.array([floats(cols) for _ in range(rows)]) if rows else np.zeros((0, cols))

    lineno, line = take()
    if line.split() != ["lcqp", "1"]:
        raise ProblemFormatError(f"line {lineno}: expected 'lcqp 1' magic")
    n = header("n")
    m_e = header("m_e")
    m_i = header("m_i")
    k = header("k")
    if n <= 0 or m_e < 0 or m_i < 0 or k < 0:
        raise ProblemFormatError("dimensions out of range")

    keyword("Q")
    Q = matrix(n, n)
    keyword("g")
    g = np.array(floats(n))
    A = b = None
    if m_e:
        keyword("A")
        A = matrix(m_e, n)
        keyword("b")
        b = np.array(floats(m_e))
    C = d = None
    if m_i:
        keyword("C")
        C = matrix(m_i, n)
        keyword("d")
        d = np.array(floats(m_i))
    keyword("lb")
    lb = np.array(floats(n))
    keyword("ub")
    ub = np.array(floats(n))

    L = l = R = r = None
    if k:
        if not m_i:
            raise ProblemFormatError("pairs reference C rows but m_i is 0")
        keyword("pairs")
        li, ri = [], []
        for _ in range(k):
            lineno, line = take()
            parts = line.split()
            if len(parts) != 2:
                raise ProblemFormatError(f"line {lineno}: expected 'i j'")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ProblemFormatError(f"line {lineno}: bad pair indices") from None
            if not (0 <= i < m_i and 0 <= j < m_i):
                raise ProblemFormatError(f"line {lineno}: pair index out of range")
            li.append(i)
            ri.append(j)
        L, l = C[li], d[li]
        R, r = C[ri], d[ri]
    if pos != len(lines):
        raise ProblemFormatError(f"line {lines[pos][0]}: trailing content")
    return LcqpProblem(Q=Q, g=g, A=A, b=b, C=C, d=d, lb=lb, ub=ub, L=L, l=l, R=R, r=r)


def read_problem(path) -> LcqpProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return load_problem(fh.read())


def _fmt(v: float) -> str:
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return repr(float(v))


def dump_problem(problem: LcqpProblem) -> str:
    k = problem.n_pairs
    C = np.vstack([problem.C, problem.L, problem.R])
    d = np.concatenate([problem.d, problem.l, problem.r])
    m_i = C.shape[0]
    base = problem.C.shape[0]
    out = []
    out.append("lcqp 1")
    out.append(f"n {problem.n}")
    out.append(f"m_e {problem.A.shape[0]}")
    out.append(f"m_i {m_i}")
    out.append(f"k {k}")

    def emit(name, arr):
        out.append(name)
        arr = np.atleast_2d(arr)
        for row in arr:
            out.append(" ".join(_fmt(v) for v in row))

    emit("Q", problem.Q)
    emit("g", problem.g)
    if problem.A.shape[0]:
        emit("A", problem.A)
        emit("b", problem.b)
    if m_i:
        emit("C", C)
        emit("d", d)
    emit("lb", problem.lb)
    emit("ub", problem.ub)
    if k:
        out.append("pairs")
        for j in range(k):
            out.append(f"{base + j} {base + k + j}")
    return "\n".join(out) + "\n"


def write_problem(problem: LcqpProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_problem(problem))
