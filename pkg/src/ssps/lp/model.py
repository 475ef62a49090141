"""Solver-agnostic linear programs over named variables."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

X, Y, FLOW, FLOWREV = "x", "y", "f", "frev"
LE, EQ, GE = "<=", "=", ">="
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


class VarKey(NamedTuple):
    """``(kind, i, j)``: (state, action) for x/y, edge (s, s') for flows."""

    kind: str
    i: int
    j: int

    def __str__(self) -> str:
        return f"{self.kind}_{self.i}_{self.j}"


@dataclass
class Constraint:
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float
    tag: str


@dataclass
class LinearProgram:
    """Maximize ``c^T v`` subject to tagged linear rows and variable bounds.

    Rows carry a tag naming the constraint family they belong to, so solutions can be
    audited group by group. ``bound_tags`` records which families were encoded as bounds.
    """

    name: str = "lp"
    keys: list = field(default_factory=list)
    lo: list = field(default_factory=list)
    hi: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    bound_tags: dict = field(default_factory=dict)
    _pos: dict = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.keys)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def add_var(self, key: VarKey, lo: float = 0.0, hi: float = np.inf, obj: float = 0.0) -> int:
        if key in self._pos:
            raise ValueError(f"duplicate variable {key}")
        self._pos[key] = len(self.keys)
        self.keys.append(key)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.objective.append(float(obj))
        return self._pos[key]

    def index(self, key: VarKey) -> int:
        return self._pos[key]

    def has(self, key: VarKey) -> bool:
        return key in self._pos

    def set_lower(self, key: VarKey, lo: float, tag: str) -> None:
        i = self._pos[key]
        self.lo[i] = max(self.lo[i], float(lo))
        self.bound_tags.setdefault(tag, []).append(key)

    def add_constraint(self, terms, sense: str, rhs: float, tag: str) -> None:
        """``terms`` is an iterable of (VarKey, coefficient); repeated keys are summed."""
        acc = {}
        for key, c in terms:
            j = self._pos[key]
            acc[j] = acc.get(j, 0.0) + float(c)
        idx = np.array(sorted(j for j, c in acc.items() if c != 0.0), dtype=np.int64)
        coef = np.array([acc[j] for j in idx], dtype=float)
        if sense not in (LE, EQ, GE):
            raise ValueError(f"bad relation {sense!r}")
        self.constraints.append(Constraint(idx, coef, sense, float(rhs), tag))

    def copy(self) -> "LinearProgram":
        out = LinearProgram(self.name, list(self.keys), list(self.lo), list(self.hi), list(self.objective),
                            list(self.constraints), {k: list(v) for k, v in self.bound_tags.items()})
        out._pos = dict(self._pos)
        return out

    def tags(self) -> dict:
        counts = {}
        for c in self.constraints:
            counts[c.tag] = counts.get(c.tag, 0) + 1
        return counts

    def matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense (A, senses, b)."""
        A = np.zeros((self.n_rows, self.n_vars))
        for r, c in enumerate(self.constraints):
            A[r, c.index] = c.coef
        senses = np.array([c.sense for c in self.constraints], dtype=object)
        b = np.array([c.rhs for c in self.constraints], dtype=float)
        return A, senses, b

    def sparse_matrix(self):
        """(A as CSR, senses, b)."""
        import scipy.sparse as sp

        rows = [np.full(c.index.size, r) for r, c in enumerate(self.constraints)]
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        A = sp.csr_matrix(
            (cat([c.coef for c in self.constraints], float),
             (cat(rows, np.int64), cat([c.index for c in self.constraints], np.int64))),
            shape=(self.n_rows, self.n_vars),
        )
        senses = np.array([c.sense for c in self.constraints], dtype=object)
        b = np.array([c.rhs for c in self.constraints], dtype=float)
        return A, senses, b

    def violations(self, values: np.ndarray) -> list[tuple[str, float]]:
        """(description, amount) for every row or bound violated by ``values``."""
        out = []
        values = np.asarray(values, dtype=float)
        for r, c in enumerate(self.constraints):
            lhs = float(values[c.index] @ c.coef)
            gap = {LE: lhs - c.rhs, GE: c.rhs - lhs, EQ: abs(lhs - c.rhs)}[c.sense]
            if gap > 0:
                out.append((f"row {r} {c.tag} {c.sense} {c.rhs}", gap))
        lo, hi = np.array(self.lo), np.array(self.hi)
        for j in np.flatnonzero(values < lo):
            out.append((f"lower bound of {self.keys[j]}", float(lo[j] - values[j])))
        for j in np.flatnonzero(values > hi):
            out.append((f"upper bound of {self.keys[j]}", float(values[j] - hi[j])))
        return out

    def max_violation(self, values: np.ndarray) -> float:
        return max((v for _, v in self.violations(values)), default=0.0)

    def to_mps(self) -> str:
        """Free-format MPS text (maximization declared via OBJSENSE)."""
        names = [f"C{r}" for r in range(self.n_rows)]
        cols = [str(k) for k in self.keys]
        kind = {LE: "L", GE: "G", EQ: "E"}
        lines = [f"NAME {self.name}", "OBJSENSE", "    MAX", "ROWS", " N obj"]
        lines += [f" {kind[c.sense]} {names[r]}" for r, c in enumerate(self.constraints)]
        by_col = [[] for _ in range(self.n_vars)]
        for r, c in enumerate(self.constraints):
            for j, v in zip(c.index, c.coef):
                by_col[j].append((names[r], v))
        lines.append("COLUMNS")
        for j, col in enumerate(cols):
            if self.objective[j] != 0.0:
                lines.append(f" {col} obj {self.objective[j]!r}")
            for row, v in by_col[j]:
                lines.append(f" {col} {row} {float(v)!r}")
        lines.append("RHS")
        for r, c in enumerate(self.constraints):
            if c.rhs != 0.0:
                lines.append(f" rhs {names[r]} {c.rhs!r}")
        lines.append("BOUNDS")
        for j, col in enumerate(cols):
            lo, hi = self.lo[j], self.hi[j]
            if lo == hi:
                lines.append(f" FX bnd {col} {lo!r}")
                continue
            if lo == -np.inf and hi == np.inf:
                lines.append(f" FR bnd {col}")
                continue
            if lo == -np.inf:
                lines.append(f" MI bnd {col}")
            elif lo != 0.0:
                lines.append(f" LO bnd {col} {lo!r}")
            if hi != np.inf:
                lines.append(f" UP bnd {col} {hi!r}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    values: np.ndarray | None
    objective: float | None
    keys: tuple = ()
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, key: VarKey) -> float:
        return float(self.values[self.keys.index(key)])

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(self.keys, self.values)}


class LpSolver(Protocol):
    def solve(self, lp: LinearProgram) -> LpSolution: ...
