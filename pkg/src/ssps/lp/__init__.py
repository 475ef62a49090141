from .model import EQ, GE, LE, FLOW, FLOWREV, X, Y, LinearProgram, LpSolution, LpSolver, VarKey
from .simplex import SimplexSolver

__all__ = ["EQ", "GE", "LE", "FLOW", "FLOWREV", "X", "Y", "LinearProgram", "LpSolution", "LpSolver",
           "VarKey", "SimplexSolver"]
