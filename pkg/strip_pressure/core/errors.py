"""Exceptions raised by the strip pressure pipeline.
"""
from typing import Optional


class StripEmptyError(ValueError):
    """No column is compatible with the boundary rows at this height."""

    def __init__(self, n: int):
        super().__init__(
            f"Strip empty at height n={n}: the boundary rows are incompatible with e2."
        )
        self.n = n


class DegenerateStripError(ValueError):
    """Trimming removed every column of the strip."""

    def __init__(self, n: int):
        super().__init__(
            f"Degenerate strip at height n={n}: no column lies on a bi-infinite path."
        )
        self.n = n


class NotMixingError(ValueError):
    """The essential strip graph is reducible or periodic."""

    def __init__(self, n: int, scc_count: int, period: int):
        super().__init__(
            f"Strip at height n={n} is not mixing (components={scc_count}, period={period}). "
            + "The model or boundary rows fall outside the hypotheses that make strip "
            + "shifts mixing; check strong irreducibility and q_hat < p_c."
        )
        self.n = n
        self.scc_count = scc_count
        self.period = period


class ColumnBudgetError(RuntimeError):
    def __init__(self, n: int, projected: int, budget: int):
        super().__init__(
            f"Strip at height n={n} needs {projected} columns, above the budget of {budget}. "
            + "Lower n or raise STRIP_PRESSURE_MAX_COLUMNS."
        )
        self.n = n
        self.projected = projected
        self.budget = budget


class UnfillableBoundaryError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, gap: float):
        super().__init__(
            f"Power iteration did not converge in {iterations} iterations "
            + f"(last relative gap {gap:.3e})."
        )
        self.iterations = iterations
        self.gap = gap


class IdentityViolationError(RuntimeError):
    def __init__(self, residual: float, threshold: float, n: Optional[int] = None):
        where = f" at height n={n}" if n is not None else ""
        super().__init__(
            f"Strip pressure identity violated{where}: residual {residual:.3e} "
            + f"above {threshold:.3e}."
        )
        self.residual = residual
        self.threshold = threshold


class GateFailedError(RuntimeError):
    pass


class ModelFileError(ValueError):
    pass
