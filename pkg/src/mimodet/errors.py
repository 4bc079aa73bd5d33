"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (bad QAM order, config key, ...)."""


class DetectorError(RuntimeError):
    """A detector could not produce an estimate (rank deficiency, all
    trajectories diverged, enumeration cap exceeded)."""


class TrajectoryDivergenceError(RuntimeError):
    """A Langevin trajectory left the recoverable region (|chi_j| > 1e3)."""

    def __init__(self, level: int, iteration: int):
        self.level = level
        self.iteration = iteration
        super().__init__(
            f"trajectory diverged at level {level}, iteration {iteration}"
        )
