"""Exception hierarchy. Every error carries the name of the module that raised it."""


class BosepairError(Exception):
    module = "bosepair"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ConfigurationError(BosepairError, ValueError):
    module = "config"


class DimensionError(BosepairError, ValueError):
    module = "grid"


class NonConvergenceError(BosepairError, RuntimeError):
    module = "kernels"


class PositivityError(BosepairError, ArithmeticError):
    module = "kernels"


class InstabilityError(BosepairError, RuntimeError):
    module = "hartree"


class DivergenceError(BosepairError, FloatingPointError):
    module = "solver"


class NonContractionError(BosepairError, RuntimeError):
    module = "pair_kernel"


class ConsistencyError(BosepairError, RuntimeError):
    module = "pair_kernel"


class TruncationError(BosepairError, RuntimeError):
    module = "fock"


class VerificationError(BosepairError, AssertionError):
    module = "fock"
