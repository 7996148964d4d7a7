from typing import Optional

from nhmdp.algo import CONDITION_DESCRIPTIONS


class NhmdpError(Exception):
    """Base class of every failure the library reports. `exit_code` is what the CLI returns for it."""
    exit_code = 2


class UsageError(NhmdpError):
    exit_code = 1


class ModelParseError(NhmdpError):
    pass


class ModelValidationError(NhmdpError):
    def __init__(self, violation):
        self.violation = violation
        super().__init__(f"invalid model: {violation}")


class PolicyError(NhmdpError):
    pass


class AssumptionError(NhmdpError):
    def __init__(self, condition: str, message: str, stage: Optional[int] = None):
        self.condition = condition
        self.stage = stage
        where = f" at stage {stage}" if stage is not None else ""
        # e.g. "K_n infinite: assumption (K_n = sup_B ... < ∞) fails at stage 3 [bounded_ratio]"
        super().__init__(f"{message}: assumption ({CONDITION_DESCRIPTIONS.get(condition, condition)}) "
                         f"fails{where} [{condition}]")


class ConvergenceError(NhmdpError):
    def __init__(self, increment: float, iterations: int):
        self.increment = increment
        self.iterations = iterations
        super().__init__(f"kmax={iterations} stage applications exhausted, last span increment {increment:.3e}")
