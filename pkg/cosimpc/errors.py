from __future__ import annotations


class CosimError(Exception):
    """Base class for every error raised by cosimpc."""


# --- time and exchange -----------------------------------------------------


class TimeVectorError(CosimError):
    pass


class InvalidTimeVector(TimeVectorError):
    pass


class AllPointsExpired(TimeVectorError):
    def __init__(self, shift: int, span: int):
        super().__init__(f"Shift of {shift} s drops every point of a vector spanning {span} s.")
        self.shift = shift
        self.span = span


class OutOfRange(TimeVectorError):
    def __init__(self, t: int, first: int, last: int):
        super().__init__(f"Time {t} is outside the vector span [{first}, {last}].")
        self.t = t
        self.first = first
        self.last = last


class ZoneError(CosimError):
    pass


class UnknownSlot(ZoneError):
    def __init__(self, slot: str):
        super().__init__(f"Unknown exchange-zone slot: {slot}")
        self.slot = slot


class NotProducer(ZoneError):
    def __init__(self, slot: str, producer: str, owner: str):
        super().__init__(f"Module {producer} cannot write slot {slot} owned by {owner}.")
        self.slot = slot
        self.producer = producer
        self.owner = owner


class SlotKindMismatch(ZoneError):
    def __init__(self, slot: str, expected: str, actual: str):
        super().__init__(f"Slot {slot} holds {expected} values, got {actual}.")
        self.slot = slot


class NonFiniteValue(ZoneError):
    def __init__(self, slot: str, producer: str, tick: int):
        super().__init__(f"Non-finite value written to {slot} by {producer} at tick {tick}.")
        self.slot = slot
        self.producer = producer
        self.tick = tick


# --- engine ----------------------------------------------------------------


class LifecycleViolation(CosimError):
    pass


class DuplicateModuleAssignment(CosimError):
    def __init__(self, module_id: str, sequences: list[str]):
        super().__init__(f"Module {module_id} is assigned to several sequences: {', '.join(sequences)}")
        self.module_id = module_id
        self.sequences = sequences


class ScheduleError(CosimError):
    pass


class ModuleStepFailure(CosimError):
    def __init__(self, tick: int, module_id: str, cause: BaseException):
        super().__init__(f"Module {module_id} failed at tick {tick}: {cause}")
        self.tick = tick
        self.module_id = module_id
        self.cause = cause


# --- logic models ----------------------------------------------------------


class LogicModelError(CosimError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class BlockParameterError(LogicModelError):
    pass


class AlgebraicLoop(LogicModelError):
    def __init__(self, blocks: list[str]):
        super().__init__(f"Algebraic loop without a delay block through: {', '.join(blocks)}")
        self.blocks = blocks


class NonFiniteSignal(CosimError):
    def __init__(self, block_id: str, port: str):
        super().__init__(f"Block {block_id} produced a non-finite value on port {port}.")
        self.block_id = block_id
        self.port = port


# --- MILP ------------------------------------------------------------------


class ModelError(CosimError):
    pass


class DuplicateName(ModelError):
    pass


class InvalidBounds(ModelError):
    pass


class UnknownVariable(ModelError):
    pass


class ParseError(CosimError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# --- MPC and plants --------------------------------------------------------


class InvalidHorizon(CosimError):
    pass


class ForecastGap(CosimError):
    def __init__(self, series: str, missing_time: int):
        super().__init__(f"Forecast {series} has no sample at t={missing_time}.")
        self.series = series
        self.missing_time = missing_time


class InfeasibleProblem(CosimError):
    def __init__(self, status: str, lp_path: str | None = None):
        where = f" (LP written to {lp_path})" if lp_path else ""
        super().__init__(f"MPC problem has no solution: {status}{where}")
        self.status = status
        self.lp_path = lp_path


class InfeasibleWindow(InfeasibleProblem):
    pass


class SpecInfeasible(CosimError):
    pass


# --- scenarios -------------------------------------------------------------


class ScenarioError(CosimError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors) if errors else "Invalid scenario.")
        self.errors = list(errors)
