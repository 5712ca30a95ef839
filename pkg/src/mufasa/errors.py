from pathlib import Path


class MufasaError(Exception):
    """Base class of all errors raised deliberately by this package."""


class ContractViolation(MufasaError, ValueError):
    """A caller broke an operation's precondition (shapes, call order, missing data)."""


class NearSingularUpdate(MufasaError, ArithmeticError):
    pass


class NotSpdError(MufasaError, ArithmeticError):
    pass


class ConfigError(MufasaError, ValueError):
    pass


class UnsupportedConfiguration(MufasaError, ValueError):
    pass


class CombinationCapExceeded(MufasaError, ValueError):
    def __init__(self, sizes: tuple[int, ...], cap: int):
        product = 1
        for size in sizes:
            product *= size
        super().__init__(f"{' x '.join(map(str, sizes))} = {product} combinations exceed the cap of {cap}")
        self.product = product
        self.cap = cap


class DivergenceError(MufasaError, ArithmeticError):
    def __init__(self, what: str, step: int, loss: float):
        super().__init__(f"{what} diverged at gradient step {step} (loss {loss:.6g})")
        self.step = step
        self.loss = loss


class ParseError(MufasaError, ValueError):
    def __init__(self, path: Path | str, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = Path(path)
        self.line = line
