class TpmError(Exception):
    """Base class for every error raised by the monitoring toolkit."""


class ConfigurationError(TpmError):
    pass


class DataError(TpmError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StencilLengthError(TpmError):
    def __init__(self, required: int, available: int) -> None:
        self.required = required
        self.available = available
        super().__init__(f"stencil needs {required} samples, got {available}")


class SamplingError(TpmError):
    pass


class SimulationDivergenceError(TpmError):
    def __init__(self, message: str, step: int) -> None:
        self.step = step
        super().__init__(f"{message} (step {step})")
