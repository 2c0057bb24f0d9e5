from typing import List, Optional, Sequence


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3


class FPMError(Exception):
    """
    Base class of every error raised by the pipeline.

    `exit_code` is the process exit status the CLI reports for it.
    """
    exit_code = EXIT_INVALID


class InvalidArgumentError(FPMError, ValueError):
    pass


class WindowRangeError(InvalidArgumentError):

    def __init__(self, offset, rows: int, cols: int, window_rows: int, window_cols: int) -> None:
        self.offset = tuple(int(x) for x in offset)

        super().__init__(
            f'{window_rows}x{window_cols} crop window for LED offset {self.offset} '
            f'does not fit inside the {rows}x{cols} grid'
        )


class ConfigurationError(FPMError):
    pass


class ValidationError(FPMError):

    def __init__(self, violations: Sequence[str]) -> None:
        self.violations: List[str] = list(violations)

        super().__init__('; '.join(self.violations))


class NumericalFailureError(FPMError, ArithmeticError):
    exit_code = EXIT_CHECK_FAILED

    def __init__(self, message: str, iteration: int) -> None:
        self.iteration = iteration

        super().__init__(f'{message} (iteration {iteration})')


class CheckFailed(FPMError):
    exit_code = EXIT_CHECK_FAILED


class FileFormatError(FPMError, IOError):
    exit_code = EXIT_IO


class ManifestParseError(FileFormatError):

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None) -> None:
        self.key = key
        self.line = line

        location = f' (line {line})' if line is not None else ''
        super().__init__(f'{message}{location}')
