import logging


class InternalError(Exception):
    def __init__(self, message: str, *args) -> None:
        super().__init__(message, *args)
        self.message = message

        logging.error(message)

    def __str__(self) -> str:
        return self.message


class ConfigError(InternalError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key: str, path: str = '<cli>', line_no: int = 0) -> None:
        self.key = key
        super().__init__(f'{path}:{line_no}: unknown key "{key}"')


class DataError(InternalError):
    pass


class DatasetNotFound(DataError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(f'Dataset file not found: {path}')


class MalformedLine(DataError):
    def __init__(self, line_no: int, reason: str = '') -> None:
        self.line_no = line_no
        message = f'Malformed interaction at line {line_no}'
        if reason:
            message += f': {reason}'

        super().__init__(message)


class EmptyDataset(DataError):
    def __init__(self, message: str = 'No valid interactions found') -> None:
        super().__init__(message)


class InvalidFraction(DataError):
    def __init__(self, fraction: float) -> None:
        self.fraction = fraction
        super().__init__(f'test_fraction must lie in (0, 1), got {fraction}')


class CorpusExhausted(DataError):
    def __init__(self, available: int, requested: int) -> None:
        self.available = available
        self.requested = requested
        super().__init__(f'Cannot sample {requested} negatives from {available} eligible items')


class TrainingError(InternalError):
    pass


class IndexOutOfRange(TrainingError):
    def __init__(self, kind: str, index: int, size: int) -> None:
        super().__init__(f'{kind} index {index} out of range [0, {size})')


class DimensionMismatch(TrainingError):
    pass


class NonFiniteParams(TrainingError):
    def __init__(self, tensor: str) -> None:
        super().__init__(f'Non-finite values in tensor "{tensor}" after update')


class CheckpointError(TrainingError):
    pass


class EmptyEvaluation(InternalError):
    def __init__(self, message: str = 'No test events left to evaluate') -> None:
        super().__init__(message)


class DownloadInterruptedException(InternalError):
    def __init__(self, url: str, received: int, expected: int) -> None:
        super().__init__(f'Download of {url} interrupted ({received}/{expected} bytes)')
