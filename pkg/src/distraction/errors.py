class DistractionError(Exception):
    pass


class ShapeError(DistractionError, ValueError):
    pass


class DomainError(DistractionError, ValueError):
    pass


class ContractError(DistractionError, ValueError):
    pass


class ConfigError(DistractionError, ValueError):
    pass


class DataError(DistractionError, ValueError):
    pass


class MetricError(DistractionError, ValueError):
    pass
