class SpinChainError(ValueError):
    """Base domain error. Subclasses ValueError so plain callers still catch it."""


class SizeLimitError(SpinChainError):
    pass


class SectorError(SpinChainError):
    pass


class NormalizationError(SpinChainError):
    pass


class CriticalModeError(SpinChainError):
    """Bogoliubov angle undefined at a gapless mode (omega_q ~ 0)."""


class ConfigError(SpinChainError):
    pass


class ScenarioError(SpinChainError):
    pass
