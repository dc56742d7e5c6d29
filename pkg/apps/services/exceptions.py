"""
Иерархия исключений расчётного ядра
"""


class ZenerBeamError(Exception):
    """
    Базовое исключение проекта
    """


class MittagLefflerError(ZenerBeamError):
    def __init__(self, alpha: float, beta: float, z: float, reason: str):
        self.alpha, self.beta, self.z = alpha, beta, z
        super().__init__(
            f"Mittag-Leffler E(alpha={alpha}, beta={beta}) failed at z={z}: {reason}"
        )


class KernelDomainError(ZenerBeamError, ValueError):
    pass


class GridMismatchError(ZenerBeamError, ValueError):
    pass


class ProbeError(ZenerBeamError):
    def __init__(self, eps: float, reason: str):
        self.eps = eps
        super().__init__(f"asymptotic probe failed at eps={eps}: {reason}")


class MeshError(ZenerBeamError, ValueError):
    pass


class AssemblyError(ZenerBeamError):
    pass


class ConstantsError(ZenerBeamError):
    pass


class StepFailure(ZenerBeamError):
    def __init__(self, step: int, reason: str):
        self.step = step
        super().__init__(f"time step {step} failed: {reason}")


class PicardNonConvergence(ZenerBeamError):
    def __init__(self, diagnostics, reason: str):
        self.diagnostics = diagnostics
        super().__init__(f"Picard iteration did not converge: {reason}")


class ConfigError(ZenerBeamError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field, self.line = field, line
        super().__init__(message)
