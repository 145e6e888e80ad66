"""
项目内统一的异常类型。

库代码只负责抛出；由 handlers 把异常翻译成退出码并写日志。
"""


class SymflowError(Exception):
    """所有自定义异常的基类。"""

    exit_code = 1


class ConfigError(SymflowError):
    """配置文件或命令行参数不合法（未知键、类型错误、取值越界、未知预设名）。"""

    exit_code = 2


class DegreeError(SymflowError, ValueError):
    """形式次数越界，例如两个形式的楔积次数超过 6。"""

    exit_code = 2


class DegenerateFormError(SymflowError, ValueError):
    """退化的数据：ω 不可逆、Gram 矩阵奇异或不对称、余向量 ξ = 0。"""

    exit_code = 2


class NotPositive(SymflowError):
    """3-形式不是正的（Hitchin 不变量 λ(φ) ≥ 0）。"""

    exit_code = 3

    def __init__(self, message: str, lam=None):
        super().__init__(message)
        self.lam = lam


class NotPrimitive(SymflowError):
    """ω∧φ ≠ 0，J_φ 与 ω 不相容，g_φ 不对称。"""

    exit_code = 3


class PositivityLost(NotPositive):
    """演化过程中离开了正锥。记录出事的时间和（网格上的）位置。"""

    def __init__(self, message: str, time=None, location=None, lam=None):
        super().__init__(message, lam=lam)
        self.time = time
        self.location = location


class ProjectionError(SymflowError):
    """流的右端项不在 ansatz 张成的子空间内。"""

    exit_code = 3

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class StepSizeUnderflow(SymflowError):
    """自适应积分器步长塌缩。"""

    exit_code = 3


class ToleranceFailure(SymflowError):
    """某项验证没有达到要求的精度。"""

    exit_code = 4


class NotClosed(SymflowError):
    """dφ ≠ 0：Type IIA 结构要求 φ 是闭形式。"""

    exit_code = 3
