"""异常层次：每类错误对应一个命令行退出码"""

from typing import Any, Optional


class AlgebraError(Exception):
    """所有计算错误的基类"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        data = {"error": type(self).__name__, "message": self.message, "exit_code": self.exit_code}
        if self.details:
            data["details"] = self.details
        return data


class ParseError(AlgebraError):
    """输入格式错误"""

    exit_code = 2


class DomainError(AlgebraError, ValueError):
    """数值定义域错误"""

    exit_code = 3


class CertificationError(AlgebraError):
    """恒等式或不等式校验失败"""

    exit_code = 4

    def __init__(self, message: str, residual: Optional[float] = None,
                 counterexample: Any = None, **details: Any):
        super().__init__(message, **details)
        self.residual = residual
        self.counterexample = counterexample

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["residual"] = self.residual
        if self.counterexample is not None:
            data["counterexample"] = self.counterexample
        return data


class CapExceededError(AlgebraError):
    """枚举规模超过上限"""

    exit_code = 5
