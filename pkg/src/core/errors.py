"""项目统一的异常层次。CLI 把 FractalLabError 映射为退出码 2。"""


class FractalLabError(Exception):
    """所有可预期错误的基类"""


class SpecError(FractalLabError, ValueError):
    """IFS 数据不满足嵌套分形公理或标准假设"""


class DedupCollisionError(SpecError):
    def __init__(self, first: int, second: int, distance: float, tolerance: float):
        self.pair = (first, second)
        self.distance = distance
        super().__init__(
            f"顶点去重冲突: 顶点 {first} 与 {second} 相距 {distance:.3e}，"
            f"小于允许间距 {tolerance:.3e}（IFS 数值病态）"
        )


class BudgetError(FractalLabError):
    def __init__(self, stage: str, limit: int, requested: int):
        self.stage = stage
        self.limit = limit
        self.requested = requested
        super().__init__(f"{stage}: 规模 {requested} 超出预算上限 {limit}")


class DomainError(FractalLabError, ValueError):
    """输入超出操作的定义域"""


class ResolutionError(FractalLabError):
    """网格层级不足，没有可分辨的尺度"""


class WindowError(FractalLabError):
    """时间网格落在可分辨窗口之外"""


class RenormalizationError(FractalLabError):
    """电导重整化不动点迭代失败"""


class EigenError(FractalLabError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message}（达到的残差 {residual:.3e}）")


class SingularSystemError(FractalLabError):
    """调和延拓的内部线性方程组奇异"""


class UnsupportedCaseError(FractalLabError):
    """该情形没有理论保证，拒绝计算"""


class UsageError(FractalLabError, ValueError):
    """调用参数非法"""


class FitError(FractalLabError):
    """指数拟合样本不足"""


class ConfigError(FractalLabError):
    def __init__(self, message: str, path: str = "<text>", line: int | None = None, key: str | None = None):
        self.path = path
        self.line = line
        self.key = key
        where = path if line is None else f"{path}:{line}"
        if key:
            where = f"{where} [{key}]"
        super().__init__(f"{where}: {message}")
