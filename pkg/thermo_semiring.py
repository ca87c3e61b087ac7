"""
热力学半环：min-plus / max-plus 标量运算及其熵形变
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Iterator, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import entr, logsumexp, softmax
from typing_extensions import Literal

from errors import DomainError


INF = math.inf
Mode = Literal["min", "max"]
MODES = ("min", "max")

DEFAULT_GRID_STEP = 1e-4
DEFAULT_REFINE_TOL = 1e-12
DEFAULT_MULTISTART = 12
DEFAULT_SEED = 20240517

logger = logging.getLogger(__name__)


def parse_beta(beta: Union[str, float, int, None]) -> float:
    """解析逆温度参数，允许 'inf'"""
    if beta is None:
        return INF
    if isinstance(beta, str):
        text = beta.strip().lower()
        if text in ('inf', '+inf', 'infinity', '∞'):
            return INF
        try:
            beta = float(text)
        except ValueError:
            raise DomainError(f"无法解析的 β: {beta!r}")
    value = float(beta)
    if math.isnan(value) or value <= 0:
        raise DomainError(f"β 必须为正数或 inf，收到 {beta!r}")
    return value


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise DomainError(f"未知模式: {mode!r}")
    return mode


def mode_sign(mode: str) -> int:
    return 1 if check_mode(mode) == 'min' else -1


def additive_identity(mode: str = 'min') -> float:
    """⊕ 的单位元：min-plus 为 ∞，max-plus 为 −∞"""
    return INF * mode_sign(mode)


@dataclass(frozen=True)
class ExtReal:
    """扩展实数 ℝ ∪ {∞}（或 max-plus 下的 ℝ ∪ {−∞}）"""

    value: float
    mode: str = 'min'

    def __post_init__(self):
        check_mode(self.mode)
        value = float(self.value)
        if math.isnan(value):
            raise DomainError("扩展实数不能为 NaN")
        if math.isinf(value) and value != additive_identity(self.mode):
            raise DomainError(f"{self.mode}-plus 模式下不允许 {value}")
        object.__setattr__(self, 'value', value)

    @property
    def is_identity(self) -> bool:
        return self.value == additive_identity(self.mode)

    def _same_mode(self, other: 'ExtReal') -> 'ExtReal':
        if not isinstance(other, ExtReal):
            other = ExtReal(other, self.mode)
        if other.mode != self.mode:
            raise DomainError(f"模式不一致: {self.mode} 与 {other.mode}")
        return other

    def oplus(self, other) -> 'ExtReal':
        other = self._same_mode(other)
        pick = min if self.mode == 'min' else max
        return ExtReal(pick(self.value, other.value), self.mode)

    def odot(self, other) -> 'ExtReal':
        other = self._same_mode(other)
        if self.is_identity or other.is_identity:
            return ExtReal(additive_identity(self.mode), self.mode)
        return ExtReal(self.value + other.value, self.mode)

    def __float__(self) -> float:
        return self.value


def trop_ops(x, y) -> Tuple[ExtReal, ExtReal]:
    """返回 (x ⊕ y, x ⊙ y)"""
    if not isinstance(x, ExtReal):
        x = ExtReal(x, y.mode if isinstance(y, ExtReal) else 'min')
    return x.oplus(y), x.odot(y)


# ---------------------------------------------------------------- 熵泛函

ENTROPY_KINDS = ('shannon', 'renyi', 'tsallis')


@dataclass(frozen=True)
class EntropyFunctional:
    """经典熵泛函：Shannon、Rényi(q)、Tsallis(α)"""

    kind: str = 'shannon'
    parameter: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ENTROPY_KINDS:
            raise DomainError(f"未知熵类型: {self.kind!r}")
        if self.kind == 'shannon':
            object.__setattr__(self, 'parameter', None)
            return
        if self.parameter is None:
            raise DomainError(f"{self.kind} 熵需要参数")
        value = float(self.parameter)
        if not math.isfinite(value) or value == 1.0 or value <= 0:
            raise DomainError(f"{self.kind} 熵参数必须为正且不等于 1，收到 {self.parameter}")
        object.__setattr__(self, 'parameter', value)

    @classmethod
    def shannon(cls) -> 'EntropyFunctional':
        return cls('shannon')

    @classmethod
    def renyi(cls, q: float) -> 'EntropyFunctional':
        return cls('renyi', q)

    @classmethod
    def tsallis(cls, alpha: float) -> 'EntropyFunctional':
        return cls('tsallis', alpha)

    @property
    def is_shannon(self) -> bool:
        return self.kind == 'shannon'

    @property
    def label(self) -> str:
        if self.is_shannon:
            return 'shannon'
        return f"{self.kind}({self.parameter:g})"

    def rows(self, P: np.ndarray) -> np.ndarray:
        """对矩阵的每一行计算熵；零坐标按一致性条件丢弃"""
        P = np.clip(np.atleast_2d(np.asarray(P, dtype=float)), 0.0, None)
        if self.kind == 'shannon':
            return entr(P).sum(axis=1)
        a = self.parameter
        with np.errstate(divide='ignore', invalid='ignore'):
            powers = np.where(P > 0, np.power(P, a), 0.0).sum(axis=1)
        if self.kind == 'renyi':
            with np.errstate(divide='ignore'):
                return np.log(powers) / (1.0 - a)
        return (powers - 1.0) / (1.0 - a)

    def __call__(self, p) -> float:
        return entropy_eval(self, p)


SHANNON = EntropyFunctional.shannon()


def check_prob_vector(p, tol: float = 1e-9) -> np.ndarray:
    """校验概率向量"""
    arr = np.asarray(p, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("概率向量不能为空")
    if np.any(~np.isfinite(arr)) or np.any(arr < -tol):
        raise DomainError(f"概率向量含负值或非有限值: {arr.tolist()}")
    if abs(arr.sum() - 1.0) > tol * max(1, arr.size):
        raise DomainError(f"概率向量之和为 {arr.sum()}，应为 1")
    return np.clip(arr, 0.0, None)


def entropy_eval(S: EntropyFunctional, p, tol: float = 1e-9) -> float:
    """计算熵值 S(p)"""
    arr = check_prob_vector(p, tol)
    return float(S.rows(arr[None, :])[0])


# ---------------------------------------------------------------- 形变加法

@dataclass(frozen=True)
class SimplexMinimum:
    """单纯形极小化的结果及其分辨率"""

    value: float
    weights: Tuple[float, ...]
    method: str
    resolution: Optional[float] = None


def _as_values(xs) -> np.ndarray:
    values = [float(x.value) if isinstance(x, ExtReal) else float(x) for x in xs]
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DomainError("输入列表不能为空")
    if np.any(np.isnan(arr)):
        raise DomainError("输入含 NaN")
    return arr


def _binary_minimum(x: float, y: float, beta: float, S: EntropyFunctional,
                    grid_step: float, refine_tol: float) -> Tuple[float, float]:
    """二元情形：网格搜索后在活动坐标上做有界黄金分割细化"""
    count = max(2, int(round(1.0 / grid_step)) + 1)
    grid = np.linspace(0.0, 1.0, count)
    values = grid * x + (1.0 - grid) * y - S.rows(np.column_stack([grid, 1.0 - grid])) / beta
    best = int(np.argmin(values))
    best_p, best_value = float(grid[best]), float(values[best])

    def objective(p):
        p = min(1.0, max(0.0, float(p)))
        return p * x + (1.0 - p) * y - float(S.rows(np.array([[p, 1.0 - p]]))[0]) / beta

    lo, hi = max(0.0, best_p - grid_step), min(1.0, best_p + grid_step)
    if hi > lo:
        refined = minimize_scalar(objective, bounds=(lo, hi), method='bounded',
                                  options={'xatol': refine_tol})
        if refined.fun < best_value:
            best_p, best_value = float(refined.x), float(refined.fun)
    return best_value, best_p


def _multistart_minimum(x: np.ndarray, beta: float, S: EntropyFunctional, starts: int,
                        seed: int, grid_step: float, refine_tol: float) -> Tuple[float, np.ndarray]:
    """n ≥ 3：顶点、二元面和 Dirichlet 多起点局部下降"""
    n = x.size

    def objective(z):
        p = softmax(z)
        return float(p @ x - S.rows(p[None, :])[0] / beta)

    best = int(np.argmin(x))
    best_value, best_p = float(x[best]), np.eye(n)[best]

    for i, j in itertools.combinations(range(n), 2):
        value, p = _binary_minimum(x[i], x[j], beta, S, grid_step, refine_tol)
        if value < best_value:
            best_value = value
            best_p = np.zeros(n)
            best_p[i], best_p[j] = p, 1.0 - p

    rng = np.random.default_rng(seed)
    points = np.vstack([np.full(n, 1.0 / n), rng.dirichlet(np.ones(n), size=starts)])
    for start in points:
        result = minimize(objective, np.log(np.clip(start, 1e-12, None)), method='BFGS',
                          options={'gtol': 1e-10})
        if result.fun < best_value:
            best_value, best_p = float(result.fun), softmax(result.x)
    return best_value, best_p


def thermo_minimize(xs, beta, S: Optional[EntropyFunctional] = None, mode: str = 'min',
                    grid_step: float = DEFAULT_GRID_STEP, refine_tol: float = DEFAULT_REFINE_TOL,
                    multistart: int = DEFAULT_MULTISTART, seed: int = DEFAULT_SEED) -> SimplexMinimum:
    """计算 min_p Σ pᵢxᵢ − S(p)/β 及极小点"""
    S = S or SHANNON
    beta = parse_beta(beta)
    sign = mode_sign(mode)
    x = sign * _as_values(xs)
    if np.any(x == -INF):
        raise DomainError(f"{mode}-plus 模式下出现吸收方向的无穷")

    finite = np.isfinite(x)
    weights = np.zeros(x.size)
    if not finite.any():
        return SimplexMinimum(additive_identity(mode), tuple(weights), 'identity')

    xf = x[finite]
    if beta == INF or xf.size == 1:
        best = int(np.argmin(xf))
        value, pf, method, resolution = float(xf[best]), np.eye(xf.size)[best], 'tropical', None
    elif S.is_shannon:
        value = float(-logsumexp(-beta * xf) / beta)
        pf, method, resolution = softmax(-beta * xf), 'closed-form', None
    elif xf.size == 2:
        value, p = _binary_minimum(xf[0], xf[1], beta, S, grid_step, refine_tol)
        pf, method, resolution = np.array([p, 1.0 - p]), 'grid+bounded-golden', grid_step
    else:
        value, pf = _multistart_minimum(xf, beta, S, multistart, seed, grid_step, refine_tol)
        method, resolution = f'dirichlet-multistart({multistart})', refine_tol

    weights[finite] = pf
    logger.debug(f"形变加法 {S.label} β={beta}: {method} -> {sign * value}")
    return SimplexMinimum(sign * value, tuple(float(w) for w in weights), method, resolution)


def thermo_add_n(xs, beta, S: Optional[EntropyFunctional] = None, mode: str = 'min', **options) -> float:
    """n 元热力学加法 ⊕_{β,S}"""
    return thermo_minimize(xs, beta, S, mode, **options).value


def thermo_add(x, y, beta, S: Optional[EntropyFunctional] = None, mode: str = 'min', **options) -> float:
    return thermo_add_n([x, y], beta, S, mode, **options)


def oplus_reduce(values, beta, mode: str = 'min', weights=None):
    """沿第 0 轴做 Shannon 形变加法（带可选重数权重），支持数组值"""
    beta = parse_beta(beta)
    sign = mode_sign(mode)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0 or arr.shape[0] == 0:
        raise DomainError("⊕ 求和至少需要一项")
    if beta == INF:
        out = arr.min(axis=0) if sign > 0 else arr.max(axis=0)
    else:
        b = None
        if weights is not None:
            b = np.asarray(weights, dtype=float).reshape((-1,) + (1,) * (arr.ndim - 1))
            b = np.broadcast_to(b, arr.shape)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            out = -sign * logsumexp(-sign * beta * arr, axis=0, b=b) / beta
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def residual(a, b) -> float:
    """两个扩展实数数组的最大偏差；同号无穷视为相等"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid='ignore'):
        diff = np.where(both_inf, 0.0, np.abs(a - b))
    diff = np.where(np.isnan(diff), INF, diff)
    return float(diff.max()) if diff.size else 0.0


# ---------------------------------------------------------------- 平面树

@dataclass(frozen=True)
class PlanarTree:
    """有根平面树；叶子没有子节点，内部顶点至少两个子节点"""

    children: Tuple['PlanarTree', ...] = ()

    def __post_init__(self):
        if len(self.children) == 1:
            raise DomainError("内部顶点至少需要两个子节点")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def leaf_count(self) -> int:
        if self.is_leaf:
            return 1
        return sum(child.leaf_count for child in self.children)

    @classmethod
    def leaf(cls) -> 'PlanarTree':
        return cls()

    @classmethod
    def node(cls, *children: 'PlanarTree') -> 'PlanarTree':
        return cls(tuple(children))

    @classmethod
    def left_comb(cls, n: int) -> 'PlanarTree':
        if n < 1:
            raise DomainError("叶子数至少为 1")
        tree = cls.leaf()
        for _ in range(n - 1):
            tree = cls.node(tree, cls.leaf())
        return tree

    @classmethod
    def right_comb(cls, n: int) -> 'PlanarTree':
        if n < 1:
            raise DomainError("叶子数至少为 1")
        tree = cls.leaf()
        for _ in range(n - 1):
            tree = cls.node(cls.leaf(), tree)
        return tree

    @classmethod
    def from_nested(cls, obj: Any) -> 'PlanarTree':
        """嵌套列表表示：列表为内部顶点，其余为叶子，例如 [[0, 0], 0]"""
        if isinstance(obj, (list, tuple)):
            return cls.node(*(cls.from_nested(child) for child in obj))
        return cls.leaf()

    def to_nested(self) -> Any:
        if self.is_leaf:
            return 0
        return [child.to_nested() for child in self.children]


def tree_compose(tree: PlanarTree, xs, beta, S: Optional[EntropyFunctional] = None,
                 mode: str = 'min', **options) -> float:
    """按树结构自底向上逐点应用 n 元运算"""
    values = _as_values(xs)
    if tree.leaf_count != values.size:
        raise DomainError(f"树有 {tree.leaf_count} 个叶子，输入有 {values.size} 个")
    leaves: Iterator[float] = iter(values.tolist())

    def walk(t: PlanarTree) -> float:
        if t.is_leaf:
            return next(leaves)
        inputs = [walk(child) for child in t.children]
        return thermo_add_n(inputs, beta, S, mode, **options)

    return walk(tree)


# ---------------------------------------------------------------- 半环元素代数

@dataclass(frozen=True)
class PointwiseSemiring:
    """标量与序列：⊕ 逐点形变加法，⊙ 逐点相加"""

    beta: float = INF
    mode: str = 'min'
    kind = 'pointwise'

    def __post_init__(self):
        object.__setattr__(self, 'beta', parse_beta(self.beta))
        check_mode(self.mode)

    @property
    def sign(self) -> int:
        return mode_sign(self.mode)

    @property
    def zero_value(self) -> float:
        return additive_identity(self.mode)

    def oplus(self, values, weights=None):
        return oplus_reduce(values, self.beta, self.mode, weights)

    def odot(self, a, b):
        return np.add(np.asarray(a, dtype=float), np.asarray(b, dtype=float))

    def one(self, like=None):
        if like is None:
            return 0.0
        return np.zeros_like(np.asarray(like, dtype=float))

    def zero(self, like=None):
        if like is None:
            return self.zero_value
        return np.full_like(np.asarray(like, dtype=float), self.zero_value)

    def _require_finite_beta(self):
        if self.beta == INF:
            raise DomainError("指数桥需要有限 β")

    def to_classical(self, f):
        """f ↦ e^{−βf}"""
        self._require_finite_beta()
        with np.errstate(over='ignore'):
            return np.exp(-self.sign * self.beta * np.asarray(f, dtype=float))

    def from_classical(self, a):
        """a ↦ −β⁻¹ log a"""
        self._require_finite_beta()
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise DomainError("经典值为负，无法表示为半环元素")
        with np.errstate(divide='ignore'):
            return -self.sign * np.log(a) / self.beta

    def classical_mul(self, a, b):
        return np.asarray(a, dtype=float) * np.asarray(b, dtype=float)

    def classical_one(self, like=None):
        if like is None:
            return 1.0
        return np.ones_like(np.asarray(like, dtype=float))

    def random_element(self, rng: np.random.Generator, length: Optional[int] = None,
                       identity_rate: float = 0.1) -> np.ndarray:
        shape = () if length is None else (length,)
        values = rng.uniform(-3.0, 3.0, size=shape)
        mask = rng.random(size=shape) < identity_rate
        return np.where(mask, self.zero_value, values)


@dataclass(frozen=True)
class SeriesSemiring:
    """截断级数：⊕ 按系数形变加法，⊙ 为形变的热带 Cauchy 乘积"""

    beta: float = INF
    mode: str = 'min'
    order: int = 6
    kind = 'series'

    def __post_init__(self):
        object.__setattr__(self, 'beta', parse_beta(self.beta))
        check_mode(self.mode)
        if self.order < 1:
            raise DomainError("级数截断阶至少为 1")

    sign = PointwiseSemiring.sign
    zero_value = PointwiseSemiring.zero_value
    oplus = PointwiseSemiring.oplus
    _require_finite_beta = PointwiseSemiring._require_finite_beta
    to_classical = PointwiseSemiring.to_classical
    from_classical = PointwiseSemiring.from_classical

    def _coerce(self, a) -> np.ndarray:
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0:
            return arr
        if arr.shape != (self.order + 1,):
            raise DomainError(f"级数长度应为 {self.order + 1}，收到 {arr.shape}")
        return arr

    def odot(self, a, b):
        a, b = self._coerce(a), self._coerce(b)
        if a.ndim == 0 or b.ndim == 0:
            return a + b
        out = np.empty(self.order + 1)
        for n in range(self.order + 1):
            out[n] = self.oplus(a[:n + 1] + b[n::-1])
        return out

    def one(self, like=None):
        out = np.full(self.order + 1, self.zero_value)
        out[0] = 0.0
        return out

    def zero(self, like=None):
        return np.full(self.order + 1, self.zero_value)

    def classical_mul(self, a, b):
        return np.convolve(np.asarray(a, dtype=float), np.asarray(b, dtype=float))[:self.order + 1]

    def classical_one(self, like=None):
        out = np.zeros(self.order + 1)
        out[0] = 1.0
        return out

    def random_element(self, rng: np.random.Generator, length: Optional[int] = None,
                       identity_rate: float = 0.1) -> np.ndarray:
        values = rng.uniform(-3.0, 3.0, size=self.order + 1)
        mask = rng.random(size=self.order + 1) < identity_rate
        values = np.where(mask, self.zero_value, values)
        # 不含常数模式
        values[0] = self.zero_value
        return values


Semiring = Union[PointwiseSemiring, SeriesSemiring]
