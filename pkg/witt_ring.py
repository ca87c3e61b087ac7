"""
截断大 Witt 向量（精确有理数）、Witt 环上的 Rota–Baxter 算子、zeta 函数与有限域点计数
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from tokenize import TokenError
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import sympy
from sympy.parsing.sympy_parser import (convert_xor, implicit_multiplication_application, parse_expr,
                                        standard_transformations)

from errors import CapExceededError, DomainError, ParseError
from graph_hopf import Graph


DEFAULT_ORDER = 8
DEFAULT_PRODUCT_TERMS = 40
POINT_COUNT_EDGE_CAP = 6
POINT_COUNT_PRIME_CAP = 11
SERIES_TRANSFORMATIONS = standard_transformations + (implicit_multiplication_application, convert_xor)

Rational = Union[int, Fraction]
Ghost = Tuple[Fraction, ...]

logger = logging.getLogger(__name__)


def as_fraction(value) -> Fraction:
    """整数、Fraction、'p/q' 字符串或 sympy 有理数转为 Fraction"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, sympy.Basic):
        if value.is_Float:
            value = float(value)
        else:
            value = sympy.cancel(value)
            if not value.is_Rational:
                raise DomainError(f"系数不是有理数: {value}")
            return Fraction(int(value.p), int(value.q))
    if isinstance(value, float):
        if not value.is_integer():
            raise DomainError(f"浮点系数 {value} 不是精确有理数，请使用 'p/q'")
        return Fraction(int(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ParseError(f"无法解析的有理数: {value!r}")


@dataclass(frozen=True)
class WittVector:
    """1 + a₁t + … + a_N t^N 的系数 (a₁, …, a_N)"""

    coeffs: Tuple[Fraction, ...]

    def __post_init__(self):
        coeffs = tuple(as_fraction(c) for c in self.coeffs)
        if not coeffs:
            raise DomainError("截断阶至少为 1")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @classmethod
    def one(cls, order: int = DEFAULT_ORDER) -> 'WittVector':
        """级数 1，即 Witt 加法的零元"""
        return cls((0,) * order)

    @classmethod
    def unit(cls, order: int = DEFAULT_ORDER) -> 'WittVector':
        """𝕀 = (1−t)⁻¹"""
        return cls((1,) * order)

    @classmethod
    def geometric(cls, a, order: int = DEFAULT_ORDER) -> 'WittVector':
        """(1−at)⁻¹"""
        a = as_fraction(a)
        return cls(tuple(a ** n for n in range(1, order + 1)))

    @classmethod
    def from_ghost(cls, ghost_values: Sequence) -> 'WittVector':
        return unghost(ghost_values)

    @classmethod
    def parse_series(cls, text: str, order: int = DEFAULT_ORDER) -> 'WittVector':
        """解析关于 t 的表达式，如 '(1-2t)^-1'"""
        t = sympy.Symbol('t')
        try:
            expr = parse_expr(text, local_dict={'t': t}, transformations=SERIES_TRANSFORMATIONS)
        except (sympy.SympifyError, SyntaxError, TypeError, TokenError) as e:
            raise ParseError(f"无法解析级数表达式 {text!r}: {e}")
        expansion = sympy.series(expr, t, 0, order + 1).removeO()
        poly = sympy.Poly(sympy.expand(expansion), t)
        coeffs = [poly.coeff_monomial(t ** n) for n in range(order + 1)]
        if as_fraction(coeffs[0]) != 1:
            raise DomainError(f"常数项必须为 1，收到 {coeffs[0]}")
        return cls(tuple(as_fraction(c) for c in coeffs[1:]))

    @classmethod
    def from_json(cls, data: Sequence) -> 'WittVector':
        return cls(tuple(as_fraction(c) for c in data))

    def to_json(self) -> List[str]:
        return [str(c) for c in self.coeffs]

    def series(self) -> Tuple[Fraction, ...]:
        return (Fraction(1),) + self.coeffs


def _check_orders(*vectors: WittVector) -> int:
    orders = {v.order for v in vectors}
    if len(orders) != 1:
        raise DomainError(f"截断阶不一致: {sorted(orders)}")
    return orders.pop()


# ---------------------------------------------------------------- 幽灵坐标

def ghost(alpha: WittVector) -> Ghost:
    """t α′/α = Σ gₙ tⁿ：gₙ = n aₙ − Σ_{k<n} g_k a_{n−k}"""
    a = alpha.series()
    g: List[Fraction] = []
    for n in range(1, alpha.order + 1):
        g.append(n * a[n] - sum(g[k - 1] * a[n - k] for k in range(1, n)))
    return tuple(g)


def unghost(values: Sequence) -> WittVector:
    g = [as_fraction(v) for v in values]
    a = [Fraction(1)]
    for n in range(1, len(g) + 1):
        a.append((g[n - 1] + sum(g[k - 1] * a[n - k] for k in range(1, n))) / n)
    return WittVector(tuple(a[1:]))


def witt_add(alpha: WittVector, gamma: WittVector) -> WittVector:
    """Witt 加法：形式幂级数乘积"""
    order = _check_orders(alpha, gamma)
    a, b = alpha.series(), gamma.series()
    return WittVector(tuple(sum(a[k] * b[n - k] for k in range(n + 1)) for n in range(1, order + 1)))


def witt_neg(alpha: WittVector) -> WittVector:
    return unghost(tuple(-g for g in ghost(alpha)))


def witt_sub(alpha: WittVector, gamma: WittVector) -> WittVector:
    return witt_add(alpha, witt_neg(gamma))


def witt_mul(alpha: WittVector, gamma: WittVector) -> WittVector:
    """Witt 乘积 ⋆：幽灵坐标逐项相乘"""
    _check_orders(alpha, gamma)
    return unghost(tuple(x * y for x, y in zip(ghost(alpha), ghost(gamma))))


def witt_ops(alpha: WittVector, gamma: WittVector) -> Tuple[WittVector, WittVector]:
    return witt_add(alpha, gamma), witt_mul(alpha, gamma)


def convolution(alpha: WittVector, gamma: WittVector) -> WittVector:
    """α ⊛ γ：幽灵坐标的 Cauchy 乘积 Σ_{r+ℓ=n} g_r h_ℓ"""
    order = _check_orders(alpha, gamma)
    g, h = ghost(alpha), ghost(gamma)
    return unghost(tuple(sum(g[r - 1] * h[n - r - 1] for r in range(1, n)) for n in range(1, order + 1)))


def witt_residual(alpha: WittVector, gamma: WittVector) -> Fraction:
    _check_orders(alpha, gamma)
    return max(abs(x - y) for x, y in zip(alpha.coeffs, gamma.coeffs))


# ---------------------------------------------------------------- Rota–Baxter 算子

def rb_partial_sum_witt(alpha: WittVector) -> WittVector:
    """幽灵坐标移位前缀和，等于 α ⊛ 𝕀"""
    g = ghost(alpha)
    prefix = [Fraction(0)]
    for value in g[:-1]:
        prefix.append(prefix[-1] + value)
    return unghost(prefix)


def _q_weights(q, order: int, K: Optional[int]) -> List[Fraction]:
    q = as_fraction(q)
    weights = []
    for n in range(1, order + 1):
        qn = q ** n
        if qn == 1:
            raise DomainError(f"q^{n} = 1，q-算子在该阶无定义")
        if K is None:
            weights.append(qn / (1 - qn))
        else:
            weights.append(sum(qn ** k for k in range(1, K + 1)))
    return weights


def rb_q_witt(alpha: WittVector, q, K: Optional[int] = None) -> WittVector:
    """∏_{k≥1} α(q^k t)：幽灵坐标 gₙ ↦ gₙ qⁿ/(1−qⁿ)；给定 K 时为截断和"""
    weights = _q_weights(q, alpha.order, K)
    return unghost(tuple(g * w for g, w in zip(ghost(alpha), weights)))


def rb_q_witt_tilde(alpha: WittVector, q) -> WittVector:
    """−id − 𝒯_q：幽灵坐标 gₙ ↦ −gₙ/(1−qⁿ)"""
    q = as_fraction(q)
    result = []
    for n, g in enumerate(ghost(alpha), start=1):
        if q ** n == 1:
            raise DomainError(f"q^{n} = 1，q-算子在该阶无定义")
        result.append(-g / (1 - q ** n))
    return unghost(result)


def witt_rescale(alpha: WittVector, c) -> WittVector:
    """α(ct)：aₙ ↦ aₙ cⁿ"""
    c = as_fraction(c)
    return WittVector(tuple(a * c ** n for n, a in enumerate(alpha.coeffs, start=1)))


def q_product(alpha: WittVector, q, K: int = DEFAULT_PRODUCT_TERMS) -> WittVector:
    """截断乘积 ∏_{k=1}^{K} α(q^k t)，按级数乘法逐项累乘"""
    q = as_fraction(q)
    total = WittVector.one(alpha.order)
    for k in range(1, K + 1):
        total = witt_add(total, witt_rescale(alpha, q ** k))
    return total


PRODUCTS = {'witt': witt_mul, 'convolution': convolution}


def rb_residual(operator, alpha1: WittVector, alpha2: WittVector, product: str = 'convolution') -> Fraction:
    """权 +1 恒等式 T(a)·T(b) = T(a·T(b)) + T(T(a)·b) + T(a·b)，加法为 Witt 加法"""
    try:
        mul = PRODUCTS[product]
    except KeyError:
        raise DomainError(f"未知乘积: {product!r}")
    ta, tb = operator(alpha1), operator(alpha2)
    lhs = mul(ta, tb)
    rhs = witt_add(witt_add(operator(mul(alpha1, tb)), operator(mul(ta, alpha2))), operator(mul(alpha1, alpha2)))
    return witt_residual(lhs, rhs)


def random_witt(rng: np.random.Generator, order: int = DEFAULT_ORDER, low: int = -3, high: int = 3) -> WittVector:
    return WittVector(tuple(int(x) for x in rng.integers(low, high + 1, size=order)))


# ---------------------------------------------------------------- zeta 函数

@dataclass(frozen=True)
class CountingSequence:
    counts: Tuple[int, ...]
    source: str = 'formula'

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DomainError("点数不能为负")
        object.__setattr__(self, 'counts', counts)


def zeta_from_counts(counts: Union[CountingSequence, Sequence]) -> WittVector:
    """Z(X,t) = exp(Σ #X(F_{q^r}) t^r / r)：幽灵坐标即点数"""
    values = counts.counts if isinstance(counts, CountingSequence) else counts
    return unghost(values)


@dataclass(frozen=True)
class MotiveClass:
    """𝕃 的整系数 Laurent 多项式，terms 为 {幂次: 系数}"""

    terms: Tuple[Tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        merged: Dict[int, int] = {}
        for power, coeff in self.terms:
            merged[int(power)] = merged.get(int(power), 0) + int(coeff)
        object.__setattr__(self, 'terms', tuple(sorted((p, c) for p, c in merged.items() if c)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> 'MotiveClass':
        return cls(tuple(mapping.items()))

    @classmethod
    def point(cls) -> 'MotiveClass':
        return cls(((0, 1),))

    @classmethod
    def affine(cls, n: int) -> 'MotiveClass':
        return cls(((n, 1),))

    @classmethod
    def projective(cls, n: int) -> 'MotiveClass':
        return cls(tuple((k, 1) for k in range(n + 1)))

    @classmethod
    def from_json(cls, data: Mapping) -> 'MotiveClass':
        """{"tate": [[系数, 幂次], ...]}"""
        if 'graph_hypersurface' in data:
            raise DomainError("图超曲面不是 Tate 类")
        try:
            return cls(tuple((int(k), int(c)) for c, k in data['tate']))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Tate 类 JSON 格式错误: {e}")

    def to_json(self) -> Dict:
        return {'tate': [[c, k] for k, c in self.terms]}

    def __add__(self, other: 'MotiveClass') -> 'MotiveClass':
        return MotiveClass(self.terms + other.terms)

    def __mul__(self, other: 'MotiveClass') -> 'MotiveClass':
        return MotiveClass(tuple((p1 + p2, c1 * c2) for p1, c1 in self.terms for p2, c2 in other.terms))

    def __neg__(self) -> 'MotiveClass':
        return MotiveClass(tuple((p, -c) for p, c in self.terms))

    def twist(self, k: int) -> 'MotiveClass':
        """[X]·𝕃^k"""
        return MotiveClass(tuple((p + k, c) for p, c in self.terms))

    def evaluate(self, q) -> Fraction:
        q = as_fraction(q)
        return sum((c * q ** p for p, c in self.terms), Fraction(0))

    def counts(self, q, order: int = DEFAULT_ORDER) -> Tuple[Fraction, ...]:
        return tuple(self.evaluate(as_fraction(q) ** r) for r in range(1, order + 1))

    def counting_sequence(self, q, order: int = DEFAULT_ORDER) -> CountingSequence:
        values = self.counts(q, order)
        if any(v.denominator != 1 for v in values):
            raise DomainError("含负幂次的类没有整数点数")
        return CountingSequence(tuple(int(v) for v in values), 'formula')

    def symbolic(self, L: sympy.Symbol) -> sympy.Expr:
        return sum((c * L ** p for p, c in self.terms), sympy.Integer(0))

    def __str__(self) -> str:
        if not self.terms:
            return '0'
        return ' + '.join(f"{c}*L^{p}" for p, c in reversed(self.terms))


def zeta_of_motive(X: MotiveClass, q, order: int = DEFAULT_ORDER) -> WittVector:
    return zeta_from_counts(X.counts(q, order))


# ---------------------------------------------------------------- 点计数

def count_affine_points(n: int, p: int) -> int:
    """逐点枚举 F_p^n"""
    return sum(1 for _ in itertools.product(range(p), repeat=n))


def count_projective_points(n: int, p: int) -> int:
    """F_p^{n+1} 中首个非零坐标为 1 的向量个数"""
    total = 0
    for point in itertools.product(range(p), repeat=n + 1):
        nonzero = [x for x in point if x]
        if nonzero and nonzero[0] == 1:
            total += 1
    return total


def _is_bridge(vertices: Iterable[int], edges: Sequence[Tuple[int, int, int]], position: int) -> bool:
    g = nx.MultiGraph()
    g.add_nodes_from(vertices)
    g.add_edges_from((u, v) for _, u, v in edges)
    before = nx.number_connected_components(g)
    g = nx.MultiGraph()
    g.add_nodes_from(vertices)
    g.add_edges_from((u, v) for k, (_, u, v) in enumerate(edges) if k != position)
    return nx.number_connected_components(g) > before


def spanning_forests(graph: Graph) -> List[frozenset]:
    """删除–收缩枚举极大生成森林（边编号集合）"""

    def recurse(vertices: frozenset, edges: Tuple[Tuple[int, int, int], ...]) -> List[frozenset]:
        if not edges:
            return [frozenset()]
        index, u, v = edges[0]
        rest = edges[1:]
        if u == v:
            return recurse(vertices, rest)
        merged = tuple((j, u if a == v else a, u if b == v else b) for j, a, b in rest)
        forests = [f | {index} for f in recurse(vertices - {v}, merged)]
        if not _is_bridge(vertices, edges, 0):
            forests.extend(recurse(vertices, rest))
        return forests

    edges = tuple((i, u, v) for i, (u, v) in enumerate(graph.edges))
    return recurse(frozenset(graph.vertices), edges)


def kirchhoff_monomials(graph: Graph) -> List[Tuple[int, ...]]:
    """Ψ_Γ 的单项式：每个生成森林之外的边编号"""
    all_edges = set(range(graph.n_edges))
    return sorted(tuple(sorted(all_edges - forest)) for forest in spanning_forests(graph))


def kirchhoff_polynomial(graph: Graph) -> sympy.Expr:
    t = sympy.symbols(f't0:{max(graph.n_edges, 1)}')
    return sympy.Add(*[sympy.Mul(*[t[i] for i in mono]) for mono in kirchhoff_monomials(graph)])


class PointCount(NamedTuple):
    hypersurface: int
    complement: int
    ambient: int


def _zeros_in_slice(monomials: List[Tuple[int, ...]], n_edges: int, q: int, first: int) -> int:
    rest = n_edges - 1
    if rest:
        grid = np.stack(np.meshgrid(*[np.arange(q)] * rest, indexing='ij'), axis=-1).reshape(-1, rest)
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    points = np.hstack([np.full((grid.shape[0], 1), first, dtype=np.int64), grid.astype(np.int64)])
    total = np.zeros(points.shape[0], dtype=np.int64)
    for mono in monomials:
        term = np.ones(points.shape[0], dtype=np.int64)
        for i in mono:
            term = (term * points[:, i]) % q
        total = (total + term) % q
    return int(np.count_nonzero(total == 0))


def count_points(target: Union[MotiveClass, Graph], q: int, edge_cap: int = POINT_COUNT_EDGE_CAP,
                 prime_cap: int = POINT_COUNT_PRIME_CAP, workers: int = 1):
    """Tate 类返回整数点数；图超曲面返回 PointCount（穷举 F_q^{|E|}）"""
    if isinstance(target, MotiveClass):
        value = target.evaluate(q)
        if value.denominator != 1:
            raise DomainError(f"{target} 在 q={q} 处不是整数")
        return int(value)

    if not sympy.isprime(q):
        raise DomainError(f"q={q} 不是素数")
    if q > prime_cap:
        raise CapExceededError(f"素数 {q} 超过枚举上限 {prime_cap}")
    if target.n_edges > edge_cap:
        raise CapExceededError(f"边数 {target.n_edges} 超过点计数上限 {edge_cap}")

    ambient = q ** target.n_edges
    if target.n_edges == 0:
        # Ψ = 1，超曲面为空
        return PointCount(0, 1, 1)
    monomials = kirchhoff_monomials(target)
    slices = range(q)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            zeros = sum(pool.map(lambda x: _zeros_in_slice(monomials, target.n_edges, q, x), slices))
    else:
        zeros = sum(_zeros_in_slice(monomials, target.n_edges, q, x) for x in slices)
    logger.debug(f"{target.label()} 在 F_{q} 上: #X={zeros}, 总点数 {ambient}")
    return PointCount(zeros, ambient - zeros, ambient)


# ---------------------------------------------------------------- 推论检查

@dataclass
class ZetaCheckReport:
    motive: str
    q: int
    order: int
    residuals: Dict[str, Fraction]
    truncated_product_residual: float
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        exact = all(r == 0 for r in self.residuals.values())
        return exact and self.truncated_product_residual <= self.tolerance

    def to_dict(self) -> Dict:
        return {'motive': self.motive, 'q': self.q, 'order': self.order,
                'residuals': {k: str(v) for k, v in self.residuals.items()},
                'truncated_product_residual': self.truncated_product_residual,
                'tolerance': self.tolerance, 'passed': self.passed}


def partial_sum_equation_residual(alpha: WittVector, image: WittVector) -> Fraction:
    """(1−t)·tP′·α = t·tα′·P 逐项残差；P 为 α 的部分和当且仅当残差为 0"""
    order = _check_orders(alpha, image)
    a, p = alpha.series(), image.series()
    dp = [n * c for n, c in enumerate(p)]
    da = [n * c for n, c in enumerate(a)]
    worst = Fraction(0)
    for n in range(1, order + 1):
        lhs = sum(dp[i] * a[n - i] for i in range(n + 1)) - sum(dp[i] * a[n - 1 - i] for i in range(n))
        rhs = sum(da[i] * p[n - 1 - i] for i in range(n))
        worst = max(worst, abs(lhs - rhs))
    return worst


def twist_sum(X: MotiveClass, q, order: int, powers: Iterable[int]) -> WittVector:
    """Witt 和 Σ_k Z(X·𝕃^k)，每一项由扭转类的点数得到"""
    total = WittVector.one(order)
    for k in powers:
        total = witt_add(total, zeta_of_motive(X.twist(k), q, order))
    return total


def relative_residual(approx: WittVector, exact: WittVector) -> float:
    _check_orders(approx, exact)
    return max(float(abs(x - y) / max(Fraction(1), abs(y))) for x, y in zip(approx.coeffs, exact.coeffs))


def zeta_rb_checks(X: MotiveClass, q: int, order: int = DEFAULT_ORDER,
                   product_terms: int = DEFAULT_PRODUCT_TERMS, tolerance: float = 1e-9) -> ZetaCheckReport:
    """三组推论：部分和算子、𝕃^{±1} 乘积、以及 −id − 𝒯 的逆乘积

    右端都从扭转类的点数构造：𝒯_c(Z) = P 当且仅当 P(t) = Z(ct)·P(ct)，
    而 Z(X)(q^{±1}t) = Z(X·𝕃^{±1})。
    """
    if not isinstance(X, MotiveClass):
        raise DomainError("zeta 推论只对 Tate 类检查")
    q = int(q)
    if q < 2:
        raise DomainError("q 必须至少为 2")
    Z = zeta_of_motive(X, q, order)
    inv = Fraction(1, q)
    up = zeta_of_motive(X.twist(1), q, order)
    down = zeta_of_motive(X.twist(-1), q, order)
    negated = zeta_of_motive(-X, q, order)

    P_up, P_down = rb_q_witt(Z, q), rb_q_witt(Z, inv)
    tilde_up, tilde_down = rb_q_witt_tilde(Z, q), rb_q_witt_tilde(Z, inv)
    residuals = {
        'partial_sum': partial_sum_equation_residual(Z, rb_partial_sum_witt(Z)),
        'lefschetz_product': witt_residual(P_up, witt_add(up, witt_rescale(P_up, q))),
        'inverse_lefschetz_product': witt_residual(P_down, witt_add(down, witt_rescale(P_down, inv))),
        'tilde_lefschetz': witt_residual(tilde_up, witt_add(negated, witt_rescale(tilde_up, q))),
        'tilde_inverse_lefschetz': witt_residual(tilde_down, witt_add(negated, witt_rescale(tilde_down, inv))),
    }

    # 𝕃⁻¹ 一侧：前 K 个扭转类的 Witt 和即截断乘积，收敛到 𝒯_{1/q}(Z)
    geometric = twist_sum(X, q, order, range(-1, -product_terms - 1, -1))
    residuals['truncated_product'] = witt_residual(q_product(Z, inv, product_terms), geometric)
    truncated = relative_residual(geometric, P_down)

    report = ZetaCheckReport(str(X), q, order, residuals, truncated, tolerance)
    logger.info(f"zeta 推论检查 X={X}, q={q}: {'通过' if report.passed else '失败'}")
    return report
