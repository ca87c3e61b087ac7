"""
Rota–Baxter 算子与 Birkhoff 分解
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, logm
from scipy.special import logsumexp

from deformed_trace import as_symmetric, deformed_trace, kronecker_sum
from errors import AlgebraError, CertificationError, DomainError
from graph_hopf import Character, EdgeSubsetCoproduct, Graph, canonical_form, convolve
from thermo_semiring import (DEFAULT_SEED, INF, PointwiseSemiring, Semiring, SeriesSemiring,
                             oplus_reduce, parse_beta, residual)


ADDITIVITY_CLASSES = ('additive', 'linear-idempotent', 'superadditive', 'none')
DEFAULT_SAMPLES = 100
DEFAULT_TOLERANCE = 1e-9

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- 算子

@dataclass(frozen=True, eq=False)
class RBOperator:
    """半环上的 Rota–Baxter 算子；shadow 为其经典（指数桥另一侧）线性算子"""

    name: str
    weight: float
    semiring: Semiring
    action: Callable[[np.ndarray], np.ndarray]
    additivity: str = 'additive'
    shadow: Optional[Callable[[np.ndarray], np.ndarray]] = None
    shadow_matrix: Optional[np.ndarray] = None
    length: Optional[int] = None
    fan_in: int = 1

    def __post_init__(self):
        if self.weight == 0:
            raise DomainError("Rota–Baxter 权不能为 0")
        if self.additivity not in ADDITIVITY_CLASSES:
            raise DomainError(f"未知可加性类别: {self.additivity!r}")

    @property
    def beta(self) -> float:
        return self.semiring.beta

    @property
    def mode(self) -> str:
        return self.semiring.mode

    @property
    def beta_aware(self) -> bool:
        return self.beta != INF

    @property
    def log_weight(self) -> float:
        """恒等式中 λ 对应的平移量"""
        return self.semiring.sign * math.log(abs(self.weight))

    def __call__(self, f) -> np.ndarray:
        arr = np.asarray(f, dtype=float)
        if self.length is not None and (arr.ndim != 1 or arr.shape[0] != self.length):
            raise DomainError(f"{self.name} 需要长度 {self.length} 的元素，收到形状 {arr.shape}")
        return np.asarray(self.action(arr), dtype=float)

    def classical(self, a) -> np.ndarray:
        if self.shadow is None:
            raise DomainError(f"{self.name} 没有经典对应算子")
        return np.asarray(self.shadow(np.asarray(a, dtype=float)), dtype=float)


def _shadow_action(matrix: np.ndarray, semiring: Semiring) -> Callable[[np.ndarray], np.ndarray]:
    """非负矩阵 M 在半环侧的作用：−β⁻¹ log(M e^{−βf})，β=∞ 时为支撑上的 min"""
    sign, beta, zero = semiring.sign, semiring.beta, semiring.zero_value
    support = matrix != 0

    def act(f: np.ndarray) -> np.ndarray:
        rows = np.broadcast_to(f, matrix.shape)
        if beta == INF:
            candidates = np.where(support, rows, zero)
            return candidates.min(axis=1) if sign > 0 else candidates.max(axis=1)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            return -sign * logsumexp(-sign * beta * rows, b=matrix, axis=1) / beta

    return act


def _linear_operator(name: str, weight: float, semiring: Semiring, matrix: np.ndarray,
                     additivity: str = 'additive') -> RBOperator:
    matrix = np.asarray(matrix, dtype=float)
    fan_in = int(max(1, (matrix != 0).sum(axis=1).max()))
    return RBOperator(
        name=name,
        weight=weight,
        semiring=semiring,
        action=_shadow_action(matrix, semiring),
        additivity=additivity,
        shadow=lambda a: matrix @ a,
        shadow_matrix=matrix,
        length=matrix.shape[0],
        fan_in=fan_in,
    )


def partial_sum_rb(beta=INF, length: int = 6, mode: str = 'min') -> RBOperator:
    """(Tf)(n) = ⊕_{k<n} f(k)，首项为 ⊕ 的单位元；经典侧为 (0, a₁, a₁+a₂, …)"""
    if length < 1:
        raise DomainError("序列长度至少为 1")
    semiring = PointwiseSemiring(beta, mode)
    return _linear_operator('partial-sum', 1.0, semiring, np.tri(length, k=-1))


def q_integral_rb(q: float, beta=INF, order: int = 6, K: Optional[int] = None, mode: str = 'min',
                  allow_constant: bool = False, tolerance: float = DEFAULT_TOLERANCE) -> RBOperator:
    """截断级数上的 q-积分算子：tʲ 的系数乘以 Σ_{k=1}^{K} q^{kj}（K=None 时取闭式 qʲ/(1−qʲ)）"""
    q = float(q)
    if not 0 < abs(q) < 1:
        raise DomainError(f"q-积分需要 0 < |q| < 1，收到 q={q}")
    semiring = SeriesSemiring(beta, mode, order)
    if semiring.beta != INF and q < 0:
        raise DomainError("有限 β 下 q 必须为正，否则经典权重为负")

    j = np.arange(1, order + 1)
    weights = np.zeros(order + 1)
    if K is None:
        if allow_constant:
            raise DomainError("K→∞ 时常数模式发散，无法保留")
        weights[1:] = q ** j / (1.0 - q ** j)
    else:
        if K < 1:
            raise DomainError("截断项数 K 至少为 1")
        weights[1:] = q ** j * (1.0 - q ** (K * j)) / (1.0 - q ** j)
        if semiring.beta != INF:
            tail = -math.log1p(-abs(q) ** K) / semiring.beta
            if tail > tolerance:
                raise DomainError(f"K={K} 的截断尾项界 {tail:.3e} 超过容差 {tolerance:.1e}")
        if allow_constant:
            weights[0] = K
            logger.warning(f"q-积分保留常数模式，其值随 K={K} 发散")
    return _linear_operator(f'q-integral(q={q:g})', 1.0, semiring, np.diag(weights))


def projection_rb(mask, beta=INF, mode: str = 'min', length: Optional[int] = None) -> RBOperator:
    """乘以特征函数：被屏蔽坐标变为 ⊕ 的单位元；权 −1，线性幂等"""
    if callable(mask):
        if length is None:
            raise DomainError("谓词形式的掩码需要给出长度")
        mask = [bool(mask(i)) for i in range(length)]
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 1 or mask.size == 0:
        raise DomainError("掩码必须是非空一维数组")
    semiring = PointwiseSemiring(beta, mode)
    return _linear_operator('projection', -1.0, semiring, np.diag(mask.astype(float)), 'linear-idempotent')


def identity_rb(beta=INF, mode: str = 'min', length: Optional[int] = None) -> RBOperator:
    """恒等算子，权 −1"""
    semiring = PointwiseSemiring(beta, mode)
    return RBOperator('identity', -1.0, semiring, lambda f: f.copy(), 'linear-idempotent',
                      shadow=lambda a: a.copy(),
                      shadow_matrix=None if length is None else np.eye(length), length=length)


def reference_min_rb(reference, beta=INF, mode: str = 'min') -> RBOperator:
    """T f = f ⊕ r"""
    semiring = PointwiseSemiring(beta, mode)
    r = np.asarray(reference, dtype=float)

    def act(f: np.ndarray) -> np.ndarray:
        return semiring.oplus(np.stack(np.broadcast_arrays(f, r)))

    return RBOperator('reference-min', -1.0, semiring, act, 'additive', length=r.size if r.ndim == 1 else None)


def constant_rb(reference, beta=INF, mode: str = 'min') -> RBOperator:
    """T̃ f = r"""
    semiring = PointwiseSemiring(beta, mode)
    r = np.asarray(reference, dtype=float)
    return RBOperator('constant', -1.0, semiring, lambda f: np.broadcast_to(r, f.shape).copy(), 'additive',
                      length=r.size if r.ndim == 1 else None)


# ---------------------------------------------------------------- 认证

class IdentityCheck(NamedTuple):
    name: str
    residual: float
    holds: bool
    counterexample: Optional[Tuple] = None


def rb_identity_residual(T: RBOperator, f1, f2) -> float:
    """对一对元素计算 RB 恒等式两侧的偏差（按权的符号选取形式）"""
    S = T.semiring
    t1, t2 = T(f1), T(f2)
    if T.weight > 0:
        lhs = S.odot(t1, t2)
        rhs = S.oplus(np.stack([T(S.odot(t1, f2)), T(S.odot(f1, t2)),
                                T(S.odot(f1, f2)) + T.log_weight]))
    else:
        lhs = S.oplus(np.stack([S.odot(t1, t2), T(S.odot(f1, f2)) + T.log_weight]))
        rhs = S.oplus(np.stack([T(S.odot(t1, f2)), T(S.odot(f1, t2))]))
    return residual(lhs, rhs)


def _sample_pairs(T: RBOperator, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        yield (np.asarray(T.semiring.random_element(rng, T.length), dtype=float),
               np.asarray(T.semiring.random_element(rng, T.length), dtype=float))


def _sampled(name: str, T: RBOperator, measure: Callable[[np.ndarray, np.ndarray], float],
             samples: int, seed: int, tolerance: float) -> IdentityCheck:
    worst, witness = 0.0, None
    for f1, f2 in _sample_pairs(T, samples, seed):
        value = measure(f1, f2)
        if value > worst:
            worst, witness = value, (f1.tolist(), f2.tolist())
    holds = worst <= tolerance
    return IdentityCheck(name, worst, holds, None if holds else witness)


def certify_operator(T: RBOperator, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                     tolerance: float = DEFAULT_TOLERANCE, raise_on_failure: bool = True) -> IdentityCheck:
    """在随机样本上验证算子声明的 RB 恒等式"""
    check = _sampled(f'rb-identity[{T.name}]', T, lambda a, b: rb_identity_residual(T, a, b),
                     samples, seed, tolerance)
    logger.info(f"算子 {T.name} (λ={T.weight}, β={T.beta}) RB 残差 {check.residual:.3e}")
    if not check.holds and raise_on_failure:
        raise CertificationError(f"算子 {T.name} 不满足权 {T.weight} 的 RB 恒等式",
                                 residual=check.residual, counterexample=check.counterexample)
    return check


def _signed_gap(a, b, sign: int) -> float:
    """max sign·(a − b)，同号无穷视为 0"""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    same = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid='ignore'):
        gap = np.where(same, 0.0, sign * (a - b))
    return float(np.max(gap)) if gap.size else 0.0


def check_superadditivity(T: RBOperator, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                          tolerance: float = DEFAULT_TOLERANCE) -> IdentityCheck:
    """T(f₁⊙f₂) ≥ T(f₁)⊙T(f₂)（max-plus 下反向）"""
    S = T.semiring
    return _sampled('superadditivity', T,
                    lambda a, b: _signed_gap(S.odot(T(a), T(b)), T(S.odot(a, b)), S.sign),
                    samples, seed, tolerance)


def check_subadditivity(T: RBOperator, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                        tolerance: float = DEFAULT_TOLERANCE) -> IdentityCheck:
    S = T.semiring
    return _sampled('subadditivity', T,
                    lambda a, b: _signed_gap(T(S.odot(a, b)), S.odot(T(a), T(b)), S.sign),
                    samples, seed, tolerance)


def check_monotone(T: RBOperator, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                   tolerance: float = DEFAULT_TOLERANCE) -> IdentityCheck:
    """⊕-可加性 T(f₁⊕f₂) = T(f₁)⊕T(f₂)"""
    S = T.semiring
    return _sampled('oplus-additivity', T,
                    lambda a, b: residual(T(S.oplus(np.stack([a, b]))), S.oplus(np.stack([T(a), T(b)]))),
                    samples, seed, tolerance)


# ---------------------------------------------------------------- 分解引擎

class FactorizationRow(NamedTuple):
    graph: Graph
    prepared: Any
    minus: Any
    plus: Any
    paths: int


class FactorizationSession:
    """单次分解的备忘录；ψ̃、ψ₋、ψ₊ 按分次递归求值"""

    def __init__(self, psi: Character, T: RBOperator, scheme=None,
                 positive_operator: Optional[RBOperator] = None):
        if psi.mode != T.mode:
            raise DomainError(f"特征标模式 {psi.mode} 与算子模式 {T.mode} 不一致")
        self.psi = psi
        self.T = T
        self.positive_operator = positive_operator
        self.semiring = T.semiring
        self.scheme = scheme or EdgeSubsetCoproduct()
        self.dedup = psi.invariant
        self._terms: Dict[Any, list] = {}
        self._prepared: Dict[Any, Any] = {}
        self._minus: Dict[Any, Any] = {}
        self._plus: Dict[Any, Any] = {}
        self._paths: Dict[Any, Tuple[int, int, int]] = {}

    def _key(self, graph: Graph):
        return self.psi.key(graph)

    def unit(self):
        return self.psi.unit(self.semiring)

    def character(self, graph: Graph):
        return self.psi.value(graph, self.semiring)

    def terms(self, graph: Graph) -> list:
        key = self._key(graph)
        if key not in self._terms:
            self._terms[key] = self.scheme.terms(graph, dedup=self.dedup)
        return self._terms[key]

    def prepared(self, graph: Graph):
        graph = self.scheme.normalize(graph)
        if graph.is_empty:
            return self.unit()
        key = self._key(graph)
        if key in self._prepared:
            return self._prepared[key]

        S = self.semiring
        degree = self.scheme.degree(graph)
        values = [np.asarray(self.character(graph), dtype=float)]
        weights = [1]
        for term in self.terms(graph):
            if self.scheme.degree(term.left) >= degree or self.scheme.degree(term.right) >= degree:
                raise AlgebraError(f"内部错误：余乘项没有降低分次 ({graph.label()})")
            values.append(np.asarray(S.odot(self.minus(term.left), self.character(term.right)), dtype=float))
            weights.append(term.multiplicity)
        result = S.oplus(np.stack(values), weights)
        self._prepared[key] = result
        logger.debug(f"ψ̃({graph.label()}) 由 {len(values)} 项得到")
        return result

    def minus(self, graph: Graph):
        graph = self.scheme.normalize(graph)
        if graph.is_empty:
            return self.unit()
        key = self._key(graph)
        if key not in self._minus:
            self._minus[key] = self.T(self.prepared(graph))
        return self._minus[key]

    def plus(self, graph: Graph):
        graph = self.scheme.normalize(graph)
        if graph.is_empty:
            return self.unit()
        key = self._key(graph)
        if key not in self._plus:
            if self.positive_operator is not None:
                self._plus[key] = self.positive_operator(self.prepared(graph))
            else:
                self._plus[key] = self.semiring.oplus(np.stack([
                    np.asarray(self.minus(graph), dtype=float),
                    np.asarray(self.prepared(graph), dtype=float),
                ]))
        return self._plus[key]

    def path_counts(self, graph: Graph) -> Tuple[int, int, int]:
        """完全展开后 log-sum-exp 的项数 (ψ̃, ψ₋, ψ₊)，给出 β→∞ 收敛界 log(M)/β"""
        graph = self.scheme.normalize(graph)
        if graph.is_empty:
            return 1, 1, 1
        key = self._key(graph)
        if key not in self._paths:
            prepared = 1 + sum(t.multiplicity * self.path_counts(t.left)[1] for t in self.terms(graph))
            minus = self.T.fan_in * prepared
            if self.positive_operator is not None:
                plus = self.positive_operator.fan_in * prepared
            else:
                plus = minus + prepared
            self._paths[key] = (prepared, minus, plus)
        return self._paths[key]

    def minus_character(self) -> Character:
        return Character(f'{self.psi.name}-', self.minus, self.psi.mode, self.psi.invariant,
                         per_component=False, length=self.psi.length)

    def plus_character(self) -> Character:
        return Character(f'{self.psi.name}+', self.plus, self.psi.mode, self.psi.invariant,
                         per_component=False, length=self.psi.length)

    def row(self, graph: Graph) -> FactorizationRow:
        return FactorizationRow(graph, self.prepared(graph), self.minus(graph), self.plus(graph),
                                max(self.path_counts(graph)))


def _jsonable(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr.tolist()


@dataclass
class FactorizationResult:
    """分解表与认证残差"""

    operator: str
    beta: float
    mode: str
    rows: List[FactorizationRow]
    residuals: Dict[str, float] = field(default_factory=dict)
    checks: Dict[str, IdentityCheck] = field(default_factory=dict)

    def row_for(self, graph: Graph) -> FactorizationRow:
        form = canonical_form(graph.drop_isolated())
        for row in self.rows:
            if row.graph == graph or canonical_form(row.graph.drop_isolated()) == form:
                return row
        raise KeyError(graph.label())

    def table(self) -> List[Dict]:
        return [{
            'graph': row.graph.label(),
            'prepared': _jsonable(row.prepared),
            'minus': _jsonable(row.minus),
            'plus': _jsonable(row.plus),
            'paths': row.paths,
        } for row in self.rows]

    def to_dict(self) -> Dict:
        return {
            'operator': self.operator,
            'beta': self.beta,
            'mode': self.mode,
            'table': self.table(),
            'residuals': dict(self.residuals),
            'checks': {name: {'residual': c.residual, 'holds': c.holds} for name, c in self.checks.items()},
        }


def _fold_components(session: FactorizationSession, graph: Graph, getter):
    total = session.unit()
    for comp in session.scheme.normalize(graph).components():
        total = session.semiring.odot(total, getter(comp))
    return total


def _session_residuals(session: FactorizationSession, graphs: Sequence[Graph]) -> Dict[str, float]:
    """ψ₊ = ψ₋ ⋆ ψ 以及 ψ± 在不交并上的可乘性"""
    minus_char = session.minus_character()
    worst = {'factorization': 0.0, 'multiplicativity_minus': 0.0, 'multiplicativity_plus': 0.0}
    for graph in graphs:
        conv = convolve(minus_char, session.psi, graph, scheme=session.scheme, semiring=session.semiring)
        worst['factorization'] = max(worst['factorization'], residual(session.plus(graph), conv))
        if len(session.scheme.normalize(graph).components()) > 1:
            worst['multiplicativity_minus'] = max(worst['multiplicativity_minus'], residual(
                session.minus(graph), _fold_components(session, graph, session.minus)))
            worst['multiplicativity_plus'] = max(worst['multiplicativity_plus'], residual(
                session.plus(graph), _fold_components(session, graph, session.plus)))
    return worst


def _raise_on_residuals(residuals: Dict[str, float], tolerance: float, context: str):
    for name, value in residuals.items():
        if value > tolerance:
            raise CertificationError(f"{context}: {name} 残差 {value:.3e} 超过容差 {tolerance:.1e}",
                                     residual=value, check=name)


def _check_beta(T: RBOperator, beta):
    if beta is not None and parse_beta(beta) != T.beta:
        raise DomainError(f"请求的 β={beta} 与算子的 β={T.beta} 不一致")


def factorize(psi: Character, T: RBOperator, graphs: Iterable[Graph], beta=None, scheme=None,
              tolerance: float = DEFAULT_TOLERANCE, samples: int = DEFAULT_SAMPLES,
              seed: int = DEFAULT_SEED) -> FactorizationResult:
    """权 +1 的 Birkhoff 分解：ψ₋ = T(ψ̃)，ψ₊ = ψ₋ ⊕ ψ̃"""
    if T.weight != 1:
        raise DomainError(f"factorize 需要权 +1 的算子，{T.name} 的权为 {T.weight}")
    _check_beta(T, beta)
    graphs = list(graphs)
    checks = {}
    if samples:
        checks['rb_identity'] = certify_operator(T, samples, seed, tolerance)
        checks['oplus_additivity'] = check_monotone(T, samples, seed, tolerance)
        if not checks['oplus_additivity'].holds:
            raise CertificationError(f"算子 {T.name} 不是 ⊕-可加的",
                                     residual=checks['oplus_additivity'].residual,
                                     counterexample=checks['oplus_additivity'].counterexample)

    session = FactorizationSession(psi, T, scheme)
    rows = [session.row(g) for g in graphs]
    residuals = _session_residuals(session, graphs)
    _raise_on_residuals(residuals, tolerance, f"{psi.name} 在 {T.name} 下的分解")
    logger.info(f"分解完成：{len(rows)} 个图，算子 {T.name}，β={T.beta}")
    return FactorizationResult(T.name, T.beta, T.mode, rows, residuals, checks)


def factorize_minus1(psi: Character, T: RBOperator, graphs: Iterable[Graph], scheme=None,
                     tolerance: float = DEFAULT_TOLERANCE, samples: int = DEFAULT_SAMPLES,
                     seed: int = DEFAULT_SEED) -> FactorizationResult:
    """权 −1 的分解（仅 β=∞），可乘性依赖于超可加性"""
    if T.weight != -1:
        raise DomainError(f"factorize_minus1 需要权 −1 的算子，{T.name} 的权为 {T.weight}")
    if T.beta != INF:
        raise DomainError("权 −1 的分解只在 β = ∞ 下定义")
    graphs = list(graphs)
    checks = {}
    if samples:
        checks['rb_identity'] = certify_operator(T, samples, seed, tolerance)
        sup = check_superadditivity(T, samples, seed, tolerance)
        checks['superadditivity'] = sup
        if not sup.holds:
            raise CertificationError(f"算子 {T.name} 不满足超可加性", residual=sup.residual,
                                     counterexample=sup.counterexample)

    session = FactorizationSession(psi, T, scheme)
    rows = [session.row(g) for g in graphs]
    residuals = _session_residuals(session, graphs)
    _raise_on_residuals(residuals, tolerance, f"{psi.name} 在 {T.name} 下的权 −1 分解")
    logger.info(f"权 −1 分解完成：{len(rows)} 个图，算子 {T.name}，模式 {T.mode}")
    return FactorizationResult(T.name, T.beta, T.mode, rows, residuals, checks)


def factorize_pair(psi: Character, T: RBOperator, Ttilde: RBOperator, graphs: Iterable[Graph], scheme=None,
                   tolerance: float = DEFAULT_TOLERANCE, samples: int = DEFAULT_SAMPLES,
                   seed: int = DEFAULT_SEED) -> FactorizationResult:
    """算子对分解：ψ₋ = T ψ̃，ψ₊ = T̃ ψ̃；前提 T α = α ⊕ T̃ α"""
    for op in (T, Ttilde):
        if op.weight != -1:
            raise DomainError(f"算子对要求权 −1，{op.name} 的权为 {op.weight}")
        if op.beta != INF:
            raise DomainError("算子对分解只在 β = ∞ 下定义")
    if T.mode != Ttilde.mode:
        raise DomainError("算子对模式不一致")
    S = T.semiring
    graphs = list(graphs)

    relation = _sampled('pair-relation', T,
                        lambda a, b: residual(T(a), S.oplus(np.stack([a, Ttilde(a)]))),
                        max(samples, 1), seed, tolerance)
    if not relation.holds:
        raise CertificationError("算子对不满足 T α = α ⊕ T̃ α", residual=relation.residual,
                                 counterexample=relation.counterexample)

    def mixed(a, b):
        lhs = S.oplus(np.stack([Ttilde(S.odot(a, b)), S.odot(Ttilde(a), Ttilde(b))]))
        rhs = Ttilde(S.oplus(np.stack([S.odot(T(a), b), S.odot(a, T(b))])))
        return residual(lhs, rhs)

    checks = {'pair_relation': relation}
    if samples:
        checks['rb_identity_T'] = certify_operator(T, samples, seed, tolerance, raise_on_failure=False)
        checks['rb_identity_Ttilde'] = certify_operator(Ttilde, samples, seed, tolerance, raise_on_failure=False)
        checks['mixed_identity'] = _sampled('mixed-identity', T, mixed, samples, seed, tolerance)
        for name, op in (('T', T), ('Ttilde', Ttilde)):
            checks[f'superadditivity_{name}'] = check_superadditivity(op, samples, seed, tolerance)
            checks[f'subadditivity_{name}'] = check_subadditivity(op, samples, seed, tolerance)

    session = FactorizationSession(psi, T, scheme, positive_operator=Ttilde)
    rows = [session.row(g) for g in graphs]
    consistency = 0.0
    for row in rows:
        consistency = max(consistency, residual(row.minus, S.oplus(np.stack([
            np.asarray(row.prepared, dtype=float), np.asarray(row.plus, dtype=float)]))))
    if consistency > tolerance:
        raise CertificationError("ψ₋ = ψ̃ ⊕ ψ₊ 不成立", residual=consistency)

    residuals = _session_residuals(session, graphs)
    residuals['consistency'] = consistency
    survived = [name for name, c in checks.items() if c.holds]
    logger.info(f"算子对分解完成，成立的恒等式: {', '.join(survived)}")
    return FactorizationResult(f'{T.name}/{Ttilde.name}', T.beta, T.mode, rows, residuals, checks)


def prepare(psi: Character, T: RBOperator, graph: Graph, beta=None, scheme=None):
    """单个图的预备值 ψ̃(Γ)"""
    _check_beta(T, beta)
    return FactorizationSession(psi, T, scheme).prepared(graph)


# ---------------------------------------------------------------- 经典对照

class ClassicalRow(NamedTuple):
    graph: Graph
    prepared: np.ndarray
    minus: np.ndarray
    plus: np.ndarray


def classical_birkhoff_oracle(phi: Callable[[Graph], Any], calT, weight: int, graphs: Iterable[Graph],
                              scheme=None, ring: Optional[Semiring] = None,
                              invariant: bool = True) -> List[ClassicalRow]:
    """普通实数序列/级数上的经典递归，作为指数共轭检查的独立对照"""
    if weight not in (1, -1):
        raise DomainError(f"经典对照只支持权 ±1，收到 {weight}")
    if isinstance(calT, RBOperator):
        calT = calT.classical
    scheme = scheme or EdgeSubsetCoproduct()
    ring = ring or PointwiseSemiring()
    key = canonical_form if invariant else Graph.labeled_key
    memo: Dict[Any, Tuple[np.ndarray, np.ndarray]] = {}

    def value(graph: Graph) -> np.ndarray:
        return np.asarray(phi(graph), dtype=float)

    def unit(like) -> np.ndarray:
        return np.asarray(ring.classical_one(like), dtype=float)

    def solve(graph: Graph) -> Tuple[np.ndarray, np.ndarray]:
        graph = scheme.normalize(graph)
        k = key(graph)
        if k in memo:
            return memo[k]
        prepared = value(graph).copy()
        for term in scheme.terms(graph, dedup=invariant):
            left = scheme.normalize(term.left)
            minus_left = solve(left)[1] if not left.is_empty else unit(prepared)
            prepared = prepared + term.multiplicity * np.asarray(
                ring.classical_mul(minus_left, value(term.right)), dtype=float)
        projected = np.asarray(calT(prepared), dtype=float)
        minus = projected if weight == 1 else -projected
        memo[k] = (prepared, minus)
        return memo[k]

    rows = []
    for graph in graphs:
        prepared, minus = solve(graph)
        plus = minus + prepared if weight == 1 else prepared - np.asarray(calT(prepared), dtype=float)
        rows.append(ClassicalRow(graph, prepared, minus, plus))
    return rows


@dataclass
class ExpConjugationReport:
    beta: float
    residuals: Dict[str, float]
    linearity_residual: float
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance and self.linearity_residual <= self.tolerance

    def raise_for_failure(self):
        if not self.passed:
            raise CertificationError("热力学分解与经典分解的 −β⁻¹log 不一致",
                                     residual=max(self.max_residual, self.linearity_residual),
                                     per_graph=self.residuals)

    def to_dict(self) -> Dict:
        return {'beta': self.beta, 'residuals': self.residuals, 'max_residual': self.max_residual,
                'linearity_residual': self.linearity_residual, 'passed': self.passed}


def exp_conjugation_check(psi: Character, T: RBOperator, beta, graphs: Iterable[Graph], scheme=None,
                          tolerance: float = 1e-8, seed: int = DEFAULT_SEED) -> ExpConjugationReport:
    """比较 ψ_{β,±} 与经典分解 φ_{β,±} 的 −β⁻¹ log"""
    beta = parse_beta(beta)
    if beta == INF:
        raise DomainError("指数共轭检查需要有限 β")
    _check_beta(T, beta)
    if T.weight != 1:
        raise DomainError("指数共轭检查需要权 +1 的算子")
    S = T.semiring
    graphs = list(graphs)
    session = FactorizationSession(psi, T, scheme)
    classical = classical_birkhoff_oracle(lambda g: S.to_classical(psi.value(g, S)), T, 1, graphs,
                                          session.scheme, S, psi.invariant)

    residuals = {}
    for row in classical:
        residuals[row.graph.label()] = max(
            residual(session.prepared(row.graph), S.from_classical(row.prepared)),
            residual(session.minus(row.graph), S.from_classical(row.minus)),
            residual(session.plus(row.graph), S.from_classical(row.plus)),
        )

    rng = np.random.default_rng(seed)
    f = np.asarray(S.random_element(rng, T.length), dtype=float)
    c = float(rng.uniform(-2.0, 2.0))
    linearity = residual(T(f + c), T(f) + c)

    report = ExpConjugationReport(beta, residuals, linearity, tolerance)
    logger.info(f"指数共轭检查 β={beta}: 最大残差 {report.max_residual:.3e}")
    return report


# ---------------------------------------------------------------- 矩阵恒等式

@dataclass
class MatrixRBReport:
    residual: float
    tropical_gap: float
    bound: float
    coordinates: List[Tuple[float, float]]

    def to_dict(self) -> Dict:
        return {'residual': self.residual, 'tropical_gap': self.tropical_gap, 'bound': self.bound,
                'coordinates': [list(c) for c in self.coordinates]}


def _trace_value(matrix: np.ndarray, beta: float) -> float:
    total = float(np.trace(matrix))
    return INF if total <= 0 else -math.log(total) / beta


def _matrix_sequence(X, n: int, name: str) -> List[np.ndarray]:
    """单个矩阵视为常数序列，或给出 n 个矩阵组成的序列"""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        return [as_symmetric(arr)] * n
    if arr.ndim == 3 and arr.shape[0] == n:
        return [as_symmetric(x) for x in arr]
    raise DomainError(f"{name} 需要一个方阵或 {n} 个方阵，收到形状 {arr.shape}")


def matrix_rb_check(A, B, T: RBOperator, beta) -> MatrixRBReport:
    """逐坐标算子作用于矩阵序列，比较形变迹版 RB 恒等式两侧

    A、B 可以是单个对称矩阵（常数序列），也可以是与算子等长的矩阵序列。
    """
    beta = parse_beta(beta)
    if beta == INF:
        raise DomainError("矩阵恒等式检查需要有限 β")
    if T.shadow_matrix is None or T.semiring.kind != 'pointwise' or T.weight != 1:
        raise DomainError(f"{T.name} 不是逐坐标的权 +1 线性算子")
    M = T.shadow_matrix
    n = M.shape[0]
    As, Bs = _matrix_sequence(A, n, 'A'), _matrix_sequence(B, n, 'B')
    if len({x.shape for x in As}) != 1 or len({x.shape for x in Bs}) != 1:
        raise DomainError("序列中的矩阵维数不一致")

    EA = [expm(-beta * x) for x in As]
    EB = [expm(-beta * x) for x in Bs]
    TA = [sum(M[i, k] * EA[k] for k in range(n)) for i in range(n)]
    TB = [sum(M[i, k] * EB[k] for k in range(n)) for i in range(n)]

    coords, worst, gap = [], 0.0, 0.0
    for i in range(n):
        if not np.any(M[i]):
            coords.append((INF, INF))
            continue
        # 左侧：显式对数矩阵后走特征值路径
        logA = -np.real(logm(TA[i])) / beta
        logB = -np.real(logm(TB[i])) / beta
        if not (np.all(np.isfinite(logA)) and np.all(np.isfinite(logB))):
            raise DomainError("矩阵元素不在指数桥的可表示范围内")
        lhs = deformed_trace(kronecker_sum((logA + logA.T) / 2, (logB + logB.T) / 2), beta, require_psd=False)

        # 右侧：三项的迹直接由矩阵指数计算
        terms = [
            _trace_value(sum(M[i, k] * np.kron(EA[k], TB[k]) for k in range(n)), beta),
            _trace_value(sum(M[i, k] * np.kron(TA[k], EB[k]) for k in range(n)), beta),
            _trace_value(sum(M[i, k] * np.kron(EA[k], EB[k]) for k in range(n)), beta),
        ]
        rhs = oplus_reduce(terms, beta)
        coords.append((lhs, rhs))
        worst = max(worst, residual(lhs, rhs))
        gap = max(gap, residual(rhs, min(terms)))

    return MatrixRBReport(worst, gap, math.log(3.0) / beta, coords)
