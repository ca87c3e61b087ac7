"""
应用：最近邻势与 Markov 随机场、步数计数、图超曲面的多项式可数性
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from birkhoff import FactorizationSession, RBOperator, partial_sum_rb
from errors import CapExceededError, DomainError, ParseError
from graph_hopf import (Character, CoproductTerm, EdgeSubsetCoproduct, Graph, canonical_form,
                        table_character)
from thermo_semiring import DEFAULT_SEED, INF, parse_beta
from witt_ring import POINT_COUNT_EDGE_CAP, POINT_COUNT_PRIME_CAP, count_points


FAMILY_VERTEX_CAP = 12
MAX_COUNTEREXAMPLES = 5

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- 诱导子图族

def induced_family(host: Graph, vertex_cap: int = FAMILY_VERTEX_CAP) -> List[Graph]:
    """宿主图的全部诱导子图，每个顶点子集一个"""
    if host.n_vertices > vertex_cap:
        raise CapExceededError(f"顶点数 {host.n_vertices} 超过诱导子图族上限 {vertex_cap}")
    family = []
    for size in range(host.n_vertices + 1):
        for subset in combinations(host.vertices, size):
            family.append(host.induced(subset))
    return family


def neighbors(host: Graph, v: int) -> FrozenSet[int]:
    """∂(v)：与 v 相邻的顶点（不含 v 本身）"""
    found = set()
    for a, b in host.edges:
        if a == v and b != v:
            found.add(b)
        elif b == v and a != v:
            found.add(a)
    return frozenset(found)


def _applicable_pairs(host: Graph):
    """所有 (A, v)，v ∉ A"""
    for size in range(host.n_vertices):
        for subset in combinations(host.vertices, size):
            members = frozenset(subset)
            for v in host.vertices:
                if v not in members:
                    yield members, v


class InducedFamilyCoproduct:
    """限制在诱导子图族上的余乘：γ = host[B]，商等同于 host[A∖B]，按顶点数分次"""

    name = 'induced-family'

    def __init__(self, host: Graph):
        self.host = host

    def degree(self, graph: Graph) -> int:
        return graph.n_vertices

    def normalize(self, graph: Graph) -> Graph:
        return graph

    def terms(self, graph: Graph, dedup: bool = True) -> List[CoproductTerm]:
        vertices = graph.vertices
        result = []
        for size in range(1, len(vertices)):
            for subset in combinations(vertices, size):
                rest = [v for v in vertices if v not in subset]
                result.append(CoproductTerm(self.host.induced(subset), self.host.induced(rest)))
        return result


# ---------------------------------------------------------------- 势与随机场

@dataclass(frozen=True)
class NearestNeighborPotential:
    host: Graph
    evaluator: Callable[[Graph], float]
    name: str = 'potential'

    def __call__(self, graph: Graph) -> float:
        return float(self.evaluator(graph))

    def on_vertices(self, vertices: Iterable[int]) -> float:
        return self(self.host.induced(vertices))


def _cost(costs, label, kind: str) -> float:
    if not isinstance(costs, Mapping):
        return float(costs)
    for key in (label, str(label)):
        if key in costs:
            return float(costs[key])
    if 'default' in costs:
        return float(costs['default'])
    raise DomainError(f"缺少{kind} {label} 的代价")


def vertex_cost_potential(host: Graph, costs: Union[float, Mapping] = 1.0) -> NearestNeighborPotential:
    """W(Γ) = Σ_{v∈V(Γ)} c_v"""
    return NearestNeighborPotential(host, lambda g: sum(_cost(costs, v, '顶点') for v in g.vertices),
                                    'vertex-cost')


def pair_potential(host: Graph, vertex_costs: Union[float, Mapping] = 0.0,
                   coupling: Union[float, Mapping] = 1.0) -> NearestNeighborPotential:
    """W(Γ) = Σ_v c_v + Σ_{e∈E(Γ)} J_e，边标签写作 'u-v'"""

    def evaluate(g: Graph) -> float:
        total = sum(_cost(vertex_costs, v, '顶点') for v in g.vertices)
        return total + sum(_cost(coupling, f"{u}-{v}", '边') for u, v in g.edges)

    return NearestNeighborPotential(host, evaluate, 'pair')


def potential_from_json(host: Graph, data: Mapping) -> NearestNeighborPotential:
    """{"vertex_costs": {...} | 数值, "coupling": {...} | 数值}"""
    if not isinstance(data, Mapping):
        raise ParseError("势的 JSON 必须是对象")
    if 'coupling' in data:
        return pair_potential(host, data.get('vertex_costs', 0.0), data['coupling'])
    return vertex_cost_potential(host, data.get('vertex_costs', 1.0))


@dataclass(frozen=True)
class MarkovField:
    """π > 0；若由势导出则保留对数形式 −βW 以免下溢"""

    host: Graph
    evaluator: Callable[[Graph], float]
    beta: Optional[float] = None
    log_evaluator: Optional[Callable[[Graph], float]] = None

    @classmethod
    def from_potential(cls, W: NearestNeighborPotential, beta) -> 'MarkovField':
        beta = parse_beta(beta)
        if beta == INF:
            raise DomainError("π_β = e^{−βW} 需要有限 β")
        return cls(W.host, lambda g: math.exp(-beta * W(g)), beta, lambda g: -beta * W(g))

    def log_value(self, graph: Graph) -> float:
        if self.log_evaluator is not None:
            return float(self.log_evaluator(graph))
        value = float(self.evaluator(graph))
        if not value > 0:
            raise DomainError(f"π({graph.label()}) = {value} 不是正数")
        return math.log(value)


class LocalityReport(NamedTuple):
    holds: bool
    worst_residual: float
    checked: int
    counterexamples: List[Tuple[List[int], int]]


def nn_check(W: NearestNeighborPotential, tolerance: float = 1e-12) -> LocalityReport:
    """W(Γ∪{v}) − W(Γ) = W((Γ∩∂v)∪{v}) − W(Γ∩∂v)，对全部 (Γ, v) 穷举"""
    return _locality_check(W.host, W.on_vertices, tolerance, 'W')


def markov_check(pi: MarkovField, tolerance: float = 1e-12) -> LocalityReport:
    """π(Γ∪{v})/π(Γ) = π((Γ∩∂v)∪{v})/π(Γ∩∂v)，残差为比值的相对偏差"""
    host = pi.host

    def log_pi(vertices):
        return pi.log_value(host.induced(vertices))

    for graph in induced_family(host):
        log_pi(graph.vertices)
    return _locality_check(host, log_pi, tolerance, 'π', relative=True)


def _locality_check(host: Graph, value: Callable[[Iterable[int]], float], tolerance: float, name: str,
                    relative: bool = False) -> LocalityReport:
    cache: Dict[FrozenSet[int], float] = {}

    def at(vertices) -> float:
        key = frozenset(vertices)
        if key not in cache:
            cache[key] = value(key)
        return cache[key]

    worst, checked, witnesses = 0.0, 0, []
    for members, v in _applicable_pairs(host):
        local = members & neighbors(host, v)
        lhs = at(members | {v}) - at(members)
        rhs = at(local | {v}) - at(local)
        gap = abs(math.expm1(lhs - rhs)) if relative else abs(lhs - rhs)
        checked += 1
        if gap > tolerance and len(witnesses) < MAX_COUNTEREXAMPLES:
            witnesses.append((sorted(members), v))
        worst = max(worst, gap)
    holds = worst <= tolerance
    if not holds:
        logger.warning(f"{name} 的局部性在 {len(witnesses)} 个以上的 (Γ, v) 上不成立，最大残差 {worst:.3e}")
    return LocalityReport(holds, worst, checked, witnesses)


@dataclass
class PotentialFactorization:
    family: List[Graph]
    minus: Dict[str, np.ndarray]
    plus: Dict[str, np.ndarray]
    vertex_only: bool
    checks: Dict[str, LocalityReport] = field(default_factory=dict)
    skipped_coordinates: Dict[str, List[int]] = field(default_factory=dict)
    session: Optional[FactorizationSession] = None

    @property
    def passed(self) -> bool:
        return all(r.holds for r in self.checks.values())

    def to_dict(self) -> Dict:
        return {
            'minus': {k: v.tolist() for k, v in self.minus.items()},
            'plus': {k: v.tolist() for k, v in self.plus.items()},
            'vertex_only': self.vertex_only,
            'checks': {k: {'holds': r.holds, 'worst_residual': r.worst_residual} for k, r in self.checks.items()},
            'skipped_coordinates': self.skipped_coordinates,
            'passed': self.passed,
        }


def _is_vertex_only(W: NearestNeighborPotential, tolerance: float) -> bool:
    """W 在顶点上可加，即没有相互作用项"""
    base = W.on_vertices(())
    singles = {v: W.on_vertices((v,)) - base for v in W.host.vertices}
    for graph in induced_family(W.host):
        expected = base + sum(singles[v] for v in graph.vertices)
        if abs(W(graph) - expected) > tolerance:
            return False
    return True


def factorize_potential(W: NearestNeighborPotential, T: Optional[RBOperator] = None, beta=None,
                        tolerance: float = 1e-9) -> PotentialFactorization:
    """对诱导子图族做形变分解，并对 π_{β,±} = e^{−βW±} 逐坐标做 Markov 检查"""
    T = T or partial_sum_rb(beta if beta is not None else 1.0)
    if beta is not None and parse_beta(beta) != T.beta:
        raise DomainError(f"请求的 β={beta} 与算子的 β={T.beta} 不一致")
    if T.length is None:
        raise DomainError("势的分解需要序列型算子")
    host = W.host
    family = induced_family(host)
    vertex_only = _is_vertex_only(W, tolerance)
    if not vertex_only:
        logger.warning(f"势 {W.name} 不只依赖顶点集，Markov 性质不能保证")

    base = W.on_vertices(())
    length = T.length
    psi = Character(f'potential[{W.name}]', lambda g: np.full(length, W(g) - base), T.mode,
                    invariant=False, per_component=False, length=length)
    session = FactorizationSession(psi, T, InducedFamilyCoproduct(host))

    minus = {g.label(): np.asarray(session.minus(g), dtype=float) for g in family}
    plus = {g.label(): np.asarray(session.plus(g), dtype=float) for g in family}
    result = PotentialFactorization(family, minus, plus, vertex_only, session=session)

    check_beta = T.beta if T.beta != INF else 1.0
    for side, table in (('minus', minus), ('plus', plus)):
        skipped = []
        for n in range(length):
            column = {label: values[n] for label, values in table.items()}
            if not all(np.isfinite(list(column.values()))):
                skipped.append(n)
                continue
            field_n = MarkovField(host, lambda g, c=column: math.exp(-check_beta * c[g.label()]), check_beta,
                                  lambda g, c=column: -check_beta * c[g.label()])
            result.checks[f'{side}[{n}]'] = markov_check(field_n, tolerance)
        result.skipped_coordinates[side] = skipped
    logger.info(f"势分解完成：{len(family)} 个诱导子图，Markov 检查 {'通过' if result.passed else '失败'}")
    return result


# ---------------------------------------------------------------- 多项式可数性

@dataclass
class PolyCountReport:
    graph: str
    primes: List[int]
    counts: List[int]
    polynomial: Optional[str]
    psi: float
    components: List[Dict] = field(default_factory=list)
    product_law: Optional[bool] = None

    @property
    def verdict(self) -> str:
        return 'consistent with polynomial' if self.polynomial is not None else 'not polynomial'

    def to_dict(self) -> Dict:
        return {'graph': self.graph, 'primes': self.primes, 'counts': self.counts,
                'polynomial': self.polynomial, 'psi': self.psi, 'verdict': self.verdict,
                'components': self.components, 'product_law': self.product_law}


Q = sympy.Symbol('q')


def _fit_counts(primes: Sequence[int], counts: Sequence[int], degree_bound: int) -> Optional[sympy.Poly]:
    """前 degree_bound+1 个点插值，其余点验证；系数必须为整数"""
    head = list(zip(primes, counts))[:degree_bound + 1]
    poly = sympy.Poly(sympy.interpolate(head, Q), Q)
    if not all(c.is_Integer for c in poly.all_coeffs()):
        return None
    if any(poly.eval(p) != n for p, n in zip(primes, counts)):
        return None
    return poly


def polycount(graph: Graph, primes: Sequence[int], edge_cap: int = POINT_COUNT_EDGE_CAP,
              prime_cap: int = POINT_COUNT_PRIME_CAP, workers: int = 1) -> PolyCountReport:
    """N(Y_Γ, q) 按分量计数并做整数插值；ψ(Γ) 为次数，非多项式时为 −∞"""
    primes = [int(p) for p in primes]
    if len(set(primes)) != len(primes):
        raise DomainError("素数必须互不相同")
    for p in primes:
        if not sympy.isprime(p):
            raise DomainError(f"{p} 不是素数")

    components = graph.drop_isolated().components() or [Graph(())]
    needed = max(c.n_edges for c in components) + 2
    if len(primes) < needed:
        raise DomainError(f"至少需要 {needed} 个素数，只给了 {len(primes)} 个")

    total_counts = [1] * len(primes)
    total_poly: Optional[sympy.Poly] = sympy.Poly(1, Q)
    psi = 0.0
    rows = []
    for comp in components:
        counts = [count_points(comp, p, edge_cap, prime_cap, workers).complement for p in primes]
        poly = _fit_counts(primes, counts, comp.n_edges)
        rows.append({'graph': comp.label(), 'counts': counts,
                     'polynomial': None if poly is None else str(poly.as_expr()),
                     'psi': -INF if poly is None else poly.degree()})
        total_counts = [a * b for a, b in zip(total_counts, counts)]
        if poly is None:
            total_poly, psi = None, -INF
        elif total_poly is not None:
            total_poly = total_poly * poly
            psi += poly.degree()

    product_law = None
    if len(components) > 1 and graph.n_edges <= edge_cap:
        direct = [count_points(graph, p, edge_cap, prime_cap, workers).complement for p in primes]
        product_law = direct == total_counts

    report = PolyCountReport(graph.label(), primes, total_counts,
                             None if total_poly is None else str(total_poly.as_expr()), psi, rows, product_law)
    logger.info(f"{graph.label()}: {report.verdict}, ψ = {psi}")
    return report


def polycount_character(primes: Sequence[int], edge_cap: int = POINT_COUNT_EDGE_CAP,
                        prime_cap: int = POINT_COUNT_PRIME_CAP) -> Character:
    """max-plus 特征标 Γ ↦ ψ(Γ)"""
    primes = list(primes)
    return Character('polycount', lambda g: polycount(g, primes, edge_cap, prime_cap).psi, 'max')


# ---------------------------------------------------------------- 步数计数

@dataclass
class StepCountTable:
    """按连通图规范形存储 n ↦ ψₙ(Γ)，∞ 表示不停机"""

    length: int
    values: Dict[Tuple, np.ndarray] = field(default_factory=dict)
    labels: Dict[Tuple, str] = field(default_factory=dict)

    def set(self, graph: Graph, steps: Sequence) -> None:
        if len(graph.drop_isolated().components()) != 1:
            raise DomainError("步数表只接受连通图，不交并由可乘性给出")
        arr = np.asarray([INF if str(s).lower() in ('inf', 'infinity') else float(s) for s in steps], dtype=float)
        if arr.shape != (self.length,):
            raise DomainError(f"步数序列长度应为 {self.length}")
        form = canonical_form(graph.drop_isolated())
        self.values[form] = arr
        self.labels[form] = graph.label()

    def character(self) -> Character:
        return table_character('step-count', self.values, self.length)

    @classmethod
    def from_json(cls, data: Mapping) -> 'StepCountTable':
        """{"length": N, "entries": [{"graph": {...}, "steps": [...]}]}"""
        try:
            table = cls(int(data['length']))
            for entry in data['entries']:
                table.set(Graph.from_json(entry['graph']), entry['steps'])
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"步数表 JSON 格式错误: {e}")
        return table

    def to_json(self) -> Dict:
        entries = []
        for form, steps in sorted(self.values.items(), key=lambda kv: self.labels[kv[0]]):
            entries.append({'graph': self.labels[form],
                            'steps': ['inf' if math.isinf(s) else float(s) for s in steps]})
        return {'length': self.length, 'entries': entries}


def _coproduct_closure(graphs: Iterable[Graph], scheme: EdgeSubsetCoproduct) -> Dict[Tuple, Graph]:
    """所有图在余乘下可达的连通分量"""
    seen: Dict[Tuple, Graph] = {}
    stack = [scheme.normalize(g) for g in graphs]
    visited = set()
    while stack:
        graph = stack.pop()
        form = canonical_form(graph)
        if form in visited or graph.is_empty:
            continue
        visited.add(form)
        for comp in graph.components():
            seen.setdefault(canonical_form(comp), comp)
        for term in scheme.terms(graph):
            stack.extend([term.left, term.right])
    return seen


def synthetic_step_table(graphs: Iterable[Graph], length: int = 6, seed: int = DEFAULT_SEED,
                         nonhalting_rate: float = 0.25) -> StepCountTable:
    """确定性的伪随机步数表，对余乘封闭"""
    scheme = EdgeSubsetCoproduct()
    components = _coproduct_closure(graphs, scheme)
    rng = np.random.default_rng(seed)
    table = StepCountTable(length)
    for form in sorted(components):
        steps = rng.integers(1, 50, size=length).astype(float)
        steps[rng.random(length) < nonhalting_rate] = INF
        table.set(components[form], steps)
    return table


class TranscriptEntry(NamedTuple):
    graph: str
    machine: int
    raw: float
    prepared: float
    subgraph: Optional[str]
    quotient: Optional[str]
    renormalized: bool
    # ψₙ(Γ/γ) < ∞
    quotient_finite: bool = False
    # ψₖ(γ) < ∞ 对所有 k < n
    history_finite: bool = False

    @property
    def localizing(self) -> bool:
        return self.quotient_finite and self.history_finite


@dataclass
class StepCountTranscript:
    entries: List[TranscriptEntry]
    boundary_policy: str = 'zero'

    def for_graph(self, graph: Graph) -> List[TranscriptEntry]:
        return [e for e in self.entries if e.graph == graph.label()]

    def to_dict(self) -> Dict:
        def num(x):
            return 'inf' if math.isinf(x) else x
        return {'boundary_policy': self.boundary_policy,
                'entries': [{**e._asdict(), 'raw': num(e.raw), 'prepared': num(e.prepared),
                             'localizing': e.localizing} for e in self.entries]}


def stepcount_demo(table: StepCountTable, graphs: Iterable[Graph]) -> StepCountTranscript:
    """β=∞ 部分和算子下的热带分解，逐 (Γ, n) 记录取到最小值的子图"""
    psi = table.character()
    T = partial_sum_rb(INF, table.length)
    session = FactorizationSession(psi, T)
    entries = []
    for graph in graphs:
        graph = session.scheme.normalize(graph)
        raw = np.asarray(session.character(graph), dtype=float)
        prepared = np.asarray(session.prepared(graph), dtype=float)
        candidates = [(term, np.asarray(session.minus(term.left), dtype=float)
                       + np.asarray(session.character(term.right), dtype=float))
                      for term in session.terms(graph)]
        for n in range(table.length):
            winner = None
            if prepared[n] < raw[n]:
                for term, values in candidates:
                    if values[n] == prepared[n]:
                        winner = term
                        break
            quotient_finite = history_finite = False
            if winner is not None:
                quotient_finite = bool(math.isfinite(session.character(winner.right)[n]))
                history = np.asarray(session.character(winner.left), dtype=float)[:n]
                history_finite = bool(np.all(np.isfinite(history)))
            entries.append(TranscriptEntry(
                graph.label(), n + 1, float(raw[n]), float(prepared[n]),
                None if winner is None else winner.left.label(),
                None if winner is None else winner.right.label(),
                bool(math.isinf(raw[n]) and math.isfinite(prepared[n])),
                quotient_finite, history_finite,
            ))
    logger.info(f"步数演示：{len(entries)} 条记录，其中 {sum(e.renormalized for e in entries)} 条被重整化")
    return StepCountTranscript(entries)
