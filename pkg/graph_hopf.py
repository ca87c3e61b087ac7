"""
图的 Hopf 代数：多重图、子图枚举、收缩、余乘以及半环值特征标
"""

import logging
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

import networkx as nx
import numpy as np

from errors import CapExceededError, DomainError, ParseError
from thermo_semiring import PointwiseSemiring, Semiring, SeriesSemiring, additive_identity, check_mode


DEFAULT_EDGE_CAP = 16

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """有限多重图，允许自环和重边；边的顺序决定边编号"""

    vertices: Tuple[int, ...]
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        vertices = tuple(sorted(set(self.vertices)))
        edges = tuple((min(u, v), max(u, v)) for u, v in self.edges)
        known = set(vertices)
        for u, v in edges:
            if u not in known or v not in known:
                raise DomainError(f"边 ({u}, {v}) 的端点不在顶点集中")
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'edges', edges)

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], vertices: Optional[Iterable[int]] = None) -> 'Graph':
        edges = tuple(tuple(e) for e in edges)
        if vertices is None:
            vertices = {v for e in edges for v in e}
        return cls(tuple(vertices), edges)

    @classmethod
    def from_json(cls, data: Mapping) -> 'Graph':
        try:
            vertices = [int(v) for v in data.get('vertices', [])]
            edges = []
            for e in data.get('edges', []):
                if len(e) != 2:
                    raise ParseError(f"边必须是二元组: {e}")
                edges.append((int(e[0]), int(e[1])))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"图 JSON 格式错误: {exc}")
        vertices = set(vertices) | {v for e in edges for v in e}
        return cls(tuple(vertices), tuple(edges))

    def to_json(self) -> Dict:
        return {'vertices': list(self.vertices), 'edges': [list(e) for e in self.edges]}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def labeled_key(self) -> Tuple:
        return self.vertices, tuple(sorted(self.edges))

    def label(self) -> str:
        """可读标签，如 '3v:0-1,1-2'"""
        return f"{self.n_vertices}v:" + ",".join(f"{u}-{v}" for u, v in self.edges)

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def components(self) -> List['Graph']:
        """连通分量，按最小顶点排序"""
        pieces = sorted((sorted(c) for c in nx.connected_components(self.to_networkx())), key=lambda c: c[0])
        result = []
        for piece in pieces:
            members = set(piece)
            result.append(Graph(tuple(piece), tuple(e for e in self.edges if e[0] in members)))
        return result

    def induced(self, vertex_subset: Iterable[int]) -> 'Graph':
        members = set(vertex_subset)
        if not members <= set(self.vertices):
            raise DomainError("诱导子图的顶点不在图中")
        return Graph(tuple(members), tuple(e for e in self.edges if e[0] in members and e[1] in members))

    def edge_subgraph(self, indices: Iterable[int]) -> 'Graph':
        chosen = [self.edges[i] for i in sorted(indices)]
        return Graph.from_edges(chosen)

    def drop_isolated(self) -> 'Graph':
        touched = {v for e in self.edges for v in e}
        return Graph(tuple(touched), self.edges)

    def relabel(self, mapping: Mapping[int, int]) -> 'Graph':
        return Graph(tuple(mapping[v] for v in self.vertices),
                     tuple((mapping[u], mapping[v]) for u, v in self.edges))

    def disjoint_union(self, other: 'Graph') -> 'Graph':
        offset = (max(self.vertices) + 1 if self.vertices else 0) - (min(other.vertices) if other.vertices else 0)
        shifted = other.relabel({v: v + offset for v in other.vertices})
        return Graph(self.vertices + shifted.vertices, self.edges + shifted.edges)


def path_graph(n_edges: int) -> Graph:
    return Graph.from_edges([(i, i + 1) for i in range(n_edges)], range(n_edges + 1))


def cycle_graph(n: int) -> Graph:
    if n == 1:
        return Graph((0,), ((0, 0),))
    return Graph.from_edges([(i, (i + 1) % n) for i in range(n)], range(n))


def banana_graph(n_edges: int) -> Graph:
    """两顶点间 n 条平行边"""
    return Graph((0, 1), tuple((0, 1) for _ in range(n_edges)))


def empty_graph() -> Graph:
    return Graph(())


def multigraphs_up_to(max_edges: int, loops: bool = True) -> List[Graph]:
    """边数 1..max_edges、无孤立顶点的全部多重图（同构类各取一个）

    逐边扩张：在已有顶点之间、已有顶点与新顶点之间或两个新顶点之间加一条边，
    按规范形去重。
    """
    if max_edges > DEFAULT_EDGE_CAP:
        raise CapExceededError(f"边数 {max_edges} 超过枚举上限 {DEFAULT_EDGE_CAP}")
    layer = {canonical_form(empty_graph()): empty_graph()}
    found: List[Graph] = []
    for _ in range(max_edges):
        grown: Dict[Tuple, Graph] = {}
        for graph in layer.values():
            n = graph.n_vertices
            options = [(i, j) for i in range(n) for j in range(i, n + 1)] + [(n, n), (n, n + 1)]
            for u, v in options:
                if u == v and not loops:
                    continue
                child = Graph.from_edges(graph.edges + ((u, v),))
                grown.setdefault(canonical_form(child), child)
        layer = grown
        found.extend(layer.values())
    logger.debug(f"枚举到 {len(found)} 个至多 {max_edges} 条边的多重图")
    return found


@dataclass(frozen=True)
class Subgraph:
    """由非空真边子集确定的子图"""

    parent: Graph
    edge_indices: FrozenSet[int]

    def __post_init__(self):
        indices = frozenset(self.edge_indices)
        if not indices:
            raise DomainError("子图的边集不能为空")
        if len(indices) >= self.parent.n_edges:
            raise DomainError("子图必须是真子图")
        if any(i < 0 or i >= self.parent.n_edges for i in indices):
            raise DomainError("边编号越界")
        object.__setattr__(self, 'edge_indices', indices)

    @property
    def graph(self) -> Graph:
        return self.parent.edge_subgraph(self.edge_indices)

    @property
    def vertices(self) -> Tuple[int, ...]:
        return self.graph.vertices

    def components(self) -> List[Graph]:
        return self.graph.components()


def contract(graph: Graph, sub: Subgraph) -> Graph:
    """每个分量收缩到其最小顶点；保留自环与重边"""
    if sub.parent != graph:
        raise DomainError("子图不属于该图")
    rep: Dict[int, int] = {}
    for comp in sub.components():
        root = min(comp.vertices)
        for v in comp.vertices:
            rep[v] = root
    vertices = {rep.get(v, v) for v in graph.vertices}
    edges = [(rep.get(u, u), rep.get(v, v)) for i, (u, v) in enumerate(graph.edges)
             if i not in sub.edge_indices]
    return Graph(tuple(vertices), tuple(edges))


# ---------------------------------------------------------------- 规范形

def _refine(colors: List[int], adjacency: List[Counter], loops: List[int]) -> List[int]:
    """颜色细化直到划分稳定"""
    while True:
        signatures = [
            (colors[v], loops[v], tuple(sorted((colors[u], m) for u, m in adjacency[v].items())))
            for v in range(len(colors))
        ]
        ranking = {s: i for i, s in enumerate(sorted(set(signatures)))}
        refined = [ranking[s] for s in signatures]
        if len(ranking) == len(set(colors)):
            return refined
        colors = refined


def _component_form(graph: Graph) -> Tuple:
    index = {v: i for i, v in enumerate(graph.vertices)}
    n = len(index)
    adjacency = [Counter() for _ in range(n)]
    loops = [0] * n
    edges = [(index[u], index[v]) for u, v in graph.edges]
    for i, j in edges:
        if i == j:
            loops[i] += 1
        else:
            adjacency[i][j] += 1
            adjacency[j][i] += 1

    best: List[Optional[Tuple]] = [None]

    def search(colors: List[int]):
        colors = _refine(colors, adjacency, loops)
        if len(set(colors)) == n:
            encoded = tuple(sorted((min(colors[i], colors[j]), max(colors[i], colors[j])) for i, j in edges))
            if best[0] is None or encoded < best[0]:
                best[0] = encoded
            return
        counts = Counter(colors)
        target = min(c for c, k in counts.items() if k > 1)
        for v in [v for v in range(n) if colors[v] == target]:
            child = [2 * c + 1 for c in colors]
            child[v] = 2 * target
            search(child)

    search([0] * n)
    return n, best[0]


@lru_cache(maxsize=65536)
def canonical_form(graph: Graph) -> Tuple:
    """同构不变的规范形：各连通分量的规范编码排序后拼接"""
    return tuple(sorted(_component_form(c) for c in graph.components()))


# ---------------------------------------------------------------- 余乘

class CoproductTerm(NamedTuple):
    left: Graph
    right: Graph
    multiplicity: int = 1


AdmissibilityPredicate = Callable[[Graph, Graph], bool]


def all_admissible(left: Graph, right: Graph) -> bool:
    return True


def connected_left(left: Graph, right: Graph) -> bool:
    """只允许连通子图"""
    return len(left.components()) == 1


def coproduct(graph: Graph, admissible: Optional[AdmissibilityPredicate] = None,
              edge_cap: int = DEFAULT_EDGE_CAP, dedup: bool = True) -> List[CoproductTerm]:
    """非本原余乘项 γ ⊗ Γ/γ；商中的孤立顶点作为单位元去掉"""
    admissible = admissible or all_admissible
    if graph.n_edges > edge_cap:
        raise CapExceededError(f"边数 {graph.n_edges} 超过枚举上限 {edge_cap}")

    raw: List[CoproductTerm] = []
    for size in range(1, graph.n_edges):
        for indices in combinations(range(graph.n_edges), size):
            sub = Subgraph(graph, frozenset(indices))
            left = sub.graph
            right = contract(graph, sub).drop_isolated()
            if admissible(left, right):
                raw.append(CoproductTerm(left, right))
    if not dedup:
        return raw

    grouped: Dict[Tuple, List] = {}
    for term in raw:
        key = (canonical_form(term.left), canonical_form(term.right))
        if key in grouped:
            grouped[key][1] += 1
        else:
            grouped[key] = [term, 1]
    return [CoproductTerm(term.left, term.right, count) for term, count in grouped.values()]


class EdgeSubsetCoproduct:
    """默认余乘方案：按边数分次，所有非空真边子集"""

    name = 'edge-subsets'

    def __init__(self, admissible: Optional[AdmissibilityPredicate] = None, edge_cap: int = DEFAULT_EDGE_CAP):
        self.admissible = admissible or all_admissible
        self.edge_cap = edge_cap

    def degree(self, graph: Graph) -> int:
        return graph.n_edges

    def normalize(self, graph: Graph) -> Graph:
        return graph.drop_isolated()

    def terms(self, graph: Graph, dedup: bool = True) -> List[CoproductTerm]:
        return coproduct(graph, self.admissible, self.edge_cap, dedup)


class CoassociativityReport(NamedTuple):
    left_triples: Counter
    right_triples: Counter

    @property
    def holds(self) -> bool:
        return self.left_triples == self.right_triples


def coassociativity_check(graph: Graph, edge_cap: int = DEFAULT_EDGE_CAP) -> CoassociativityReport:
    """比较 (Δ'⊗id)Δ' 与 (id⊗Δ')Δ' 的三元组多重集"""
    left, right = Counter(), Counter()
    for outer in coproduct(graph, edge_cap=edge_cap, dedup=False):
        for inner in coproduct(outer.left, edge_cap=edge_cap, dedup=False):
            left[(canonical_form(inner.left), canonical_form(inner.right),
                  canonical_form(outer.right))] += 1
        for inner in coproduct(outer.right, edge_cap=edge_cap, dedup=False):
            right[(canonical_form(outer.left), canonical_form(inner.left),
                   canonical_form(inner.right))] += 1
    return CoassociativityReport(left, right)


# ---------------------------------------------------------------- 特征标

def default_semiring(mode: str = 'min', beta=None) -> PointwiseSemiring:
    return PointwiseSemiring(beta if beta is not None else float('inf'), mode)


@dataclass(frozen=True)
class Character:
    """在不交并上可乘的映射 Graph → 半环元素"""

    name: str
    evaluator: Callable[[Graph], Any]
    mode: str = 'min'
    invariant: bool = True
    per_component: bool = True
    length: Optional[int] = None

    def __post_init__(self):
        check_mode(self.mode)

    def key(self, graph: Graph):
        return canonical_form(graph) if self.invariant else graph.labeled_key()

    def unit(self, semiring: Optional[Semiring] = None):
        if isinstance(semiring, SeriesSemiring):
            return semiring.one()
        if self.length is None:
            return 0.0
        return np.zeros(self.length)

    def value(self, graph: Graph, semiring: Optional[Semiring] = None):
        semiring = semiring or default_semiring(self.mode)
        if graph.is_empty:
            return self.unit(semiring)
        if not self.per_component:
            return self._checked(graph)
        total = self.unit(semiring)
        for comp in graph.components():
            total = semiring.odot(total, self._checked(comp))
        return total

    def _checked(self, graph: Graph):
        result = self.evaluator(graph)
        if result is None:
            raise DomainError(f"特征标 {self.name} 在分量 {graph.to_json()} 上未定义")
        if isinstance(result, (list, tuple, np.ndarray)):
            return np.asarray(result, dtype=float)
        return float(result)

    def __call__(self, graph: Graph, semiring: Optional[Semiring] = None):
        return self.value(graph, semiring)


def char_eval(psi: Character, graphs: Iterable[Graph], semiring: Optional[Semiring] = None):
    """多重集上的求值：各图值的 ⊙ 积，空多重集为单位元"""
    semiring = semiring or default_semiring(psi.mode)
    total = psi.unit(semiring)
    for graph in graphs:
        total = semiring.odot(total, psi.value(graph, semiring))
    return total


def convolve(psi1: Character, psi2: Character, graph: Graph, beta=None,
             scheme: Optional[EdgeSubsetCoproduct] = None, semiring: Optional[Semiring] = None):
    """(ψ₁ ⋆ ψ₂)(Γ)：对含本原项的完整余乘取 ⊕（有限 β 时按重数加权）"""
    if psi1.mode != psi2.mode:
        raise DomainError(f"特征标模式不一致: {psi1.mode} 与 {psi2.mode}")
    semiring = semiring or default_semiring(psi1.mode, beta)
    if beta is not None and semiring.beta != default_semiring(psi1.mode, beta).beta:
        raise DomainError("β 与半环不一致")
    scheme = scheme or EdgeSubsetCoproduct()
    graph = scheme.normalize(graph)
    if graph.is_empty:
        return semiring.odot(psi1.unit(semiring), psi2.unit(semiring))

    values = [
        semiring.odot(psi1.value(graph, semiring), psi2.unit(semiring)),
        semiring.odot(psi1.unit(semiring), psi2.value(graph, semiring)),
    ]
    weights = [1, 1]
    for term in scheme.terms(graph, dedup=psi1.invariant and psi2.invariant):
        values.append(semiring.odot(psi1.value(term.left, semiring), psi2.value(term.right, semiring)))
        weights.append(term.multiplicity)
    return semiring.oplus(np.stack([np.asarray(v, dtype=float) for v in values]), weights)


# ---------------------------------------------------------------- 内置特征标

def edge_count_character(weight: float = 1.0, mode: str = 'min') -> Character:
    return Character('edge-count', lambda g: weight * g.n_edges, mode)


def vertex_count_character(mode: str = 'min') -> Character:
    return Character('vertex-count', lambda g: float(g.n_vertices), mode)


def trivial_character(mode: str = 'min') -> Character:
    """ε：空图为 0，非空图为 ⊕ 的单位元"""
    return Character('trivial', lambda g: additive_identity(mode), mode)


def sequence_edge_count_character(weights: Iterable[float], mode: str = 'min') -> Character:
    """ψ(Γ)ₙ = wₙ·|E(Γ)|"""
    w = np.asarray(list(weights), dtype=float)
    return Character('edge-count-sequence', lambda g: w * g.n_edges, mode, length=w.size)


def series_power_character(base, semiring: SeriesSemiring) -> Character:
    """ψ(Γ) = base^{⊙|E(Γ)|}，在级数半环中可乘"""
    base = np.asarray(base, dtype=float)

    def evaluate(g: Graph):
        total = semiring.one()
        for _ in range(g.n_edges):
            total = semiring.odot(total, base)
        return total

    return Character('series-power', evaluate, semiring.mode, length=semiring.order + 1)


def _edge_label(u: int, v: int) -> str:
    return f"{min(u, v)}-{max(u, v)}"


def inclusion_exclusion_character(vertex_costs: Union[float, Mapping] = 0.0,
                                  edge_costs: Union[float, Mapping] = 1.0,
                                  mode: str = 'min') -> Character:
    """τ(Γ) = Σ_v f_v + Σ_e f_e；按标签查表，映射中可用 'default' 兜底"""
    scalar_vertex = not isinstance(vertex_costs, Mapping)
    scalar_edge = not isinstance(edge_costs, Mapping)

    def lookup(table, label, kind):
        if not isinstance(table, Mapping):
            return float(table)
        for key in (label, str(label)):
            if key in table:
                return float(table[key])
        if 'default' in table:
            return float(table['default'])
        raise DomainError(f"缺少{kind}标签 {label} 的代价")

    def evaluate(g: Graph) -> float:
        total = sum(lookup(vertex_costs, v, '顶点') for v in g.vertices)
        for u, v in g.edges:
            label = (u, v) if isinstance(edge_costs, Mapping) and (u, v) in edge_costs else _edge_label(u, v)
            total += lookup(edge_costs, label, '边')
        return total

    return Character('inclusion-exclusion', evaluate, mode, invariant=scalar_vertex and scalar_edge)


def table_character(name: str, table: Mapping, length: Optional[int] = None, mode: str = 'min') -> Character:
    """按连通分量规范形查表"""

    def evaluate(g: Graph):
        return table.get(canonical_form(g))

    return Character(name, evaluate, mode, length=length)
