#!/usr/bin/env python3
"""
命令行入口：从 JSON 读入图、特征标和算子，运行各引擎并输出 JSON 报告
"""

import argparse
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import sympy

from applications import (MarkovField, factorize_potential, induced_family, markov_check, nn_check, polycount,
                          potential_from_json, stepcount_demo, StepCountTable, synthetic_step_table)
from birkhoff import (exp_conjugation_check, factorize, factorize_minus1, identity_rb, partial_sum_rb,
                      projection_rb, q_integral_rb)
from config_manager import ConfigManager, setup_logging
from deformed_trace import deformed_trace_result, trop_trace
from errors import AlgebraError, CertificationError, ParseError
from graph_hopf import (EdgeSubsetCoproduct, Graph, edge_count_character, inclusion_exclusion_character,
                        sequence_edge_count_character, series_power_character, trivial_character)
from thermo_semiring import (INF, EntropyFunctional, PlanarTree, SeriesSemiring, parse_beta,
                             thermo_minimize, tree_compose)
from witt_ring import (MotiveClass, WittVector, as_fraction, convolution, ghost, rb_partial_sum_witt, rb_q_witt,
                       rb_q_witt_tilde, witt_add, witt_mul, witt_neg, witt_sub, zeta_from_counts,
                       zeta_of_motive, zeta_rb_checks)


logger = logging.getLogger('tropical_rb')


# ---------------------------------------------------------------- 输入输出

def to_jsonable(value: Any) -> Any:
    """Fraction 写作 'p/q'，无穷写作 'inf'"""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def dumps(report: Dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, ensure_ascii=False, indent=2)


def load_json(source: str) -> Any:
    """文件路径或内联 JSON 文本"""
    try:
        if os.path.exists(source):
            with open(source, 'r', encoding='utf-8') as f:
                return json.load(f)
        return json.loads(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON 解析失败 ({source}): {e}")


def load_graphs(source: str) -> List[Graph]:
    data = load_json(source)
    if isinstance(data, dict) and 'graphs' in data:
        data = data['graphs']
    if isinstance(data, list):
        return [Graph.from_json(item) for item in data]
    return [Graph.from_json(data)]


def parse_value(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"无法解析的数值: {text!r}")


def parse_list(text: Optional[str], cast=float) -> Optional[list]:
    if text is None:
        return None
    try:
        return [cast(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise ParseError(f"无法解析的列表: {text!r}")


def _beta(args, config: ConfigManager) -> float:
    return parse_beta(args.beta if args.beta is not None else config.get('numeric.default_beta', 'inf'))


def _entropy(args) -> EntropyFunctional:
    return EntropyFunctional(args.entropy, args.parameter)


# ---------------------------------------------------------------- 子命令

def cmd_semiring(args, config: ConfigManager) -> Dict:
    beta = _beta(args, config)
    S = _entropy(args)
    values = [parse_value(v) for v in args.values]
    options = {
        'grid_step': config.get('semiring.grid_step', 1e-4),
        'refine_tol': config.get('semiring.refine_tolerance', 1e-12),
        'multistart': config.get('semiring.multistart', 12),
        'seed': args.seed,
    }
    report: Dict[str, Any] = {'command': 'semiring', 'beta': beta, 'entropy': S.label, 'values': values}
    if args.tree:
        tree = PlanarTree.from_nested(load_json(args.tree))
        report['tree'] = tree.to_nested()
        report['value'] = tree_compose(tree, values, beta, S, args.mode, **options)
    else:
        found = thermo_minimize(values, beta, S, args.mode, **options)
        report.update(value=found.value, weights=list(found.weights), method=found.method,
                      resolution=found.resolution)
    finite = [v for v in values if math.isfinite(v)]
    if finite:
        tropical = min(finite) if args.mode == 'min' else max(finite)
        report['tropical_limit'] = tropical
        report['limit_bound'] = 0.0 if beta == INF else math.log(len(finite)) / beta
    return report


def cmd_trace(args, config: ConfigManager) -> Dict:
    matrix = np.asarray(load_json(args.matrix), dtype=float)
    report: Dict[str, Any] = {'command': 'trace', 'tropical_trace': trop_trace(matrix)}
    if args.entropy != 'tropical':
        beta = _beta(args, config)
        result = deformed_trace_result(matrix, beta, args.entropy, args.parameter)
        report.update(beta=beta, value=result.value, method=result.method, entropy=result.entropy,
                      restricted=result.restricted)
    return report


def build_operator(args, config: ConfigManager, beta: float):
    length = args.length or config.get('birkhoff.sequence_length', 6)
    if args.operator == 'partial-sum':
        return partial_sum_rb(beta, length, args.mode)
    if args.operator == 'q-integral':
        if args.q is None:
            raise ParseError("q-integral 需要 --q")
        terms = args.terms if args.terms is not None else config.get('birkhoff.q_sum_terms')
        return q_integral_rb(args.q, beta, config.get('birkhoff.series_order', 6), terms, args.mode,
                             tolerance=args.tolerance)
    if args.operator == 'projection':
        mask = parse_list(args.mask, int) or [1] * length
        return projection_rb([bool(m) for m in mask], beta, args.mode)
    if args.operator == 'identity':
        return identity_rb(beta, args.mode, args.length)
    raise ParseError(f"未知算子: {args.operator}")


def build_character(args, T):
    weights = parse_list(args.weights)
    if isinstance(T.semiring, SeriesSemiring):
        order = T.semiring.order
        base = [T.semiring.zero_value] + (weights or list(range(1, order + 1)))[:order]
        if len(base) != order + 1:
            raise ParseError(f"级数特征标需要 {order} 个权重")
        return series_power_character(base, T.semiring)
    if args.character == 'trivial':
        return trivial_character(args.mode)
    if args.character == 'inclusion-exclusion':
        return inclusion_exclusion_character(args.vertex_cost, args.edge_cost, args.mode)
    if T.length is None:
        return edge_count_character(weights[0] if weights else 1.0, args.mode)
    weights = weights or list(range(1, T.length + 1))
    if len(weights) != T.length:
        raise ParseError(f"权重个数应为 {T.length}")
    return sequence_edge_count_character(weights, args.mode)


def cmd_factorize(args, config: ConfigManager) -> Dict:
    beta = _beta(args, config)
    graphs = load_graphs(args.graph)
    T = build_operator(args, config, beta)
    psi = build_character(args, T)
    samples = config.get('birkhoff.certify_samples', 100)
    scheme = EdgeSubsetCoproduct(edge_cap=config.get('hopf.edge_cap', 16))
    if T.weight > 0:
        result = factorize(psi, T, graphs, scheme=scheme, tolerance=args.tolerance, samples=samples,
                           seed=args.seed)
    else:
        result = factorize_minus1(psi, T, graphs, scheme=scheme, tolerance=args.tolerance, samples=samples,
                                  seed=args.seed)
    report = {'command': 'factorize', 'character': psi.name, 'result': result.to_dict()}
    if args.oracle:
        check = exp_conjugation_check(psi, T, beta, graphs, scheme, tolerance=max(args.tolerance, 1e-8),
                                      seed=args.seed)
        report['oracle'] = check.to_dict()
        check.raise_for_failure()
    return report


WITT_BINARY = {'add': witt_add, 'mul': witt_mul, 'sub': witt_sub, 'convolve': convolution}


def cmd_witt(args, config: ConfigManager) -> Dict:
    order = args.order or config.get('witt.order', 8)
    vectors = [WittVector.parse_series(s, order) for s in args.series]
    op = args.op
    if op in WITT_BINARY:
        if len(vectors) != 2:
            raise ParseError(f"{op} 需要两个级数")
        result = WITT_BINARY[op](*vectors)
    else:
        if len(vectors) != 1:
            raise ParseError(f"{op} 需要一个级数")
        alpha = vectors[0]
        if op == 'ghost':
            return {'command': 'witt', 'op': op, 'ghost': list(ghost(alpha))}
        if op == 'neg':
            result = witt_neg(alpha)
        elif op == 'partial-sum':
            result = rb_partial_sum_witt(alpha)
        elif op in ('q', 'q-tilde'):
            if args.q is None:
                raise ParseError(f"{op} 需要 --q")
            q = as_fraction(args.q)
            result = rb_q_witt(alpha, q) if op == 'q' else rb_q_witt_tilde(alpha, q)
        else:
            raise ParseError(f"未知 Witt 运算: {op}")
    return {'command': 'witt', 'op': op, 'coefficients': result.to_json(), 'ghost': list(ghost(result))}


def cmd_zeta(args, config: ConfigManager) -> Dict:
    order = args.order or config.get('witt.order', 8)
    if args.counts:
        Z = zeta_from_counts(parse_list(args.counts, int))
        return {'command': 'zeta', 'coefficients': Z.to_json()}
    if not args.motive:
        raise ParseError("需要 --motive 或 --counts")
    X = MotiveClass.from_json(load_json(args.motive))
    report: Dict[str, Any] = {'command': 'zeta', 'motive': str(X), 'q': args.q,
                              'coefficients': zeta_of_motive(X, args.q, order).to_json()}
    if args.check == 'corollaries':
        checks = zeta_rb_checks(X, args.q, order, config.get('witt.product_terms', 40), args.tolerance)
        report['checks'] = checks.to_dict()
        if not checks.passed:
            raise CertificationError("zeta 推论检查失败", residual=None, report=checks.to_dict())
    return report


def cmd_markov(args, config: ConfigManager) -> Dict:
    host = load_graphs(args.host)[0]
    W = potential_from_json(host, load_json(args.potential))
    beta = _beta(args, config)
    tolerance = args.tolerance
    report: Dict[str, Any] = {'command': 'markov', 'host': host.label(), 'beta': beta,
                              'family_size': len(induced_family(host, config.get('apps.family_vertex_cap', 12)))}
    nn = nn_check(W, tolerance)
    report['nn_check'] = nn._asdict()
    if beta != INF:
        report['markov_check'] = markov_check(MarkovField.from_potential(W, beta), tolerance)._asdict()
    if args.factorize:
        length = args.length or config.get('birkhoff.sequence_length', 6)
        result = factorize_potential(W, partial_sum_rb(beta, length), beta, tolerance)
        report['factorization'] = result.to_dict()
        if result.vertex_only and not result.passed:
            raise CertificationError("分解后的随机场不满足 Markov 性质", report=result.to_dict())
    return report


def cmd_polycount(args, config: ConfigManager) -> Dict:
    primes = parse_list(args.primes, int)
    reports = [polycount(g, primes, config.get('apps.point_count_edge_cap', 6),
                         config.get('apps.point_count_prime_cap', 11),
                         args.workers or config.get('apps.workers', 1)).to_dict()
               for g in load_graphs(args.graph)]
    return {'command': 'polycount', 'reports': reports}


def cmd_stepcount(args, config: ConfigManager) -> Dict:
    graphs = load_graphs(args.graph)
    if args.table:
        table = StepCountTable.from_json(load_json(args.table))
    else:
        table = synthetic_step_table(graphs, args.length or config.get('birkhoff.sequence_length', 6),
                                     args.seed, config.get('apps.step_nonhalting_rate', 0.25))
    transcript = stepcount_demo(table, graphs)
    return {'command': 'stepcount', 'table': table.to_json(), 'transcript': transcript.to_dict()}


COMMANDS = {
    'semiring': cmd_semiring,
    'trace': cmd_trace,
    'factorize': cmd_factorize,
    'witt': cmd_witt,
    'zeta': cmd_zeta,
    'markov': cmd_markov,
    'polycount': cmd_polycount,
    'stepcount': cmd_stepcount,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='tropical_cli', description='热力学半环、Rota–Baxter 算子与 Birkhoff 分解')
    parser.add_argument('--config', help='配置文件路径（默认读取环境变量或 config.json）')
    parser.add_argument('--seed', type=int, help='随机种子')
    parser.add_argument('--tolerance', type=float, help='认证容差')
    parser.add_argument('--log-level', help='日志级别')
    parser.add_argument('--golden', help='把报告写入该固定文件')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('semiring', help='热力学加法与树复合')
    p.add_argument('values', nargs='+')
    p.add_argument('--beta')
    p.add_argument('--entropy', default='shannon', choices=['shannon', 'renyi', 'tsallis'])
    p.add_argument('--parameter', '--alpha', '--q', dest='parameter', type=float)
    p.add_argument('--mode', default='min', choices=['min', 'max'])
    p.add_argument('--tree', help='嵌套列表形式的平面树')

    p = sub.add_parser('trace', help='热带迹与形变迹')
    p.add_argument('--matrix', required=True)
    p.add_argument('--beta')
    p.add_argument('--entropy', default='von_neumann', choices=['tropical', 'von_neumann', 'renyi', 'tsallis'])
    p.add_argument('--parameter', type=float)

    p = sub.add_parser('factorize', help='Birkhoff 分解')
    p.add_argument('--graph', required=True)
    p.add_argument('--character', default='edge-count',
                   choices=['edge-count', 'trivial', 'inclusion-exclusion'])
    p.add_argument('--weights')
    p.add_argument('--vertex-cost', type=float, default=0.0)
    p.add_argument('--edge-cost', type=float, default=1.0)
    p.add_argument('--operator', default='partial-sum',
                   choices=['partial-sum', 'q-integral', 'projection', 'identity'])
    p.add_argument('--beta')
    p.add_argument('--length', type=int)
    p.add_argument('--mask')
    p.add_argument('--q', type=float)
    p.add_argument('--terms', type=int)
    p.add_argument('--mode', default='min', choices=['min', 'max'])
    p.add_argument('--oracle', action='store_true', help='同时运行指数共轭对照')

    p = sub.add_parser('witt', help='Witt 向量运算')
    p.add_argument('op', choices=['add', 'mul', 'sub', 'neg', 'convolve', 'ghost', 'partial-sum', 'q', 'q-tilde'])
    p.add_argument('series', nargs='+')
    p.add_argument('--order', type=int)
    p.add_argument('--q')

    p = sub.add_parser('zeta', help='zeta 函数与推论检查')
    p.add_argument('--motive')
    p.add_argument('--counts')
    p.add_argument('--q', type=int, default=2)
    p.add_argument('--order', type=int)
    p.add_argument('--check', choices=['corollaries'])

    p = sub.add_parser('markov', help='最近邻势与 Markov 随机场')
    p.add_argument('--host', required=True)
    p.add_argument('--potential', required=True)
    p.add_argument('--beta')
    p.add_argument('--length', type=int)
    p.add_argument('--factorize', choices=['partial-sum'])

    p = sub.add_parser('polycount', help='图超曲面补集的多项式可数性')
    p.add_argument('--graph', required=True)
    p.add_argument('--primes', default='2,3,5,7')
    p.add_argument('--workers', type=int)

    p = sub.add_parser('stepcount', help='步数计数特征标的热带分解')
    p.add_argument('--graph', required=True)
    p.add_argument('--table')
    p.add_argument('--length', type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    config = ConfigManager(args.config)
    setup_logging(config, args.log_level)
    if args.seed is None:
        args.seed = config.get('numeric.seed', 20240517)
    if args.tolerance is None:
        args.tolerance = config.get('numeric.tolerance', 1e-9)

    logger.info(f"执行子命令 {args.command}")
    try:
        try:
            report = COMMANDS[args.command](args, config)
        except (sympy.SympifyError, ValueError, TypeError, ZeroDivisionError) as e:
            if isinstance(e, AlgebraError):
                raise
            raise ParseError(f"参数无法转换: {e}", cause=type(e).__name__)
    except AlgebraError as e:
        logger.error(f"{args.command} 失败: {e.message}")
        print(dumps(e.to_dict()))
        return e.exit_code

    text = dumps(report)
    print(text)
    if args.golden:
        path = Path(args.golden)
        if not path.is_absolute() and path.parent == Path('.'):
            path = Path(config.get('output.golden_dir', 'fixtures')) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + '\n', encoding=config.get('output.encoding', 'utf-8'))
        logger.info(f"报告已写入 {path}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
