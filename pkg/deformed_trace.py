"""
矩阵部分：min-plus 矩阵代数、量子熵以及熵形变迹
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import block_diag, eigh, eigvalsh, expm
from scipy.special import entr, logsumexp

from errors import DomainError
from thermo_semiring import INF, EntropyFunctional, parse_beta, thermo_minimize


EIGEN_FLOOR = 1e-14
SYMMETRY_TOL = 1e-9
QUANTUM_KINDS = ('von_neumann', 'relative', 'renyi', 'tsallis', 'belavkin_staszewski', 'umegaki')

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- min-plus 矩阵

def as_minplus(A) -> np.ndarray:
    """校验 min-plus 方阵（允许 ∞ 元素）"""
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError(f"需要方阵，收到形状 {arr.shape}")
    if np.any(np.isnan(arr)) or np.any(arr == -INF):
        raise DomainError("min-plus 矩阵不允许 NaN 或 −∞")
    return arr


def minplus_identity(n: int) -> np.ndarray:
    out = np.full((n, n), INF)
    np.fill_diagonal(out, 0.0)
    return out


def minplus_add(A, B) -> np.ndarray:
    A, B = as_minplus(A), as_minplus(B)
    if A.shape != B.shape:
        raise DomainError(f"维数不一致: {A.shape} 与 {B.shape}")
    return np.minimum(A, B)


def minplus_mul(A, B) -> np.ndarray:
    """(A ⊙ B)_ij = min_k (A_ik + B_kj)"""
    A, B = as_minplus(A), as_minplus(B)
    if A.shape != B.shape:
        raise DomainError(f"维数不一致: {A.shape} 与 {B.shape}")
    return (A[:, :, None] + B[None, :, :]).min(axis=1)


def minplus_matrix_ops(A, B) -> Tuple[np.ndarray, np.ndarray]:
    return minplus_add(A, B), minplus_mul(A, B)


# ---------------------------------------------------------------- 对称矩阵与函数演算

def as_symmetric(A, tol: float = SYMMETRY_TOL) -> np.ndarray:
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.size == 0:
        raise DomainError(f"需要非空方阵，收到形状 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("对称矩阵元素必须有限")
    if np.max(np.abs(arr - arr.T)) > tol * max(1.0, np.max(np.abs(arr))):
        raise DomainError("矩阵不对称")
    return (arr + arr.T) / 2.0


def spectrum(A) -> np.ndarray:
    return eigvalsh(as_symmetric(A))


def is_psd(A, tol: float = SYMMETRY_TOL) -> bool:
    return bool(spectrum(A)[0] >= -tol)


def as_density(rho, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """校验密度矩阵 ρ ⪰ 0, Tr ρ = 1"""
    arr = as_symmetric(rho, tol)
    if not is_psd(arr, tol):
        raise DomainError("密度矩阵必须半正定")
    if abs(np.trace(arr) - 1.0) > tol * arr.shape[0]:
        raise DomainError(f"密度矩阵迹为 {np.trace(arr)}，应为 1")
    return arr


def matrix_function(A, func, floor: Optional[float] = None) -> np.ndarray:
    """对称矩阵的函数演算 V f(Λ) Vᵀ"""
    w, V = eigh(as_symmetric(A))
    if floor is not None:
        w = np.maximum(w, floor)
    return (V * func(w)) @ V.T


def _require_positive(rho: np.ndarray, name: str):
    if eigvalsh(rho)[0] <= EIGEN_FLOOR:
        raise DomainError(f"{name} 必须严格正定")


# ---------------------------------------------------------------- 迹

def trop_trace(A, spectral: bool = False, beta=None) -> float:
    """热带迹：对角线最小值，或谱最小值；给定有限 β 时返回其形变版本"""
    if not spectral:
        return float(np.min(np.diag(as_minplus(A))))
    A = as_symmetric(A)
    w = eigvalsh(A)
    if w[0] < -SYMMETRY_TOL:
        raise DomainError("谱迹要求半正定矩阵")
    beta = parse_beta(beta)
    if beta == INF:
        return float(w[0])
    return deformed_trace(A, beta)


def quantum_entropy_eval(kind: str, rho, sigma=None, parameter: Optional[float] = None) -> float:
    """量子熵与相对熵的函数演算求值"""
    if kind not in QUANTUM_KINDS:
        raise DomainError(f"未知量子熵类型: {kind!r}")
    rho = as_density(rho)
    w = np.clip(eigvalsh(rho), 0.0, None)

    if kind == 'von_neumann':
        return float(entr(w).sum())
    if kind in ('renyi', 'tsallis'):
        return float(EntropyFunctional(kind, parameter).rows(w[None, :])[0])

    if sigma is None:
        raise DomainError(f"{kind} 需要参考态 σ")
    sigma = as_density(sigma)
    _require_positive(sigma, 'σ')

    if kind == 'relative':
        log_sigma = matrix_function(sigma, np.log)
        return float(-entr(w).sum() - np.trace(rho @ log_sigma))

    if kind == 'belavkin_staszewski':
        root = matrix_function(rho, np.sqrt, floor=0.0)
        inner = root @ np.linalg.inv(sigma) @ root
        log_inner = matrix_function((inner + inner.T) / 2.0, np.log, floor=EIGEN_FLOOR)
        return float(np.trace(rho @ log_inner))

    # Umegaki 形变相对熵
    if parameter is None or abs(float(parameter)) == 1.0:
        raise DomainError("umegaki 参数 α 不能为 ±1")
    alpha = float(parameter)
    rho_exponent = (alpha - 1.0) / 2.0
    if rho_exponent < 0:
        _require_positive(rho, 'ρ')
    sigma_power = matrix_function(sigma, lambda x: np.power(x, (alpha + 1.0) / 2.0), floor=0.0)
    rho_power = matrix_function(rho, lambda x: np.power(x, rho_exponent), floor=0.0 if rho_exponent >= 0 else None)
    n = rho.shape[0]
    return float(4.0 / (1.0 - alpha ** 2) * np.trace((np.eye(n) - sigma_power @ rho_power) @ rho))


@dataclass(frozen=True)
class DeformedTraceResult:
    """形变迹及其计算方式"""

    value: float
    method: str
    entropy: str
    restricted: bool = False


def deformed_trace_result(A, beta, entropy: str = 'von_neumann', parameter: Optional[float] = None,
                          require_psd: bool = True) -> DeformedTraceResult:
    beta = parse_beta(beta)
    A = as_symmetric(A)
    w = eigvalsh(A)
    if require_psd and w[0] < -SYMMETRY_TOL:
        raise DomainError("闭式形变迹要求半正定矩阵")

    if beta == INF:
        return DeformedTraceResult(float(w[0]), 'spectral-minimum', entropy)
    if entropy in ('von_neumann', 'shannon'):
        value = float(-logsumexp(-beta * w) / beta)
        return DeformedTraceResult(value, 'free-energy', 'von_neumann')
    if entropy in ('renyi', 'tsallis'):
        found = thermo_minimize(w, beta, EntropyFunctional(entropy, parameter))
        logger.debug(f"{entropy} 形变迹仅在 A 的本征基对角密度上极小化")
        return DeformedTraceResult(found.value, f'eigenbasis-diagonal/{found.method}', entropy, True)
    raise DomainError(f"{entropy} 只提供求值，不提供形变迹")


def deformed_trace(A, beta, entropy: str = 'von_neumann', parameter: Optional[float] = None,
                   require_psd: bool = True) -> float:
    """Tr^⊕_{β,S}(A) = min_ρ Tr(ρA) − S(ρ)/β"""
    return deformed_trace_result(A, beta, entropy, parameter, require_psd).value


def _finite_beta(beta) -> float:
    beta = parse_beta(beta)
    if beta == INF:
        raise DomainError("此运算需要有限 β")
    return beta


def log_partition_function(A, beta) -> float:
    """log Tr e^{−βA}，经矩阵指数计算"""
    beta = _finite_beta(beta)
    A = as_symmetric(A)
    # 按最小特征值平移，指数不会上溢
    shift = float(eigvalsh(A)[0])
    return float(np.log(np.trace(expm(-beta * (A - shift * np.eye(A.shape[0]))))) - beta * shift)


def partition_function(A, beta) -> float:
    return float(np.exp(log_partition_function(A, beta)))


def gibbs_state(A, beta) -> np.ndarray:
    """σ = e^{−βA} / Z"""
    beta = _finite_beta(beta)
    A = as_symmetric(A)
    shift = float(eigvalsh(A)[0])
    weights = expm(-beta * (A - shift * np.eye(A.shape[0])))
    weights = (weights + weights.T) / 2.0
    return weights / np.trace(weights)


class FreeEnergySplit(NamedTuple):
    lhs: float
    rhs: float
    relative_entropy: float
    log_partition: float


def free_energy_decompose(A, rho, beta) -> FreeEnergySplit:
    """Tr(ρA) − β⁻¹𝒩(ρ) 与 β⁻¹S(ρ‖σ) − β⁻¹log Z 两侧分别计算"""
    beta = _finite_beta(beta)
    A = as_symmetric(A)
    rho = as_density(rho)

    entropy = quantum_entropy_eval('von_neumann', rho)
    lhs = float(np.trace(rho @ A) - entropy / beta)
    log_z = log_partition_function(A, beta)
    # log σ = −βA − log Z 在 A 的本征基中直接写出，σ 的小特征值不会下溢
    log_sigma = matrix_function(A, lambda w: -beta * w) - log_z * np.eye(A.shape[0])
    relative = float(-entropy - np.trace(rho @ log_sigma))
    rhs = relative / beta - log_z / beta
    return FreeEnergySplit(lhs, float(rhs), relative, log_z)


def direct_sum(A1, A2) -> np.ndarray:
    """块对角直和 A₁ ⊞ A₂；形变迹为两块的 ⊕_β"""
    return block_diag(as_symmetric(A1), as_symmetric(A2))


def kronecker_sum(A1, A2) -> np.ndarray:
    """A₁ ⊗ I + I ⊗ A₂；其指数是张量积，形变迹可加"""
    A1, A2 = as_symmetric(A1), as_symmetric(A2)
    return np.kron(A1, np.eye(A2.shape[0])) + np.kron(np.eye(A1.shape[0]), A2)
