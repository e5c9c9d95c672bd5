"""
离散格点上的哈密顿量

- build_kinetic: 离散拉普拉斯算子 T^(N)（对角 2，次对角 -1）
- build_hamiltonian: PT 对称三对角矩阵 H^(N)(A, B, C, ...)
- square_well_energy: 离散方势阱能级公式 {sin(π n λ / L) / λ}^2
"""

import logging
import math
import string
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

# E 留给能量变量，参数从 A 开始依次命名
PARAM_NAMES: Tuple[str, ...] = tuple(c for c in string.ascii_uppercase if c != "E")

# 超过此维数时矩阵按带状存储
DENSE_LIMIT = 64


def param_names(p: int) -> Tuple[str, ...]:
    if p < 0 or p > len(PARAM_NAMES):
        raise ValueError(f"参数个数超出范围: {p}")
    return PARAM_NAMES[:p]


@dataclass(frozen=True)
class HamiltonianSpec:
    """H^(N) 的描述：维数、参数 (A, B, C, ...)、对角基线是否带常数 2"""

    dimension: int
    params: Tuple[float, ...] = ()
    include_kinetic_shift: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.dimension < 2:
            raise ValueError(f"维数 N 必须至少为 2，当前 {self.dimension}")
        if len(self.params) > self.dimension // 2:
            raise ValueError(
                f"参数个数 {len(self.params)} 超过 [N/2] = {self.dimension // 2}"
            )

    @property
    def param_count(self) -> int:
        return len(self.params)

    def named_params(self) -> Dict[str, float]:
        return dict(zip(param_names(self.param_count), self.params))

    def with_params(self, params: Sequence[float]) -> "HamiltonianSpec":
        return HamiltonianSpec(self.dimension, tuple(params), self.include_kinetic_shift)

    def diagonal(self) -> np.ndarray:
        """(-iA, -iB, ..., 0, ..., +iB, +iA)，可选加常数 2"""
        n = self.dimension
        diag = np.zeros(n, dtype=complex)
        for k, value in enumerate(self.params):
            diag[k] = -1j * value
            diag[n - 1 - k] = 1j * value
        if self.include_kinetic_shift:
            diag += 2.0
        return diag


@dataclass(frozen=True)
class SquareWellSpec:
    """离散方势阱：格距 λ、阱宽 L（ħ = 1，m = 1/2），要求 L = Nλ"""

    mesh: float
    width: float

    def __post_init__(self) -> None:
        if self.mesh <= 0 or self.width <= 0:
            raise ValueError(f"格距和阱宽必须为正: λ={self.mesh}, L={self.width}")
        ratio = self.width / self.mesh
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"阱宽 L={self.width} 不是格距 λ={self.mesh} 的整数倍")

    @classmethod
    def from_dimension(cls, dimension: int, mesh: float = 1.0) -> "SquareWellSpec":
        return cls(mesh, dimension * mesh)

    @property
    def dimension(self) -> int:
        return int(round(self.width / self.mesh))


@dataclass(frozen=True)
class TridiagonalMatrix:
    """三条对角线（带状存储）；需要时再展开成稠密矩阵"""

    diagonal: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    storage: str = field(default="dense")

    @property
    def dimension(self) -> int:
        return len(self.diagonal)

    def to_dense(self) -> np.ndarray:
        dtype = np.result_type(self.diagonal, self.lower, self.upper)
        matrix = np.diag(self.diagonal.astype(dtype))
        if self.dimension > 1:
            matrix += np.diag(self.lower.astype(dtype), -1) + np.diag(self.upper.astype(dtype), 1)
        return matrix

    def to_sparse(self) -> sparse.dia_matrix:
        return sparse.diags([self.lower, self.diagonal, self.upper], [-1, 0, 1], format="dia")

    def is_pt_symmetric(self, atol: float = 0.0) -> bool:
        """(j,k) 元等于 (N+1-j, N+1-k) 元的复共轭"""
        dense = self.to_dense()
        return bool(np.allclose(dense, np.conj(dense[::-1, ::-1]), rtol=0.0, atol=atol))

    def to_dict(self) -> Dict:
        diag = np.asarray(self.diagonal, dtype=complex)
        return {
            "dimension": self.dimension,
            "storage": self.storage,
            "diagonal_real": diag.real.tolist(),
            "diagonal_imag": diag.imag.tolist(),
            "offdiagonal": float(np.real(self.upper[0])) if self.dimension > 1 else None,
        }


def _tridiagonal(diagonal: np.ndarray) -> TridiagonalMatrix:
    n = len(diagonal)
    off = -np.ones(max(n - 1, 0), dtype=diagonal.dtype)
    storage = "dense" if n <= DENSE_LIMIT else "banded"
    return TridiagonalMatrix(diagonal, off, off.copy(), storage)


def build_kinetic(N: int) -> TridiagonalMatrix:
    """离散拉普拉斯算子 T^(N)"""
    if N < 1:
        raise ValueError(f"N 必须至少为 1，当前 {N}")
    return _tridiagonal(np.full(N, 2.0))


def build_hamiltonian(spec: HamiltonianSpec) -> TridiagonalMatrix:
    """PT 对称哈密顿量 H^(N)(A, B, ...)"""
    if spec.param_count > spec.dimension // 2:
        raise ValueError(f"参数个数 {spec.param_count} 超过 [N/2]")
    return _tridiagonal(spec.diagonal())


def kinetic_spectrum(N: int, mesh: float = 1.0) -> np.ndarray:
    """T^(N)/λ² 的精确本征值 (2 - 2cos(kπ/(N+1)))/λ²，k = 1..N，升序"""
    if N < 1:
        raise ValueError(f"N 必须至少为 1，当前 {N}")
    k = np.arange(1, N + 1)
    return (2.0 - 2.0 * np.cos(k * np.pi / (N + 1))) / mesh**2


def square_well_energy(n: int, spec: SquareWellSpec) -> float:
    """{sin(π n λ / L) / λ}^2，按原式直接计算"""
    if n < 1:
        raise ValueError(f"能级序号 n 必须至少为 1，当前 {n}")
    return (math.sin(math.pi * n * spec.mesh / spec.width) / spec.mesh) ** 2


def continuum_level(n: int, width: float) -> float:
    """λ → 0 极限下的连续方势阱能级 (πn/L)^2"""
    if n < 1:
        raise ValueError(f"能级序号 n 必须至少为 1，当前 {n}")
    return (math.pi * n / width) ** 2


def reliable_level_cutoff(N: int) -> int:
    """n_max = [N/2]，更高的能级标记为不可靠"""
    if N < 2:
        raise ValueError(f"N 必须至少为 2，当前 {N}")
    return N // 2


def square_well_levels(spec: SquareWellSpec) -> List[Tuple[int, float, bool]]:
    """全部 N 个能级 (n, E(n), 是否可靠)"""
    N = spec.dimension
    cutoff = reliable_level_cutoff(N)
    return [(n, square_well_energy(n, spec), n <= cutoff) for n in range(1, N + 1)]
