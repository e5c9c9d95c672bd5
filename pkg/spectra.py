"""
数值谱、本征向量与 EP 附近的简并诊断
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import scipy.linalg
import sympy
from scipy.optimize import linear_sum_assignment

from lattice import HamiltonianSpec, build_hamiltonian
from secular import MAX_SYMBOLIC_N, secular_symbolic
from settings import Settings

logger = logging.getLogger(__name__)

MAX_NUMERIC_N = 10000
RESIDUAL_TOL = 1e-8
# 已知 EP 周围这个参数距离内放宽交叉校验
EP_NEIGHBOURHOOD = 1e-3
# 扫描配对：本征值间距小于 TIE_RADIUS 时引入本征向量重叠，权重 TIE_WEIGHT
TIE_RADIUS = 1e-6
TIE_WEIGHT = 1e-9
# 交叉校验求根的工作精度（十进制位数）
CROSSCHECK_DPS = 60


class EigenSolveError(RuntimeError):
    """特征值求解失败：两种方法不一致、不收敛或本征向量残差过大"""


@dataclass(frozen=True)
class SpectrumReport:
    N: int
    params: Tuple[float, ...]
    eigenvalues: np.ndarray
    reality_flags: np.ndarray
    min_gap: float
    is_physical: bool
    tol_imag: float
    tol_gap: float
    discrepancy: Optional[float] = None

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if len(self.eigenvalues) else 0.0

    def central(self, M: int) -> np.ndarray:
        """最接近 0 的 M 个本征值的下标（按原顺序）"""
        order = np.argsort(np.abs(self.eigenvalues), kind="stable")
        return np.sort(order[:M])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "params": list(self.params),
            "eigenvalues": [
                {"re": float(e.real), "im": float(e.imag), "real": bool(flag)}
                for e, flag in zip(self.eigenvalues, self.reality_flags)
            ],
            "min_gap": None if math.isinf(self.min_gap) else float(self.min_gap),
            "is_physical": bool(self.is_physical),
            "crosscheck_discrepancy": self.discrepancy,
        }

    def to_csv_rows(self) -> List[Dict[str, Any]]:
        return [
            {"re": float(e.real), "im": float(e.imag), "reality_flag": int(bool(flag))}
            for e, flag in zip(self.eigenvalues, self.reality_flags)
        ]


@dataclass(frozen=True)
class OverlapDiagnostics:
    """中心 M 个能级本征向量两两之间的归一化重叠 |<ψ_m|ψ_n>|"""

    indices: Tuple[int, ...]
    eigenvalues: np.ndarray
    overlaps: np.ndarray = field(repr=False)

    def _offdiagonal(self) -> np.ndarray:
        mask = ~np.eye(len(self.indices), dtype=bool)
        return self.overlaps[mask]

    @property
    def min_overlap(self) -> float:
        off = self._offdiagonal()
        return float(off.min()) if off.size else 1.0

    @property
    def max_overlap(self) -> float:
        off = self._offdiagonal()
        return float(off.max()) if off.size else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "indices": list(self.indices),
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "overlaps": self.overlaps.tolist(),
        }


def _sorted(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return values[np.lexsort((values.imag, values.real))]


def classify_spectrum(eigenvalues: Sequence[complex], tol_imag_rel: float = 1e-9,
                      tol_gap: float = 1e-8, N: Optional[int] = None,
                      params: Sequence[float] = ()) -> SpectrumReport:
    """实性与非简并判定；tol_imag = tol_imag_rel·(1 + 谱半径)"""
    values = _sorted(np.asarray(eigenvalues))
    radius = float(np.max(np.abs(values))) if values.size else 0.0
    tol_imag = tol_imag_rel * (1.0 + radius)
    flags = np.abs(values.imag) <= tol_imag
    real_parts = np.sort(values.real[flags])
    min_gap = float(np.min(np.diff(real_parts))) if real_parts.size > 1 else math.inf
    is_physical = bool(flags.all() and min_gap > tol_gap)
    return SpectrumReport(
        N=N if N is not None else len(values),
        params=tuple(float(v) for v in params),
        eigenvalues=values,
        reality_flags=flags,
        min_gap=min_gap,
        is_physical=is_physical,
        tol_imag=tol_imag,
        tol_gap=tol_gap,
    )


def physical_mask(spectra: np.ndarray, tol_imag_rel: float = 1e-9, tol_gap: float = 1e-8) -> np.ndarray:
    """classify_spectrum 的向量化版本；最后一维是每个点的 N 个本征值"""
    spectra = np.asarray(spectra, dtype=complex)
    radius = np.max(np.abs(spectra), axis=-1, keepdims=True)
    all_real = np.all(np.abs(spectra.imag) <= tol_imag_rel * (1.0 + radius), axis=-1)
    if spectra.shape[-1] < 2:
        return all_real
    gaps = np.diff(np.sort(spectra.real, axis=-1), axis=-1)
    return all_real & (np.min(gaps, axis=-1) > tol_gap)


def _match(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """最优一一配对，返回 (b 的排列, 各对距离)"""
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    return perm, np.abs(a - b[perm])


def _cluster_sizes(values: np.ndarray, radius: float) -> np.ndarray:
    """距离小于 radius 的本征值连成团，返回每个值所在团的大小"""
    n = len(values)
    labels = np.arange(n)
    close = np.abs(values[:, None] - values[None, :]) < radius
    changed = True
    while changed:
        changed = False
        for i, j in zip(*np.nonzero(close)):
            low = min(labels[i], labels[j])
            if labels[i] != low or labels[j] != low:
                labels[i] = labels[j] = low
                changed = True
    return np.bincount(labels, minlength=n)[labels]


def _polyroots(coeffs: Sequence[Any], N: int) -> List[complex]:
    with mpmath.workdps(CROSSCHECK_DPS):
        mp_coeffs = [mpmath.mpf(int(c.p)) / int(c.q) for c in coeffs]
        try:
            found = mpmath.polyroots(mp_coeffs, maxsteps=200, extraprec=60)
        except mpmath.libmp.NoConvergence:
            try:
                found = mpmath.polyroots(mp_coeffs, maxsteps=2000, extraprec=200)
            except mpmath.libmp.NoConvergence as exc:
                logger.error(f"N={N}: 久期多项式求根不收敛")
                raise EigenSolveError(f"久期多项式求根不收敛: {exc}") from exc
        return [complex(r) for r in found]


def _secular_roots(spec: HamiltonianSpec) -> np.ndarray:
    """精确有理系数的久期多项式，无平方分解后在 CROSSCHECK_DPS 位精度下用 mpmath 求根

    N 较大时多项式根对系数极其敏感，双精度系数的舍入误差本身就会超出校验容差；
    恰好落在 EP 上时重根由无平方分解给出，polyroots 只处理单根。
    """
    form = secular_symbolic(spec.dimension, spec.param_count)
    poly = sympy.Poly(form.exact_full_coefficients(spec.params), sympy.Symbol("E"), domain=sympy.QQ)
    roots: List[complex] = []
    for factor, mult in poly.sqf_list()[1]:
        coeffs = factor.all_coeffs()
        if len(coeffs) == 2:
            found = [complex(-coeffs[1] / coeffs[0])]
        else:
            found = _polyroots(coeffs, spec.dimension)
        roots.extend(found * mult)
    shift = 2.0 if spec.include_kinetic_shift else 0.0
    return np.array(roots, dtype=complex) + shift


def _near_known_ep(spec: HamiltonianSpec, known_eps: Sequence[Any]) -> int:
    """参数落在某个已知 EP 附近时返回其阶数，否则 0"""
    order = 0
    for ep in known_eps:
        if getattr(ep, "N", spec.dimension) != spec.dimension:
            continue
        ep_params = np.asarray(ep.params, dtype=float)
        if len(ep_params) != spec.param_count:
            continue
        if np.linalg.norm(ep_params - np.asarray(spec.params)) <= EP_NEIGHBOURHOOD:
            order = max(order, int(ep.order))
    return order


def eigen_solve(spec: HamiltonianSpec, tol: Optional[float] = None, cross_check: bool = True,
                known_eps: Sequence[Any] = (), settings: Optional[Settings] = None) -> SpectrumReport:
    """矩阵特征值（报告用）+ 久期多项式求根（交叉校验）

    EP 附近多重根本身病态，交叉校验容差对大小为 m 的本征值团放宽到 tol^(1/m)。
    """
    settings = settings or Settings()
    tol = settings.tol if tol is None else tol
    N = spec.dimension
    if N > MAX_NUMERIC_N:
        raise ValueError(f"N={N} 超过数值求解上限 {MAX_NUMERIC_N}")

    matrix = build_hamiltonian(spec)
    try:
        values = scipy.linalg.eigvals(matrix.to_dense(), check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        logger.error(f"N={N}, params={spec.params}: 特征值求解失败: {exc}")
        raise EigenSolveError(f"特征值求解失败: {exc}") from exc
    values = _sorted(values)

    discrepancy = None
    if cross_check and N <= min(settings.crosscheck_max_n, MAX_SYMBOLIC_N):
        roots = _secular_roots(spec)
        _, distances = _match(values, roots)
        radius = float(np.max(np.abs(values)))
        sizes = _cluster_sizes(values, tol ** 0.25 * (1.0 + radius))
        ep_order = _near_known_ep(spec, known_eps)
        if ep_order:
            sizes = np.maximum(sizes, ep_order)
        allowed = tol ** (1.0 / sizes) * (1.0 + radius)
        discrepancy = float(distances.max())
        if np.any(distances > allowed):
            worst = int(np.argmax(distances - allowed))
            logger.error(
                f"N={N}, params={spec.params}: 交叉校验失败，"
                f"E={values[worst]:.6g} 偏差 {distances[worst]:.3g} > {allowed[worst]:.3g}"
            )
            raise EigenSolveError(
                f"两种方法得到的特征值不一致: 偏差 {distances[worst]:.3g}，允许 {allowed[worst]:.3g}"
            )

    report = classify_spectrum(values, settings.tol_imag_rel, settings.tol_gap, N, spec.params)
    return replace(report, discrepancy=discrepancy)


# ---------------------------------------------------------------------------
# 本征向量
# ---------------------------------------------------------------------------


def _residual(spec: HamiltonianSpec, eigenvalue: complex, vector: np.ndarray) -> float:
    diag = spec.diagonal()
    hv = (diag - eigenvalue) * vector
    hv[1:] -= vector[:-1]
    hv[:-1] -= vector[1:]
    return float(np.linalg.norm(hv) / np.linalg.norm(vector))


def _normalize(vector: np.ndarray) -> np.ndarray:
    vector = vector / np.linalg.norm(vector)
    pivot = vector[int(np.argmax(np.abs(vector)))]
    return vector * (abs(pivot) / pivot)


def _inverse_iteration(spec: HamiltonianSpec, eigenvalue: complex, steps: int = 6) -> np.ndarray:
    N = spec.dimension
    shift = eigenvalue + 1e-10 * (1.0 + abs(eigenvalue))
    banded = np.zeros((3, N), dtype=complex)
    banded[0, 1:] = -1.0
    banded[1] = spec.diagonal() - shift
    banded[2, :-1] = -1.0
    vector = np.ones(N, dtype=complex) / math.sqrt(N)
    for _ in range(steps):
        vector = scipy.linalg.solve_banded((1, 1), banded, vector)
        vector /= np.linalg.norm(vector)
    return vector


def eigenvectors(spec: HamiltonianSpec, eigenvalue: complex) -> np.ndarray:
    """ψ_{k+1} = (d_k - E)ψ_k - ψ_{k-1}，ψ_0 = 0，ψ_1 = 1；残差过大时改用反迭代"""
    diag = spec.diagonal()
    N = spec.dimension
    psi = np.zeros(N + 1, dtype=complex)
    psi[1] = 1.0
    for k in range(1, N):
        psi[k + 1] = (diag[k - 1] - eigenvalue) * psi[k] - psi[k - 1]
    vector = psi[1:]
    if np.all(np.isfinite(vector)) and _residual(spec, eigenvalue, vector) <= RESIDUAL_TOL:
        return _normalize(vector)

    logger.debug(f"N={N}, E={eigenvalue:.6g}: 前向递推残差过大，改用反迭代")
    try:
        vector = _inverse_iteration(spec, eigenvalue)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"反迭代失败: {exc}") from exc
    residual = _residual(spec, eigenvalue, vector)
    if residual > RESIDUAL_TOL * (1.0 + abs(eigenvalue)):
        logger.error(f"N={N}, E={eigenvalue:.6g}: 本征向量残差 {residual:.3g}")
        raise EigenSolveError(f"本征向量残差 {residual:.3g} 超过 {RESIDUAL_TOL}")
    return _normalize(vector)


def overlap_matrix(spec: HamiltonianSpec, M: int, settings: Optional[Settings] = None) -> OverlapDiagnostics:
    """最接近 0 的 M 个本征值对应本征向量的两两重叠（普通欧氏内积）"""
    if not 1 <= M <= spec.dimension:
        raise ValueError(f"M={M} 超出 1..{spec.dimension}")
    report = eigen_solve(spec, cross_check=False, settings=settings)
    idx = report.central(M)
    selected = report.eigenvalues[idx]
    vectors = np.array([eigenvectors(spec, e) for e in selected])
    gram = np.abs(vectors.conj() @ vectors.T)
    norms = np.linalg.norm(vectors, axis=1)
    overlaps = np.clip(gram / np.outer(norms, norms), 0.0, 1.0)
    return OverlapDiagnostics(tuple(int(i) for i in idx), selected, overlaps)


# ---------------------------------------------------------------------------
# 参数扫描中的配对与劈裂指数
# ---------------------------------------------------------------------------


def pair_spectra(previous: Sequence[complex], current: Sequence[complex],
                 previous_vectors: Optional[np.ndarray] = None,
                 current_vectors: Optional[np.ndarray] = None) -> np.ndarray:
    """返回排列 perm，使 current[perm] 与 previous 逐项对应；距离相同时用本征向量重叠区分"""
    previous = np.asarray(previous, dtype=complex)
    current = np.asarray(current, dtype=complex)
    if previous.shape != current.shape:
        raise ValueError(f"两组谱长度不同: {previous.shape} vs {current.shape}")
    cost = np.abs(previous[:, None] - current[None, :])
    if previous_vectors is not None and current_vectors is not None:
        overlap = np.abs(np.conj(previous_vectors) @ np.asarray(current_vectors).T)
        overlap /= np.outer(np.linalg.norm(previous_vectors, axis=1), np.linalg.norm(current_vectors, axis=1))
        cost = cost + TIE_WEIGHT * (1.0 - overlap)
    rows, cols = linear_sum_assignment(cost)
    return cols[np.argsort(rows)]


def _vectors_or_none(spec: HamiltonianSpec, values: np.ndarray) -> Optional[np.ndarray]:
    try:
        return np.array([eigenvectors(spec, e) for e in values])
    except EigenSolveError:
        return None


def sweep_spectra(base: HamiltonianSpec, direction: Sequence[float], steps: Sequence[float]) -> np.ndarray:
    """沿 params + t·direction 追踪本征值，返回 (len(steps), N) 数组，第 k 列是连续的一条能级

    相邻两步的谱按最近邻配对；本征值近乎重合时带上本征向量重叠。
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (base.param_count,):
        raise ValueError(f"方向向量与参数个数 {base.param_count} 不符")
    if not len(steps):
        raise ValueError("steps 不能为空")
    origin = np.asarray(base.params, dtype=float)
    tracks: List[np.ndarray] = []
    prev_vectors: Optional[np.ndarray] = None
    prev_spec = base
    for t in steps:
        spec = base.with_params(origin + float(t) * d)
        values = eigen_solve(spec, cross_check=False).eigenvalues
        gaps = np.abs(values[:, None] - values[None, :]) + np.eye(len(values))
        vectors = _vectors_or_none(spec, values) if gaps.min() < TIE_RADIUS else None
        if tracks:
            if vectors is not None and prev_vectors is None:
                prev_vectors = _vectors_or_none(prev_spec, tracks[-1])
            perm = pair_spectra(tracks[-1], values, prev_vectors, vectors)
            values = values[perm]
            vectors = vectors[perm] if vectors is not None else None
        tracks.append(values)
        prev_vectors, prev_spec = vectors, spec
    return np.array(tracks)


def _perturbation_matrix(N: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return w / np.linalg.norm(w, 2)


def splitting_exponent(target: Any, direction: Optional[Sequence[float]] = None,
                       eps_list: Sequence[float] = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4),
                       mode: str = "parameter", M: Optional[int] = None, seed: int = 0) -> float:
    """中心 M 个本征值的最大位移 δ(ε) ~ ε^γ，返回最小二乘拟合的 γ

    target 是 HamiltonianSpec，或带 to_spec() / order 的 EP 候选点。
    mode="parameter" 沿 direction 移动参数；mode="matrix" 加上固定的随机复矩阵 ε·W。
    """
    if hasattr(target, "to_spec"):
        spec = target.to_spec()
        M = M or int(target.order)
    else:
        spec = target
    if M is None:
        raise ValueError("需要给出中心能级个数 M")
    if mode not in ("parameter", "matrix"):
        raise ValueError(f"未知模式: {mode}")
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps.size < 2 or np.any(eps <= 0):
        raise ValueError("eps_list 至少需要两个正数")

    base = eigen_solve(spec, cross_check=False)
    centre = base.eigenvalues[base.central(M)]
    dense = build_hamiltonian(spec).to_dense()

    if mode == "parameter":
        d = np.eye(spec.param_count)[0] if direction is None else np.asarray(direction, dtype=float)
        if d.shape != (spec.param_count,) or not np.linalg.norm(d):
            raise ValueError(f"方向向量与参数个数 {spec.param_count} 不符")
        d = d / np.linalg.norm(d)
    else:
        w = _perturbation_matrix(spec.dimension, seed)

    shifts = []
    for e in eps:
        try:
            if mode == "parameter":
                moved = spec.with_params(np.asarray(spec.params) + e * d)
                values = eigen_solve(moved, cross_check=False).eigenvalues
            else:
                values = scipy.linalg.eigvals(dense + e * w)
        except (EigenSolveError, np.linalg.LinAlgError, ValueError) as exc:
            raise EigenSolveError(f"ε={e:g} 处求解失败: {exc}") from exc
        values = np.asarray(values, dtype=complex)
        nearest = values[np.argsort(np.abs(values - np.mean(centre)), kind="stable")[:M]]
        nearest = nearest[pair_spectra(centre, nearest)]
        shifts.append(float(np.abs(centre - nearest).max()))

    shifts = np.asarray(shifts)
    if np.any(shifts <= 0):
        raise EigenSolveError("位移为零，无法拟合劈裂指数")
    slope = float(np.polyfit(np.log(eps), np.log(shifts), 1)[0])
    logger.info(f"N={spec.dimension}, M={M}, mode={mode}: 劈裂指数 {slope:.4f}")
    return slope
