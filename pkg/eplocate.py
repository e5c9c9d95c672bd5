"""
EP（例外点）定位

- ep4_even: 偶数 N=2K 的中心四重简并，由两支四次多项式 Z_(±2K) 给出
- ep5_odd: 奇数 N=2K+1 的中心五重简并，结式消元 + 回代
- ep2_one_param: 单参数中心 EP2（B=0 时 A=±1）
- ep_multi_newton: 三、四参数附录模型的多起点阻尼牛顿法
- ep4_asymptotic: 大 K 时最左根的渐近展开

所有候选点最后都要过 verify：残差小于阈值，且约化久期多项式
在候选点处被 x^[M/2] 整除。
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import sympy
from sympy import Rational, sqrt

from lattice import HamiltonianSpec, param_names
from polyalg import MultiPoly, UniPoly, isolate_real_roots, primitive, resultant, solve_quartic_exact
from secular import APPENDIX_CASES, appendix_coeffs, lemma_coeffs_even, lemma_coeffs_odd, secular_symbolic
from settings import Settings
from workers import run_in_workers

logger = logging.getLogger(__name__)

# 附录模型的目标阶数
APPENDIX_ORDERS = {(7, 3): 7, (8, 3): 6, (8, 4): 8}

# x(K) = -√2 + c1·g + c2·g² + c3·g³，g = 1/(K-1)
ASYMPTOTIC_COEFFS: Tuple[sympy.Expr, ...] = (
    -(4 - sqrt(2)) / 8,
    (29 * sqrt(2) - 32) / 128,
    -7 * (64 - 43 * sqrt(2)) / 1024,
)


class EliminationError(ArithmeticError):
    """消元得到零多项式，或理应存在的实根缺失"""


@dataclass(frozen=True)
class EPCandidate:
    N: int
    params: Tuple[float, ...]
    order: int
    residuals: Tuple[float, ...] = ()
    verified: bool = False
    source: str = ""
    note: str = ""

    @property
    def param_count(self) -> int:
        return len(self.params)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    def to_spec(self) -> HamiltonianSpec:
        return HamiltonianSpec(self.N, self.params)

    def named_params(self) -> Dict[str, float]:
        return dict(zip(param_names(self.param_count), self.params))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "order": self.order,
            "params": self.named_params(),
            "residuals": list(self.residuals),
            "verified": self.verified,
            "source": self.source,
            "note": self.note,
        }

    def to_csv_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"N": self.N, "order": self.order}
        row.update({name: f"{value:.12g}" for name, value in self.named_params().items()})
        row.update({
            "max_residual": f"{self.max_residual:.3e}",
            "verified": int(self.verified),
            "source": self.source,
        })
        return row


def verify(N: int, params: Sequence[float], order: int,
           settings: Optional[Settings] = None) -> Tuple[Tuple[float, ...], bool]:
    """c_K, c_{K-1}, ..., c_{K-[M/2]+1} 在候选点处的残差；全部小于 verify_tol 即通过"""
    settings = settings or Settings()
    K = N // 2
    needed = order // 2
    if needed < 1 or needed > K:
        raise ValueError(f"N={N} 不可能有 {order} 阶中心简并")
    named = dict(zip(param_names(len(params)), (float(v) for v in params)))
    if len(params) == 2 and needed <= 2 and K >= 2:
        # 两参数时 c_K、c_{K-1} 有闭式，任意 K 都可用
        closed = lemma_coeffs_odd(K) if N % 2 else lemma_coeffs_even(K)
        coeffs = closed[:needed]
    else:
        form = secular_symbolic(N, len(params))
        coeffs = tuple(form.c(K - i) for i in range(needed))
    residuals = tuple(float(abs(c.evaluate(named))) for c in coeffs)
    return residuals, max(residuals) < settings.verify_tol


def _candidate(N: int, params: Sequence[float], order: int, source: str,
               settings: Settings, note: str = "") -> EPCandidate:
    params = tuple(float(v) + 0.0 for v in params)
    residuals, ok = verify(N, params, order, settings)
    return EPCandidate(N, params, order, residuals, ok, source, note)


def mirror(candidate: EPCandidate, settings: Optional[Settings] = None) -> EPCandidate:
    """(A, B, ...) → (-A, -B, ...)，重新校验"""
    settings = settings or Settings()
    return _candidate(candidate.N, [-v for v in candidate.params], candidate.order,
                      candidate.source, settings, candidate.note)


def _dedupe(candidates: Sequence[EPCandidate], tol: float) -> List[EPCandidate]:
    """距离 tol 以内的候选点合并，保留残差最小者"""
    kept: List[EPCandidate] = []
    for cand in sorted(candidates, key=lambda c: c.max_residual):
        if all(np.linalg.norm(np.subtract(cand.params, k.params)) > tol for k in kept):
            kept.append(cand)
    return sorted(kept, key=lambda c: c.params)


def _polish(equations: Sequence[MultiPoly], variables: Sequence[str],
            start: Sequence[float]) -> Tuple[float, ...]:
    """高精度牛顿法（mpmath）把近似根推到双精度极限；失败时原样返回"""
    syms = [sympy.Symbol(v) for v in variables]
    exprs = [eq.extend(variables).as_expr() for eq in equations]
    funcs = [sympy.lambdify(syms, ex, "mpmath") for ex in exprs]
    jac = sympy.lambdify(syms, [[sympy.diff(ex, s) for s in syms] for ex in exprs], "mpmath")
    try:
        with mpmath.workdps(40):
            root = mpmath.findroot(funcs, tuple(start), J=lambda *x: mpmath.matrix(jac(*x)),
                                   verify=False, maxsteps=50)
            return tuple(float(v) for v in root)
    except (ZeroDivisionError, ValueError) as exc:
        logger.debug(f"精化失败 {tuple(start)}: {exc}")
        return tuple(float(v) for v in start)


# ---------------------------------------------------------------------------
# 偶数 N：EP4
# ---------------------------------------------------------------------------


def z_polynomial(K: int, sign: int) -> UniPoly:
    """Z_(±2K)(x) = (K-1)x⁴ - 2(K-1)x² ± 2x + 1"""
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    if sign not in (1, -1):
        raise ValueError(f"sign 只能是 +1 或 -1，当前 {sign}")
    return UniPoly((K - 1, 0, -2 * (K - 1), 2 * sign, 1), "x")


def _cleared(poly: MultiPoly, s: int) -> MultiPoly:
    """A²·poly(A, s - 1/A)，poly 在 B 中至多二次"""
    if poly.degree("B") > 2:
        raise ValueError("B 的次数超过 2，无法用 A² 清分母")
    A = MultiPoly.var("A", ("A",))
    total = MultiPoly.zero(("A",))
    for k in range(poly.degree("B") + 1):
        part = poly.coefficient("B", k).extend(("A",))
        total = total + part * (s * A - 1) ** k * A ** (2 - k)
    return total


@dataclass(frozen=True)
class TheoremCertificate:
    """B = s - 1/A（s = ±1）代入 c_K、c_{K-1} 并乘 A² 后的精确结果"""

    K: int
    cleared_ck: Dict[int, MultiPoly]
    cleared_ck1: Dict[int, MultiPoly]
    ratios: Dict[int, Optional[Rational]]

    @property
    def holds(self) -> bool:
        return all(p.is_zero() for p in self.cleared_ck.values()) and all(
            r is not None for r in self.ratios.values()
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "K": self.K,
            "holds": self.holds,
            "branches": [
                {
                    "B": f"{s:+d} - 1/A",
                    "cleared_cK": str(self.cleared_ck[s]),
                    "cleared_cK1": str(self.cleared_ck1[s]),
                    "z_sign": -s,
                    "ratio": None if self.ratios[s] is None else str(self.ratios[s]),
                }
                for s in (1, -1)
            ],
        }


def theorem_certificate(K: int) -> TheoremCertificate:
    """B = +1 - 1/A 对应 Z_(-2K)，B = -1 - 1/A 对应 Z_(+2K)"""
    c_K, c_K1 = lemma_coeffs_even(K)
    cleared_ck, cleared_ck1, ratios = {}, {}, {}
    for s in (1, -1):
        cleared_ck[s] = _cleared(c_K, s)
        cleared_ck1[s] = _cleared(c_K1, s)
        target = z_polynomial(K, -s)
        got = UniPoly.from_multipoly(cleared_ck1[s], "A")
        ratio = None
        if not got.is_zero() and got.degree == target.degree and got.is_proportional_to(target):
            ratio = got.coefficients[0] / target.coefficients[0]
        ratios[s] = ratio
    cert = TheoremCertificate(K, cleared_ck, cleared_ck1, ratios)
    logger.debug(f"K={K}: 定理证书 {'成立' if cert.holds else '不成立'}")
    return cert


def _b_options(K: int, x: float) -> List[float]:
    cubic = (K - 1) * x**3 - 2 * (K - 1) * x
    options = [cubic + 1, cubic - 1, 1 - 1 / x, -1 - 1 / x]
    unique: List[float] = []
    for b in options:
        if all(abs(b - u) > 1e-9 for u in unique):
            unique.append(b)
    return unique


def ep4_even(K: int, settings: Optional[Settings] = None) -> List[EPCandidate]:
    """两支 Z 的每个实根 x 配上所有可能的 B，只保留通过校验的 (A=x, B)"""
    settings = settings or Settings()
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    N = 2 * K
    c_K, c_K1 = lemma_coeffs_even(K)
    found: List[EPCandidate] = []
    for sign in (1, -1):
        z = z_polynomial(K, sign)
        roots = [r for r in solve_quartic_exact(z, settings.root_precision) if r.is_real]
        if not roots:
            raise EliminationError(f"K={K}: Z_({sign * N:+d}) 没有实根")
        label = f"Z({'+' if sign > 0 else '-'}{N})"
        for root in roots:
            x = root.refined
            for b in _b_options(K, x):
                cand = _candidate(N, (x, b), 4, label, settings)
                if not cand.verified and cand.max_residual < 1e-6:
                    cand = _candidate(N, _polish((c_K1, c_K), ("A", "B"), (x, b)), 4, label, settings)
                if cand.verified:
                    found.append(cand)
    result = _dedupe(found, settings.dedup_tol)
    logger.info(f"N={N}: 找到 {len(result)} 个 EP4 候选点")
    return result


def ep4_roots(K: int, sign: int = 1, settings: Optional[Settings] = None) -> List[float]:
    """Z_(±2K) 的实根（升序）"""
    settings = settings or Settings()
    return [r.refined for r in solve_quartic_exact(z_polynomial(K, sign), settings.root_precision) if r.is_real]


def z_curves(K_values: Sequence[int], xs: Sequence[float], sign: int = -1) -> Dict[int, np.ndarray]:
    """Z_(±2K)(x) 在采样点上的取值（作图数据）"""
    xs = np.asarray(xs, dtype=float)
    return {K: np.array([z_polynomial(K, sign)(float(x)) for x in xs]) for K in K_values}


# ---------------------------------------------------------------------------
# 渐近展开
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticApproximant:
    K: int
    order: int
    value: float
    exact: Optional[float] = None

    @property
    def g(self) -> float:
        return 1.0 / (self.K - 1)

    @property
    def error(self) -> Optional[float]:
        return None if self.exact is None else self.value - self.exact


def asymptotic_constants() -> Tuple[float, ...]:
    return tuple(float(c) for c in ASYMPTOTIC_COEFFS)


def ep4_asymptotic(K: int, order: int = 3, settings: Optional[Settings] = None) -> AsymptoticApproximant:
    """Z_(+2K) 最左根的截断级数；exact 为对应的精确根"""
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    if order not in (1, 2, 3):
        raise ValueError(f"order 只能是 1、2、3，当前 {order}")
    g = Rational(1, K - 1)
    value = -sqrt(2) + sum(c * g ** (m + 1) for m, c in enumerate(ASYMPTOTIC_COEFFS[:order]))
    exact = min(ep4_roots(K, 1, settings))
    return AsymptoticApproximant(K, order, float(sympy.N(value, 30)), exact)


def asymptotic_table(K_values: Sequence[int], settings: Optional[Settings] = None) -> List[Dict[str, Any]]:
    rows = []
    for K in K_values:
        terms = [ep4_asymptotic(K, m, settings) for m in (1, 2, 3)]
        rows.append({
            "N": 2 * K,
            "K": K,
            "one_term": terms[0].value,
            "two_term": terms[1].value,
            "three_term": terms[2].value,
            "exact": terms[0].exact,
        })
    return rows


# ---------------------------------------------------------------------------
# 奇数 N：EP5
# ---------------------------------------------------------------------------


def odd_elimination_polynomial(K: int, eliminate: str = "A") -> UniPoly:
    """Res(c_{K-1}, c_K) 消去 eliminate；结果只含偶次 B 时换成 y = B²，除去整数内容"""
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    if eliminate not in ("A", "B"):
        raise ValueError(f"只能消去 A 或 B，当前 {eliminate}")
    c_K, c_K1 = lemma_coeffs_odd(K)
    res = resultant(c_K1, c_K, eliminate)
    if res.is_zero():
        logger.error(f"K={K}: 消去 {eliminate} 得到零多项式")
        raise EliminationError(f"K={K}: 消去 {eliminate} 得到零多项式，请改用另一消元顺序")
    _, res = primitive(res.drop_unused())
    keep = "B" if eliminate == "A" else "A"
    uni = UniPoly.from_multipoly(res, keep)
    if keep == "B" and all(c == 0 for c in uni.coefficients[-2::-2]):
        # 只有偶次项：换成 y = B²
        uni = UniPoly(uni.coefficients[::2], "y")
    logger.debug(f"K={K}: 消元多项式 {uni}")
    return uni.primitive()


def _back_solve(c_K: MultiPoly, c_K1: MultiPoly, var: str, value: float) -> List[float]:
    """已知另一变量的取值，从 c_K = 0 解出 var，只保留使 c_{K-1} 近似为零的实解"""
    other = "A" if var == "B" else "B"
    degree = c_K.degree(var)
    coeffs = [
        float(c_K.coefficient(var, k).extend((other,)).evaluate({other: value}))
        for k in range(degree, -1, -1)
    ]
    out = []
    for root in np.roots(coeffs):
        if abs(root.imag) > 1e-7 * (1 + abs(root)):
            continue
        point = {var: root.real, other: value}
        if abs(float(c_K1.evaluate(point))) < 1e-5:
            out.append(float(root.real))
    return out


def ep5_odd(K: int, eliminate: str = "A", settings: Optional[Settings] = None) -> List[EPCandidate]:
    """N = 2K+1：结式消元得到一元多项式，取实根后回代、精化、校验"""
    settings = settings or Settings()
    N = 2 * K + 1
    c_K, c_K1 = lemma_coeffs_odd(K)
    uni = odd_elimination_polynomial(K, eliminate)
    roots = isolate_real_roots(uni, settings.root_precision)

    known: List[Tuple[str, float]] = []
    for r in roots:
        if uni.name == "y":
            if r.refined <= 0:
                continue
            b = float(np.sqrt(r.refined))
            known += [("B", b), ("B", -b)]
        else:
            known.append((uni.name, r.refined))

    found: List[EPCandidate] = []
    for name, value in known:
        var = "A" if name == "B" else "B"
        for other in _back_solve(c_K, c_K1, var, value):
            point = {name: value, var: other}
            start = (point["A"], point["B"])
            polished = _polish((c_K1, c_K), ("A", "B"), start)
            cand = _candidate(N, polished, 5, f"elim-{eliminate}", settings)
            if cand.verified:
                found.append(cand)
            else:
                logger.debug(f"N={N}: 候选点 {polished} 未通过校验 {cand.residuals}")
    result = _dedupe(found, settings.dedup_tol)
    logger.info(f"N={N}: 找到 {len(result)} 个 EP5 候选点（消去 {eliminate}）")
    return result


def ep5_b_roots(K: int, settings: Optional[Settings] = None) -> List[float]:
    """消去 A 后的正 B 根（升序）"""
    settings = settings or Settings()
    uni = odd_elimination_polynomial(K, "A")
    roots = [r.refined for r in isolate_real_roots(uni, settings.root_precision)]
    if uni.name == "y":
        return sorted(float(np.sqrt(y)) for y in roots if y > 0)
    return sorted(b for b in roots if b > 0)


def ep5_a_roots(K: int, settings: Optional[Settings] = None) -> List[float]:
    """消去 B 后的正 A 根（升序）"""
    settings = settings or Settings()
    uni = odd_elimination_polynomial(K, "B")
    return sorted(r.refined for r in isolate_real_roots(uni, settings.root_precision) if r.refined > 0)


# ---------------------------------------------------------------------------
# 单参数 EP2
# ---------------------------------------------------------------------------


def ep2_one_param(N: int, settings: Optional[Settings] = None) -> EPCandidate:
    """B = 0 时 c_K = ±(1 - A²)，返回 A = +1 的候选点（A = -1 由 mirror 得到）"""
    settings = settings or Settings()
    if N % 2 or N < 4:
        raise ValueError(f"只支持偶数 N >= 4，当前 N={N}")
    cand = _candidate(N, (1.0,), 2, "closed-form", settings)
    if not cand.verified:
        raise EliminationError(f"N={N}: A=1 处 c_K 残差 {cand.residuals}")
    return cand


# ---------------------------------------------------------------------------
# 附录模型：多起点阻尼牛顿法
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NewtonOutcome:
    seed: Tuple[float, ...]
    status: str
    params: Tuple[float, ...] = ()
    residual: float = float("nan")
    iterations: int = 0


@dataclass(frozen=True)
class NewtonSearch:
    N: int
    param_count: int
    candidates: Tuple[EPCandidate, ...]
    outcomes: Tuple[NewtonOutcome, ...] = field(repr=False)

    def count(self, status: str) -> int:
        return sum(1 for o in self.outcomes if o.status == status)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "param_count": self.param_count,
            "seeds": len(self.outcomes),
            "converged": self.count("converged"),
            "singular": self.count("singular"),
            "diverged": self.count("diverged"),
            "candidates": [c.to_dict() for c in self.candidates],
        }


class _System:
    """方程组 F 与精确雅可比矩阵 J（符号求导后数值化）"""

    def __init__(self, equations: Sequence[MultiPoly], variables: Sequence[str]) -> None:
        syms = [sympy.Symbol(v) for v in variables]
        exprs = [eq.extend(variables).as_expr() for eq in equations]
        self.F = sympy.lambdify(syms, exprs, "numpy")
        self.J = sympy.lambdify(syms, [[sympy.diff(ex, s) for s in syms] for ex in exprs], "numpy")

    def residual(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.F(*x), dtype=float)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.J(*x), dtype=float)


def _damped_newton(system: _System, seed: Sequence[float], settings: Settings) -> NewtonOutcome:
    x = np.asarray(seed, dtype=float)
    f = system.residual(x)
    for it in range(1, settings.newton_max_iter + 1):
        try:
            step = np.linalg.solve(system.jacobian(x), f)
        except np.linalg.LinAlgError:
            return NewtonOutcome(tuple(seed), "singular", tuple(x), float(np.linalg.norm(f)), it)
        t = 1.0
        norm = np.linalg.norm(f)
        for _ in range(settings.newton_max_halvings):
            trial = x - t * step
            f_trial = system.residual(trial)
            if np.all(np.isfinite(f_trial)) and np.linalg.norm(f_trial) < norm:
                break
            t /= 2
        else:
            return NewtonOutcome(tuple(seed), "diverged", tuple(x), float(norm), it)
        x, f = trial, f_trial
        if np.linalg.norm(t * step) < settings.newton_step_tol * (1 + np.linalg.norm(x)):
            return NewtonOutcome(tuple(seed), "converged", tuple(x), float(np.linalg.norm(f)), it)
    status = "converged" if np.linalg.norm(f) < settings.verify_tol else "diverged"
    return NewtonOutcome(tuple(seed), status, tuple(x), float(np.linalg.norm(f)), settings.newton_max_iter)


def seed_grid(p: int, points: int, low: float = -2.0, high: float = 2.0) -> List[Tuple[float, ...]]:
    axis = np.linspace(low, high, points)
    mesh = np.meshgrid(*([axis] * p), indexing="ij")
    return [tuple(float(v) for v in row) for row in np.stack([m.ravel() for m in mesh], axis=1)]


def newton_search(N: int, p: int, seeds: Optional[Sequence[Sequence[float]]] = None,
                  settings: Optional[Settings] = None) -> NewtonSearch:
    settings = settings or Settings()
    if (N, p) not in APPENDIX_CASES:
        raise ValueError(f"不支持的 (N, p) = ({N}, {p})，可选 {APPENDIX_CASES}")
    coeffs = appendix_coeffs(N, p)
    K = N // 2
    equations = [coeffs.c(j) for j in range(K - p + 1, K + 1)]
    variables = param_names(p)
    system = _System(equations, variables)
    seeds = list(seeds) if seeds is not None else seed_grid(p, settings.newton_grid)
    for seed in seeds:
        if len(seed) != p:
            raise ValueError(f"起点 {seed} 的维数不是 {p}")

    outcomes = run_in_workers(
        lambda s: _damped_newton(system, s, settings), seeds, settings.threads,
        desc=f"Newton N={N} p={p}", progress=settings.progress,
    )
    order = APPENDIX_ORDERS[(N, p)]
    found = []
    for outcome in outcomes:
        if outcome.status == "singular":
            logger.warning(f"N={N}: 起点 {outcome.seed} 处雅可比矩阵奇异，跳过")
            continue
        if outcome.status != "converged":
            logger.debug(f"N={N}: 起点 {outcome.seed} 未收敛（残差 {outcome.residual:.3g}）")
            continue
        cand = _candidate(N, outcome.params, order, "newton", settings)
        if not cand.verified:
            continue
        if any(abs(v) < settings.dedup_tol for v in cand.params):
            cand = replace(cand, note="lower-dimensional")
        found.append(cand)
    result = tuple(_dedupe(found, settings.dedup_tol))
    logger.info(f"N={N}, p={p}: {len(seeds)} 个起点，得到 {len(result)} 个候选点")
    return NewtonSearch(N, p, result, tuple(outcomes))


def ep_multi_newton(N: int, p: int, seeds: Optional[Sequence[Sequence[float]]] = None,
                    settings: Optional[Settings] = None) -> List[EPCandidate]:
    return list(newton_search(N, p, seeds, settings).candidates)
