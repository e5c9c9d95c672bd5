"""
久期多项式

det(E·I - H^(N)) 由三对角递推精确求出；中间量是高斯整数系数多项式，
以 (实部, 虚部) 两个整数多项式保存，最后断言虚部恒为零。
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy
from cachetools import LRUCache, cached
from sympy import Poly, ZZ

from lattice import param_names
from polyalg import MultiPoly

logger = logging.getLogger(__name__)

ENERGY = "E"
REDUCED = "x"
MAX_SYMBOLIC_N = 64

# 附录中印出的 (N, p) 组合
APPENDIX_CASES = ((7, 3), (8, 3), (8, 4))


@dataclass(frozen=True)
class SecularForm:
    """H^(N) 的久期多项式

    full: (E, A, B, ...) 上的 P(E)
    reduced: (x, A, B, ...) 上的 φ(x)，偶数 N 时 P = φ(E²)，奇数 N 时 P = E·φ(E²)
    coeffs: c_1..c_K，c_j 乘以 x^(K-j)
    """

    N: int
    param_count: int
    full: MultiPoly
    reduced: MultiPoly
    coeffs: Tuple[MultiPoly, ...]

    @property
    def K(self) -> int:
        return self.N // 2

    @property
    def params(self) -> Tuple[str, ...]:
        return param_names(self.param_count)

    def c(self, j: int) -> MultiPoly:
        """c_j（c_0 = 1）"""
        if j == 0:
            return MultiPoly.constant(1, self.params)
        if not 1 <= j <= self.K:
            raise ValueError(f"系数序号 j={j} 超出 0..{self.K}")
        return self.coeffs[j - 1]

    def reduced_coefficients(self, values: Sequence[float]) -> np.ndarray:
        """φ 在给定参数处的数值系数 [1, c_1, ..., c_K]（降幂）"""
        named = dict(zip(self.params, values))
        return np.array([1.0] + [complex(c.evaluate(named)).real for c in self.coeffs])

    def full_coefficients(self, values: Sequence[float]) -> np.ndarray:
        """P(E) 的数值系数（降幂，长度 N+1）"""
        out = np.zeros(self.N + 1)
        for j, c in enumerate(self.reduced_coefficients(values)):
            out[2 * j] = c
        return out

    def exact_full_coefficients(self, values: Sequence[float]) -> List[sympy.Rational]:
        """P(E) 的精确有理系数（降幂，长度 N+1），供高精度求根"""
        named = dict(zip(self.params, values))
        out = [sympy.Integer(0)] * (self.N + 1)
        out[0] = sympy.Integer(1)
        for j, c in enumerate(self.coeffs, start=1):
            out[2 * j] = c.evaluate_exact(named)
        return out

    def to_dict(self) -> Dict:
        return {
            "N": self.N,
            "param_count": self.param_count,
            "K": self.K,
            "variables": [ENERGY, *self.params],
            "full": self.full.to_dict(),
            "coefficients": [c.to_dict() for c in self.coeffs],
        }


def _check_range(N: int, p: int) -> None:
    if not 2 <= N <= MAX_SYMBOLIC_N:
        raise ValueError(f"符号计算只支持 2 <= N <= {MAX_SYMBOLIC_N}，当前 N={N}")
    if not 0 <= p <= N // 2:
        raise ValueError(f"参数个数 p={p} 超出 0..{N // 2}")


@cached(cache=LRUCache(maxsize=128))
def secular_symbolic(N: int, p: int) -> SecularForm:
    """递推 p_k = (E - d_k) p_{k-1} - p_{k-2}，d = (-iA, -iB, ..., 0, ..., +iB, +iA)"""
    _check_range(N, p)
    params = param_names(p)
    variables = (ENERGY, *params)
    gens = tuple(sympy.Symbol(v) for v in variables)

    def poly(expr) -> Poly:
        return Poly(expr, *gens, domain=ZZ)

    energy = poly(gens[0])
    # E - d_k = E + i·s_k
    shifts: List[Optional[Poly]] = [None] * N
    for k in range(p):
        shifts[k] = poly(gens[k + 1])
        shifts[N - 1 - k] = poly(-gens[k + 1])

    re_prev, im_prev = poly(0), poly(0)
    re_cur, im_cur = poly(1), poly(0)
    for s in shifts:
        re_next = energy * re_cur - re_prev
        im_next = energy * im_cur - im_prev
        if s is not None:
            re_next -= s * im_cur
            im_next += s * re_cur
        re_prev, im_prev, re_cur, im_cur = re_cur, im_cur, re_next, im_next

    if not im_cur.is_zero:
        raise ArithmeticError(f"N={N}, p={p}: 久期多项式虚部未抵消: {im_cur.as_expr()}")

    full = MultiPoly.from_poly(re_cur, variables)
    reduced, coeffs = _reduce(full, N, params)
    logger.debug(f"久期多项式 N={N}, p={p}: {len(full.terms)} 项")
    return SecularForm(N, p, full, reduced, coeffs)


def _reduce(full: MultiPoly, N: int, params: Tuple[str, ...]) -> Tuple[MultiPoly, Tuple[MultiPoly, ...]]:
    K = N // 2
    parity = N % 2
    terms = {}
    for monom, coeff in full.terms.items():
        e = monom[0]
        if e % 2 != parity:
            raise ArithmeticError(f"N={N}: 出现了奇偶性不符的 E^{e} 项")
        terms[((e - parity) // 2,) + monom[1:]] = coeff
    reduced = MultiPoly((REDUCED, *params), terms)
    if reduced.coefficient(REDUCED, K) != MultiPoly.constant(1):
        raise ArithmeticError(f"N={N}: 久期多项式不是首一的")
    coeffs = tuple(
        reduced.coefficient(REDUCED, K - j).extend(params) for j in range(1, K + 1)
    )
    return reduced, coeffs


# ---------------------------------------------------------------------------
# 闭式系数
# ---------------------------------------------------------------------------


def _lemma_poly(expr: sympy.Expr, K: int) -> MultiPoly:
    # 非整数系数会在 from_expr 中被拒绝，/2、/6 分组的整除性由此得到保证
    return MultiPoly.from_expr(sympy.expand((-1) ** K * expr), ("A", "B"))


@cached(cache=LRUCache(maxsize=256))
def lemma_coeffs_even(K: int) -> Tuple[MultiPoly, MultiPoly]:
    """N = 2K 时的 (c_K, c_{K-1})"""
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    A, B = sympy.symbols("A B")
    k = sympy.Integer(K)
    u = (1 + A * B) ** 2
    c_K = u - A**2
    c_K1 = B**2 + k * (k - 1) * A**2 / 2 - (2 * k - 1) - (k - 1) * (k - 2) * u / 2
    return _lemma_poly(c_K, K), _lemma_poly(c_K1, K)


@cached(cache=LRUCache(maxsize=256))
def lemma_coeffs_odd(K: int) -> Tuple[MultiPoly, MultiPoly]:
    """N = 2K+1 时的 (c_K, c_{K-1})"""
    if K < 2:
        raise ValueError(f"K 必须至少为 2，当前 {K}")
    A, B = sympy.symbols("A B")
    k = sympy.Integer(K)
    u = (1 + A * B) ** 2
    c_K = (k - 1) * u + 2 - k * A**2
    c_K1 = (k - 1) * B**2 + (k + 1) * k * (k - 1) * A**2 / 6 - k**2 - k * (k - 1) * (k - 2) * u / 6
    return _lemma_poly(c_K, K), _lemma_poly(c_K1, K)


def lemma_identity_check(K: int, odd: bool = False) -> bool:
    """闭式系数与递推结果是否作为多项式恒等"""
    N = 2 * K + 1 if odd else 2 * K
    form = secular_symbolic(N, 2)
    c_K, c_K1 = lemma_coeffs_odd(K) if odd else lemma_coeffs_even(K)
    ok = form.c(K) == c_K and form.c(K - 1) == c_K1
    logger.debug(f"闭式系数校验 N={N}: {'通过' if ok else '不一致'}")
    return ok


@dataclass(frozen=True)
class AppendixCoefficients:
    """多参数模型的 c_1..c_K；(8,4) 时另按 D 的幂次拆成 k_0 + k_1 D + k_2 D²"""

    N: int
    param_count: int
    coeffs: Tuple[MultiPoly, ...]
    k_split: Optional[Tuple[Tuple[MultiPoly, MultiPoly, MultiPoly], ...]] = None

    def c(self, j: int) -> MultiPoly:
        return self.coeffs[j - 1]

    def to_dict(self) -> Dict:
        data = {
            "N": self.N,
            "param_count": self.param_count,
            "coefficients": {f"c{j}": str(c) for j, c in enumerate(self.coeffs, start=1)},
        }
        if self.k_split is not None:
            data["k_split"] = {
                f"c{j}": [str(k) for k in ks] for j, ks in enumerate(self.k_split, start=1)
            }
        return data


def _split_by(poly: MultiPoly, var: str) -> Tuple[MultiPoly, MultiPoly, MultiPoly]:
    if poly.degree(var) > 2:
        raise ArithmeticError(f"{var} 的次数超过 2: {poly}")
    rest = tuple(v for v in poly.variables if v != var)
    return tuple(poly.coefficient(var, k).extend(rest) for k in range(3))


def appendix_coeffs(N: int, p: int) -> AppendixCoefficients:
    if (N, p) not in APPENDIX_CASES:
        raise ValueError(f"不支持的 (N, p) = ({N}, {p})，可选 {APPENDIX_CASES}")
    form = secular_symbolic(N, p)
    k_split = None
    if p == 4:
        k_split = tuple(_split_by(c, "D") for c in form.coeffs)
    return AppendixCoefficients(N, p, form.coeffs, k_split)


# ---------------------------------------------------------------------------
# 数值求值与输出
# ---------------------------------------------------------------------------


def evaluate_secular(form: SecularForm, E: complex, params: Sequence[float]) -> complex:
    if len(params) != form.param_count:
        raise ValueError(f"需要 {form.param_count} 个参数，收到 {len(params)}")
    values: Mapping[str, complex] = {ENERGY: E, **dict(zip(form.params, params))}
    return complex(form.full.evaluate(values))


def _power(name: str, k: int) -> str:
    return name if k == 1 else f"{name}^{k}"


def format_secular(form: SecularForm) -> str:
    """按 E 的幂次分组的可读形式，例如 E^6 + (-5 + A^2 + B^2) E^4 + ..."""
    parts = []
    for k in range(form.N, -1, -1):
        coeff = form.full.coefficient(ENERGY, k).extend(form.params)
        if coeff.is_zero():
            continue
        text = str(coeff.as_expr()).replace("**", "^").replace("*", "")
        if k == 0:
            parts.append(f"({text})" if len(coeff.terms) > 1 else text)
        elif coeff == MultiPoly.constant(1):
            parts.append(_power(ENERGY, k))
        elif len(coeff.terms) == 1 and not coeff.used_variables():
            parts.append(f"{text} {_power(ENERGY, k)}")
        else:
            parts.append(f"({text}) {_power(ENERGY, k)}")
    return " + ".join(parts).replace("+ -", "- ") if parts else "0"
