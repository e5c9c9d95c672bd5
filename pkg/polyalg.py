"""
精确多项式代数

整数系数多元多项式（MultiPoly）、有理系数一元多项式（UniPoly）、
实根隔离、结式消元以及四次多项式的精确求解。重计算全部交给 sympy，
本模块只负责变量表对齐、规范化和结果封装。
"""

import logging
import operator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from sympy import Poly, QQ, ZZ, Rational

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]
Number = Union[int, float, complex]

DEFAULT_PRECISION = Rational(1, 10**12)

_OPS: Dict[str, Callable] = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
}


def _symbols(variables: Sequence[str]) -> Tuple[sympy.Symbol, ...]:
    return tuple(sympy.Symbol(name) for name in variables)


@dataclass(frozen=True, eq=False)
class MultiPoly:
    """整数系数多元多项式

    terms 把指数向量（每个声明变量一个槽位）映射到整数系数；
    构造后不可变，零系数项在构造时剔除。
    """

    variables: Tuple[str, ...]
    terms: Mapping[Monomial, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        variables = tuple(self.variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"变量名重复: {variables}")
        clean: Dict[Monomial, int] = {}
        for monom, coeff in dict(self.terms).items():
            monom = tuple(int(e) for e in monom)
            if len(monom) != len(variables):
                raise ValueError(f"指数向量 {monom} 与变量表 {variables} 长度不一致")
            if any(e < 0 for e in monom):
                raise ValueError(f"指数不能为负: {monom}")
            if isinstance(coeff, sympy.Basic):
                if not coeff.is_Integer:
                    raise ValueError(f"系数必须是整数: {coeff}")
                value = int(coeff)
            else:
                value = int(coeff)
                if value != coeff:
                    raise ValueError(f"系数必须是整数: {coeff}")
            if value:
                clean[monom] = clean.get(monom, 0) + value
        clean = {m: c for m, c in sorted(clean.items(), reverse=True) if c}
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "terms", clean)

    # ---- 构造 ----

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> "MultiPoly":
        return cls(tuple(variables), {})

    @classmethod
    def constant(cls, value: int, variables: Sequence[str] = ()) -> "MultiPoly":
        return cls(tuple(variables), {(0,) * len(variables): int(value)})

    @classmethod
    def var(cls, name: str, variables: Optional[Sequence[str]] = None) -> "MultiPoly":
        variables = tuple(variables) if variables is not None else (name,)
        if name not in variables:
            raise ValueError(f"变量 {name} 不在变量表 {variables} 中")
        monom = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {monom: 1})

    @classmethod
    def from_poly(cls, poly: Poly, variables: Optional[Sequence[str]] = None) -> "MultiPoly":
        names = tuple(variables) if variables is not None else tuple(str(g) for g in poly.gens)
        terms = {}
        for monom, coeff in poly.as_dict().items():
            if not coeff.is_Integer:
                raise ValueError(f"系数不是整数: {coeff}")
            terms[monom] = int(coeff)
        return cls(names, terms)

    @classmethod
    def from_expr(cls, expr: Union[str, sympy.Expr], variables: Sequence[str]) -> "MultiPoly":
        """从 sympy 表达式（或字符串）构造；有理系数会被拒绝"""
        variables = tuple(variables)
        if isinstance(expr, str):
            expr = sympy.sympify(expr, locals={v: sympy.Symbol(v) for v in variables})
        if not variables:
            value = sympy.nsimplify(expr)
            if not value.is_Integer:
                raise ValueError(f"常数 {expr} 不是整数")
            return cls.constant(int(value))
        poly = Poly(sympy.expand(expr), *_symbols(variables), domain=QQ)
        terms = {}
        for monom, coeff in poly.as_dict().items():
            coeff = sympy.Rational(coeff)
            if coeff.q != 1:
                raise ValueError(f"表达式含非整数系数 {coeff}，请先清除分母")
            terms[monom] = int(coeff)
        return cls(variables, terms)

    # ---- 基本属性 ----

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def degree(self, var: str) -> int:
        """在 var 中的次数；零多项式返回 -1"""
        if var not in self.variables:
            return 0 if self.terms else -1
        idx = self.variables.index(var)
        return max((m[idx] for m in self.terms), default=-1)

    def used_variables(self) -> Tuple[str, ...]:
        return tuple(v for i, v in enumerate(self.variables) if any(m[i] for m in self.terms))

    def constant_term(self) -> int:
        return self.terms.get((0,) * len(self.variables), 0)

    def content(self) -> int:
        """系数的最大公因数（非负）"""
        value = 0
        for coeff in self.terms.values():
            value = sympy.igcd(value, coeff)
        return int(value)

    def _canonical(self) -> frozenset:
        return frozenset(
            (tuple((v, e) for v, e in zip(self.variables, m) if e), c)
            for m, c in self.terms.items()
        )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = MultiPoly.constant(other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self) -> int:
        return hash(self._canonical())

    # ---- 变量表 ----

    def extend(self, variables: Sequence[str]) -> "MultiPoly":
        """把多项式嵌入到更大的变量表中（原有变量必须全部出现，未使用的变量可被丢弃）"""
        variables = tuple(variables)
        used = self.used_variables()
        missing = [v for v in used if v not in variables]
        if missing:
            raise ValueError(f"变量表 {variables} 缺少 {missing}")
        index = {v: i for i, v in enumerate(self.variables)}
        terms = {}
        for monom, coeff in self.terms.items():
            new = tuple(monom[index[v]] if v in index else 0 for v in variables)
            terms[new] = terms.get(new, 0) + coeff
        return MultiPoly(variables, terms)

    def drop_unused(self) -> "MultiPoly":
        return self.extend(self.used_variables())

    # ---- sympy 互转 ----

    def to_poly(self, variables: Optional[Sequence[str]] = None) -> Poly:
        variables = tuple(variables) if variables is not None else self.variables
        aligned = self.extend(variables)
        gens = _symbols(variables)
        if not aligned.terms:
            return Poly(0, *gens, domain=ZZ)
        return Poly.from_dict(dict(aligned.terms), *gens, domain=ZZ)

    def as_expr(self) -> sympy.Expr:
        gens = _symbols(self.variables)
        expr = sympy.Integer(0)
        for monom, coeff in self.terms.items():
            term = sympy.Integer(coeff)
            for g, e in zip(gens, monom):
                term *= g**e
            expr += term
        return expr

    def __str__(self) -> str:
        return str(self.as_expr())

    def __repr__(self) -> str:
        return f"MultiPoly({self.variables}, {self.as_expr()})"

    @cached_property
    def _numeric(self) -> Callable:
        return sympy.lambdify(_symbols(self.variables), self.as_expr(), modules="numpy")

    def evaluate(self, values: Mapping[str, Number]) -> Number:
        """数值求值；values 必须覆盖所有实际出现的变量"""
        missing = [v for v in self.used_variables() if v not in values]
        if missing:
            raise ValueError(f"缺少变量取值: {missing}")
        args = [values.get(v, 0) for v in self.variables]
        return self._numeric(*args)

    def evaluate_exact(self, values: Mapping[str, Union[int, float, Rational]]) -> Rational:
        """精确求值：浮点取值按其二进制值转为有理数，不引入舍入"""
        missing = [v for v in self.used_variables() if v not in values]
        if missing:
            raise ValueError(f"缺少变量取值: {missing}")
        exact = {v: sympy.Rational(values[v]) for v in self.used_variables()}
        total = sympy.Integer(0)
        for monom, coeff in self.terms.items():
            term = sympy.Integer(coeff)
            for name, e in zip(self.variables, monom):
                if e:
                    term *= exact[name] ** e
            total += term
        return total

    def coefficient(self, var: str, power: int) -> "MultiPoly":
        """收集 var**power 的系数（结果仍保留原变量表，var 的指数为 0）"""
        if var not in self.variables:
            return self if power == 0 else MultiPoly.zero(self.variables)
        idx = self.variables.index(var)
        terms = {}
        for monom, coeff in self.terms.items():
            if monom[idx] == power:
                new = monom[:idx] + (0,) + monom[idx + 1:]
                terms[new] = coeff
        return MultiPoly(self.variables, terms)

    def scale(self, factor: int) -> "MultiPoly":
        return MultiPoly(self.variables, {m: c * int(factor) for m, c in self.terms.items()})

    def exact_div(self, divisor: int) -> "MultiPoly":
        """整除一个整数；不能整除时抛出 ValueError"""
        divisor = int(divisor)
        if divisor == 0:
            raise ZeroDivisionError("除数为 0")
        terms = {}
        for monom, coeff in self.terms.items():
            q, r = divmod(coeff, divisor)
            if r:
                raise ValueError(f"系数 {coeff} 不能被 {divisor} 整除")
            terms[monom] = q
        return MultiPoly(self.variables, terms)

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        return poly_arith(self, _coerce(other), "add")

    def __radd__(self, other: int) -> "MultiPoly":
        return poly_arith(_coerce(other), self, "add")

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return poly_arith(self, _coerce(other), "sub")

    def __rsub__(self, other: int) -> "MultiPoly":
        return poly_arith(_coerce(other), self, "sub")

    def __mul__(self, other: "MultiPoly") -> "MultiPoly":
        return poly_arith(self, _coerce(other), "mul")

    def __rmul__(self, other: int) -> "MultiPoly":
        return poly_arith(_coerce(other), self, "mul")

    def __neg__(self) -> "MultiPoly":
        return self.scale(-1)

    def __pow__(self, exponent: int) -> "MultiPoly":
        if exponent < 0:
            raise ValueError("不支持负指数")
        result = MultiPoly.constant(1, self.variables)
        for _ in range(exponent):
            result = result * self
        return result

    def to_dict(self) -> Dict:
        """JSON 导出：变量表 + 项表"""
        return {
            "variables": list(self.variables),
            "terms": [
                {"exponents": list(m), "coefficient": str(c)}
                for m, c in self.terms.items()
            ],
        }


def _coerce(value: Union[int, MultiPoly]) -> MultiPoly:
    if isinstance(value, MultiPoly):
        return value
    if isinstance(value, int):
        return MultiPoly.constant(value)
    raise TypeError(f"无法转换为 MultiPoly: {value!r}")


def unify_variables(*polys: MultiPoly) -> Tuple[str, ...]:
    """合并变量表：保持首次出现的顺序"""
    merged: List[str] = []
    for p in polys:
        for v in p.variables:
            if v not in merged:
                merged.append(v)
    return tuple(merged)


def poly_arith(a: MultiPoly, b: MultiPoly, op: str) -> MultiPoly:
    """精确的加、减、乘；变量表自动扩展"""
    if op not in _OPS:
        raise ValueError(f"未知运算: {op}")
    variables = unify_variables(a, b)
    if not variables:
        return MultiPoly.constant(_OPS[op](a.constant_term(), b.constant_term()))
    result = _OPS[op](a.to_poly(variables), b.to_poly(variables))
    return MultiPoly.from_poly(result, variables)


def substitute(p: MultiPoly, var: str, value: MultiPoly) -> MultiPoly:
    """把 var 替换为多项式 value（有理替换由调用方先清分母）"""
    if var not in p.variables:
        raise ValueError(f"未知变量: {var}（变量表 {p.variables}）")
    value = _coerce(value)
    variables = unify_variables(p, value)
    expr = p.to_poly(variables).as_expr().subs(sympy.Symbol(var), value.as_expr())
    return MultiPoly.from_poly(Poly(sympy.expand(expr), *_symbols(variables), domain=ZZ), variables)


def resultant(p: MultiPoly, q: MultiPoly, var: str) -> MultiPoly:
    """关于 var 的结式（sympy 的子结式 PRS），结果中不再含 var"""
    if p.degree(var) < 1 or q.degree(var) < 1:
        raise ValueError(f"两个多项式在 {var} 中的次数都必须为正")
    variables = unify_variables(p, q)
    others = tuple(v for v in variables if v != var)
    order = (var,) + others
    res = p.to_poly(order).resultant(q.to_poly(order))
    if isinstance(res, Poly):
        return MultiPoly.from_poly(res, others)
    return MultiPoly.constant(int(res), others)


def primitive(p: MultiPoly) -> Tuple[int, MultiPoly]:
    """拆出整数内容；首项（按降序排列的第一项）系数规范为正"""
    if p.is_zero():
        return 0, p
    content = p.content()
    prim = p.exact_div(content)
    if next(iter(prim.terms.values())) < 0:
        content, prim = -content, -prim
    return content, prim


# ---------------------------------------------------------------------------
# 一元多项式与实根
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniPoly:
    """有理系数一元多项式，系数按降幂排列（首项在前）"""

    coefficients: Tuple[Rational, ...]
    name: str = "x"

    def __post_init__(self) -> None:
        coeffs = [sympy.Rational(c) for c in self.coefficients]
        while len(coeffs) > 1 and coeffs[0] == 0:
            coeffs.pop(0)
        if not coeffs:
            coeffs = [sympy.Integer(0)]
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def from_multipoly(cls, p: MultiPoly, var: Optional[str] = None) -> "UniPoly":
        used = p.used_variables()
        if len(used) > 1:
            raise ValueError(f"不是一元多项式: 变量 {used}")
        var = var or (used[0] if used else "x")
        deg = max(p.degree(var), 0)
        coeffs = [p.coefficient(var, k).constant_term() for k in range(deg, -1, -1)]
        return cls(tuple(coeffs), var)

    @classmethod
    def from_poly(cls, poly: Poly) -> "UniPoly":
        return cls(tuple(poly.all_coeffs()), str(poly.gen))

    @property
    def degree(self) -> int:
        if self.is_zero():
            return -1
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return len(self.coefficients) == 1 and self.coefficients[0] == 0

    def to_poly(self) -> Poly:
        return Poly(list(self.coefficients), sympy.Symbol(self.name), domain=QQ)

    def __call__(self, x: Number) -> Number:
        value = 0
        for c in self.coefficients:
            value = value * x + (float(c) if not isinstance(x, sympy.Basic) else c)
        return value

    def mirrored(self) -> "UniPoly":
        """p(-x)"""
        deg = self.degree
        return UniPoly(
            tuple(c if (deg - i) % 2 == 0 else -c for i, c in enumerate(self.coefficients)),
            self.name,
        )

    def primitive(self) -> "UniPoly":
        """整数化并除去内容，首项为正"""
        content, prim = self.to_poly().clear_denoms(convert=True)[1].primitive()
        prim = UniPoly.from_poly(prim)
        if prim.coefficients[0] < 0:
            prim = UniPoly(tuple(-c for c in prim.coefficients), self.name)
        return prim

    def is_proportional_to(self, other: "UniPoly") -> bool:
        """是否只差一个非零有理常数"""
        return self.primitive().coefficients == other.primitive().coefficients

    def __str__(self) -> str:
        return str(self.to_poly().as_expr())


@dataclass(frozen=True)
class IsolatedRoot:
    """隔离出的根：实根带有理包围区间；复根 bracket 为 None、imag 非零"""

    bracket: Optional[Tuple[Rational, Rational]]
    refined: float
    multiplicity: int = 1
    imag: float = 0.0

    @property
    def is_real(self) -> bool:
        return self.bracket is not None

    @property
    def value(self) -> complex:
        return complex(self.refined, self.imag)

    def to_dict(self) -> Dict:
        return {
            "bracket": [str(self.bracket[0]), str(self.bracket[1])] if self.bracket else None,
            "refined": self.refined,
            "imag": self.imag,
            "multiplicity": self.multiplicity,
            "real": self.is_real,
        }


def _as_rational(precision: Union[Rational, float, str]) -> Rational:
    value = sympy.Rational(str(precision)) if isinstance(precision, (float, str)) else sympy.Rational(precision)
    if value <= 0:
        raise ValueError(f"精度必须为正: {precision}")
    return value


def isolate_real_roots(p: UniPoly, precision: Union[Rational, float] = DEFAULT_PRECISION) -> List[IsolatedRoot]:
    """全部实根，每个恰好一次，区间宽度小于 precision；重数来自无平方分解"""
    if p.is_zero():
        raise ValueError("零多项式没有可隔离的根")
    eps = _as_rational(precision)
    poly = p.to_poly()
    if poly.degree() < 1:
        return []
    sqf = poly.sqf_part()
    roots: List[IsolatedRoot] = []
    for (lo, hi), mult in poly.intervals(eps=eps):
        lo, hi = sympy.Rational(lo), sympy.Rational(hi)
        while hi - lo >= eps:
            lo, hi = sqf.refine_root(lo, hi, eps=eps / 2)
            lo, hi = sympy.Rational(lo), sympy.Rational(hi)
        roots.append(IsolatedRoot((lo, hi), float((lo + hi) / 2), int(mult)))
    roots.sort(key=lambda r: r.refined)
    logger.debug(f"隔离实根: {p} -> {[r.refined for r in roots]}")
    return roots


def _factor_roots(factor: Poly) -> List[complex]:
    """无平方因子的全部根，每个一次；根式不完整时改用数值补全"""
    exact = sympy.roots(factor, cubics=True, quartics=True)
    if sum(exact.values()) == factor.degree():
        return [complex(sympy.N(r, 40)) for r in exact]
    logger.warning(f"根式求解不完整，改用数值补全: {factor.as_expr()}")
    return [complex(r) for r in factor.nroots(n=30, maxsteps=200)]


def solve_quartic_exact(p: UniPoly, precision: Union[Rational, float] = DEFAULT_PRECISION) -> List[IsolatedRoot]:
    """次数 1..4 的精确（根式）求解；实根用隔离区间认证，复根标记为非实

    重数取自无平方分解，每个不同的根只出现一次。
    """
    if p.degree < 1 or p.degree > 4:
        raise ValueError(f"只支持 1 到 4 次多项式，当前次数 {p.degree}")
    remaining: List[Tuple[complex, int]] = []
    for factor, mult in p.to_poly().sqf_list()[1]:
        remaining += [(value, int(mult)) for value in _factor_roots(factor)]

    result: List[IsolatedRoot] = []
    for root in isolate_real_roots(p, precision):
        lo, hi = (float(v) for v in root.bracket)
        # 优先取落在隔离区间内的根式值
        best = min(
            range(len(remaining)),
            key=lambda i: (not lo <= remaining[i][0].real <= hi, abs(remaining[i][0] - root.refined)),
        )
        value, _ = remaining.pop(best)
        refined = value.real if lo <= value.real <= hi else root.refined
        result.append(IsolatedRoot(root.bracket, refined, root.multiplicity))
    for value, mult in remaining:
        if value.imag > 1e-30:
            result.append(IsolatedRoot(None, value.real, mult, value.imag))
    for value, mult in remaining:
        if value.imag < -1e-30:
            result.append(IsolatedRoot(None, value.real, mult, value.imag))
    return result
