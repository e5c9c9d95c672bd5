"""
(A, B) 参数平面扫描

逐点判断谱是否实且非简并（物理区域 D），再用 marching squares
在布尔分类上提取边界 ∂D（边中点，不做亚格点插值）。
"""

import io
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from settings import Settings
from spectra import physical_mask
from workers import run_in_workers

logger = logging.getLogger(__name__)

PHYSICAL, NON_PHYSICAL, UNKNOWN = 1, 0, -1
MIN_RESOLUTION = 16
DEFAULT_RANGE = (-2.0, 2.0)
# boundary_ep_check：默认半径（格距数）与加密窗口的分辨率
DEFAULT_RADIUS_CELLS = 8
DEFAULT_ZOOM_RESOLUTION = 128

# 角点顺序 0:(i,j) 1:(i+1,j) 2:(i+1,j+1) 3:(i,j+1)；边 k 连接角点 k 与 k+1
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass(frozen=True)
class DomainGrid:
    N: int
    a_values: np.ndarray
    b_values: np.ndarray
    status: np.ndarray = field(repr=False)
    boundary: Tuple[np.ndarray, ...] = field(repr=False)
    tol_imag_rel: float = 1e-9
    tol_gap: float = 1e-8

    @property
    def is_physical(self) -> np.ndarray:
        return self.status == PHYSICAL

    @property
    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.status == UNKNOWN))

    @property
    def spacing(self) -> Tuple[float, float]:
        return float(self.a_values[1] - self.a_values[0]), float(self.b_values[1] - self.b_values[0])

    @property
    def cell_area(self) -> float:
        """每个采样点代表的面积：扫描矩形均分给全部采样点"""
        width = float(self.a_values[-1] - self.a_values[0])
        height = float(self.b_values[-1] - self.b_values[0])
        return width * height / self.status.size

    @property
    def band_width(self) -> float:
        """边界线的定位精度（一个格距）"""
        return max(self.spacing)

    @property
    def physical_area(self) -> float:
        return float(np.count_nonzero(self.is_physical)) * self.cell_area

    def contains(self, a: float, b: float) -> bool:
        return (self.a_values[0] <= a <= self.a_values[-1]) and (self.b_values[0] <= b <= self.b_values[-1])

    def classify_at(self, a: float, b: float) -> int:
        """最近格点的分类"""
        i = int(np.argmin(np.abs(self.a_values - a)))
        j = int(np.argmin(np.abs(self.b_values - b)))
        return int(self.status[i, j])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "a_range": [float(self.a_values[0]), float(self.a_values[-1])],
            "b_range": [float(self.b_values[0]), float(self.b_values[-1])],
            "resolution": [len(self.a_values), len(self.b_values)],
            "physical_area": self.physical_area,
            "unknown_cells": self.unknown_count,
            "band_width": self.band_width,
            "boundary": boundary_to_json(self),
        }


def _resolution(resolution: Union[int, Sequence[int]]) -> Tuple[int, int]:
    if isinstance(resolution, int):
        na = nb = resolution
    else:
        na, nb = (int(v) for v in resolution)
    if min(na, nb) < MIN_RESOLUTION:
        raise ValueError(f"每个方向的分辨率至少为 {MIN_RESOLUTION}，当前 {(na, nb)}")
    return na, nb


def _row_spectra(N: int, a: float, b_values: np.ndarray) -> np.ndarray:
    """固定 A 的一整行：堆叠的 N×N 矩阵一次求特征值"""
    stack = np.zeros((len(b_values), N, N), dtype=complex)
    idx = np.arange(N - 1)
    stack[:, idx, idx + 1] = -1.0
    stack[:, idx + 1, idx] = -1.0
    diag = np.zeros((len(b_values), N), dtype=complex)
    diag[:, 0], diag[:, -1] = -1j * a, 1j * a
    diag[:, 1], diag[:, -2] = -1j * b_values, 1j * b_values
    stack[:, np.arange(N), np.arange(N)] = diag
    try:
        return np.linalg.eigvals(stack)
    except np.linalg.LinAlgError:
        out = np.full((len(b_values), N), np.nan, dtype=complex)
        for k in range(len(b_values)):
            try:
                out[k] = np.linalg.eigvals(stack[k])
            except np.linalg.LinAlgError:
                logger.warning(f"N={N}: ({a:.6g}, {b_values[k]:.6g}) 处特征值求解失败，记为未知")
        return out


def scan_domain(N: int, a_range: Tuple[float, float] = DEFAULT_RANGE,
                b_range: Tuple[float, float] = DEFAULT_RANGE,
                resolution: Union[int, Sequence[int]] = 256,
                tol_imag_rel: Optional[float] = None, tol_gap: Optional[float] = None,
                settings: Optional[Settings] = None) -> DomainGrid:
    settings = settings or Settings()
    if N < 4:
        raise ValueError(f"两参数模型要求 N >= 4，当前 N={N}")
    tol_imag_rel = settings.tol_imag_rel if tol_imag_rel is None else tol_imag_rel
    tol_gap = settings.tol_gap if tol_gap is None else tol_gap
    na, nb = _resolution(resolution)
    a_values = np.linspace(a_range[0], a_range[1], na)
    b_values = np.linspace(b_range[0], b_range[1], nb)

    rows = run_in_workers(
        lambda a: _row_spectra(N, float(a), b_values), list(a_values), settings.threads,
        desc=f"扫描 N={N}", progress=settings.progress,
    )
    spectra = np.stack(rows)
    failed = np.any(~np.isfinite(spectra), axis=-1)
    physical = physical_mask(np.where(np.isfinite(spectra), spectra, 0), tol_imag_rel, tol_gap)
    status = np.where(physical, PHYSICAL, NON_PHYSICAL).astype(np.int8)
    status[failed] = UNKNOWN
    if failed.any():
        logger.warning(f"N={N}: {int(failed.sum())} 个格点求解失败")

    boundary = tuple(extract_boundary(status == PHYSICAL, a_values, b_values))
    grid = DomainGrid(N, a_values, b_values, status, boundary, tol_imag_rel, tol_gap)
    logger.info(
        f"N={N}: 扫描 {na}x{nb}，物理区域面积 {grid.physical_area:.4f}，边界 {len(boundary)} 条"
    )
    return grid


# ---------------------------------------------------------------------------
# marching squares
# ---------------------------------------------------------------------------


def _edge_key(i: int, j: int, edge: int) -> Tuple[str, int, int]:
    # h: (i,j)-(i+1,j)，v: (i,j)-(i,j+1)
    return (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))[edge]


def _edge_point(key: Tuple[str, int, int], a_values: np.ndarray, b_values: np.ndarray) -> Tuple[float, float]:
    kind, i, j = key
    if kind == "h":
        return (float(a_values[i] + a_values[i + 1]) / 2, float(b_values[j]))
    return (float(a_values[i]), float(b_values[j] + b_values[j + 1]) / 2)


def _segments(inside: np.ndarray) -> List[Tuple[Tuple, Tuple]]:
    segments = []
    na, nb = inside.shape
    for i in range(na - 1):
        for j in range(nb - 1):
            corners = (inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1])
            crossed = [k for k, (c0, c1) in enumerate(_EDGE_CORNERS) if corners[c0] != corners[c1]]
            if len(crossed) == 2:
                segments.append((_edge_key(i, j, crossed[0]), _edge_key(i, j, crossed[1])))
            elif len(crossed) == 4:
                # 鞍点：把物理角点各自切开
                pairs = ((3, 0), (1, 2)) if corners[0] else ((0, 1), (2, 3))
                for e0, e1 in pairs:
                    segments.append((_edge_key(i, j, e0), _edge_key(i, j, e1)))
    return segments


def extract_boundary(inside: np.ndarray, a_values: np.ndarray, b_values: np.ndarray) -> List[np.ndarray]:
    """布尔网格上的边界折线（闭合折线首尾点相同）"""
    segments = _segments(np.asarray(inside, dtype=bool))
    adjacency: Dict[Tuple, List[int]] = {}
    for n, (k0, k1) in enumerate(segments):
        adjacency.setdefault(k0, []).append(n)
        adjacency.setdefault(k1, []).append(n)

    used = [False] * len(segments)
    polylines: List[np.ndarray] = []

    def walk(start_key: Tuple, first: int) -> List[Tuple]:
        keys = [start_key]
        n, key = first, start_key
        while not used[n]:
            used[n] = True
            k0, k1 = segments[n]
            key = k1 if k0 == key else k0
            keys.append(key)
            nxt = [m for m in adjacency[key] if not used[m]]
            if not nxt:
                break
            n = nxt[0]
        return keys

    # 先从端点（度为 1）出发，再处理闭合环
    starts = sorted(k for k, segs in adjacency.items() if len(segs) == 1)
    for key in starts + sorted(adjacency):
        for n in adjacency[key]:
            if not used[n]:
                keys = walk(key, n)
                polylines.append(np.array([_edge_point(k, a_values, b_values) for k in keys]))
    return polylines


# ---------------------------------------------------------------------------
# 统计与 EP 对照
# ---------------------------------------------------------------------------


def quadrant_area(grid: DomainGrid, sign_a: int, sign_b: int) -> float:
    """象限 sign(A) = sign_a、sign(B) = sign_b 内的物理面积（坐标轴上的点不计）"""
    if sign_a not in (1, -1) or sign_b not in (1, -1):
        raise ValueError("sign_a、sign_b 只能是 +1 或 -1")
    mask = np.outer(np.sign(grid.a_values) == sign_a, np.sign(grid.b_values) == sign_b)
    return float(np.count_nonzero(grid.is_physical & mask)) * grid.cell_area


def _distance_to_polyline(point: np.ndarray, line: np.ndarray) -> float:
    if len(line) == 1:
        return float(np.linalg.norm(line[0] - point))
    p0, p1 = line[:-1], line[1:]
    d = p1 - p0
    length2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", point - p0, d) / np.where(length2 > 0, length2, 1), 0, 1)
    nearest = p0 + t[:, None] * d
    return float(np.min(np.linalg.norm(nearest - point, axis=1)))


@dataclass(frozen=True)
class BoundaryCheck:
    params: Tuple[float, ...]
    in_range: bool
    distance: Optional[float]
    flagged: bool
    radius: Optional[float] = None
    zoom_distance: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        def finite(value: Optional[float]) -> Optional[float]:
            return None if value is None or not np.isfinite(value) else float(value)

        return {
            "params": list(self.params),
            "in_range": self.in_range,
            "distance": finite(self.distance),
            "flagged": self.flagged,
            "radius": finite(self.radius),
            "zoom_distance": finite(self.zoom_distance),
        }


def _nearest_boundary(point: np.ndarray, lines: Sequence[np.ndarray]) -> float:
    return min((_distance_to_polyline(point, line) for line in lines), default=float("inf"))


def _zoom_distance(grid: DomainGrid, point: np.ndarray, half_width: float, resolution: int,
                   settings: Optional[Settings]) -> float:
    """以候选点为中心、半宽 half_width 的窗口重新扫描，返回到局部边界的距离"""
    a, b = point
    local = scan_domain(
        grid.N, (a - half_width, a + half_width), (b - half_width, b + half_width), resolution,
        grid.tol_imag_rel, grid.tol_gap, settings,
    )
    return _nearest_boundary(point, local.boundary)


def boundary_ep_check(grid: DomainGrid, candidates: Sequence[Any], radius: Optional[float] = None,
                      radius_cells: float = DEFAULT_RADIUS_CELLS, zoom: bool = True,
                      zoom_resolution: int = DEFAULT_ZOOM_RESOLUTION,
                      settings: Optional[Settings] = None) -> List[BoundaryCheck]:
    """每个已校验候选点到最近边界折线的距离

    radius 默认取 radius_cells 个格距。EP 位于 ∂D 的尖点处，粗网格只能在离尖点一段距离外
    分辨出边界，因此 zoom 时在半宽 radius 的窗口内加密重扫：加密后的距离必须不超过 radius/2。
    超出 radius、加密后未靠近或不在扫描范围内的候选点被标记。
    """
    radius = radius_cells * grid.band_width if radius is None else radius
    if radius <= 0:
        raise ValueError(f"radius 必须为正，当前 {radius}")
    report: List[BoundaryCheck] = []
    for cand in candidates:
        if not getattr(cand, "verified", False) or len(cand.params) != 2:
            continue
        if cand.N != grid.N:
            logger.warning(f"候选点 N={cand.N} 与网格 N={grid.N} 不符，跳过")
            continue
        a, b = cand.params
        if not grid.contains(a, b):
            report.append(BoundaryCheck(tuple(cand.params), False, None, True, radius))
            continue
        point = np.array([a, b])
        distance = _nearest_boundary(point, grid.boundary)
        flagged = distance > radius
        zoom_distance = None
        if zoom:
            zoom_distance = _zoom_distance(grid, point, radius, zoom_resolution, settings)
            flagged = flagged or zoom_distance > radius / 2
            logger.debug(f"N={grid.N}, {tuple(cand.params)}: 距离 {distance:.4g}，加密后 {zoom_distance:.4g}")
        report.append(BoundaryCheck(tuple(cand.params), True, distance, flagged, radius, zoom_distance))
    logger.info(f"N={grid.N}: 检查 {len(report)} 个候选点，{sum(r.flagged for r in report)} 个被标记")
    return report


# ---------------------------------------------------------------------------
# 导出
# ---------------------------------------------------------------------------


def grid_csv_rows(grid: DomainGrid) -> List[Dict[str, Any]]:
    return [
        {"A": f"{a:.10g}", "B": f"{b:.10g}", "flag": int(grid.status[i, j])}
        for i, a in enumerate(grid.a_values)
        for j, b in enumerate(grid.b_values)
    ]


def grid_to_gnuplot(grid: DomainGrid) -> str:
    """gnuplot 的 splot/pm3d 格式：每个 A 一段，段间空行"""
    out = io.StringIO()
    out.write(f"# N={grid.N} columns: A B flag (1 物理, 0 非物理, -1 未知)\n")
    for i, a in enumerate(grid.a_values):
        for j, b in enumerate(grid.b_values):
            out.write(f"{a:.10g} {b:.10g} {int(grid.status[i, j])}\n")
        out.write("\n")
    return out.getvalue()


def boundary_to_json(grid: DomainGrid) -> List[List[List[float]]]:
    return [[[round(float(x), 12), round(float(y), 12)] for x, y in line] for line in grid.boundary]
