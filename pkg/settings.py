import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv


logger = logging.getLogger(__name__)

ENV_PREFIX = "EPFORGE_"


def parse_bool(value: Any) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _default_threads() -> int:
    return max(1, min(os.cpu_count() or 1, 8))


@dataclass(frozen=True)
class Settings:
    """运行设置

    当前用于管理以下配置：
    - threads: 并行工作线程上限（EPFORGE_THREADS）
    - tol / tol_gap / tol_imag_rel: 特征值交叉校验与实性、简并判定的容差
    - root_precision: 实根隔离区间宽度
    - verify_tol: EP 候选点残差阈值
    - newton_*: 多起点牛顿法参数
    - dedup_tol: 候选点去重距离
    - crosscheck_max_n: 超过此维数不再用多项式求根做交叉校验
    - progress: 是否显示 tqdm 进度条
    """

    threads: int = _default_threads()
    tol: float = 1e-8
    tol_gap: float = 1e-8
    tol_imag_rel: float = 1e-9
    root_precision: float = 1e-12
    verify_tol: float = 1e-10
    newton_grid: int = 9
    newton_max_halvings: int = 40
    newton_step_tol: float = 1e-13
    newton_max_iter: int = 100
    dedup_tol: float = 1e-6
    crosscheck_max_n: int = 32
    progress: bool = False

    def with_overrides(self, overrides: Optional[Mapping[str, Any]] = None) -> "Settings":
        if not overrides:
            return self
        return replace(self, **_coerce_values(overrides))


def _coerce_values(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """按字段类型转换取值；未知键直接报错"""
    kinds = {f.name: f.type for f in fields(Settings)}
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        if value is None:
            continue
        name = key.lower()
        if name.startswith(ENV_PREFIX.lower()):
            name = name[len(ENV_PREFIX):]
        if name not in kinds:
            raise ValueError(f"未知配置项: {key}")
        kind = kinds[name]
        try:
            if kind in (bool, "bool"):
                values[name] = parse_bool(value)
            elif kind in (int, "int"):
                values[name] = int(value)
            else:
                values[name] = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"配置项 {key} 的取值无效: {value!r}")
    if values.get("threads", 1) < 1:
        raise ValueError("threads 必须至少为 1")
    return values


def load_settings(config_path: Optional[str] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """依次合并：.env / 环境变量 → 配置文件（key=value）→ 显式覆盖"""
    load_dotenv()

    env_values = {
        key: value for key, value in os.environ.items() if key.startswith(ENV_PREFIX)
    }
    settings = Settings().with_overrides(env_values)

    if config_path:
        if not os.path.exists(config_path):
            raise ValueError(f"配置文件不存在: {config_path}")
        file_values = {k: v for k, v in dotenv_values(config_path).items() if v is not None}
        settings = settings.with_overrides(file_values)
        logger.debug(f"已加载配置文件: {config_path}")

    settings = settings.with_overrides(overrides)
    logger.debug(f"当前设置: {settings}")
    return settings
