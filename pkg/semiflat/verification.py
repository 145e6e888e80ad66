"""
半平坦 T-对偶的数值验证。

沿 IIB（或 KR）演化的度量轨迹重建 φ，用时间中心差分得到 ∂_t φ，
再与 Type IIA（或对偶 Ricci）流的右端项比较：

    IIB → IIA          ∂_t φ = (1/16) dΛ_ω d(|φ|² φ̂)
    KR  → dual Ricci   ∂_t φ = ½ dΛ_ω d(log|φ|² · φ̂)

光滑解上两者相等；离散后残差应为 O(dt² + h²)。
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.errors import ConfigError
from core.flows import FlowSpec, Weight, weighted_rhs
from logger import log
from semiflat.evolution import DEFAULT_CFL, SemiflatFlow, evolve, iib_rhs
from semiflat.forms import SemiflatForms, reconstruct_forms, semiflat_frame
from semiflat.grid import PeriodicGrid
from semiflat.hessian import FIELD_NAMES, HessianMetricField, PerturbationMode
from storage.fields import write_field_dump

PHASES = ("standard", "rotated")
SERIES_COLUMNS = ("step", "maxResidual", "l2Residual", "minDetG")

# 半平坦流 → (对偶一侧的权重, 右端项的系数)
DUAL_FLOWS = {
    SemiflatFlow.IIB: (Weight.TYPE_IIA, 1.0),
    SemiflatFlow.KR: (Weight.DUAL_RICCI, 0.5),
}


@dataclass(frozen=True)
class SemiflatSetup:
    """一次半平坦验证的全部输入。"""

    n: int = 32
    A: Tuple[Tuple[float, ...], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    modes: Tuple[PerturbationMode, ...] = ()
    dt: float = 1e-5
    steps: int = 100
    flow: Union[SemiflatFlow, str] = SemiflatFlow.IIB
    phase: str = "standard"
    residual_stride: int = 10
    cfl: float = DEFAULT_CFL

    def __post_init__(self):
        try:
            object.__setattr__(self, "flow", SemiflatFlow(self.flow))
        except ValueError:
            raise ConfigError(f"未知的半平坦流 '{self.flow}'") from None
        if self.phase not in PHASES:
            raise ConfigError(f"phase 必须是 {PHASES} 之一，得到 '{self.phase}'")
        if self.steps < 2:
            raise ConfigError("时间中心差分至少需要 2 步")
        if self.residual_stride < 1:
            raise ConfigError("residual_stride 至少为 1")

    def build_field(self, n: Optional[int] = None) -> HessianMetricField:
        return HessianMetricField.from_potential(PeriodicGrid(n or self.n), np.array(self.A), self.modes)

    @classmethod
    def single_mode(cls, epsilon: float, **kwargs) -> "SemiflatSetup":
        """Φ = ½|x|² + ε cos(2πx¹)。"""
        return cls(modes=(PerturbationMode(epsilon, (1, 0, 0)),), **kwargs)


@dataclass
class DualitySeries:
    setup: SemiflatSetup
    n: int
    rows: List[Tuple[int, float, float, float]] = field(default_factory=list)
    final: Optional[HessianMetricField] = None

    @property
    def max_residual(self) -> float:
        return max((row[1] for row in self.rows), default=0.0)

    @property
    def header(self) -> Tuple[str, ...]:
        return SERIES_COLUMNS


# ==================================================================================================
# 1. 单点时间的残差
# ==================================================================================================

def _phase_forms(forms: SemiflatForms, phase: str) -> SemiflatForms:
    return forms.rotated() if phase == "rotated" else forms


def dual_rhs(forms: SemiflatForms, flow: Union[SemiflatFlow, str]):
    weight, factor = DUAL_FLOWS[SemiflatFlow(flow)]
    return factor * weighted_rhs(forms.phi_hat, forms.norm_sq, FlowSpec(weight=weight), forms.frame)


def duality_residual(
    previous: HessianMetricField,
    current: HessianMetricField,
    following: HessianMetricField,
    dt: float,
    flow: Union[SemiflatFlow, str] = SemiflatFlow.IIB,
    phase: str = "standard",
) -> Tuple[float, float]:
    """
    三个相邻时刻的度量 → (最大残差, L² 残差)。

    最大残差取遍网格点和全部 20 个分量；L² 残差是逐点欧氏范数的离散 L² 范数。
    """
    if phase not in PHASES:
        raise ConfigError(f"phase 必须是 {PHASES} 之一，得到 '{phase}'")
    frame = semiflat_frame(current.grid)
    before = _phase_forms(reconstruct_forms(previous, frame), phase)
    middle = _phase_forms(reconstruct_forms(current, frame), phase)
    after = _phase_forms(reconstruct_forms(following, frame), phase)

    rate = (after.phi - before.phi) / (2.0 * dt)
    difference = (rate - dual_rhs(middle, flow)).to_vector()
    if difference.size == 0:
        return 0.0, 0.0
    pointwise = np.sqrt(np.sum(np.square(difference), axis=-1))
    return float(np.max(np.abs(difference))), current.grid.l2(pointwise)


def duality_series(setup: SemiflatSetup, n: Optional[int] = None) -> DualitySeries:
    """沿整条演化从第 1 步起每隔 residual_stride 步记录一行 (step, maxResidual, l2Residual, minDetG)。"""
    initial = setup.build_field(n)
    series = DualitySeries(setup, initial.grid.n)
    previous = current = None
    for state in evolve(initial, setup.flow, setup.dt, setup.steps, cfl=setup.cfl):
        if current is not None and previous is not None and (current.step - 1) % setup.residual_stride == 0:
            max_res, l2_res = duality_residual(
                previous.field, current.field, state.field, setup.dt, setup.flow, setup.phase
            )
            series.rows.append((current.step, max_res, l2_res, float(np.min(current.field.det()))))
            log.debug(f"[semiflat] 第 {current.step} 步：残差 {max_res:.6e}")
        previous, current = current, state
    series.final = current.field
    log.info(
        f"[semiflat] {setup.flow.value}/{setup.phase}：N = {series.n}，最大对偶残差 {series.max_residual:.6e}"
    )
    return series


# ==================================================================================================
# 2. 分量恒等式
# ==================================================================================================

def component_identity_check(
    previous: HessianMetricField, current: HessianMetricField, following: HessianMetricField, dt: float
) -> Dict[str, float]:
    """
    IIB 轨迹上的分量恒等式（相对残差）：

        hessian_identity  ¼∂²det g 与 (1/16)∂²|φ|² 逐项相等（代数恒等式）
        metric_rate       ∂_t g_jk 与 (1/16)∂_j∂_k|φ|²
        volume_rate       ∂_t det g 与 (det g/16)·Σ_j g^{jk}∂_k∂_j|φ|²
        legendre_trace    Σ g^{jk}∂_t g_jk 与 ∂_t det g / det g
    """
    grid = current.grid
    norm_sq = 4.0 * current.det()
    target = grid.hessian(norm_sq) / 16.0
    g_rate = (following.g - previous.g) / (2.0 * dt)
    det_rate = (following.det() - previous.det()) / (2.0 * dt)
    g_inv = current.inverse()
    det = current.det()

    rate_scale = max(float(np.max(np.abs(target))), 1e-300)
    volume_target = det * np.einsum("jk...,kj...->...", g_inv, target)
    trace = np.einsum("jk...,jk...->...", g_inv, g_rate)
    volume_scale = max(float(np.max(np.abs(volume_target))), 1e-300)
    report = {
        "hessian_identity": float(np.max(np.abs(iib_rhs(current) - target))) / rate_scale,
        "metric_rate": float(np.max(np.abs(g_rate - target))) / rate_scale,
        "volume_rate": float(np.max(np.abs(det_rate - volume_target))) / volume_scale,
        "legendre_trace": float(np.max(np.abs(trace - det_rate / det))) / max(float(np.max(np.abs(trace))), 1e-300),
    }
    log.debug(f"[semiflat] 分量恒等式: {report}")
    return report


def component_identities(setup: SemiflatSetup, n: Optional[int] = None) -> Dict[str, float]:
    """在 IIB 演化的前三个状态上运行 component_identity_check。"""
    if setup.flow is not SemiflatFlow.IIB:
        raise ConfigError("分量恒等式只适用于 IIB 轨迹")
    states = [state.field for state in evolve(setup.build_field(n), setup.flow, setup.dt, 2, cfl=setup.cfl)]
    return component_identity_check(*states, setup.dt)


# ==================================================================================================
# 3. 加密研究与原始数据
# ==================================================================================================

@dataclass
class RefinementReport:
    sizes: List[int]
    residuals: List[float]
    orders: List[float]

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")

    def to_dict(self) -> dict:
        return {"sizes": self.sizes, "residuals": self.residuals, "orders": self.orders, "min_order": self.min_order}


def refinement_study(setup: SemiflatSetup, sizes: Sequence[int] = (16, 32, 64)) -> RefinementReport:
    """固定 dt 与步数，逐级加密网格，测量对偶残差的空间收敛阶 log(r₁/r₂)/log(N₂/N₁)。"""
    sizes = sorted(int(n) for n in sizes)
    if len(sizes) < 2:
        raise ConfigError("加密研究至少需要两个网格尺寸")
    residuals = [duality_series(setup, n).max_residual for n in sizes]
    orders = []
    for (n1, r1), (n2, r2) in zip(zip(sizes, residuals), zip(sizes[1:], residuals[1:])):
        if r1 <= 0 or r2 <= 0:
            orders.append(float("inf"))
        else:
            orders.append(float(np.log(r1 / r2) / np.log(n2 / n1)))
    report = RefinementReport(sizes, residuals, orders)
    log.info(f"[semiflat] 加密研究：N = {sizes}，残差 {residuals}，收敛阶 {orders}")
    return report


def dump_fields(metric: HessianMetricField, path: Union[str, Path], time: float = 0.0) -> Path:
    """6 个独立分量 g11,g12,g13,g22,g23,g33 写成小端 float64 原始数据，另附 JSON 说明。"""
    return write_field_dump(
        path,
        metric.fields(),
        FIELD_NAMES,
        extra={"spacing": metric.grid.h, "time": time, "axes": ["field", "x1", "x2", "x3"]},
    )
