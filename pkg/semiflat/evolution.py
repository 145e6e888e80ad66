"""
Hessian 度量的两种半平坦流：

    IIB（实 Monge-Ampère 流）  ∂_t g_jk = ¼ ∂_j∂_k det g
    KR（Kähler-Ricci 约化）     ∂_t g_jk = ½ ∂_j∂_k log det g

只演化 g 本身，势函数里的仿射部分因此不出现。
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional, Union

import numpy as np

from common.errors import ConfigError
from logger import log
from semiflat.hessian import HessianMetricField

DEFAULT_CFL = 0.1


class SemiflatFlow(str, Enum):
    IIB = "iib"
    KR = "kr"


def iib_rhs(field: HessianMetricField) -> np.ndarray:
    return 0.25 * field.grid.hessian(field.det())


def kr_rhs(field: HessianMetricField) -> np.ndarray:
    return 0.5 * field.grid.hessian(field.log_det())


RHS = {SemiflatFlow.IIB: iib_rhs, SemiflatFlow.KR: kr_rhs}


def _coerce_flow(flow: Union[SemiflatFlow, str]) -> SemiflatFlow:
    try:
        return SemiflatFlow(flow)
    except ValueError as e:
        raise ConfigError(f"未知的半平坦流 '{flow}'，可选 {[f.value for f in SemiflatFlow]}") from e


def diffusivity(field: HessianMetricField, flow: Union[SemiflatFlow, str]) -> float:
    """线性化算子的最大扩散系数：IIB 取 max det g，KR 取 max 1/λ_min(g)。"""
    if _coerce_flow(flow) is SemiflatFlow.IIB:
        return float(np.max(field.det()))
    return float(np.max(1.0 / field.min_eigenvalue()))


def stable_dt(field: HessianMetricField, flow: Union[SemiflatFlow, str], cfl: float = DEFAULT_CFL) -> float:
    return cfl * field.grid.h ** 2 / diffusivity(field, flow)


@dataclass(frozen=True, eq=False)
class SemiflatState:
    step: int
    time: float
    field: HessianMetricField


def rk4_step(field: HessianMetricField, rhs: Callable[[HessianMetricField], np.ndarray], dt: float, time: float):
    """经典四阶 Runge-Kutta；每个中间态都检查正定性。"""
    g0 = field.g
    k1 = rhs(field)
    k2 = rhs(field.with_values(g0 + 0.5 * dt * k1, time + 0.5 * dt))
    k3 = rhs(field.with_values(g0 + 0.5 * dt * k2, time + 0.5 * dt))
    k4 = rhs(field.with_values(g0 + dt * k3, time + dt))
    g1 = g0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # 对称化只消除舍入误差：各分量的模板本来就对称
    g1 = 0.5 * (g1 + np.swapaxes(g1, 0, 1))
    return field.with_values(g1, time + dt)


def evolve(
    field: HessianMetricField,
    flow: Union[SemiflatFlow, str],
    dt: float,
    steps: int,
    cfl: float = DEFAULT_CFL,
    strict_cfl: bool = False,
) -> Iterator[SemiflatState]:
    """
    逐步产生演化状态（第 0 步是初始数据）。

    Args:
        field: 初始度量场
        flow: "iib" 或 "kr"
        dt: 时间步长
        steps: 步数
        cfl: 抛物型稳定性常数 c，要求 dt ≤ c·h²/扩散系数
        strict_cfl: 超出稳定性界时报错，否则只警告

    Yields:
        SemiflatState
    """
    flow = _coerce_flow(flow)
    if dt <= 0 or steps < 0:
        raise ConfigError(f"需要 dt > 0 且 steps ≥ 0，得到 dt = {dt}, steps = {steps}")
    bound = stable_dt(field, flow, cfl)
    if dt > bound:
        message = f"[semiflat] dt = {dt:.3e} 超出稳定性界 {bound:.3e}（c = {cfl}）"
        if strict_cfl:
            raise ConfigError(message)
        log.warning(message)

    rhs = RHS[flow]
    log.info(f"[semiflat] {flow.value} 演化：N = {field.grid.n}，dt = {dt:.3e}，{steps} 步")
    yield SemiflatState(0, 0.0, field)
    for step in range(1, steps + 1):
        field = rk4_step(field, rhs, dt, (step - 1) * dt)
        if step % 100 == 0:
            log.debug(f"[semiflat] 第 {step} 步，min det g = {float(np.min(field.det())):.12g}")
        yield SemiflatState(step, step * dt, field)


def final_state(
    field: HessianMetricField, flow: Union[SemiflatFlow, str], dt: float, steps: int, **kwargs
) -> Optional[SemiflatState]:
    state = None
    for state in evolve(field, flow, dt, steps, **kwargs):
        pass
    return state
