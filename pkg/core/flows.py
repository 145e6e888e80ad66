"""
流族 ∂_t φ = dΛ_ω d(w(|φ|²)·φ̂)。

    hitchin      w = 1            Hitchin 梯度流
    type-iia     w = |φ|²/16      Type IIA 流
    dual-ricci   w = log|φ|²      对偶 Ricci 流
    epsilon      w = |φ|^ε        ε-正则化

左不变标架上，流在 ansatz 参数空间中约化为常微分方程，用 RK4 或 RK45 积分。
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from common.errors import (
    ConfigError,
    NotPositive,
    PositivityLost,
    ProjectionError,
    StepSizeUnderflow,
    SymflowError,
)
from core.curvature import MetricLieFrame, curvature_tensors, nijenhuis
from core.exterior import (
    Form,
    Frame,
    codifferential,
    endo_pullback,
    exterior_d,
    exterior_d_matrix,
    lambda_contract,
    lambda_matrix,
    wedge,
    wedge_matrix,
)
from core.hitchin import TypeIIAStructure, omega_matrix, pointwise
from logger import log
from presets.base import AnsatzFamily
from presets.nilmanifold import nilmanifold_oracle
from presets.solvmanifold import SOLV_LAMBDA, solvmanifold_limit, solvmanifold_oracle


class Weight(str, Enum):
    HITCHIN = "hitchin"
    TYPE_IIA = "type-iia"
    DUAL_RICCI = "dual-ricci"
    EPSILON = "epsilon"


INTEGRATORS = ("rk4", "rk45")


@dataclass(frozen=True)
class FlowSpec:
    weight: Union[Weight, str] = Weight.HITCHIN
    epsilon: Optional[float] = None
    integrator: str = "rk4"
    dt: float = 1e-3
    horizon: float = 10.0
    record_stride: int = 100
    rtol: float = 1e-9
    atol: float = 1e-12
    log_floor: float = 1e-6
    projection_tol: float = 1e-8

    def __post_init__(self):
        try:
            object.__setattr__(self, "weight", Weight(self.weight))
        except ValueError:
            raise ConfigError(f"未知权重 '{self.weight}'，可用：{[w.value for w in Weight]}") from None
        if self.weight is Weight.EPSILON and (self.epsilon is None or self.epsilon <= 0):
            raise ConfigError("epsilon 权重需要 ε > 0")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"未知积分器 '{self.integrator}'，可用：{INTEGRATORS}")
        if self.dt <= 0:
            raise ConfigError(f"dt 必须为正，得到 {self.dt}")
        if self.horizon < 0:
            raise ConfigError(f"horizon 不能为负，得到 {self.horizon}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride 至少为 1，得到 {self.record_stride}")

    def weight_value(self, norm_sq):
        if self.weight is Weight.HITCHIN:
            return norm_sq * 0.0 + 1.0
        if self.weight is Weight.TYPE_IIA:
            return norm_sq / 16.0
        if self.weight is Weight.DUAL_RICCI:
            lowest = float(np.min(norm_sq))
            if lowest < self.log_floor:
                raise PositivityLost(f"|φ|² = {lowest:.3e} 低于对数下限 {self.log_floor:.1e}")
            return np.log(norm_sq)
        return norm_sq ** (0.5 * self.epsilon)

    def weight_derivative(self, norm_sq):
        if self.weight is Weight.HITCHIN:
            return norm_sq * 0.0
        if self.weight is Weight.TYPE_IIA:
            return norm_sq * 0.0 + 1.0 / 16.0
        if self.weight is Weight.DUAL_RICCI:
            return 1.0 / norm_sq
        half = 0.5 * self.epsilon
        return half * norm_sq ** (half - 1.0)

    def with_weight(self, weight: Union[Weight, str], epsilon: Optional[float] = None) -> "FlowSpec":
        return replace(self, weight=weight, epsilon=epsilon)


# ==================================================================================================
# 1. 右端项
# ==================================================================================================

def weighted_rhs(phi_hat: Form, norm_sq, spec: FlowSpec, frame: Frame) -> Form:
    """dΛ_ω d(w(|φ|²)·φ̂)，系数可以是常数也可以是网格场。"""
    weighted = phi_hat * spec.weight_value(norm_sq)
    return exterior_d(lambda_contract(exterior_d(weighted, frame), frame), frame)


def rhs(phi: Form, spec: FlowSpec, frame: Frame) -> Form:
    if phi.is_constant:
        structure = TypeIIAStructure.build(phi, frame)
        return weighted_rhs(structure.phi_hat, structure.norm_sq, spec, frame)
    data = pointwise(phi.to_vector(), frame.volume_coefficient)
    return weighted_rhs(Form.from_vector(3, data.phi_hat), data.norm_sq, spec, frame)


def laplacian_operator(frame: Frame) -> np.ndarray:
    """常系数 3-形式上 dΛ_ω d 的稠密矩阵（行向量约定）。"""
    return frame.cached(
        ("dLd",),
        lambda: exterior_d_matrix(frame, 3) @ lambda_matrix(frame, 4) @ exterior_d_matrix(frame, 2),
    )


# ==================================================================================================
# 2. 轨迹
# ==================================================================================================

DIAGNOSTIC_COLUMNS = ("normSq", "u", "H", "nijSq", "dResid", "primResid", "lambda")


@dataclass
class Trajectory:
    preset: str
    parameter_names: Tuple[str, ...]
    spec: FlowSpec
    times: List[float] = field(default_factory=list)
    params: List[np.ndarray] = field(default_factory=list)
    diagnostics: List[Dict[str, float]] = field(default_factory=list)
    max_projection_residual: float = 0.0

    @property
    def header(self) -> Tuple[str, ...]:
        return ("t",) + self.parameter_names + DIAGNOSTIC_COLUMNS

    def rows(self) -> List[List[float]]:
        return [
            [t, *p.tolist(), *(d[name] for name in DIAGNOSTIC_COLUMNS)]
            for t, p, d in zip(self.times, self.params, self.diagnostics)
        ]

    def column(self, name: str) -> np.ndarray:
        if name == "t":
            return np.array(self.times)
        if name in self.parameter_names:
            return np.array([p[self.parameter_names.index(name)] for p in self.params])
        return np.array([d[name] for d in self.diagnostics])

    @property
    def final(self) -> np.ndarray:
        return self.params[-1]


def require_finite(t: float, values: np.ndarray):
    """约化方程可能在有限时间内爆破；非有限的状态按离开正锥处理。"""
    if not np.all(np.isfinite(values)):
        raise PositivityLost(f"t = {t:.6g} 时解爆破（出现非有限值）", time=t)


def _record_at(record, t: float, p: np.ndarray):
    try:
        record(t, p)
    except NotPositive as e:
        if isinstance(e, PositivityLost) and e.time is not None:
            raise
        raise PositivityLost(f"t = {t:.6g} 时离开正锥：{e}", time=t, lam=e.lam) from e


class HomogeneousFlow:
    """ansatz 坐标上的约化常微分方程 ṗ = proj(dΛ_ω d(w φ̂))。"""

    def __init__(self, family: AnsatzFamily, spec: FlowSpec):
        self.family = family
        self.spec = spec
        frame = family.frame
        self.frame = frame
        self.operator = laplacian_operator(frame)
        self.closed_op = exterior_d_matrix(frame, 3)
        self.primitive_op = frame.cached(("omega^",), lambda: wedge_matrix(frame.omega, 3))
        self.omega_matrix = omega_matrix(frame.omega)
        self.vol = frame.volume_coefficient
        self.max_projection_residual = 0.0

    def rhs_vector(self, vector: np.ndarray):
        data = pointwise(vector, self.vol)
        weighted = data.phi_hat * self.spec.weight_value(data.norm_sq)
        return weighted @ self.operator, data

    def derivative(self, t: float, params: np.ndarray) -> np.ndarray:
        require_finite(t, params)
        try:
            value, _ = self.rhs_vector(self.family.vector(params))
        except NotPositive as e:
            raise PositivityLost(f"t = {t:.6g} 时离开正锥：{e}", time=t, lam=e.lam) from e
        require_finite(t, value)
        coeffs, residual = self.family.project(value)
        tolerance = self.spec.projection_tol * max(1.0, float(np.linalg.norm(value)))
        if residual > tolerance:
            raise ProjectionError(
                f"{self.frame.name}: 右端项不在 ansatz 张成的子空间内（残差 {residual:.3e}）", residual
            )
        self.max_projection_residual = max(self.max_projection_residual, residual)
        return coeffs

    def structure_arrays(self, params: np.ndarray):
        vector = self.family.vector(params)
        data = pointwise(vector, self.vol)
        g = self.omega_matrix @ data.J
        return vector, data, g

    def diagnostics(self, params: np.ndarray) -> Dict[str, float]:
        vector, data, g = self.structure_arrays(params)
        norm_sq = float(data.norm_sq)
        if not (np.all(np.isfinite(g)) and np.isfinite(norm_sq)):
            raise NotPositive(f"{self.frame.name}: 度量出现非有限值", lam=float(data.lam))
        metric = MetricLieFrame(self.frame, 0.5 * (g + g.T), data.J)
        return {
            "normSq": norm_sq,
            "u": float(np.log(norm_sq)),
            "H": 0.5 * norm_sq,
            "nijSq": nijenhuis(metric).norm_sq,
            "dResid": float(np.linalg.norm(vector @ self.closed_op)),
            "primResid": float(np.linalg.norm(vector @ self.primitive_op)),
            "lambda": float(data.lam),
        }


def run(initial: Sequence[float], spec: FlowSpec, family: AnsatzFamily) -> Trajectory:
    """
    从 ansatz 参数 initial 出发积分流，按 record_stride 记录诊断量。

    Raises:
        NotPositive: 初值不是正的。
        PositivityLost: 积分过程中离开正锥。
        ProjectionError: 右端项离开 ansatz 张成的子空间。
        StepSizeUnderflow: RK45 步长塌缩。
    """
    flow = HomogeneousFlow(family, spec)
    params = family.coerce(initial)
    trajectory = Trajectory(family.frame.name, family.parameter_names, spec)

    def record(t: float, p: np.ndarray):
        trajectory.times.append(float(t))
        trajectory.params.append(np.array(p, dtype=float))
        trajectory.diagnostics.append(flow.diagnostics(p))

    log.info(
        f"Flows: {family.frame.name} 上积分 {spec.weight.value} 流，积分器 {spec.integrator}，"
        f"T = {spec.horizon}，初值 {params.tolist()}"
    )
    record(0.0, params)

    if spec.integrator == "rk4":
        _integrate_rk4(flow, params, spec, record)
    else:
        _integrate_rk45(flow, params, spec, record)

    trajectory.max_projection_residual = flow.max_projection_residual
    log.info(
        f"Flows: 完成，记录 {len(trajectory.times)} 个样本，终值 {trajectory.final.tolist()}，"
        f"最大投影残差 {flow.max_projection_residual:.2e}"
    )
    return trajectory


def _integrate_rk4(flow: HomogeneousFlow, params: np.ndarray, spec: FlowSpec, record):
    steps = int(round(spec.horizon / spec.dt))
    if steps == 0:
        return
    dt = spec.horizon / steps
    f = flow.derivative
    p = params
    for step in range(1, steps + 1):
        t = (step - 1) * dt
        k1 = f(t, p)
        k2 = f(t + 0.5 * dt, p + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, p + 0.5 * dt * k2)
        k4 = f(t + dt, p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        require_finite(step * dt, p)
        if step % spec.record_stride == 0 or step == steps:
            _record_at(record, step * dt, p)
            log.debug(f"Flows: step {step}/{steps}, t = {step * dt:.6g}, p = {p.tolist()}")


def _integrate_rk45(flow: HomogeneousFlow, params: np.ndarray, spec: FlowSpec, record):
    if spec.horizon == 0:
        return
    samples = max(1, int(np.ceil(spec.horizon / (spec.dt * spec.record_stride))))
    t_eval = np.linspace(0.0, spec.horizon, samples + 1)
    result = solve_ivp(
        flow.derivative,
        (0.0, spec.horizon),
        params,
        method="RK45",
        rtol=spec.rtol,
        atol=spec.atol,
        t_eval=t_eval,
    )
    if result.status < 0:
        if "step size" in result.message.lower():
            raise StepSizeUnderflow(f"RK45 步长塌缩：{result.message}")
        raise SymflowError(f"RK45 失败：{result.message}")
    log.debug(f"Flows: RK45 右端项调用 {result.nfev} 次")
    for t, p in zip(result.t[1:], result.y.T[1:]):
        _record_at(record, float(t), p)


# ==================================================================================================
# 3. 解析解与检查
# ==================================================================================================

ORACLES = {
    "nilmanifold": "nilmanifold",
    "nilmanifold_dbt": "nilmanifold",
    "solvmanifold": "solvmanifold",
    "solvmanifold_tv": "solvmanifold",
}


def oracle(name: str, t: float, initial: Sequence[float]) -> np.ndarray:
    """Hitchin 梯度流在两个例子上的解析解；t 为积分器的原始时间。"""
    kind = ORACLES.get(name)
    if kind == "nilmanifold":
        return nilmanifold_oracle(t, initial)
    if kind == "solvmanifold":
        return solvmanifold_oracle(t, initial, SOLV_LAMBDA)
    raise ConfigError(f"预设 '{name}' 没有解析解")


def limit_parameters(name: str, initial: Sequence[float]) -> np.ndarray:
    if ORACLES.get(name) != "solvmanifold":
        raise ConfigError(f"预设 '{name}' 没有归一化极限")
    return solvmanifold_limit(initial)


def stationary_check(phi: Form, frame: Frame) -> Dict[str, float]:
    """min_c ‖dΛ_ω dφ̂ − cφ‖ 及最优的 c。"""
    structure = TypeIIAStructure.build(phi, frame)
    image = exterior_d(lambda_contract(exterior_d(structure.phi_hat, frame), frame), frame).to_vector()
    vector = phi.to_vector()
    c = float(image @ vector / (vector @ vector))
    return {"c": c, "residual": float(np.linalg.norm(image - c * vector))}


def equivalence_check(phi: Form, frame: Frame) -> Dict[str, float]:
    """
    dd†φ 与 dΛ_ω dφ̂ 的差，以及 dφ̂ = ω∧β（β = Λ_ω dφ̂ 本原且 J 不变）的残差。
    """
    structure = TypeIIAStructure.build(phi, frame)
    left = exterior_d(codifferential(phi, structure.g, frame), frame)
    d_hat = exterior_d(structure.phi_hat, frame)
    beta = lambda_contract(d_hat, frame)
    right = exterior_d(beta, frame)
    return {
        "dd_dagger_vs_dLd": (left - right).norm(),
        "d_hat_vs_omega_beta": (d_hat - wedge(frame.omega, beta)).norm(),
        "beta_primitive": lambda_contract(beta, frame).norm(),
        "beta_J_invariant": (endo_pullback(structure.J, beta) - beta).norm(),
        "scale": right.norm(),
    }


def epsilon_limit_check(phi: Form, frame: Frame, epsilon: float) -> Dict[str, float]:
    """(rhs_ε − rhs_Hitchin)/ε 与 ½·rhs_DualRicci 的差，应为 O(ε)。"""
    base = FlowSpec()
    regular = rhs(phi, base.with_weight(Weight.EPSILON, epsilon), frame)
    hitchin = rhs(phi, base, frame)
    dual = rhs(phi, base.with_weight(Weight.DUAL_RICCI), frame)
    difference = (regular - hitchin) / epsilon - 0.5 * dual
    return {"epsilon": epsilon, "residual": difference.norm(), "scale": 0.5 * dual.norm()}


def _relative(deviation: float, scale: float) -> float:
    return deviation / scale if scale > 1e-14 else deviation


def metric_flow_check(trajectory: Trajectory, family: AnsatzFamily) -> Dict[str, float]:
    """
    沿轨迹用有限差分核对齐次情形下的度量演化：
        ∂_t g = −Ric + Ric(J·, J·)，∂_t u = |N|²，∂_t log det g̃ = 6|N|²，∂_t det g = 0。
    """
    if len(trajectory.times) < 3:
        raise ConfigError("metric_flow_check 至少需要 3 个记录样本")
    flow = HomogeneousFlow(family, trajectory.spec)
    times = np.array(trajectory.times)
    metrics, us, logdets, dets, predicted, nij = [], [], [], [], [], []
    for p in trajectory.params:
        _, data, g = flow.structure_arrays(p)
        g = 0.5 * (g + g.T)
        metric = MetricLieFrame(family.frame, g, data.J)
        curvature = curvature_tensors(metric)
        norm_sq = float(data.norm_sq)
        metrics.append(g)
        us.append(np.log(norm_sq))
        dets.append(np.linalg.det(g))
        logdets.append(np.log(np.linalg.det(norm_sq * g)))
        predicted.append(-curvature.ricci + curvature.ricci_j(data.J))
        nij.append(nijenhuis(metric).norm_sq)

    inner = slice(1, -1)
    dg = np.gradient(np.array(metrics), times, axis=0)[inner]
    du = np.gradient(np.array(us), times)[inner]
    dlog = np.gradient(np.array(logdets), times)[inner]
    ddet = np.gradient(np.array(dets), times)[inner]
    predicted = np.array(predicted)[inner]
    nij = np.array(nij)[inner]

    report = {
        "samples": int(len(times)),
        "metric_rel": _relative(float(np.max(np.abs(dg - predicted))), float(np.max(np.abs(predicted)))),
        "u_rel": _relative(float(np.max(np.abs(du - nij))), float(np.max(np.abs(nij)))),
        "logdet_rel": _relative(float(np.max(np.abs(dlog - 6.0 * nij))), float(np.max(np.abs(6.0 * nij)))),
        "detg_drift": float(np.max(np.abs(ddet))),
    }
    log.debug(f"Flows: 度量演化检查 {report}")
    return report
