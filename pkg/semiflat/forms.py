"""
半平坦 6 维标架上的 (ω, φ, φ̂)。

余标架编号 1..3 是 dx¹..dx³，4..6 是 dy₁..dy₃，全部闭。ω = Σ_j dx^j ∧ dy_j。
Legendre 对偶坐标满足 dx_j = Σ_k g_jk dx^k，代入

    φ  = dx₁dx₂dx₃ − dx₁dy₂dy₃ − dy₁dx₂dy₃ − dy₁dy₂dx₃
    φ̂  = dx₁dx₂dy₃ + dx₁dy₂dx₃ + dy₁dx₂dx₃ − dy₁dy₂dy₃

得到网格系数的形式；|φ|² = 4 det g。
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from common.errors import ToleranceFailure
from common.indices import TOP
from core.exterior import Form, Frame, exterior_d, wedge
from core.hitchin import almost_complex, dual_three_form
from logger import log
from semiflat.grid import GridRing, PeriodicGrid
from semiflat.hessian import HessianMetricField

SEMIFLAT_OMEGA = Form.basis(1, 4) + Form.basis(2, 5) + Form.basis(3, 6)
COORDINATE_LABELS = {1: 1, 2: 2, 3: 3}


def semiflat_frame(grid: PeriodicGrid, tolerance: Optional[float] = None) -> Frame:
    return Frame("semiflat", {}, SEMIFLAT_OMEGA, GridRing(grid, tolerance), COORDINATE_LABELS)


@dataclass(frozen=True, eq=False)
class SemiflatForms:
    frame: Frame
    omega: Form
    phi: Form
    phi_hat: Form
    norm_sq: np.ndarray

    def rotated(self) -> "SemiflatForms":
        """相位旋转：(φ, φ̂) → (φ̂, −φ)，|φ|² 不变。"""
        return SemiflatForms(self.frame, self.omega, self.phi_hat, -self.phi, self.norm_sq)


def legendre_coframe(field: HessianMetricField):
    """返回 (dx_1, dx_2, dx_3, dy_1, dy_2, dy_3) 六个 1-形式。"""
    dx = tuple(Form(1, {(k + 1,): field.g[j, k] for k in range(3)}) for j in range(3))
    dy = tuple(Form.basis(4 + j) for j in range(3))
    return dx + dy


def reconstruct_forms(field: HessianMetricField, frame: Optional[Frame] = None) -> SemiflatForms:
    frame = frame or semiflat_frame(field.grid)
    x1, x2, x3, y1, y2, y3 = legendre_coframe(field)
    phi = x1 * x2 * x3 - x1 * y2 * y3 - y1 * x2 * y3 - y1 * y2 * x3
    phi_hat = x1 * x2 * y3 + x1 * y2 * x3 + y1 * x2 * x3 - y1 * y2 * y3
    norm_sq = 4.0 * field.det()
    return SemiflatForms(frame, frame.omega, phi, phi_hat, norm_sq)


def _at(form: Form, point) -> Form:
    return Form(form.degree, {k: float(np.asarray(v)[point]) if np.ndim(v) else float(v) for k, v in form.items()})


def expected_complex_structure(g: np.ndarray) -> np.ndarray:
    """z_j = x_j + i y_j 的复结构：J*dx_j = −dy_j，J*dy_j = dx_j。"""
    J = np.zeros((6, 6))
    J[:3, 3:] = -np.linalg.inv(g)
    J[3:, :3] = g
    return J


def hitchin_consistency(
    forms: SemiflatForms, field: HessianMetricField, samples: int = 100, seed: int = 0
) -> Dict[str, float]:
    """
    在随机网格点上用逐点 Hitchin 构造重建 J 与 φ̂，与半平坦显式公式比较。

    Returns:
        {"dual": φ̂ 的最大偏差, "J": 复结构的最大偏差, "norm": |φ|² 的最大相对偏差, "samples": 采样数}
    """
    rng = np.random.default_rng(seed)
    n = field.grid.n
    worst = {"dual": 0.0, "J": 0.0, "norm": 0.0}
    vol = forms.frame.volume_coefficient
    for _ in range(samples):
        point = tuple(int(i) for i in rng.integers(0, n, size=3))
        phi = _at(forms.phi, point)
        phi_hat = dual_three_form(phi, forms.omega)
        worst["dual"] = max(worst["dual"], (phi_hat - _at(forms.phi_hat, point)).norm())
        J = almost_complex(phi, forms.omega)
        g = field.g[(slice(None), slice(None)) + point]
        worst["J"] = max(worst["J"], float(np.max(np.abs(J - expected_complex_structure(g)))))
        norm_sq = wedge(phi, phi_hat).coefficient(TOP) / vol
        expected = float(forms.norm_sq[point])
        worst["norm"] = max(worst["norm"], abs(norm_sq - expected) / expected)
    log.debug(f"[semiflat] Hitchin 一致性（{samples} 个采样点）: {worst}")
    return {**worst, "samples": samples}


def primitivity_residual(forms: SemiflatForms) -> float:
    return wedge(forms.omega, forms.phi).norm()


def norm_identity_residual(forms: SemiflatForms) -> float:
    """|φ|² = 4 det g：φ∧φ̂ 对 vol 的系数与 4 det g 的最大相对偏差。"""
    computed = wedge(forms.phi, forms.phi_hat).coefficient(TOP) / forms.frame.volume_coefficient
    return float(np.max(np.abs(computed - forms.norm_sq) / forms.norm_sq))


def closedness_residual(forms: SemiflatForms) -> Dict[str, float]:
    return {
        "d_phi": exterior_d(forms.phi, forms.frame).norm(),
        "d_phi_hat": exterior_d(forms.phi_hat, forms.frame).norm(),
    }


def require_algebraic_identities(forms: SemiflatForms, tol: float = 1e-12):
    """|φ|² = 4 det g 与 ω∧φ = 0 都是代数恒等式，超出舍入误差就是实现错误。"""
    norm = norm_identity_residual(forms)
    prim = primitivity_residual(forms)
    if norm > tol or prim > tol * max(1.0, float(np.max(forms.norm_sq))):
        raise ToleranceFailure(f"半平坦代数恒等式失败：|φ|² 偏差 {norm:.3e}，ω∧φ = {prim:.3e}")
