"""
稳定 3-形式（Hitchin）构造。

给定正的 3-形式 φ 和与之相容的辛形式 ω，构造：
    K_φ      由 (ι_{e_a}φ ∧ φ) ∧ e^b = K^b_a · ω³/3! 定义的自同态
    λ(φ)     = tr(K²)/6，φ 为正当且仅当 λ < 0
    J_φ      = K/√(−λ)
    φ̂       = J_φ*φ
    |φ|²     由 φ∧φ̂ = |φ|² ω³/3! 给出
    g_φ      = ω(·, J_φ·)，g̃ = |φ|² g_φ

所有数组运算都允许前置批量维度，因此同一套函数既用于常系数标架，
也可以逐点作用在半平坦网格上。
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Optional, Tuple

import numpy as np

from common.errors import DegenerateFormError, NotClosed, NotPositive, NotPrimitive, ToleranceFailure
from common.indices import DIM, TOP, basis_tuples, sort_with_sign
from core.exterior import Form, Frame, endo_pullback, exterior_d, pullback_matrix, wedge, wedge_tensor
from logger import log

STANDARD_OMEGA = Form.basis(1, 2) + Form.basis(3, 4) + Form.basis(5, 6)
ADAPTED_PHI = 0.5 * (Form.basis(1, 3, 5) - Form.basis(1, 4, 6) - Form.basis(2, 4, 5) - Form.basis(2, 3, 6))
ADAPTED_PHI_HAT = 0.5 * (Form.basis(1, 3, 6) + Form.basis(1, 4, 5) + Form.basis(2, 3, 5) - Form.basis(2, 4, 6))


# ==================================================================================================
# 1. 预计算张量
# ==================================================================================================

@lru_cache(maxsize=None)
def _k_tensor() -> np.ndarray:
    """T[b, a, I, J] = ((ι_{e_a} e^I) ∧ e^J ∧ e^b) 的 e^{123456} 系数。"""
    tuples = basis_tuples(3)
    tensor = np.zeros((DIM, DIM, len(tuples), len(tuples)))
    for i_pos, index in enumerate(tuples):
        for r, a in enumerate(index):
            first = -1 if r % 2 else 1
            rest = index[:r] + index[r + 1:]
            for j_pos, other in enumerate(tuples):
                for b in range(1, DIM + 1):
                    second, _ = sort_with_sign(rest + other + (b,))
                    if second:
                        tensor[b - 1, a - 1, i_pos, j_pos] += first * second
    return tensor


@lru_cache(maxsize=None)
def _antisymmetrizer() -> np.ndarray:
    """E[I, i, j, k]：把 3-形式向量展开成完全反对称张量 φ_ijk。"""
    tuples = basis_tuples(3)
    tensor = np.zeros((len(tuples), DIM, DIM, DIM))
    for pos, index in enumerate(tuples):
        for perm in permutations(range(3)):
            sign, _ = sort_with_sign(tuple(index[p] for p in perm))
            i, j, k = (index[p] - 1 for p in perm)
            tensor[pos, i, j, k] = sign
    return tensor


def three_tensor(vector: np.ndarray) -> np.ndarray:
    return np.einsum("...I,Iijk->...ijk", vector, _antisymmetrizer())


def omega_matrix(omega: Form) -> np.ndarray:
    matrix = np.zeros((DIM, DIM))
    for (p, q), value in omega.items():
        matrix[p - 1, q - 1] = value
        matrix[q - 1, p - 1] = -value
    return matrix


def volume_coefficient(omega: Form) -> float:
    """ω³/3! 的 e^{123456} 系数。"""
    top = wedge(wedge(omega, omega), omega).coefficient(TOP) / 6.0
    if abs(top) < 1e-14:
        raise DegenerateFormError("ω 退化：ω³ = 0")
    return float(top)


# ==================================================================================================
# 2. 数组层面的逐点构造
# ==================================================================================================

def k_from_vector(vector: np.ndarray, vol_coef: float) -> np.ndarray:
    return np.einsum("baij,...i,...j->...ba", _k_tensor(), vector, vector) / vol_coef


def lambda_from_k(K: np.ndarray) -> np.ndarray:
    return np.trace(K @ K, axis1=-2, axis2=-1) / 6.0


def require_positive(lam, context: str = ""):
    lam = np.asarray(lam)
    # NaN 与 inf 同样不在正锥内
    bad = ~(lam < 0)
    if np.any(bad):
        worst = float(np.max(lam))
        where = ""
        if lam.ndim > 0:
            where = f"，位置 {tuple(int(i) for i in np.unravel_index(np.argmax(bad), lam.shape))}"
        raise NotPositive(f"{context}3-形式不是正的：λ = {worst:.6g}{where}", lam=worst)


@dataclass(frozen=True, eq=False)
class PointwiseStructure:
    """稠密向量形式下的 Hitchin 数据，供积分器和网格检查直接使用。"""

    K: np.ndarray
    lam: np.ndarray
    J: np.ndarray
    phi_hat: np.ndarray
    norm_sq: np.ndarray


def pointwise(vector: np.ndarray, vol_coef: float) -> PointwiseStructure:
    K = k_from_vector(vector, vol_coef)
    lam = lambda_from_k(K)
    require_positive(lam)
    J = K / np.sqrt(-np.asarray(lam))[..., None, None]
    phi_hat = np.einsum("...i,...ij->...j", vector, pullback_matrix(J, 3))
    norm_sq = np.einsum("...i,ij,...j->...", vector, wedge_tensor(3, 3)[:, :, 0], phi_hat) / vol_coef
    return PointwiseStructure(K=K, lam=lam, J=J, phi_hat=phi_hat, norm_sq=norm_sq)


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def _or_standard(omega: Optional[Form]) -> Form:
    return STANDARD_OMEGA if omega is None else omega


def _check_degree(phi: Form):
    if phi.degree != 3:
        raise DegenerateFormError(f"需要 3-形式，得到 {phi.degree} 次形式")


# ==================================================================================================
# 3. 形式层面的接口
# ==================================================================================================

def k_endomorphism(phi: Form, omega: Optional[Form] = None) -> np.ndarray:
    _check_degree(phi)
    return k_from_vector(phi.to_vector(), volume_coefficient(_or_standard(omega)))


def lambda_invariant(phi: Form, omega: Optional[Form] = None):
    return _scalar(lambda_from_k(k_endomorphism(phi, omega)))


def almost_complex(phi: Form, omega: Optional[Form] = None) -> np.ndarray:
    _check_degree(phi)
    return pointwise(phi.to_vector(), volume_coefficient(_or_standard(omega))).J


def dual_three_form(phi: Form, omega: Optional[Form] = None) -> Form:
    return endo_pullback(almost_complex(phi, omega), phi)


def norm_squared(phi: Form, omega: Optional[Form] = None):
    _check_degree(phi)
    return _scalar(pointwise(phi.to_vector(), volume_coefficient(_or_standard(omega))).norm_sq)


def primitivity_residual(phi: Form, omega: Optional[Form] = None) -> float:
    return wedge(_or_standard(omega), phi).norm()


def metric_from(phi: Form, omega: Optional[Form] = None, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """
    由 (φ, ω) 构造 g_φ 与 g̃，两种公式独立计算并交叉核对。

    Returns:
        (g, g̃)，允许批量维度。

    Raises:
        NotPrimitive: ω∧φ ≠ 0。
        NotPositive: λ ≥ 0，或 g 不是正定的。
        ToleranceFailure: 两种 g̃ 公式不一致。
    """
    _check_degree(phi)
    omega = _or_standard(omega)
    scale = max(1.0, phi.norm())
    residual = primitivity_residual(phi, omega)
    if residual > tol * scale:
        raise NotPrimitive(f"ω∧φ ≠ 0（残差 {residual:.3e}），J_φ 与 ω 不相容")

    vector = phi.to_vector()
    data = pointwise(vector, volume_coefficient(omega))
    big_omega = omega_matrix(omega)
    g = big_omega @ data.J

    tensor = three_tensor(vector)
    w_inv = np.linalg.inv(big_omega)
    g_tilde = -np.einsum("...jkp,...iab,ka,pb->...ij", tensor, tensor, w_inv, w_inv)

    expected = np.asarray(data.norm_sq)[..., None, None] * g
    mismatch = float(np.max(np.abs(g_tilde - expected)))
    if mismatch > 1e-8 * max(1.0, float(np.max(np.abs(expected)))):
        raise ToleranceFailure(f"g̃ 两种算法不一致：{mismatch:.3e}")
    if float(np.max(np.abs(g - np.swapaxes(g, -1, -2)))) > 1e-8 * scale:
        raise NotPrimitive("g_φ 不对称")
    eigenvalues = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    if np.any(eigenvalues <= 0):
        raise NotPositive(f"g_φ 不是正定的（最小特征值 {float(np.min(eigenvalues)):.3e}）")
    return g, g_tilde


def hitchin_density(phi: Form, omega: Optional[Form] = None):
    """H 的被积密度 ½|φ|²（相对 ω³/3!）。"""
    return 0.5 * norm_squared(phi, omega)


def functional_variation(phi: Form, delta: Form, omega: Optional[Form] = None):
    """δH = (δφ ∧ φ̂)/vol，等于 ⟨δφ, φ⟩_{g_φ}。"""
    omega = _or_standard(omega)
    top = wedge(delta, dual_three_form(phi, omega)).coefficient(TOP)
    return _scalar(top / volume_coefficient(omega))


def integrability_defect(phi: Form, frame: Frame) -> float:
    """‖dφ̂‖；为零当且仅当 J_φ 可积。"""
    return exterior_d(dual_three_form(phi, frame.omega), frame).norm()


def phase_rotate(phi: Form, omega: Optional[Form] = None) -> Form:
    """相位旋转 π/2：新的 3-形式是 φ̂，它的对偶是 −φ。"""
    return dual_three_form(phi, omega)


# ==================================================================================================
# 4. Type IIA 结构
# ==================================================================================================

@dataclass(frozen=True, eq=False)
class TypeIIAStructure:
    """相容的 (ω, φ) 以及由它导出的 J、φ̂、|φ|²、g、g̃。"""

    frame: Frame
    phi: Form
    phi_hat: Form
    J: np.ndarray
    norm_sq: float
    g: np.ndarray
    g_tilde: np.ndarray
    lam: float

    @property
    def omega(self) -> Form:
        return self.frame.omega

    @property
    def u(self) -> float:
        return float(np.log(self.norm_sq))

    @classmethod
    def build(cls, phi: Form, frame: Frame, check_closed: bool = True, tol: float = 1e-10) -> "TypeIIAStructure":
        _check_degree(phi)
        if not phi.is_constant:
            raise DegenerateFormError("TypeIIAStructure 只接受常系数 φ；网格上请逐点使用 pointwise()")
        if check_closed:
            closed = exterior_d(phi, frame).norm()
            if closed > tol * max(1.0, phi.norm()):
                raise NotClosed(f"{frame.name}: dφ ≠ 0（残差 {closed:.3e}）")
        g, g_tilde = metric_from(phi, frame.omega, tol)
        data = pointwise(phi.to_vector(), frame.volume_coefficient)
        return cls(
            frame=frame,
            phi=phi,
            phi_hat=Form.from_vector(3, data.phi_hat),
            J=data.J,
            norm_sq=float(data.norm_sq),
            g=g,
            g_tilde=g_tilde,
            lam=float(data.lam),
        )

    def rotated(self) -> "TypeIIAStructure":
        return TypeIIAStructure.build(self.phi_hat, self.frame, check_closed=False)


def adapted_coframe(structure: TypeIIAStructure) -> np.ndarray:
    """
    求标架变换 P（列向量为新基 f_a），使 P*ω = e^{12}+e^{34}+e^{56}，
    P*φ = |φ|·φ_adapted。

    先在 g 下做与 J 相容的 Gram–Schmidt（f_{2k} = J f_{2k−1}），
    再在 (f1, f2) 平面内旋转，使 (φ + iφ̂)(f1, f3, f5) 为正实数。
    """
    J, g = structure.J, structure.g
    vectors = []
    for _ in range(3):
        for candidate in np.eye(DIM):
            v = candidate.copy()
            for f in vectors:
                v = v - (f @ g @ v) * f
            length = float(v @ g @ v)
            if length > 1e-8:
                break
        else:
            raise DegenerateFormError("无法构造适配标架")
        f = v / np.sqrt(length)
        vectors.extend([f, J @ f])

    f1, f2, f3, _, f5, _ = vectors
    real = np.einsum("ijk,i,j,k->", three_tensor(structure.phi.to_vector()), f1, f3, f5)
    imag = np.einsum("ijk,i,j,k->", three_tensor(structure.phi_hat.to_vector()), f1, f3, f5)
    theta = -np.angle(complex(real, imag))
    vectors[0] = np.cos(theta) * f1 + np.sin(theta) * f2
    vectors[1] = J @ vectors[0]
    P = np.column_stack(vectors)
    log.debug(f"Hitchin: 适配标架相位角 θ = {theta:.6g}")
    return P
