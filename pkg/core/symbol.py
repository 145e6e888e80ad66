"""
流族在一点处的主符号分析。

约束变分空间 W = {δφ : ξ∧δφ = 0, Λ_ω δφ = 0}，符号映射
    σ(δφ) = ξ ∧ Λ_ω[ξ ∧ (w(|φ|²) δφ̂ + 2w'(|φ|²)⟨δφ, φ⟩ φ̂)]
限制在 W 上的特征值。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from common.errors import DegenerateFormError
from common.indices import DIM, TOP
from core.exterior import Form, Frame, endo_pullback, lambda_contract, lambda_matrix, wedge, wedge_matrix
from core.flows import FlowSpec
from core.hitchin import (
    ADAPTED_PHI,
    STANDARD_OMEGA,
    TypeIIAStructure,
    adapted_coframe,
    almost_complex,
    dual_three_form,
    volume_coefficient,
)
from logger import log

KAPPA = Form.basis(3, 4) - Form.basis(5, 6)
MU1_PLUS = Form.basis(4, 5) + Form.basis(3, 6)
MU1_MINUS = Form.basis(4, 5) - Form.basis(3, 6)
MU2_PLUS = Form.basis(3, 5) + Form.basis(4, 6)
MU2_MINUS = Form.basis(3, 5) - Form.basis(4, 6)

NAMED_BASIS = (
    ("kappa", KAPPA),
    ("mu1+", MU1_PLUS),
    ("mu1-", MU1_MINUS),
    ("mu2+", MU2_PLUS),
    ("mu2-", MU2_MINUS),
)


def point_frame(omega: Optional[Form] = None) -> Frame:
    """只用于逐点代数运算的标架：微分表为零。"""
    return Frame("point", {}, STANDARD_OMEGA if omega is None else omega)


@dataclass(frozen=True, eq=False)
class SymbolProblem:
    structure: TypeIIAStructure
    xi: np.ndarray
    spec: FlowSpec = field(default_factory=FlowSpec)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape != (DIM,):
            raise DegenerateFormError(f"余向量 ξ 需要 {DIM} 个分量，得到 {xi.shape}")
        if not np.any(xi):
            raise DegenerateFormError("余向量 ξ = 0")
        object.__setattr__(self, "xi", xi)

    @classmethod
    def canonical(cls, spec: Optional[FlowSpec] = None, xi: Optional[Sequence[float]] = None) -> "SymbolProblem":
        """适配标架，|φ| = 1，默认 ξ = e^1。"""
        structure = TypeIIAStructure.build(ADAPTED_PHI, point_frame(), check_closed=False)
        xi = np.eye(DIM)[0] if xi is None else xi
        return cls(structure, xi, spec or FlowSpec())

    @property
    def xi_form(self) -> Form:
        return Form(1, {(i + 1,): float(v) for i, v in enumerate(self.xi) if v != 0.0})


@dataclass
class ConstraintSpace:
    vectors: np.ndarray
    labels: List[str]
    in_named_basis: bool

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def forms(self) -> List[Form]:
        return [Form.from_vector(3, v) for v in self.vectors]


@dataclass
class SymbolReport:
    labels: List[str]
    matrix: np.ndarray
    eigenvalues: np.ndarray
    kernel_dimension: int
    closure_residual: float
    weight: str

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "basis": self.labels,
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "kernel_dimension": self.kernel_dimension,
            "closure_residual": self.closure_residual,
        }


# ==================================================================================================
# 1. 线性化对偶映射
# ==================================================================================================

def linearized_dual(phi: Form, delta: Form, omega: Optional[Form] = None) -> Form:
    """
    δφ̂ = −J_φ*δφ − 2⟨δφ, φ̂⟩/|φ|² φ + 2⟨δφ, φ⟩/|φ|² φ̂。

    内积用体积形式写出：⟨δφ, φ⟩ = (δφ∧φ̂)/vol，⟨δφ, φ̂⟩ = −(δφ∧φ)/vol，
    对相容的 (ω, φ) 与 g_φ 诱导的内积一致，也适用于不本原的正形式。
    """
    omega = STANDARD_OMEGA if omega is None else omega
    J = almost_complex(phi, omega)
    phi_hat = endo_pullback(J, phi)
    vol = volume_coefficient(omega)
    norm_sq = wedge(phi, phi_hat).coefficient(TOP) / vol
    along = wedge(delta, phi_hat).coefficient(TOP) / vol
    across = -wedge(delta, phi).coefficient(TOP) / vol
    return -endo_pullback(J, delta) - (2.0 * across / norm_sq) * phi + (2.0 * along / norm_sq) * phi_hat


def finite_difference_dual(phi: Form, delta: Form, h: float, omega: Optional[Form] = None) -> Form:
    """对偶映射的中心差分 (φ̂(φ+hδ) − φ̂(φ−hδ))/2h。"""
    return (dual_three_form(phi + h * delta, omega) - dual_three_form(phi - h * delta, omega)) / (2.0 * h)


# ==================================================================================================
# 2. 约束空间与符号
# ==================================================================================================

def to_adapted(problem: SymbolProblem) -> SymbolProblem:
    """把基点变到适配标架：ω 标准，φ = |φ|·φ_adapted，ξ 随之拉回。"""
    P = adapted_coframe(problem.structure)
    phi = endo_pullback(P, problem.structure.phi)
    structure = TypeIIAStructure.build(phi, point_frame(), check_closed=False)
    return SymbolProblem(structure, P.T @ problem.xi, problem.spec)


def _is_canonical_direction(xi: np.ndarray) -> bool:
    return xi[0] != 0.0 and np.max(np.abs(xi[1:])) <= 1e-12 * abs(xi[0])


def constraint_space(problem: SymbolProblem, prefer_named_basis: bool = True) -> ConstraintSpace:
    frame = problem.structure.frame
    constraints = np.hstack([wedge_matrix(problem.xi_form, 3), lambda_matrix(frame, 3)])
    kernel = null_space(constraints.T)
    log.debug(f"Symbol: 约束空间维数 {kernel.shape[1]}")

    adapted = np.allclose(problem.structure.g, np.eye(DIM), atol=1e-10) and frame.omega.allclose(STANDARD_OMEGA)
    if prefer_named_basis and adapted and _is_canonical_direction(problem.xi) and kernel.shape[1] == len(NAMED_BASIS):
        e1 = Form.basis(1)
        vectors = np.array([wedge(e1, gamma).to_vector() for _, gamma in NAMED_BASIS])
        return ConstraintSpace(vectors, [label for label, _ in NAMED_BASIS], True)
    labels = [f"w{i + 1}" for i in range(kernel.shape[1])]
    return ConstraintSpace(kernel.T.copy(), labels, False)


def symbol_map(problem: SymbolProblem, delta: Form) -> Form:
    structure, spec = problem.structure, problem.spec
    frame = structure.frame
    n = structure.norm_sq
    variation = linearized_dual(structure.phi, delta, frame.omega)
    along = wedge(delta, structure.phi_hat).coefficient(TOP) / frame.volume_coefficient
    linear = variation * spec.weight_value(n) + structure.phi_hat * (2.0 * spec.weight_derivative(n) * along)
    xi = problem.xi_form
    return wedge(xi, lambda_contract(wedge(xi, linear), frame))


def symbol_spectrum(problem: SymbolProblem, adapt: bool = True) -> SymbolReport:
    """
    符号映射在 W 上的矩阵与特征值（升序）。

    Args:
        problem: 基点、余向量 ξ 与权重
        adapt: 先变换到适配标架（谱与标架无关，但命名基只在适配标架中可用）
    """
    if adapt:
        problem = to_adapted(problem)
    space = constraint_space(problem)
    basis = space.vectors
    images = np.array([symbol_map(problem, form).to_vector() for form in space.forms()])
    coords, *_ = np.linalg.lstsq(basis.T, images.T, rcond=None)
    closure = float(np.linalg.norm(basis.T @ coords - images.T))

    eigenvalues = np.linalg.eigvals(coords)
    if np.max(np.abs(eigenvalues.imag)) < 1e-9:
        eigenvalues = eigenvalues.real
    eigenvalues = eigenvalues[np.argsort(eigenvalues.real)]
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    kernel_dimension = int(np.sum(np.abs(eigenvalues) < 1e-10 * scale))
    weight = problem.spec.weight.value
    log.info(f"Symbol: 权重 {weight}，特征值 {np.round(eigenvalues.real, 12).tolist()}，核维数 {kernel_dimension}")
    return SymbolReport(space.labels, coords, eigenvalues, kernel_dimension, closure, weight)

