"""
左不变度量的曲率与 Nijenhuis 诊断。

所有张量都以标架分量表示（0 起始的 numpy 下标）：
    Gamma[l, i, j] = Γ^l_ij，∇_{e_i} e_j = Γ^l_ij e_l
    riemann[i, j, k, l] = R(e_i, e_j)e_k 的 e_l 分量
    nijenhuis[k, i, j] = N(e_i, e_j) 的 e_k 分量
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from common.errors import DegenerateFormError
from core.exterior import Frame
from core.hitchin import TypeIIAStructure

NIJENHUIS_SCALE = 0.25


@dataclass(frozen=True, eq=False)
class MetricLieFrame:
    frame: Frame
    g: np.ndarray
    J: Optional[np.ndarray] = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (6, 6) or np.max(np.abs(g - g.T)) > 1e-10 * max(1.0, np.max(np.abs(g))):
            raise DegenerateFormError("度量必须是对称的 6×6 矩阵")
        if np.min(np.linalg.eigvalsh(g)) <= 0:
            raise DegenerateFormError("度量不是正定的")
        if self.J is not None:
            J = np.asarray(self.J, dtype=float)
            if np.max(np.abs(J.T @ g @ J - g)) > 1e-10 * max(1.0, np.max(np.abs(g))):
                raise DegenerateFormError("g 与 J 不相容：g(J·, J·) ≠ g")

    @classmethod
    def from_structure(cls, structure: TypeIIAStructure) -> "MetricLieFrame":
        return cls(structure.frame, structure.g, structure.J)

    @property
    def g_inv(self) -> np.ndarray:
        return np.linalg.inv(self.g)


@dataclass(frozen=True, eq=False)
class Curvature:
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float

    def ricci_j(self, J: np.ndarray) -> np.ndarray:
        """R_{Ji, Jj}。"""
        return J.T @ self.ricci @ J


@dataclass(frozen=True, eq=False)
class NijenhuisData:
    tensor: np.ndarray
    norm_sq: float
    n_plus: np.ndarray
    n_minus: np.ndarray


def levi_civita(m: MetricLieFrame) -> np.ndarray:
    """Koszul 公式：2g(∇_i e_j, e_k) = g([e_i,e_j],e_k) − g([e_j,e_k],e_i) + g([e_k,e_i],e_j)。"""
    c = m.frame.structure_constants()
    C = np.einsum("lij,lk->ijk", c, m.g)
    lowered = 0.5 * (C - np.einsum("jki->ijk", C) + np.einsum("kij->ijk", C))
    return np.einsum("lk,ijk->lij", m.g_inv, lowered)


def torsion_residual(m: MetricLieFrame, gamma: np.ndarray) -> float:
    c = m.frame.structure_constants()
    torsion = gamma - np.swapaxes(gamma, 1, 2) - c
    return float(np.max(np.abs(torsion)))


def metric_compatibility_residual(m: MetricLieFrame, gamma: np.ndarray) -> float:
    lowered = np.einsum("lij,lk->ijk", gamma, m.g)
    return float(np.max(np.abs(lowered + np.swapaxes(lowered, 1, 2))))


def curvature_tensors(m: MetricLieFrame, gamma: Optional[np.ndarray] = None) -> Curvature:
    if gamma is None:
        gamma = levi_civita(m)
    c = m.frame.structure_constants()
    riemann = (
        np.einsum("mjk,lim->ijkl", gamma, gamma)
        - np.einsum("mik,ljm->ijkl", gamma, gamma)
        - np.einsum("mij,lmk->ijkl", c, gamma)
    )
    ricci = np.einsum("ijki->jk", riemann)
    scalar = float(np.einsum("jk,jk->", m.g_inv, ricci))
    return Curvature(riemann=riemann, ricci=ricci, scalar=scalar)


def bianchi_residual(m: MetricLieFrame, curvature: Curvature) -> float:
    """第一 Bianchi 恒等式、前两指标反对称、降指标后后两指标反对称，取最大残差。"""
    R = curvature.riemann
    cyclic = R + np.einsum("jkil->ijkl", R) + np.einsum("kijl->ijkl", R)
    antisym = R + np.swapaxes(R, 0, 1)
    lowered = np.einsum("ijkl,lm->ijkm", R, m.g)
    pair = lowered + np.swapaxes(lowered, 2, 3)
    return float(max(np.max(np.abs(cyclic)), np.max(np.abs(antisym)), np.max(np.abs(pair))))


def nijenhuis(m: MetricLieFrame) -> NijenhuisData:
    """N(X,Y) = ¼([JX,JY] − J[JX,Y] − J[X,JY] − [X,Y]) 以及它的二次缩并。"""
    if m.J is None:
        raise DegenerateFormError("计算 Nijenhuis 张量需要 J")
    J, g, g_inv = m.J, m.g, m.g_inv
    c = m.frame.structure_constants()
    tensor = NIJENHUIS_SCALE * (
        np.einsum("kab,ai,bj->kij", c, J, J)
        - np.einsum("km,maj,ai->kij", J, c, J)
        - np.einsum("km,mib,bj->kij", J, c, J)
        - c
    )
    lowered = np.einsum("ak,kij->aij", g, tensor)
    raised = np.einsum("pa,kb,abi->pki", g_inv, g_inv, lowered)
    n_plus = np.einsum("pki,pkj->ij", raised, lowered)
    n_minus = np.einsum("kpi,pkj->ij", raised, lowered)
    norm_sq = float(np.einsum("ij,ij->", g_inv, n_plus))
    return NijenhuisData(tensor=tensor, norm_sq=norm_sq, n_plus=n_plus, n_minus=n_minus)


def apply_nijenhuis(data: NijenhuisData, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("kij,i,j->k", data.tensor, X, Y)
