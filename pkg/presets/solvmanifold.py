"""
Tomassini–Vezzoni 可解流形：
    de^1 = −λe^{15}, de^2 = λe^{25}, de^3 = −λe^{36}, de^4 = λe^{46}, de^5 = de^6 = 0，
    λ = log((3+√5)/2)。

ansatz 族 φ = α(e^{135}+e^{136}) + β(e^{145}−e^{146}) + γ(e^{235}−e^{236}) − δ(e^{245}+e^{246})，
正性条件 αβγδ > 0，且 |φ|⁴ = 64αβγδ。
"""

import math
from typing import Dict

import numpy as np

from common.errors import NotPositive
from core.exterior import Form
from presets.base import AnsatzFamily, FramePreset

SOLV_LAMBDA = math.log((3.0 + math.sqrt(5.0)) / 2.0)

SOLVMANIFOLD_GENERATORS = (
    Form.basis(1, 3, 5) + Form.basis(1, 3, 6),
    Form.basis(1, 4, 5) - Form.basis(1, 4, 6),
    Form.basis(2, 3, 5) - Form.basis(2, 3, 6),
    -(Form.basis(2, 4, 5) + Form.basis(2, 4, 6)),
)


class SolvmanifoldPreset(FramePreset):
    aliases = ("solvmanifold", "solv")

    def __init__(self, lam: float = SOLV_LAMBDA):
        super().__init__("solvmanifold_tv", "Solvmanifold with parameter log((3+sqrt5)/2)")
        self.lam = lam

    def differentials(self) -> Dict[int, Form]:
        lam = self.lam
        return {
            1: -lam * Form.basis(1, 5),
            2: lam * Form.basis(2, 5),
            3: -lam * Form.basis(3, 6),
            4: lam * Form.basis(4, 6),
        }

    def build_ansatz(self) -> AnsatzFamily:
        return AnsatzFamily(
            self.frame,
            ("alpha", "beta", "gamma", "delta"),
            SOLVMANIFOLD_GENERATORS,
            default=(1.0, 1.0, 1.0, 1.0),
        )

    def conserved_quantities(self, params) -> Dict[str, float]:
        alpha, beta, gamma, delta = (float(x) for x in params)
        return {"alphaOverDelta": alpha / delta, "betaOverGamma": beta / gamma}


def _constants(initial):
    alpha, beta, gamma, delta = (float(x) for x in initial)
    if min(alpha, beta, gamma, delta) <= 0:
        raise NotPositive(f"解析解要求 α, β, γ, δ > 0，得到 {list(initial)}")
    c1, c2 = alpha / delta, beta / gamma
    a = 0.5 * (math.sqrt(c2) * gamma + math.sqrt(c1) * delta)
    b = 0.5 * (math.sqrt(c1) * delta - math.sqrt(c2) * gamma)
    return c1, c2, a, b


def solvmanifold_oracle(t: float, initial, lam: float = SOLV_LAMBDA, rescaled: bool = False) -> np.ndarray:
    """
    Hitchin 梯度流的解析解。

    解析式写在重标度时间 τ = 2λ²t 中；rescaled=False 时 t 是积分器的原始时间。
    """
    c1, c2, a, b = _constants(initial)
    tau = t if rescaled else 2.0 * lam * lam * t
    plus = a * math.exp(tau) + b * math.exp(-tau)
    minus = a * math.exp(tau) - b * math.exp(-tau)
    return np.array([
        math.sqrt(c1) * plus,
        math.sqrt(c2) * minus,
        minus / math.sqrt(c2),
        plus / math.sqrt(c1),
    ])


def solvmanifold_limit(initial) -> np.ndarray:
    """φ_∞ = lim φ/|φ| 的 ansatz 参数。"""
    c1, c2, _, _ = _constants(initial)
    return np.array([
        math.sqrt(c1 / 8.0),
        math.sqrt(c2 / 8.0),
        math.sqrt(1.0 / (8.0 * c2)),
        math.sqrt(1.0 / (8.0 * c1)),
    ])
