"""
de Bartolomeis–Tomassini 幂零流形：de^4 = e^{15}，de^6 = e^{13}，其余为 0。

ansatz 族 φ_{a,b} = (1+a)e^{135} − e^{146} − e^{245} − e^{236} + b(e^{134} − e^{156})，
正性条件为 1 + a − b² > 0。
"""

from typing import Dict

import numpy as np

from common.errors import NotPositive
from core.exterior import Form
from presets.base import AnsatzFamily, FramePreset

NILMANIFOLD_OFFSET = Form.basis(1, 3, 5) - Form.basis(1, 4, 6) - Form.basis(2, 4, 5) - Form.basis(2, 3, 6)
NILMANIFOLD_GENERATORS = (
    Form.basis(1, 3, 5),
    Form.basis(1, 3, 4) - Form.basis(1, 5, 6),
)


class NilmanifoldPreset(FramePreset):
    aliases = ("nilmanifold", "nil")

    def __init__(self):
        super().__init__("nilmanifold_dbt", "Nilmanifold with de4 = e15, de6 = e13")

    def differentials(self) -> Dict[int, Form]:
        return {4: Form.basis(1, 5), 6: Form.basis(1, 3)}

    def build_ansatz(self) -> AnsatzFamily:
        return AnsatzFamily(
            self.frame,
            ("a", "b"),
            NILMANIFOLD_GENERATORS,
            offset=NILMANIFOLD_OFFSET,
            default=(0.0, 0.0),
        )


def positivity_margin(a: float, b: float) -> float:
    """1 + a − b²，正性当且仅当它大于 0。"""
    return 1.0 + a - b * b


def nilmanifold_oracle(t: float, initial) -> np.ndarray:
    """
    Hitchin 梯度流的解析解：(1+a−b₀²)^{3/2} = (1+a₀−b₀²)^{3/2} + 3t，b ≡ b₀。
    """
    a0, b0 = (float(x) for x in initial)
    margin = positivity_margin(a0, b0)
    if margin <= 0:
        raise NotPositive(f"初值 (a, b) = ({a0}, {b0}) 不满足 1 + a − b² > 0")
    s = (margin ** 1.5 + 3.0 * t) ** (2.0 / 3.0)
    return np.array([s - 1.0 + b0 * b0, b0])


def nilmanifold_nijenhuis_sq(t: float, initial) -> float:
    """|N|²(t) = 1/((1+a₀−b₀²)^{3/2} + 3t)。"""
    a0, b0 = (float(x) for x in initial)
    return 1.0 / (positivity_margin(a0, b0) ** 1.5 + 3.0 * t)
