from typing import Dict

from core.exterior import Form
from presets.base import AnsatzFamily, FramePreset
from presets.nilmanifold import NILMANIFOLD_GENERATORS, NILMANIFOLD_OFFSET


class TorusPreset(FramePreset):
    """平坦环面：所有 de^i = 0，作为对照组。"""

    def __init__(self):
        super().__init__("torus", "Flat 6-torus, all structure constants zero")

    def differentials(self) -> Dict[int, Form]:
        return {}

    def build_ansatz(self) -> AnsatzFamily:
        # 环面上任何常系数形式都是闭的，借用幂零流形的参数化
        return AnsatzFamily(
            self.frame,
            ("a", "b"),
            NILMANIFOLD_GENERATORS,
            offset=NILMANIFOLD_OFFSET,
            default=(0.0, 0.0),
        )
