"""
预设标架基础类和注册系统
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence

import numpy as np

from common.errors import ConfigError, DegenerateFormError
from core.exterior import Form, Frame, exterior_d_matrix, wedge_matrix
from core.hitchin import STANDARD_OMEGA, lambda_from_k, k_from_vector
from logger import log


class AnsatzFamily:
    """
    仿射的 3-形式族 φ(p) = offset + Σ p_i · generator_i。

    构造时验证 offset 和每个生成元都是闭的、本原的，于是族中每个成员都闭且本原。
    """

    def __init__(
        self,
        frame: Frame,
        parameter_names: Sequence[str],
        generators: Sequence[Form],
        offset: Optional[Form] = None,
        default: Optional[Sequence[float]] = None,
        tol: float = 1e-12,
    ):
        if len(parameter_names) != len(generators):
            raise ConfigError("参数名与生成元个数不一致")
        self.frame = frame
        self.parameter_names = tuple(parameter_names)
        self.generators = tuple(generators)
        self.offset = offset if offset is not None else Form.zero(3)
        self.default = np.array(default if default is not None else np.zeros(len(generators)), dtype=float)

        self.offset_vector = self.offset.to_vector()
        self.matrix = np.array([gen.to_vector() for gen in self.generators])
        self.pseudo_inverse = np.linalg.pinv(self.matrix.T)

        d3 = exterior_d_matrix(frame, 3)
        prim = wedge_matrix(frame.omega, 3)
        for label, vector in [("offset", self.offset_vector)] + list(zip(self.parameter_names, self.matrix)):
            closed = float(np.max(np.abs(vector @ d3)))
            primitive = float(np.max(np.abs(vector @ prim)))
            if closed > tol or primitive > tol:
                raise DegenerateFormError(
                    f"{frame.name}: ansatz 分量 '{label}' 不闭或不本原（dφ {closed:.2e}, ω∧φ {primitive:.2e}）"
                )

    @property
    def dimension(self) -> int:
        return len(self.generators)

    def vector(self, params: Sequence[float]) -> np.ndarray:
        params = self.coerce(params)
        return self.offset_vector + params @ self.matrix

    def form(self, params: Sequence[float]) -> Form:
        return Form.from_vector(3, self.vector(params))

    def coerce(self, params: Sequence[float]) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dimension,):
            raise ConfigError(
                f"{self.frame.name}: 需要 {self.dimension} 个参数 {self.parameter_names}，得到 {params.tolist()}"
            )
        return params

    def project(self, vector: np.ndarray):
        """最小二乘投影到生成元张成的子空间，返回 (参数导数, 残差范数)。"""
        coeffs = self.pseudo_inverse @ vector
        residual = float(np.linalg.norm(coeffs @ self.matrix - vector))
        return coeffs, residual

    def is_positive(self, params: Sequence[float]) -> bool:
        lam = lambda_from_k(k_from_vector(self.vector(params), self.frame.volume_coefficient))
        return bool(lam < 0)


class FramePreset(ABC):
    """预设的左不变标架（李代数）。"""

    aliases: Sequence[str] = ()

    def __init__(self, name: str, description: str):
        """
        初始化预设

        Args:
            name: 预设名称（命令行使用）
            description: 描述
        """
        self.name = name
        self.description = description
        self._frame: Optional[Frame] = None
        self._ansatz: Optional[AnsatzFamily] = None

    @abstractmethod
    def differentials(self) -> Dict[int, Form]:
        """微分表 de^i。"""

    def omega(self) -> Form:
        return STANDARD_OMEGA

    @property
    def frame(self) -> Frame:
        if self._frame is None:
            self._frame = Frame(self.name, self.differentials(), self.omega()).validate(tol=1e-14)
        return self._frame

    def build_ansatz(self) -> Optional[AnsatzFamily]:
        return None

    def conserved_quantities(self, params: Sequence[float]) -> Dict[str, float]:
        """沿任意权重的流都守恒的量，作为轨迹 CSV 的附加列。"""
        return {}

    @property
    def ansatz(self) -> AnsatzFamily:
        if self._ansatz is None:
            self._ansatz = self.build_ansatz()
            if self._ansatz is None:
                raise ConfigError(f"预设 '{self.name}' 没有 ansatz 族")
        return self._ansatz


class PresetRegistry:
    """预设注册表"""

    def __init__(self):
        self._presets: Dict[str, FramePreset] = {}
        self._aliases: Dict[str, str] = {}

    def register(self, preset: FramePreset):
        self._presets[preset.name] = preset
        for alias in preset.aliases:
            self._aliases[alias] = preset.name
        log.debug(f"PresetRegistry: 注册预设 '{preset.name}'")

    def get(self, name: str) -> FramePreset:
        key = self._aliases.get(name, name)
        if key not in self._presets:
            raise ConfigError(f"未知预设 '{name}'，可用：{', '.join(self.list_presets())}")
        return self._presets[key]

    def list_presets(self) -> List[str]:
        return list(self._presets.keys())
