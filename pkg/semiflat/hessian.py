"""
T³ 上的周期 Hessian 度量场 g_jk(x)。

初始数据来自势函数 Φ = ½ xᵀA x + Σ ε_m cos(2π k_m·x + θ_m)，
Hessian 直接按解析式在网格上取值。
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from common.errors import ConfigError, PositivityLost
from logger import log
from semiflat.grid import PeriodicGrid

FIELD_NAMES = ("g11", "g12", "g13", "g22", "g23", "g33")
UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class PerturbationMode:
    amplitude: float
    wavevector: Tuple[int, int, int]
    phase: float = 0.0

    def __post_init__(self):
        k = tuple(self.wavevector)
        if len(k) != 3 or any(int(c) != c for c in k):
            raise ConfigError(f"波矢必须是三个整数（保证周期性），得到 {self.wavevector}")
        object.__setattr__(self, "wavevector", tuple(int(c) for c in k))

    @property
    def curvature_bound(self) -> float:
        """|ε|(2π|k|)²：该模式对 Hessian 的谱半径上界。"""
        return abs(self.amplitude) * (2.0 * np.pi * np.linalg.norm(self.wavevector)) ** 2

    @classmethod
    def from_dict(cls, data: dict) -> "PerturbationMode":
        unknown = set(data) - {"amplitude", "wavevector", "phase"}
        if unknown:
            raise ConfigError(f"扰动模式含未知字段: {sorted(unknown)}")
        try:
            return cls(float(data["amplitude"]), tuple(data["wavevector"]), float(data.get("phase", 0.0)))
        except KeyError as e:
            raise ConfigError(f"扰动模式缺少字段 {e}") from e


class HessianMetricField:
    """对称正定的 3×3 场，形状 (3, 3, N, N, N)。"""

    def __init__(self, grid: PeriodicGrid, g: np.ndarray, validate: bool = True, time: Optional[float] = None):
        g = np.asarray(g, dtype=float)
        if g.shape != (3, 3) + grid.shape:
            raise ConfigError(f"度量场形状应为 {(3, 3) + grid.shape}，得到 {g.shape}")
        self.grid = grid
        self.g = g
        if validate:
            self.validate(time)

    # ------------------------------------------------------------------ 构造

    @classmethod
    def constant(cls, grid: PeriodicGrid, matrix: Optional[np.ndarray] = None) -> "HessianMetricField":
        matrix = np.eye(3) if matrix is None else np.asarray(matrix, dtype=float)
        return cls(grid, np.broadcast_to(matrix[:, :, None, None, None], (3, 3) + grid.shape).copy())

    @classmethod
    def from_potential(
        cls,
        grid: PeriodicGrid,
        A: Optional[np.ndarray] = None,
        modes: Sequence[PerturbationMode] = (),
    ) -> "HessianMetricField":
        A = np.eye(3) if A is None else np.asarray(A, dtype=float)
        if A.shape != (3, 3) or np.max(np.abs(A - A.T)) > 1e-14:
            raise ConfigError("A 必须是对称的 3×3 矩阵")
        lowest = float(np.min(np.linalg.eigvalsh(A)))
        if lowest <= 0:
            raise ConfigError(f"A 不是正定的：最小特征值 {lowest:.6g}")
        bound = sum(mode.curvature_bound for mode in modes)
        if bound >= 0.5 * lowest:
            raise ConfigError(
                f"扰动过大：Σ|ε|(2π|k|)² = {bound:.6g} 不小于 λ_min(A)/2 = {0.5 * lowest:.6g}"
            )

        g = np.broadcast_to(A[:, :, None, None, None], (3, 3) + grid.shape).copy()
        x = grid.coordinates
        for mode in modes:
            k = np.asarray(mode.wavevector, dtype=float)
            arg = 2.0 * np.pi * np.einsum("j,j...->...", k, x) + mode.phase
            g -= mode.amplitude * (2.0 * np.pi) ** 2 * np.einsum("j,k,...->jk...", k, k, np.cos(arg))
        log.debug(f"[semiflat] 由势函数构造度量：N = {grid.n}，{len(modes)} 个扰动模式")
        return cls(grid, g)

    @classmethod
    def from_fields(cls, grid: PeriodicGrid, fields: np.ndarray, **kwargs) -> "HessianMetricField":
        """由 6 个上三角分量 (g11, g12, g13, g22, g23, g33) 组装。"""
        g = np.empty((3, 3) + grid.shape)
        for field_values, (j, k) in zip(fields, UPPER):
            g[j, k] = g[k, j] = field_values
        return cls(grid, g, **kwargs)

    # ------------------------------------------------------------------ 派生量

    @property
    def pointwise(self) -> np.ndarray:
        """形状 (N, N, N, 3, 3)，便于 numpy.linalg 批量运算。"""
        return np.moveaxis(self.g, (0, 1), (-2, -1))

    def det(self) -> np.ndarray:
        return np.linalg.det(self.pointwise)

    def log_det(self) -> np.ndarray:
        return np.linalg.slogdet(self.pointwise)[1]

    def inverse(self) -> np.ndarray:
        return np.moveaxis(np.linalg.inv(self.pointwise), (-2, -1), (0, 1))

    def min_eigenvalue(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.pointwise)[..., 0]

    def fields(self) -> np.ndarray:
        return np.array([self.g[j, k] for j, k in UPPER])

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.g - np.swapaxes(self.g, 0, 1))))

    def hessian_residual(self) -> float:
        """∂_i g_jk 关于 (i, j) 的对称性残差；真正的 Hessian 场只剩模板误差。"""
        grad = np.array([self.grid.derivative(self.g, i) for i in range(1, 4)])
        return float(np.max(np.abs(grad - np.swapaxes(grad, 0, 1))))

    def validate(self, time: Optional[float] = None):
        if self.symmetry_residual() > 1e-12 * max(1.0, float(np.max(np.abs(self.g)))):
            raise ConfigError("度量场不对称")
        lowest = self.min_eigenvalue()
        if np.any(lowest <= 0):
            location = tuple(int(i) for i in np.unravel_index(np.argmin(lowest), lowest.shape))
            raise PositivityLost(
                f"度量在网格点 {location} 失去正定性（最小特征值 {float(np.min(lowest)):.6g}）",
                time=time,
                location=location,
            )
        return self

    def with_values(self, g: np.ndarray, time: Optional[float] = None) -> "HessianMetricField":
        return HessianMetricField(self.grid, g, validate=True, time=time)
