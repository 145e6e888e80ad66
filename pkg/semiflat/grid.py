"""
T³ = [0,1)³ 上的均匀周期网格与二阶中心差分模板。

网格场是形状 (..., N, N, N) 的数组，最后三维依次对应 x¹, x², x³；
前面的维度（例如度量的 3×3 分量）原样保留。
"""

from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from common.errors import ConfigError
from core.exterior import CoefficientRing, Scalar

MIN_POINTS = 8


class PeriodicGrid:
    def __init__(self, n: int):
        if int(n) != n or n < MIN_POINTS:
            raise ConfigError(f"每个方向至少需要 {MIN_POINTS} 个网格点，得到 {n}")
        self.n = int(n)
        self.h = 1.0 / self.n

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """形状 (3, N, N, N)，coordinates[j-1] 是 x^j。"""
        axis = np.arange(self.n) * self.h
        return np.array(np.meshgrid(axis, axis, axis, indexing="ij"))

    @staticmethod
    def _axis(j: int) -> int:
        if j not in (1, 2, 3):
            raise ValueError(f"坐标编号必须是 1..3，得到 {j}")
        return j - 4

    def derivative(self, f: np.ndarray, j: int) -> np.ndarray:
        """∂_j f ≈ (f(x + h e_j) − f(x − h e_j)) / 2h。"""
        axis = self._axis(j)
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * self.h)

    def second(self, f: np.ndarray, j: int, k: int) -> np.ndarray:
        """∂_j∂_k f；对角用三点模板，混合导数用四点模板。"""
        aj, ak = self._axis(j), self._axis(k)
        if j == k:
            return (np.roll(f, -1, axis=aj) - 2.0 * f + np.roll(f, 1, axis=aj)) / self.h ** 2
        plus = np.roll(f, -1, axis=aj)
        minus = np.roll(f, 1, axis=aj)
        return (
            np.roll(plus, -1, axis=ak) - np.roll(plus, 1, axis=ak)
            - np.roll(minus, -1, axis=ak) + np.roll(minus, 1, axis=ak)
        ) / (4.0 * self.h ** 2)

    def hessian(self, f: np.ndarray) -> np.ndarray:
        """标量场的离散 Hessian，形状 (3, 3, N, N, N)，按构造对称。"""
        out = np.empty((3, 3) + np.shape(f))
        for j in range(1, 4):
            for k in range(j, 4):
                out[j - 1, k - 1] = self.second(f, j, k)
                out[k - 1, j - 1] = out[j - 1, k - 1]
        return out

    def l2(self, f: np.ndarray) -> float:
        """离散 L² 范数 (h³ Σ f²)^{1/2}。"""
        return float(np.sqrt(np.sum(np.square(f)) * self.h ** 3))

    def __repr__(self):
        return f"PeriodicGrid(n={self.n})"


class GridRing(CoefficientRing):
    """系数是网格场的环；偏导数用网格的中心差分。"""

    name = "grid"
    has_derivatives = True

    def __init__(self, grid: PeriodicGrid, tolerance: Optional[float] = None):
        super().__init__(1e-10 if tolerance is None else tolerance)
        self.grid = grid

    def derivative(self, value: Scalar, j: int) -> Scalar:
        if np.ndim(value) == 0:
            return 0.0
        return self.grid.derivative(value, j)
