"""
六维余标架上的外微分演算。

形式以稀疏字典保存：严格递增的指标元组 -> 系数。系数可以是实数（常系数标架），
也可以是周期网格上的数组（半平坦约化），两者都只通过 numpy 的广播运算参与计算，
因此同一套 wedge / interior / d / Λ 可以同时用于两种场景。
"""

from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from common.errors import DegenerateFormError, DegreeError
from common.indices import (
    DIM,
    TOP,
    Index,
    basis_tuples,
    complement,
    complement_sign,
    format_index,
    is_strictly_increasing,
    parse_index,
    sort_with_sign,
    tuple_positions,
)
from logger import log

Scalar = Union[float, np.ndarray]
Vector = Union[int, np.ndarray]


# ==================================================================================================
# 1. 系数环
# ==================================================================================================

class CoefficientRing(ABC):
    """
    形式系数所在的环。

    环本身不包装系数：系数就是 float 或 ndarray，环只提供偏导数和带容差的比较。
    """

    name = "abstract"
    has_derivatives = False
    zero = 0.0
    one = 1.0

    def __init__(self, tolerance: float):
        self.tolerance = tolerance

    @abstractmethod
    def derivative(self, value: Scalar, j: int) -> Scalar:
        """∂/∂x^j，j = 1..3。"""

    def max_abs(self, value: Scalar) -> float:
        return float(np.max(np.abs(value)))

    def is_zero(self, value: Scalar, tol: Optional[float] = None) -> bool:
        return self.max_abs(value) <= (self.tolerance if tol is None else tol)

    def close(self, a: Scalar, b: Scalar, tol: Optional[float] = None) -> bool:
        return self.is_zero(np.subtract(a, b), tol)


class ConstantRing(CoefficientRing):
    """实常数。左不变标架上的所有计算都在这里进行。"""

    name = "constant"

    def __init__(self, tolerance: float = 1e-12):
        super().__init__(tolerance)

    def derivative(self, value: Scalar, j: int) -> Scalar:
        return 0.0


# ==================================================================================================
# 2. 形式
# ==================================================================================================

def _is_exact_zero(value: Scalar) -> bool:
    return not np.any(value)


def _accumulate(target: Dict[Index, Scalar], index: Index, value: Scalar):
    if index in target:
        target[index] = target[index] + value
    else:
        target[index] = value


@lru_cache(maxsize=None)
def _merge(left: Index, right: Index) -> Tuple[int, Index]:
    return sort_with_sign(left + right)


class Form:
    """
    k 次外形式。构造后不再修改，可以在线程间只读共享。

    只有精确为零的系数会被剪掉；数值上很小的系数保留，比较时用 allclose。
    """

    __slots__ = ("degree", "_coeffs")
    # 让 ndarray * Form 走 Form.__rmul__，而不是被 numpy 展开成 object 数组
    __array_ufunc__ = None

    def __init__(self, degree: int, coefficients: Optional[Mapping[Index, Scalar]] = None):
        if not 0 <= degree <= DIM:
            raise DegreeError(f"形式次数 {degree} 超出 0..{DIM}")
        coeffs: Dict[Index, Scalar] = {}
        for index, value in (coefficients or {}).items():
            index = tuple(int(i) for i in index)
            if (
                len(index) != degree
                or not is_strictly_increasing(index)
                or any(i < 1 or i > DIM for i in index)
            ):
                raise DegreeError(f"指标 {index} 不是严格递增的 {degree} 元组")
            if not _is_exact_zero(value):
                coeffs[index] = value
        self.degree = degree
        self._coeffs = coeffs

    # ------------------------------------------------------------------ 构造

    @classmethod
    def zero(cls, degree: int) -> "Form":
        return cls(degree)

    @classmethod
    def scalar(cls, value: Scalar) -> "Form":
        return cls(0, {(): value})

    @classmethod
    def basis(cls, *indices: int) -> "Form":
        """e^{i1} ∧ ... ∧ e^{ik}，指标可以乱序，符号自动处理。"""
        sign, index = sort_with_sign(indices)
        if sign == 0:
            return cls.zero(len(indices)) if len(indices) <= DIM else cls.zero(0)
        return cls(len(index), {index: float(sign)})

    @classmethod
    def from_terms(cls, degree: int, terms: Iterable[Tuple[Iterable[int], Scalar]]) -> "Form":
        """由 (指标, 系数) 序列构造，指标顺序任意，重复项相加。"""
        coeffs: Dict[Index, Scalar] = {}
        for indices, value in terms:
            sign, index = sort_with_sign(indices)
            if sign:
                _accumulate(coeffs, index, sign * value)
        return cls(degree, coeffs)

    @classmethod
    def from_vector(cls, degree: int, vector: np.ndarray) -> "Form":
        """稠密向量（最后一维按 combinations 顺序）还原为形式。"""
        vector = np.asarray(vector, dtype=float)
        tuples = basis_tuples(degree)
        if vector.shape[-1] != len(tuples):
            raise DegreeError(f"{degree} 次形式需要长度 {len(tuples)} 的向量，得到 {vector.shape}")
        if vector.ndim == 1:
            return cls(degree, {index: float(vector[pos]) for pos, index in enumerate(tuples)})
        return cls(degree, {index: vector[..., pos] for pos, index in enumerate(tuples)})

    # ------------------------------------------------------------------ 访问

    def items(self) -> Iterator[Tuple[Index, Scalar]]:
        return iter(self._coeffs.items())

    def support(self) -> Tuple[Index, ...]:
        return tuple(sorted(self._coeffs))

    def coefficient(self, indices: Iterable[int]) -> Scalar:
        sign, index = sort_with_sign(indices)
        if sign == 0:
            return 0.0
        return sign * self._coeffs.get(index, 0.0)

    @property
    def is_constant(self) -> bool:
        return all(np.ndim(v) == 0 for v in self._coeffs.values())

    @property
    def shape(self) -> Tuple[int, ...]:
        """系数的公共广播形状；常系数为 ()。"""
        if not self._coeffs:
            return ()
        return tuple(np.broadcast_shapes(*(np.shape(v) for v in self._coeffs.values())))

    def to_vector(self) -> np.ndarray:
        positions = tuple_positions(self.degree)
        out = np.zeros(self.shape + (len(positions),))
        for index, value in self._coeffs.items():
            out[..., positions[index]] = value
        return out

    def __len__(self) -> int:
        return len(self._coeffs)

    # ------------------------------------------------------------------ 运算

    def _combine(self, other: "Form", sign: float) -> "Form":
        if not isinstance(other, Form):
            return NotImplemented
        if other.degree != self.degree:
            raise DegreeError(f"不能相加不同次数的形式：{self.degree} 与 {other.degree}")
        coeffs = dict(self._coeffs)
        for index, value in other._coeffs.items():
            _accumulate(coeffs, index, sign * value)
        return Form(self.degree, coeffs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return Form(self.degree, {k: -v for k, v in self._coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, Form):
            return wedge(self, other)
        return Form(self.degree, {k: v * other for k, v in self._coeffs.items()})

    def __rmul__(self, other):
        return Form(self.degree, {k: other * v for k, v in self._coeffs.items()})

    def __truediv__(self, other):
        return Form(self.degree, {k: v / other for k, v in self._coeffs.items()})

    def __xor__(self, other):
        return wedge(self, other)

    # ------------------------------------------------------------------ 比较

    def __eq__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        if self.degree != other.degree or set(self._coeffs) != set(other._coeffs):
            return False
        return all(np.array_equal(v, other._coeffs[k]) for k, v in self._coeffs.items())

    __hash__ = None

    def norm(self) -> float:
        """系数的欧氏范数；网格系数取逐点范数的最大值。"""
        if not self._coeffs:
            return 0.0
        total = sum(np.square(v) for v in self._coeffs.values())
        return float(np.max(np.sqrt(total)))

    def allclose(self, other: "Form", tol: float = 1e-12) -> bool:
        return (self - other).norm() <= tol

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    # ------------------------------------------------------------------ 序列化

    def to_text(self, precision: int = 12) -> str:
        """人类可读的文本，如 "0.5 e^{135} - 0.5 e^{146}"。"""
        if not self._coeffs:
            return "0"
        parts = []
        for index in sorted(self._coeffs):
            value = self._coeffs[index]
            if np.ndim(value) > 0:
                parts.append(("+", f"<field> {format_index(index)}"))
                continue
            sign = "-" if value < 0 else "+"
            body = f"{abs(value):.{precision}g}"
            if index:
                body += f" {format_index(index)}"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"Form({self.degree}: {self.to_text()})"

    def to_json(self) -> dict:
        if not self.is_constant:
            raise TypeError("网格系数的形式不做 JSON 序列化，请使用 storage 中的二进制转储")
        return {
            "degree": self.degree,
            "coefficients": {"".join(str(i) for i in k): float(v) for k, v in sorted(self._coeffs.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "Form":
        degree = int(data["degree"])
        return cls(degree, {parse_index(k): float(v) for k, v in data.get("coefficients", {}).items()})


# ==================================================================================================
# 3. 代数运算
# ==================================================================================================

def wedge(a: Form, b: Form) -> Form:
    degree = a.degree + b.degree
    if degree > DIM:
        raise DegreeError(f"楔积次数 {a.degree}+{b.degree} 超过 {DIM}")
    coeffs: Dict[Index, Scalar] = {}
    for left, x in a.items():
        for right, y in b.items():
            sign, index = _merge(left, right)
            if sign:
                _accumulate(coeffs, index, sign * (x * y))
    return Form(degree, coeffs)


def interior(v: Vector, a: Form) -> Form:
    """
    内乘 ι_v a。

    :param v: 1..6 的整数表示基向量 e_v；或长度 6 的常向量。
    :param a: 任意次数的形式；0 次形式的内乘为 0。
    """
    if a.degree == 0:
        return Form.zero(0)
    if isinstance(v, (int, np.integer)):
        if not 1 <= int(v) <= DIM:
            raise DegreeError(f"基向量编号 {v} 超出 1..{DIM}")
        weights = {int(v): 1.0}
    else:
        vec = np.asarray(v, dtype=float)
        if vec.shape != (DIM,):
            raise DegreeError(f"内乘向量需要形状 ({DIM},)，得到 {vec.shape}")
        weights = {p + 1: float(vec[p]) for p in range(DIM) if vec[p] != 0.0}
    coeffs: Dict[Index, Scalar] = {}
    for index, value in a.items():
        for r, p in enumerate(index):
            w = weights.get(p)
            if w is None:
                continue
            sign = -1.0 if r % 2 else 1.0
            _accumulate(coeffs, index[:r] + index[r + 1:], (sign * w) * value)
    return Form(a.degree - 1, coeffs)


def endo_pullback(A: np.ndarray, a: Form) -> Form:
    """
    自同态的拉回 (A*a)(X1..Xk) = a(AX1..AXk)。

    A 的约定是 A e_a = Σ_b A[b, a] e_b，于是 A*e^i = Σ_j A[i, j] e^j。
    A 可以带前置批量维度（例如逐网格点的 J）。
    """
    if a.degree == 0:
        return a
    matrix = pullback_matrix(A, a.degree)
    vector = np.einsum("...i,...ij->...j", a.to_vector(), matrix)
    return Form.from_vector(a.degree, vector)


def pullback_matrix(A: np.ndarray, k: int) -> np.ndarray:
    """k 次形式上的拉回矩阵 M[I, J] = det A[I, J]，作用方式为 行向量 @ M。"""
    A = np.asarray(A, dtype=float)
    if k == 0:
        return np.ones(A.shape[:-2] + (1, 1))
    tuples = np.array(basis_tuples(k)) - 1
    rows = tuples[:, None, :, None]
    cols = tuples[None, :, None, :]
    return np.linalg.det(A[..., rows, cols])


# ==================================================================================================
# 4. 标架
# ==================================================================================================

class Frame:
    """
    六维余标架 e^1..e^6：微分表 de^i、辛形式 ω 和系数环。

    微分表与 ω 总是常系数；系数环只决定一般形式的系数能否求偏导。
    coordinate_labels 把坐标 x^j（j = 1..3）映射到余标架编号，用于 Σ ∂_j c dx^j 项。
    """

    def __init__(
        self,
        name: str,
        differentials: Mapping[int, Form],
        omega: Form,
        ring: Optional[CoefficientRing] = None,
        coordinate_labels: Optional[Mapping[int, int]] = None,
    ):
        self.name = name
        self.ring = ring or ConstantRing()
        self.coordinate_labels = dict(coordinate_labels or {})
        table = {}
        for i in range(1, DIM + 1):
            form = differentials.get(i, Form.zero(2))
            if form.degree != 2 or not form.is_constant:
                raise DegreeError(f"{name}: de^{i} 必须是常系数 2-形式")
            table[i] = form
        if omega.degree != 2 or not omega.is_constant:
            raise DegreeError(f"{name}: ω 必须是常系数 2-形式")
        self.differentials = table
        self.omega = omega

        matrix = np.zeros((DIM, DIM))
        for (p, q), value in omega.items():
            matrix[p - 1, q - 1] = value
            matrix[q - 1, p - 1] = -value
        if abs(np.linalg.det(matrix)) < 1e-12:
            raise DegenerateFormError(f"{name}: ω 退化")
        self._omega_matrix = matrix
        self._poisson = -np.linalg.inv(matrix)
        self._d_cache: Dict[Index, Form] = {}
        self._cache: Dict[tuple, object] = {}
        log.debug(f"Frame: 构造标架 '{name}'（系数环 {self.ring.name}）")

    @property
    def omega_matrix(self) -> np.ndarray:
        """Ω_pq = ω(e_p, e_q)。"""
        return self._omega_matrix.copy()

    @property
    def poisson(self) -> np.ndarray:
        """π = −Ω⁻¹，Λ_ω 的系数。"""
        return self._poisson.copy()

    def cached(self, key: tuple, builder: Callable[[], object]):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def volume_form(self) -> Form:
        return self.cached(("vol",), lambda: wedge(wedge(self.omega, self.omega), self.omega) / 6.0)

    @property
    def volume_coefficient(self) -> float:
        return float(self.volume_form.coefficient(TOP))

    def d_basis(self, index: Index) -> Form:
        """d(e^I)，由微分表按 Leibniz 法则展开并缓存。"""
        if index not in self._d_cache:
            result = Form.zero(len(index) + 1)
            for r, i in enumerate(index):
                left = Form.basis(*index[:r]) if r else Form.scalar(1.0)
                right = Form.basis(*index[r + 1:]) if r + 1 < len(index) else Form.scalar(1.0)
                term = wedge(wedge(left, self.differentials[i]), right)
                result = result + (term if r % 2 == 0 else -term)
            self._d_cache[index] = result
        return self._d_cache[index]

    def structure_constants(self) -> np.ndarray:
        """c[k, i, j]（0 起始），de^k = −Σ_{i<j} c^k_ij e^{ij}，[e_i, e_j] = c^k_ij e_k。"""
        def build():
            c = np.zeros((DIM, DIM, DIM))
            for k, form in self.differentials.items():
                for (i, j), value in form.items():
                    c[k - 1, i - 1, j - 1] = -value
                    c[k - 1, j - 1, i - 1] = value
            return c
        return self.cached(("c",), build).copy()

    def bracket(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.structure_constants(), X, Y)

    def jacobi_residual(self) -> float:
        return max(exterior_d(self.differentials[i], self).norm() for i in range(1, DIM + 1))

    def symplectic_residual(self) -> float:
        return exterior_d(self.omega, self).norm()

    def validate(self, tol: float = 1e-12):
        jacobi = self.jacobi_residual()
        if jacobi > tol:
            raise DegenerateFormError(f"{self.name}: d² ≠ 0（Jacobi 残差 {jacobi:.3e}）")
        closed = self.symplectic_residual()
        if closed > tol:
            raise DegenerateFormError(f"{self.name}: dω ≠ 0（残差 {closed:.3e}）")
        return self

    def with_ring(self, ring: CoefficientRing, coordinate_labels: Optional[Mapping[int, int]] = None) -> "Frame":
        return Frame(self.name, self.differentials, self.omega, ring, coordinate_labels or self.coordinate_labels)

    def __repr__(self):
        return f"Frame({self.name!r})"


# ==================================================================================================
# 5. 微分算子
# ==================================================================================================

def exterior_d(a: Form, frame: Frame) -> Form:
    """d(c e^I) = Σ_j ∂_j c dx^j ∧ e^I + c d(e^I)。"""
    if a.degree >= DIM:
        raise DegreeError("顶次形式没有外微分")
    ring = frame.ring
    coeffs: Dict[Index, Scalar] = {}
    for index, value in a.items():
        for target, coef in frame.d_basis(index).items():
            _accumulate(coeffs, target, coef * value)
        if ring.has_derivatives and np.ndim(value) > 0:
            for j, label in frame.coordinate_labels.items():
                sign, target = _merge((label,), index)
                if sign:
                    _accumulate(coeffs, target, sign * ring.derivative(value, j))
    return Form(a.degree + 1, coeffs)


def lambda_contract(a: Form, frame: Frame) -> Form:
    """Λ_ω a = ½ π^{pq} ι_q ι_p a = Σ_{p<q} π^{pq} ι_q ι_p a。"""
    if a.degree < 2:
        raise DegreeError(f"Λ_ω 需要次数 ≥ 2，得到 {a.degree}")
    pi = frame.poisson
    result = Form.zero(a.degree - 2)
    for p in range(1, DIM + 1):
        inner = None
        for q in range(p + 1, DIM + 1):
            weight = pi[p - 1, q - 1]
            if abs(weight) < 1e-15:
                continue
            if inner is None:
                inner = interior(p, a)
            result = result + weight * interior(q, inner)
    return result


def _validated_gram(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (DIM, DIM):
        raise DegenerateFormError(f"Gram 矩阵形状应为 ({DIM}, {DIM})，得到 {g.shape}")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > 1e-10 * scale:
        raise DegenerateFormError("Gram 矩阵不对称")
    if abs(np.linalg.det(g)) < 1e-14 * scale ** DIM:
        raise DegenerateFormError("Gram 矩阵奇异")
    return g


def form_gram(g: np.ndarray, k: int) -> np.ndarray:
    """Λ^k 上诱导的 Gram 矩阵 ⟨e^I, e^J⟩ = det (g⁻¹)_{IJ}。"""
    return pullback_matrix(np.linalg.inv(_validated_gram(g)), k)


def inner_product(a: Form, b: Form, g: np.ndarray) -> Scalar:
    if a.degree != b.degree:
        raise DegreeError(f"内积要求同次形式：{a.degree} 与 {b.degree}")
    gram = form_gram(g, a.degree)
    value = np.einsum("...i,ij,...j->...", a.to_vector(), gram, b.to_vector())
    return float(value) if np.ndim(value) == 0 else value


def hodge_star(a: Form, g: np.ndarray, frame: Frame) -> Form:
    """α∧*β = ⟨α, β⟩ vol_g，vol_g 与 ω³/3! 同向。"""
    g = _validated_gram(g)
    det = np.linalg.det(g)
    if det <= 0:
        raise DegenerateFormError("Hodge 星需要正定的 Gram 矩阵")
    scale = np.sign(frame.volume_coefficient) * np.sqrt(det)
    paired = np.einsum("...j,ij->...i", a.to_vector(), form_gram(g, a.degree))
    coeffs = {}
    for pos, index in enumerate(basis_tuples(a.degree)):
        value = paired[..., pos] * (scale * complement_sign(index))
        coeffs[complement(index)] = float(value) if np.ndim(value) == 0 else value
    return Form(DIM - a.degree, coeffs)


def codifferential(a: Form, g: np.ndarray, frame: Frame) -> Form:
    """六维中 d† = −*d*。"""
    if a.degree == 0:
        raise DegreeError("0 次形式没有余微分")
    return -hodge_star(exterior_d(hodge_star(a, g, frame), frame), g, frame)


def form_norm(a: Form) -> float:
    return a.norm()


# ==================================================================================================
# 6. 常系数标架上的稠密算子矩阵
# ==================================================================================================

def _stack_images(k: int, image: Callable[[Form], Form], target_degree: int) -> np.ndarray:
    rows = []
    for index in basis_tuples(k):
        result = image(Form.basis(*index))
        if result.degree != target_degree:
            raise DegreeError("算子次数不一致")
        rows.append(result.to_vector())
    return np.array(rows)


def exterior_d_matrix(frame: Frame, k: int) -> np.ndarray:
    """常系数 k 次形式上的 d，作用方式为 行向量 @ D，形状 (C(6,k), C(6,k+1))。"""
    return frame.cached(("d", k), lambda: _stack_images(k, lambda f: exterior_d(f, frame), k + 1))


def lambda_matrix(frame: Frame, k: int) -> np.ndarray:
    return frame.cached(("lambda", k), lambda: _stack_images(k, lambda f: lambda_contract(f, frame), k - 2))


def wedge_matrix(a: Form, k: int) -> np.ndarray:
    """左乘 a∧ 作用在 k 次形式上的矩阵（a 为常系数）。"""
    return _stack_images(k, lambda f: wedge(a, f), a.degree + k)


@lru_cache(maxsize=None)
def wedge_tensor(k: int, l: int) -> np.ndarray:
    """W[I, J, K]：e^I ∧ e^J = Σ_K W[I, J, K] e^K。"""
    if k + l > DIM:
        raise DegreeError(f"楔积次数 {k}+{l} 超过 {DIM}")
    left, right = basis_tuples(k), basis_tuples(l)
    positions = tuple_positions(k + l)
    tensor = np.zeros((len(left), len(right), len(positions)))
    for a, I in enumerate(left):
        for b, J in enumerate(right):
            sign, K = _merge(I, J)
            if sign:
                tensor[a, b, positions[K]] = sign
    return tensor
