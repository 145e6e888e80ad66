"""
外积代数用到的多重指标工具。

所有指标都从 1 开始（与 e^1..e^6 的记号一致），k 次形式的稠密向量按照
itertools.combinations(range(1, 7), k) 的顺序排列。
"""

from functools import lru_cache
from itertools import combinations
from typing import Dict, Iterable, Tuple

DIM = 6
TOP = tuple(range(1, DIM + 1))

Index = Tuple[int, ...]


def sort_with_sign(indices: Iterable[int]) -> Tuple[int, Index]:
    """
    将指标序列排序，并返回对应置换的符号。

    :param indices: 任意顺序的指标。
    :return: (符号, 排好序的元组)；若存在重复指标则返回 (0, ())。
    """
    seq = list(indices)
    if len(set(seq)) != len(seq):
        return 0, ()
    sign = 1
    # 插入排序，顺便数逆序对
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(seq)


def is_strictly_increasing(index: Index) -> bool:
    return all(a < b for a, b in zip(index, index[1:]))


@lru_cache(maxsize=None)
def basis_tuples(k: int) -> Tuple[Index, ...]:
    """k 次形式基 e^I 的全部指标，按字典序。"""
    return tuple(combinations(range(1, DIM + 1), k))


@lru_cache(maxsize=None)
def tuple_positions(k: int) -> Dict[Index, int]:
    return {index: pos for pos, index in enumerate(basis_tuples(k))}


def complement(index: Index) -> Index:
    return tuple(i for i in TOP if i not in index)


def complement_sign(index: Index) -> int:
    """e^I ∧ e^{I^c} = sign · e^{123456} 中的 sign。"""
    sign, _ = sort_with_sign(index + complement(index))
    return sign


def format_index(index: Index) -> str:
    if not index:
        return "1"
    return "e^{" + "".join(str(i) for i in index) + "}"


def parse_index(text: str) -> Index:
    """把 JSON 中的键（如 "135"，0 次形式为 ""）解析回指标元组。"""
    return tuple(int(ch) for ch in text)
