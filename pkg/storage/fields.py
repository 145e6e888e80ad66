"""
网格场原始数据：小端 float64、C 顺序（字段, x¹, x², x³），附同名 .json 说明文件。
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from logger import log

DTYPE = "<f8"


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(str(path) + ".json")


def write_field_dump(
    path: Union[str, Path],
    fields: np.ndarray,
    names: Sequence[str],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    fields = np.ascontiguousarray(fields, dtype=DTYPE)
    if fields.shape[0] != len(names):
        raise ValueError(f"字段数 {fields.shape[0]} 与名称数 {len(names)} 不一致")
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    path.write_bytes(fields.tobytes(order="C"))
    sidecar = {
        "fields": list(names),
        "shape": list(fields.shape),
        "dtype": "float64",
        "byte_order": "little",
        "order": "C",
        **(extra or {}),
    }
    sidecar_path(path).write_text(json.dumps(sidecar, ensure_ascii=False, indent=2), encoding="utf-8")
    log.debug(f"Storage: 网格场写入 {path}，形状 {fields.shape}")
    return path


def read_field_dump(path: Union[str, Path]) -> Tuple[np.ndarray, Dict[str, Any]]:
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    data = np.frombuffer(Path(path).read_bytes(), dtype=DTYPE).reshape(meta["shape"])
    return data, meta
