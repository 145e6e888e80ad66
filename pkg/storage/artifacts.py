"""
运行产物：CSV 时间序列、JSON 报告和 manifest。

所有文件都是 UTF-8；浮点数用 17 位有效数字写出，相同配置的两次运行逐字节相同。
"""

import hashlib
import json
import os
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from logger import log
from storage.version import get_current_version

MANIFEST_SUFFIX = ".manifest.json"


def format_float(value: float) -> str:
    return "%.17g" % value


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def _jsonable(value: Any):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def canonical_json(data: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: Dict[str, Any]) -> str:
    """有效运行配置的规范 JSON（键排序、无空白）的 SHA-256"""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    _ensure_parent(path)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")
            count += 1
    log.debug(f"Storage: 写入 {path}（{count} 行）")
    return path


def read_csv(path: str) -> List[Dict[str, float]]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        return [dict(zip(header, map(float, line.strip().split(",")))) for line in f if line.strip()]


def write_json(path: str, data: Dict[str, Any]) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return path


def manifest_for(artifact: str, command: str, config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> dict:
    manifest = {
        "artifact": os.path.basename(artifact),
        "command": command,
        "config": _jsonable(config),
        "config_sha256": config_hash(config),
        "library_version": str(get_current_version()),
    }
    if extra:
        manifest.update(_jsonable(extra))
    return manifest


def write_manifest(
    artifact: str,
    command: str,
    config: Dict[str, Any],
    extra: Optional[Dict[str, Any]] = None,
    timestamp: bool = False,
) -> str:
    """
    为产物写一个同名的 manifest。

    Args:
        artifact: 产物路径，manifest 写到 artifact + ".manifest.json"
        command: 产生该产物的子命令
        config: 有效运行配置（哈希之前会先规范化）
        extra: 附加字段
        timestamp: 是否写入生成时间（写入后同一配置的 manifest 不再逐字节相同）

    Returns:
        manifest 路径
    """
    manifest = manifest_for(artifact, command, config, extra)
    if timestamp:
        manifest["created_at"] = datetime.now(timezone.utc).isoformat()
    path = artifact + MANIFEST_SUFFIX
    write_json(path, manifest)
    log.debug(f"Storage: manifest {path}（配置哈希 {manifest['config_sha256'][:12]}）")
    return path
