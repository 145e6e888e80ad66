"""
子命令处理器的公共部分：把库异常翻译成退出码，管理输出目录。
"""

import os
from typing import Callable

from common.errors import SymflowError
from handlers.schema import RunConfig
from logger import log

EXIT_OK = 0


def output_path(run: RunConfig, filename: str) -> str:
    os.makedirs(run.out, exist_ok=True)
    return os.path.join(run.out, filename)


def execute(name: str, body: Callable[[RunConfig], int], run: RunConfig) -> int:
    """
    执行处理器主体并返回退出码。

    SymflowError 按其 exit_code 返回（配置 2，几何失败 3，容差失败 4）；
    其余异常记为 1。
    """
    try:
        code = body(run)
        log.info(f"[{name}] 完成，退出码 {code}")
        return code
    except SymflowError as e:
        log.error(f"[{name}] {type(e).__name__}: {e}", exc_info=True)
        return e.exit_code
    except Exception as e:
        log.error(f"[{name}] 未预期的错误: {e}", exc_info=True)
        return 1
