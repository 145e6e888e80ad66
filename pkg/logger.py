import json
import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Iterable, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.syntax import Syntax
from rich.table import Table

from config import config

# ==================================================================================================
# 1. 初始化
# ==================================================================================================

log = logging.getLogger("symflow")
console = Console(soft_wrap=True)

# ==================================================================================================
# 2. 集中化配置
# ==================================================================================================

def setup_logging(debug: Optional[bool] = None, log_file: Optional[str] = None):
    """
    根据配置文件设置日志记录器，由命令行入口调用一次。

    Args:
        debug: 命令行的 --debug；为 None 时使用配置中的 debug 标志
        log_file: 覆盖配置中的日志文件路径
    """
    log_config = config.get("logging", {})
    is_debug_mode = config.get("debug", False) if debug is None else debug
    if is_debug_mode:
        log_level_str = "DEBUG"
    else:
        log_level_str = log_config.get("log_level", "INFO").upper()
    log_file_path = log_file or log_config.get("log_file", "logs/symflow.log")

    log.setLevel(getattr(logging, log_level_str, logging.INFO))
    if log.hasHandlers():
        log.handlers.clear()
    log.propagate = False

    console_handler = RichHandler(
        console=console,
        markup=True,
        rich_tracebacks=True,
        show_path=False,
        log_time_format="[%X]",
    )
    console_handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(console_handler)

    try:
        log_dir = os.path.dirname(log_file_path)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(log_file_path, maxBytes=5 * 1024 * 1024, backupCount=5, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("[%(asctime)s] [%(levelname)-8s] %(name)s:%(funcName)s:%(lineno)d - %(message)s")
        )
        log.addHandler(file_handler)
    except Exception as e:
        log.error(f"无法把日志写入文件 {log_file_path}: {e}")

    if config.load_error:
        log.warning(f"Config: {config.load_error}，使用内置默认值")

# ==================================================================================================
# 3. 报告输出
# ==================================================================================================

def log_report(title: str, data: dict):
    """以 JSON 面板打印一份报告"""
    json_str = json.dumps(data, indent=2, ensure_ascii=False, default=str)
    syntax = Syntax(json_str, "json", theme="monokai", line_numbers=False)
    console.print(Panel(syntax, title=f"[bold green]{title}[/bold green]", border_style="green", expand=False))


def print_table(title: str, header: Sequence[str], rows: Iterable[Sequence[str]], styles: Optional[dict] = None):
    """打印一张 rich 表格；styles 把单元格文本映射到样式，例如 {"PASS": "green"}"""
    styles = styles or {}
    table = Table(title=title, title_style="bold yellow")
    for name in header:
        table.add_column(name)
    for row in rows:
        table.add_row(*(f"[{styles[c]}]{c}[/{styles[c]}]" if c in styles else c for c in map(str, row)))
    console.print(table)
