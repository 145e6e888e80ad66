"""
命令行入口：

    python main.py flow --preset nilmanifold --weight hitchin --a0 0 --b0 0 --T 10
    python main.py symbol --weight type-iia
    python main.py semiflat --flow kr --epsilon 0.01
    python main.py verify-all
"""

import argparse
import importlib
import sys
from types import ModuleType
from typing import Any, Dict, List, Optional

from common.errors import ConfigError
from handlers.schema import build_run_config
from logger import log, setup_logging


def load_handler(command: str) -> ModuleType:
    """按子命令名（连字符前的部分）动态加载 handlers/<name>_handler.py。"""
    module_path = f"handlers.{command.split('-')[0]}_handler"
    log.debug(f"正在加载处理器: {module_path}")
    return importlib.import_module(module_path)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的数值，得到 '{text}'") from e


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的整数，得到 '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symflow", description="Symplectic geometric flows on 6-manifolds")
    parser.add_argument("--config", dest="config_file", help="运行配置 JSON 文件")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--seed", type=int, help="随机性质检查的种子")
    parser.add_argument("--debug", action="store_true", default=None, help="强制 DEBUG 日志级别")
    sub = parser.add_subparsers(dest="command", required=True)

    flow = sub.add_parser("flow", help="在左不变预设上积分流")
    flow.add_argument("--preset")
    flow.add_argument("--weight")
    flow.add_argument("--epsilon", type=float)
    flow.add_argument("--a0", type=float)
    flow.add_argument("--b0", type=float)
    flow.add_argument("--init", type=_floats, help="逗号分隔的 ansatz 参数")
    flow.add_argument("--T", type=float)
    flow.add_argument("--dt", type=float)
    flow.add_argument("--integrator", choices=("rk4", "rk45"))
    flow.add_argument("--record-stride", dest="record_stride", type=int)

    symbol = sub.add_parser("symbol", help="主符号的谱")
    symbol.add_argument("--weight")
    symbol.add_argument("--epsilon", type=float)
    symbol.add_argument("--xi", type=_floats, help="逗号分隔的 6 个分量")
    symbol.add_argument("--preset")
    symbol.add_argument("--init", type=_floats)

    semiflat = sub.add_parser("semiflat", help="半平坦 T-对偶验证")
    semiflat.add_argument("--n", type=int)
    semiflat.add_argument("--epsilon", type=float, help="单模扰动 ε cos(2πx¹) 的幅度")
    semiflat.add_argument("--dt", type=float)
    semiflat.add_argument("--steps", type=int)
    semiflat.add_argument("--flow", choices=("iib", "kr"))
    semiflat.add_argument("--phase", choices=("standard", "rotated"))
    semiflat.add_argument("--residual-stride", dest="residual_stride", type=int)
    semiflat.add_argument("--refine", dest="refinement_sizes", type=_ints, help="逗号分隔的网格尺寸")
    semiflat.add_argument("--dump-fields", dest="dump_fields", action="store_true", default=None)

    verify = sub.add_parser("verify-all", help="运行验收检查 1–10")
    verify.add_argument("--quick", action="store_true", default=None)
    verify.add_argument("--checks", type=_ints, help="只运行这些编号")
    return parser


GLOBAL_KEYS = ("command", "config_file", "out", "seed", "debug")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(debug=args.debug)
    cli_values: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS and v is not None}
    try:
        run = build_run_config(args.command, cli_values, args.config_file, args.out, args.seed)
    except ConfigError as e:
        log.error(f"配置错误: {e}")
        return e.exit_code
    log.info(f"运行 {args.command}，输出目录 {run.out}")
    return load_handler(args.command).handle(run)


if __name__ == "__main__":
    sys.exit(main())
