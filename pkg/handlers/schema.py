"""
运行配置的模式校验。

每个子命令一个 dataclass；配置来源按优先级叠加：
config/config.json 中的同名节 < 运行配置文件 < 命令行参数。
未知键、类型错误和越界值都抛出 ConfigError（退出码 2）。
"""

import json
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from common.errors import ConfigError
from config import config
from core.flows import INTEGRATORS, FlowSpec, Weight
from semiflat.evolution import SemiflatFlow
from semiflat.hessian import PerturbationMode
from semiflat.verification import PHASES, SemiflatSetup

COMMANDS = ("flow", "symbol", "semiflat", "verify-all")


def _coerce(name: str, annotation, value):
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = next(a for a in args if a is not type(None))
        return _coerce(name, inner, value)
    if origin in (list, List, tuple, Tuple):
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"'{name}' 需要列表，得到 {value!r}")
        item_type = args[0] if args else Any
        return [_coerce(name, item_type, v) for v in value]
    if annotation is Any:
        return value
    if annotation is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(f"'{name}' 需要布尔值，得到 {value!r}")
    if annotation in (int, float):
        if isinstance(value, bool):
            raise ConfigError(f"'{name}' 需要数值，得到 {value!r}")
        try:
            converted = annotation(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"'{name}' 需要 {annotation.__name__}，得到 {value!r}") from e
        if annotation is int and converted != float(value):
            raise ConfigError(f"'{name}' 需要整数，得到 {value!r}")
        return converted
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{name}' 需要字符串，得到 {value!r}")
        return value
    return value


def from_layers(cls, *layers: Optional[Dict[str, Any]]):
    """按顺序叠加多层字典并构造 cls；None 值表示该层未提供。"""
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    merged: Dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        unknown = set(layer) - known
        if unknown:
            raise ConfigError(f"{cls.__name__}: 未知配置项 {sorted(unknown)}，可用 {sorted(known)}")
        merged.update({k: v for k, v in layer.items() if v is not None})
    values = {}
    for f in fields(cls):
        if f.name in merged:
            values[f.name] = _coerce(f.name, hints[f.name], merged[f.name])
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"{cls.__name__}: {e}") from e


# ==================================================================================================
# 各子命令的配置
# ==================================================================================================

@dataclass
class FlowConfig:
    preset: str = "nilmanifold"
    weight: str = "hitchin"
    epsilon: Optional[float] = None
    init: Optional[List[float]] = None
    a0: Optional[float] = None
    b0: Optional[float] = None
    T: float = 10.0
    dt: float = 1e-3
    integrator: str = "rk4"
    record_stride: int = 100
    rtol: float = 1e-9
    atol: float = 1e-12
    log_floor: float = 1e-6
    projection_tol: float = 1e-8

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"未知积分器 '{self.integrator}'，可用 {INTEGRATORS}")
        if self.init is not None and (self.a0 is not None or self.b0 is not None):
            raise ConfigError("--init 与 --a0/--b0 不能同时使用")

    def initial(self, default) -> List[float]:
        """显式 init 优先；否则 a0/b0 覆盖默认参数的前两个分量。"""
        if self.init is not None:
            return list(self.init)
        params = [float(v) for v in default]
        for position, value in enumerate((self.a0, self.b0)):
            if value is not None:
                if position >= len(params):
                    raise ConfigError(f"该预设只有 {len(params)} 个参数")
                params[position] = value
        return params

    def spec(self) -> FlowSpec:
        return FlowSpec(
            weight=self.weight,
            epsilon=self.epsilon,
            integrator=self.integrator,
            dt=self.dt,
            horizon=self.T,
            record_stride=self.record_stride,
            rtol=self.rtol,
            atol=self.atol,
            log_floor=self.log_floor,
            projection_tol=self.projection_tol,
        )


@dataclass
class SymbolConfig:
    weight: str = "hitchin"
    epsilon: Optional[float] = None
    xi: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    preset: Optional[str] = None
    init: Optional[List[float]] = None

    def __post_init__(self):
        if len(self.xi) != 6:
            raise ConfigError(f"ξ 需要 6 个分量，得到 {len(self.xi)}")
        if self.init is not None and self.preset is None:
            raise ConfigError("init 只能与 preset 一起使用")

    def spec(self) -> FlowSpec:
        return FlowSpec(weight=self.weight, epsilon=self.epsilon)


@dataclass
class SemiflatConfig:
    n: int = 32
    A: List[List[float]] = field(default_factory=lambda: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    modes: List[Any] = field(default_factory=list)
    epsilon: Optional[float] = None
    dt: float = 1e-5
    steps: int = 100
    flow: str = "iib"
    phase: str = "standard"
    residual_stride: int = 10
    cfl: float = 0.1
    refinement_sizes: List[int] = field(default_factory=list)
    dump_fields: bool = False

    def __post_init__(self):
        if self.flow not in [f.value for f in SemiflatFlow]:
            raise ConfigError(f"未知的半平坦流 '{self.flow}'")
        if self.phase not in PHASES:
            raise ConfigError(f"phase 必须是 {PHASES} 之一")
        if any(size < 8 for size in self.refinement_sizes):
            raise ConfigError("加密研究的网格尺寸至少为 8")

    def setup(self) -> SemiflatSetup:
        """epsilon 给出时用单模扰动 ε cos(2πx¹) 取代 modes。"""
        if self.epsilon is not None:
            modes = (PerturbationMode(self.epsilon, (1, 0, 0)),)
        else:
            modes = tuple(m if isinstance(m, PerturbationMode) else PerturbationMode.from_dict(m) for m in self.modes)
        return SemiflatSetup(
            n=self.n,
            A=tuple(tuple(float(v) for v in row) for row in self.A),
            modes=modes,
            dt=self.dt,
            steps=self.steps,
            flow=self.flow,
            phase=self.phase,
            residual_stride=self.residual_stride,
            cfl=self.cfl,
        )


@dataclass
class VerifyConfig:
    quick: bool = False
    checks: Optional[List[int]] = None


@dataclass
class RunConfig:
    command: str
    out: str = "out"
    seed: int = 0
    section: Any = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"未知命令 '{self.command}'，可用 {COMMANDS}")

    def effective(self) -> Dict[str, Any]:
        """参与哈希的有效配置；输出目录不影响结果，不计入。"""
        return {"command": self.command, "seed": self.seed, self.command: asdict(self.section) if self.section else {}}


SECTIONS = {"flow": FlowConfig, "symbol": SymbolConfig, "semiflat": SemiflatConfig, "verify-all": VerifyConfig}
DEFAULT_SECTION_KEYS = {"flow": "flow", "symbol": "symbol", "semiflat": "semiflat", "verify-all": "verify"}
FILE_KEYS = {"command", "out", "seed", "flow", "symbol", "semiflat", "verify"}

# config.json 的 flow 节沿用 FlowSpec 的字段名
_FLOW_ALIASES = {"horizon": "T"}


def load_run_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"运行配置文件不存在: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"运行配置文件 {path} 不是合法 JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("运行配置文件的顶层必须是对象")
    unknown = set(data) - FILE_KEYS
    if unknown:
        raise ConfigError(f"运行配置文件含未知键 {sorted(unknown)}")
    return data


def _library_defaults(command: str) -> Dict[str, Any]:
    defaults = config.section(DEFAULT_SECTION_KEYS[command])
    if command == "flow":
        defaults = {_FLOW_ALIASES.get(k, k): v for k, v in defaults.items()}
        projection = config.section("tolerances").get("projection")
        if projection is not None:
            defaults.setdefault("projection_tol", projection)
    known = {f.name for f in fields(SECTIONS[command])}
    # 库默认值里可以有其他子命令才用到的键，这里只取本节认识的
    return {k: v for k, v in defaults.items() if k in known}


def build_run_config(
    command: str,
    cli_values: Optional[Dict[str, Any]] = None,
    config_file: Optional[str] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    file_data = load_run_file(config_file)
    if "command" in file_data and file_data["command"] != command:
        raise ConfigError(f"运行配置文件是为 '{file_data['command']}' 写的，不能用于 '{command}'")
    if command not in SECTIONS:
        raise ConfigError(f"未知命令 '{command}'，可用 {COMMANDS}")
    section_key = DEFAULT_SECTION_KEYS[command]
    section = from_layers(
        SECTIONS[command],
        _library_defaults(command),
        file_data.get(section_key),
        cli_values,
    )
    return RunConfig(
        command=command,
        out=out or file_data.get("out") or config.section("output").get("directory", "out"),
        seed=int(seed if seed is not None else file_data.get("seed", config.get("seed", 0))),
        section=section,
    )
