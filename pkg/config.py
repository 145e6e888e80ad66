import copy
import json
import os
from threading import Lock
from typing import Any, Dict, Optional

DEFAULT_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config", "config.json")


class Config:
    """
    库默认值（积分器、步长、容差、网格设置等）的单例容器。

    这里不能使用 logger（logger 自己依赖 config），加载失败的原因记录在
    load_error 中，由 setup_logging 在日志就绪后报告。
    """
    _instance = None
    _lock = Lock()

    def __new__(cls, *args, **kwargs):
        if not cls._instance:
            with cls._lock:
                if not cls._instance:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self, path: str = DEFAULT_PATH):
        if getattr(self, "_initialized", False):
            return
        self.path = path
        self._config_data: Dict[str, Any] = {}
        self._lock = Lock()
        self.load_error: Optional[str] = None
        self.load()
        self._initialized = True

    def load(self, path: Optional[str] = None):
        """从 JSON 文件加载配置；失败时保持空配置，所有 get 都回落到调用方的默认值。"""
        with self._lock:
            if path is not None:
                self.path = path
            self.load_error = None
            try:
                with open(self.path, "r", encoding="utf-8") as f:
                    self._config_data = json.load(f)
            except FileNotFoundError:
                self.load_error = f"配置文件未找到于 {self.path}"
                self._config_data = {}
            except json.JSONDecodeError as e:
                self.load_error = f"配置文件 {self.path} 格式不正确: {e}"
                self._config_data = {}

    def get(self, key: str, default=None):
        return self._config_data.get(key, default)

    def section(self, key: str) -> Dict[str, Any]:
        """返回某一节的副本，调用方可以随意修改。"""
        return copy.deepcopy(self._config_data.get(key, {}))


config = Config()
