"""
左不变标架预设

提供统一的预设注册和查找接口
"""

from .base import AnsatzFamily, FramePreset, PresetRegistry
from .nilmanifold import NilmanifoldPreset
from .solvmanifold import SolvmanifoldPreset
from .torus import TorusPreset

# 注册所有预设
preset_registry = PresetRegistry()

preset_registry.register(TorusPreset())
preset_registry.register(NilmanifoldPreset())
preset_registry.register(SolvmanifoldPreset())

__all__ = ['preset_registry', 'AnsatzFamily', 'FramePreset', 'PresetRegistry']
