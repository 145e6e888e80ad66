import os

from packaging.version import Version, parse as parse_version

VERSION_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "VERSION.txt")


def get_current_version() -> Version:
    """读取本地版本文件；缺失时视为 0.0.0"""
    if not os.path.exists(VERSION_FILE):
        return parse_version("0.0.0")
    with open(VERSION_FILE, "r", encoding="utf-8") as f:
        return parse_version(f.read().strip())
