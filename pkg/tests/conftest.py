from __future__ import annotations

import os
import sys

import pytest

# Ensure `import volterra_lab` works without installing the package.
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: long-horizon acceptance runs (deselect with -m 'not slow')")


@pytest.fixture
def config_file(tmp_path):
    """Write config text to tmp_path/<name> and return the path as a string."""

    def write(text: str, name: str = "run.cfg") -> str:
        path = tmp_path / name
        path.write_text(text.strip() + "\n", encoding="utf-8")
        return str(path)

    return write
