from __future__ import annotations

import os as _os
import sys as _sys


def main() -> int:
    # Ensure `import volterra_lab` works when run as a script.
    root = _os.path.abspath(_os.path.dirname(__file__))
    if root not in _sys.path:
        _sys.path.insert(0, root)

    from volterra_lab.cli import main as _inner_main

    return int(_inner_main(_sys.argv[1:]) or 0)


if __name__ == "__main__":
    raise SystemExit(main())
