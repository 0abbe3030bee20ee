"""Task-oriented dialogue corpora, session runtime and metrics (C++ core)."""

try:
    from ._todforge import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:  # pragma: no cover - CMake build tree on PYTHONPATH
    from _todforge import *  # noqa: F401,F403
