"""Backdoor poisoning and detection laboratory.

Thin wrapper around the compiled extension; everything public lives there.
"""

try:
    from ._csolab import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:
    from _csolab import *  # noqa: F401,F403  (build-tree layout)
