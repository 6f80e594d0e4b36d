"""Shared test configuration.

The numba thread-pool size is fixed before numba is first imported so the
determinism tests can switch between 1, 4, and 8 worker threads even on
machines with fewer cores (the mask can be lowered at runtime but the pool
size cannot grow after initialization).
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "8")
