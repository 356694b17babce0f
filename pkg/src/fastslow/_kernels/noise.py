"""Counter-based Gaussian increment streams.

Every Brownian increment consumed by the integrators is a pure function of
``(master seed, stream index, step index)``.  Steps are grouped into fixed
chunks of :data:`CHUNK` steps; chunk ``c`` of stream ``s`` is produced by a
Philox generator keyed with ``(master, s * 2**32 + c)``.  Philox output is
prefix-stable: drawing fewer rows from a chunk yields the same leading values,
so partial chunks, replays, and parallel scheduling all see identical noise.
"""

import numpy as np

# Steps per chunk. Changing this constant changes every generated path.
CHUNK = 1 << 16

_MAX_STREAM = 1 << 32


def philox_key(master: int, stream: int, chunk: int) -> np.ndarray:
    if not 0 <= master < (1 << 64):
        raise ValueError("master seed must fit in 64 bits")
    if not 0 <= stream < _MAX_STREAM:
        raise ValueError("stream index must fit in 32 bits")
    if not 0 <= chunk < _MAX_STREAM:
        raise ValueError("chunk index must fit in 32 bits")
    return np.array([master, (stream << 32) + chunk], dtype=np.uint64)


def normals_chunk(master: int, stream: int, chunk: int, n: int, m: int) -> np.ndarray:
    """Standard normals for the first ``n`` steps of one chunk, shape (n, m)."""
    if n > CHUNK:
        raise ValueError(f"chunk holds at most {CHUNK} steps")
    gen = np.random.Generator(np.random.Philox(key=philox_key(master, stream, chunk)))
    return gen.standard_normal((n, m))


def normals(master: int, stream: int, step0: int, n_steps: int, m: int) -> np.ndarray:
    """Standard normals for steps [step0, step0 + n_steps), shape (n_steps, m)."""
    out = np.empty((n_steps, m))
    filled = 0
    step = step0
    while filled < n_steps:
        chunk, offset = divmod(step, CHUNK)
        take = min(CHUNK - offset, n_steps - filled)
        block = normals_chunk(master, stream, chunk, offset + take, m)
        out[filled:filled + take] = block[offset:]
        filled += take
        step += take
    return out
