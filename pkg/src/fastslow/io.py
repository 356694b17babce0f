"""Artifact serialization: trajectory CSV/binary and hash-stable tables.

CSV files use '.' decimals and 17 significant digits so repeated runs with
the same seed are byte-identical.
"""

import hashlib
import struct

import numpy as np

from .integrate import SeedSpec, Trajectory

_MAGIC = b"FSLOWTRJ"
_BIN_VERSION = 1


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Columns: t, x_1..x_d, y_1..y_m."""
    d = traj.x_path.shape[1]
    m = traj.y_path.shape[1]
    header = (["t"] + [f"x_{i + 1}" for i in range(d)]
              + [f"y_{j + 1}" for j in range(m)])
    rows = ([t] + list(xr) + list(yr)
            for t, xr, yr in zip(traj.times, traj.x_path, traj.y_path))
    write_csv(path, header, rows)


def trajectory_to_binary(traj: Trajectory, path) -> None:
    """Compact form: header {d, m, dt, N_steps, seed}, then x and y blocks."""
    d = traj.x_path.shape[1]
    m = traj.y_path.shape[1]
    n = len(traj)
    header = struct.pack(
        "<8sIIIdQQIxxxx", _MAGIC, _BIN_VERSION, d, m, traj.dt, n,
        traj.seed.master, traj.seed.stream)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<d", float(traj.times[0])))
        fh.write(np.ascontiguousarray(traj.x_path, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(traj.y_path, dtype="<f8").tobytes())


def trajectory_from_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<8sIIIdQQIxxxx"))
        magic, version, d, m, dt, n, master, stream = struct.unpack(
            "<8sIIIdQQIxxxx", head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a trajectory file")
        if version != _BIN_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (t0,) = struct.unpack("<d", fh.read(8))
        x = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        y = np.frombuffer(fh.read(8 * n * m), dtype="<f8").reshape(n, m).copy()
    times = t0 + dt * np.arange(n)
    return Trajectory(times, x, y, SeedSpec(master, stream), dt,
                      {"source": str(path)})
