"""Model checkpoints: little-endian binary, magic "CFNR", bit-exact round trip.

Layout: magic, u32 version, u32 header fields (depth, width, core dims,
spectral rank, bias flag, per-band ranks), f64 frequencies, then the raw
parameter arrays in declaration order (core, four x-nets, four y-nets,
spectral net; each net stores weights then biases per layer, Fortran order).
"""

import struct

import numpy as np

from .model import BandModel, N_BANDS
from .siren import SirenMlp

_MAGIC = b"CFNR"
_VERSION = 1


class CheckpointError(ValueError):
    pass


def _write_array(fh, arr):
    fh.write(np.asarray(arr, dtype="<f8").flatten(order="F").tobytes())


def _read_array(buf, offset, shape):
    count = int(np.prod(shape))
    end = offset + 8 * count
    if end > len(buf):
        raise CheckpointError("truncated parameter payload")
    flat = np.frombuffer(buf[offset:end], dtype="<f8")
    return flat.reshape(shape, order="F").copy(), end


def save_model(path, model: BandModel):
    cx, cy, rz = model.core_dims
    nets = model.spatial_x + model.spatial_y + [model.spectral]
    depth = nets[0].depth
    width = nets[0].width
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(
            struct.pack(
                "<6I", depth, width, cx, cy, rz, 1 if nets[0].use_bias else 0
            )
        )
        fh.write(struct.pack(f"<{N_BANDS}I", *model.ranks_x))
        fh.write(struct.pack(f"<{N_BANDS}I", *model.ranks_y))
        fh.write(struct.pack(f"<{N_BANDS}d", *model.omegas))
        fh.write(struct.pack("<d", model.omega_z))
        _write_array(fh, model.core)
        for net in nets:
            for w, b in zip(net.weights, net.biases):
                _write_array(fh, w)
                _write_array(fh, b)


def load_model(path) -> BandModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:4]!r}")
    (version,) = struct.unpack("<I", buf[4:8])
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    depth, width, cx, cy, rz, bias_flag = struct.unpack("<6I", buf[8:32])
    off = 32
    ranks_x = list(struct.unpack(f"<{N_BANDS}I", buf[off : off + 4 * N_BANDS]))
    off += 4 * N_BANDS
    ranks_y = list(struct.unpack(f"<{N_BANDS}I", buf[off : off + 4 * N_BANDS]))
    off += 4 * N_BANDS
    omegas = list(struct.unpack(f"<{N_BANDS}d", buf[off : off + 8 * N_BANDS]))
    off += 8 * N_BANDS
    (omega_z,) = struct.unpack("<d", buf[off : off + 8])
    off += 8

    core, off = _read_array(buf, off, (cx, cy, rz))

    def read_net(out_dim, omega):
        nonlocal off
        sizes = [(width, 1)] + [(width, width)] * (depth - 2) + [(out_dim, width)]
        weights, biases = [], []
        for rows, cols in sizes:
            w, off2 = _read_array(buf, off, (rows, cols))
            b, off3 = _read_array(buf, off2, (rows,))
            weights.append(w)
            biases.append(b)
            off = off3
        return SirenMlp(weights=weights, biases=biases, omega=omega, use_bias=bool(bias_flag))

    spatial_x = [read_net(cx, omegas[s]) for s in range(N_BANDS)]
    spatial_y = [read_net(cy, omegas[s]) for s in range(N_BANDS)]
    spectral = read_net(rz, omega_z)
    if off != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - off} trailing bytes")
    return BandModel(
        core=core,
        spatial_x=spatial_x,
        spatial_y=spatial_y,
        spectral=spectral,
        ranks_x=ranks_x,
        ranks_y=ranks_y,
    )
