"""Tensor ingestion and persistence: the CFT1 binary format, PNG images,
even-dimension padding, observation masks, and the order-4 video reshape.

CFT1 layout (little-endian): magic "CFT1", u8 ndim, u32 per-axis sizes,
float64 payload with mode-1 varying fastest. Round trips are bit-exact.
"""

import struct

import numpy as np
from PIL import Image

from .tensor_ops import ShapeError, as_tensor3

_MAGIC = b"CFT1"


class DecodeError(ValueError):
    """Malformed or truncated tensor file."""


def save_tensor(path, t):
    t = np.ascontiguousarray(np.asarray(t, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", t.ndim))
        for d in t.shape:
            fh.write(struct.pack("<I", d))
        fh.write(t.flatten(order="F").tobytes())


def load_tensor(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise DecodeError(f"{path}: bad magic {raw[:4]!r}")
    ndim = raw[4]
    header_end = 5 + 4 * ndim
    if len(raw) < header_end:
        raise DecodeError(f"{path}: truncated header")
    dims = struct.unpack(f"<{ndim}I", raw[5:header_end])
    count = int(np.prod(dims))
    payload = raw[header_end:]
    if len(payload) != 8 * count:
        raise DecodeError(f"{path}: payload holds {len(payload) // 8} values, expected {count}")
    flat = np.frombuffer(payload, dtype="<f8")
    return flat.reshape(dims, order="F").copy()


def load_png(path):
    """Load an 8- or 16-bit grayscale or RGB PNG as an (n1, n2, n3) tensor in [0, 1]."""
    img = Image.open(path)
    if img.mode == "I;16":
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode in ("L", "I"):
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    elif img.mode in ("RGB", "RGBA", "P"):
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    else:
        raise DecodeError(f"{path}: unsupported PNG mode {img.mode}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_png(path, t):
    """Write a [0, 1] tensor with 1 or 3 bands as an 8-bit PNG (clipped)."""
    t = as_tensor3(t)
    if t.shape[2] not in (1, 3):
        raise ShapeError("PNG export needs 1 or 3 bands")
    arr = np.clip(np.round(t * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr[:, :, 0] if t.shape[2] == 1 else arr)
    img.save(path)


def pad_even(t):
    """Reflect-pad odd spatial dims up to even; returns (padded, original_dims)."""
    t = as_tensor3(t)
    n1, n2, n3 = t.shape
    pad1 = n1 % 2
    pad2 = n2 % 2
    if pad1 or pad2:
        t = np.pad(t, ((0, pad1), (0, pad2), (0, 0)), mode="reflect")
    return t, (n1, n2, n3)


def crop(t, original_dims):
    n1, n2, n3 = original_dims
    return np.asarray(t)[:n1, :n2, :n3]


def make_mask(dims, sr=None, mask_path=None, seed=0):
    """Boolean observation mask: random at sampling rate `sr`, or loaded from
    a file (PNG/CFT1, nonzero = observed) and replicated across bands."""
    n1, n2, n3 = dims
    if mask_path is not None:
        if str(mask_path).endswith(".png"):
            m2 = load_png(mask_path)[:, :, 0] > 0
        else:
            loaded = load_tensor(mask_path)
            m2 = (loaded[:, :, 0] if loaded.ndim == 3 else loaded) > 0
        if m2.shape != (n1, n2):
            raise ShapeError(f"mask shape {m2.shape} does not match data {(n1, n2)}")
        mask = np.repeat(m2[:, :, None], n3, axis=2)
    else:
        if not (0 < sr <= 1):
            raise ValueError(f"sampling rate must be in (0, 1], got {sr}")
        rng = np.random.default_rng(seed)
        mask = rng.random(dims) < sr
    if not mask.any():
        raise ValueError("observation mask is empty")
    return mask


def merge_modes34(t4):
    """Losslessly flatten an (n1, n2, n3, n4) video into (n1, n2, n3*n4)."""
    t4 = np.asarray(t4, dtype=np.float64)
    if t4.ndim != 4:
        raise ShapeError(f"expected an order-4 tensor, got ndim={t4.ndim}")
    n1, n2, n3, n4 = t4.shape
    return t4.reshape(n1, n2, n3 * n4, order="F"), (n3, n4)


def split_mode3(t3, tail_dims):
    n3, n4 = tail_dims
    t3 = as_tensor3(t3)
    if t3.shape[2] != n3 * n4:
        raise ShapeError(f"third dim {t3.shape[2]} != {n3}*{n4}")
    return t3.reshape(t3.shape[0], t3.shape[1], n3, n4, order="F")
