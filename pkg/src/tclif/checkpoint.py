"""Single-file binary checkpoints: magic "TCLF", u32 version, JSON-encoded
config (length-prefixed), little-endian f64 parameter blocks in declaration
order, trailing CRC32 over all preceding bytes."""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .config import TrainConfig, build_network, config_from_dict
from .data import CorruptionError, FormatError
from .network import Network

MAGIC = b"TCLF"
VERSION = 1


def _blocks(net: Network) -> list[np.ndarray]:
    """Every parameter array, learnable or fixed, in declaration order."""
    out = []
    for p in net.layers:
        out.append(p.w_in)
        out.append(p.bias)
        if p.w_rec is not None:
            out.append(p.w_rec)
        out.extend([p.c1, p.c2, p.alpha1, p.alpha2, p.a_d, p.a_s])
    out.append(net.w_out)
    return out


def save_checkpoint(path: str, net: Network, cfg: TrainConfig) -> None:
    cfg_bytes = cfg.to_json().encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(cfg_bytes)), cfg_bytes]
    for block in _blocks(net):
        parts.append(np.ascontiguousarray(block, dtype="<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_checkpoint(path: str) -> tuple[Network, TrainConfig]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a TCLF checkpoint")
    body = raw[:-4]
    if struct.unpack("<I", raw[-4:])[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise CorruptionError(f"{path}: CRC32 mismatch")
    version, cfg_len = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    cfg = config_from_dict(json.loads(body[off:off + cfg_len]))
    off += cfg_len
    net = build_network(cfg, np.random.default_rng(cfg.seed))
    for block in _blocks(net):
        n = block.size
        vals = np.frombuffer(body, dtype="<f8", count=n, offset=off)
        off += n * 8
        block[...] = vals.reshape(block.shape)
    if off != len(body):
        raise FormatError(f"{path}: {len(body) - off} trailing bytes")
    return net, cfg
