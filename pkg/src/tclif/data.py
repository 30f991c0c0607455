"""Dataset ingestion and sequentialization.

Three on-disk formats:
  * MNIST IDX (big-endian, magic byte 3 = dtype 0x08 unsigned byte, byte 4 =
    ndim, then ndim u32 dims, then raw bytes).
  * SPKEV1, a little-endian binned-spike-event container produced by the SHD
    converter: magic "SPKEV1\\0\\0", u32 version=1, u32 num_samples,
    u32 num_channels, u64 sample_duration_us, then per sample
    (u32 label, u32 num_events, num_events x (u64 time_us, u16 channel)),
    and a trailing u32 CRC32 over all preceding bytes.
  * In-memory dense sequences (T, batch, input_dim) in [0, 1].
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801
SPKEV_MAGIC = b"SPKEV1\x00\x00"


class FormatError(ValueError):
    """Bad magic, version, or structural layout."""


class CorruptionError(ValueError):
    """Checksum mismatch."""


# ---------------------------------------------------------------------------
# MNIST IDX


def _read_idx(path: str, expect_magic: int) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expect_magic:
        raise FormatError(f"{path}: IDX magic {magic:#010x}, "
                          f"expected {expect_magic:#010x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX dimension list")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise FormatError(f"{path}: expected {count} data bytes, "
                          f"found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist_idx(images_path: str,
                   labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse an IDX image/label file pair. Pixels stay uint8 (0-255); the
    rescale to [0, 1] happens lazily at batch assembly."""
    images = _read_idx(images_path, IDX_MAGIC_IMAGES)
    labels = _read_idx(labels_path, IDX_MAGIC_LABELS)
    if images.shape[0] != labels.shape[0]:
        raise FormatError("image/label counts differ")
    return images, labels


def write_mnist_idx(images_path: str, labels_path: str,
                    images: np.ndarray, labels: np.ndarray) -> None:
    """Write an IDX pair (used by tests and the synthetic fallback sets)."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">I", IDX_MAGIC_IMAGES))
        fh.write(struct.pack(">3I", *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">I", IDX_MAGIC_LABELS))
        fh.write(struct.pack(">I", labels.shape[0]))
        fh.write(labels.tobytes())


# ---------------------------------------------------------------------------
# sequentialization


def sequentialize(image: np.ndarray, frame_size: int) -> np.ndarray:
    """Flatten row-major and chunk into frames of ``frame_size`` values,
    zero-padding the tail. k=28 is row-by-row, k=1 the 784-step pixel stream,
    k=64 the 13-frame layout with 48 zeros of padding."""
    flat = np.asarray(image).reshape(-1)
    total = flat.shape[0]
    if not 1 <= frame_size <= total:
        raise ValueError(f"frame_size must lie in [1, {total}]")
    t_len = -(-total // frame_size)
    padded = np.zeros(t_len * frame_size, dtype=np.float64)
    padded[:total] = flat
    return padded.reshape(t_len, frame_size)


def dechunk(frames: np.ndarray, total: int = 784) -> np.ndarray:
    """Inverse of ``sequentialize``: concatenate frames and drop the pad."""
    return np.asarray(frames).reshape(-1)[:total]


@dataclass(frozen=True)
class PermutationSpec:
    """Fixed pixel permutation for PS-MNIST, regenerated from its seed."""

    seed: int
    size: int = 784

    @property
    def perm(self) -> np.ndarray:
        return np.random.default_rng(self.seed).permutation(self.size)


def permute(flat: np.ndarray, spec: PermutationSpec) -> np.ndarray:
    """out[i] = in[perm[i]]; the same permutation for every sample."""
    flat = np.asarray(flat)
    if flat.shape[-1] != spec.size:
        raise ValueError("stream length does not match permutation size")
    return flat[..., spec.perm]


def images_to_sequences(images: np.ndarray, frame_size: int,
                        permutation: PermutationSpec | None = None
                        ) -> np.ndarray:
    """uint8 images (N, 28, 28) -> dense float sequences (T, N, frame_size)
    scaled to [0, 1]."""
    n = images.shape[0]
    flat = images.reshape(n, -1).astype(np.float64) / 255.0
    if permutation is not None:
        flat = permute(flat, permutation)
    total = flat.shape[1]
    t_len = -(-total // frame_size)
    padded = np.zeros((n, t_len * frame_size))
    padded[:, :total] = flat
    return padded.reshape(n, t_len, frame_size).transpose(1, 0, 2)


# ---------------------------------------------------------------------------
# SPKEV1 spike events


@dataclass
class EventStream:
    """One sample: event times (microseconds, nondecreasing) and channels."""

    times_us: np.ndarray     # u64
    channels: np.ndarray     # u16, < num_channels
    label: int


@dataclass
class SpikeDataset:
    samples: list[EventStream]
    num_channels: int
    sample_duration_us: int


def write_spike_events(path: str, ds: SpikeDataset) -> None:
    parts = [SPKEV_MAGIC,
             struct.pack("<III", 1, len(ds.samples), ds.num_channels),
             struct.pack("<Q", ds.sample_duration_us)]
    for s in ds.samples:
        order = np.argsort(s.times_us, kind="stable")
        times = np.asarray(s.times_us, dtype="<u8")[order]
        chans = np.asarray(s.channels, dtype="<u2")[order]
        parts.append(struct.pack("<II", s.label, times.shape[0]))
        ev = np.zeros(times.shape[0], dtype=[("t", "<u8"), ("c", "<u2")])
        ev["t"] = times
        ev["c"] = chans
        parts.append(ev.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_spike_events(path: str) -> SpikeDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(SPKEV_MAGIC) + 4 or raw[:8] != SPKEV_MAGIC:
        raise FormatError(f"{path}: not an SPKEV1 file")
    body, crc_bytes = raw[:-4], raw[-4:]
    if struct.unpack("<I", crc_bytes)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise CorruptionError(f"{path}: CRC32 mismatch")
    off = 8
    version, num_samples, num_channels = struct.unpack_from("<III", body, off)
    off += 12
    if version != 1:
        raise FormatError(f"{path}: unsupported SPKEV version {version}")
    (duration_us,) = struct.unpack_from("<Q", body, off)
    off += 8
    samples = []
    ev_dtype = np.dtype([("t", "<u8"), ("c", "<u2")])
    for _ in range(num_samples):
        if off + 8 > len(body):
            raise FormatError(f"{path}: truncated sample header")
        label, n_ev = struct.unpack_from("<II", body, off)
        off += 8
        nbytes = n_ev * ev_dtype.itemsize
        if off + nbytes > len(body):
            raise FormatError(f"{path}: truncated event list")
        ev = np.frombuffer(body, dtype=ev_dtype, count=n_ev, offset=off)
        off += nbytes
        order = np.argsort(ev["t"], kind="stable")
        times = ev["t"][order].astype(np.uint64)
        chans = ev["c"][order].astype(np.uint16)
        if n_ev and chans.max() >= num_channels:
            raise FormatError(f"{path}: channel id out of range")
        samples.append(EventStream(times_us=times, channels=chans,
                                   label=int(label)))
    if off != len(body):
        raise FormatError(f"{path}: {len(body) - off} trailing bytes")
    return SpikeDataset(samples=samples, num_channels=num_channels,
                        sample_duration_us=int(duration_us))


def bin_events(stream: EventStream, num_bins: int, num_channels: int,
               sample_duration_us: int, binary: bool = False) -> np.ndarray:
    """Histogram events onto a (num_bins, num_channels) grid. Bin index is
    floor(time / duration * num_bins), clipped into the last bin; counts are
    optionally clamped to {0, 1}."""
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    out = np.zeros((num_bins, num_channels))
    if stream.times_us.shape[0] == 0:
        return out
    duration = max(int(sample_duration_us), 1)
    idx = (stream.times_us.astype(np.float64) / duration * num_bins)
    idx = np.minimum(idx.astype(np.int64), num_bins - 1)
    np.add.at(out, (idx, stream.channels.astype(np.int64)), 1.0)
    if binary:
        out = np.minimum(out, 1.0)
    return out


def spikes_to_sequences(ds: SpikeDataset, num_bins: int,
                        binary: bool = False
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Bin every sample: returns (num_bins, N, num_channels) plus labels."""
    x = np.stack([bin_events(s, num_bins, ds.num_channels,
                             ds.sample_duration_us, binary)
                  for s in ds.samples], axis=1)
    labels = np.array([s.label for s in ds.samples], dtype=np.int64)
    return x, labels
