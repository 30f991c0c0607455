#!/usr/bin/env python3
"""Convert a Spiking Heidelberg Digits HDF5 file to the SPKEV1 binary format.

Usage: shd_convert.py IN.h5 OUT.spkev [--duration fixed1s|max]

Input layout (the public SHD distribution): variable-length datasets
``spikes/times`` (seconds, float) and ``spikes/units`` (channel ids 0..699),
plus ``labels`` (0..19).

Output layout (SPKEV1, little-endian): magic "SPKEV1\\0\\0", u32 version=1,
u32 num_samples, u32 num_channels, u64 sample_duration_us, then per sample
(u32 label, u32 num_events, num_events x (u64 time_us, u16 channel)), and a
trailing u32 CRC32 over all preceding bytes. Event times are rounded to the
nearest microsecond. ``--duration fixed1s`` writes a 1-second header duration;
``--duration max`` writes the latest event time in the file.

Exits 0 on success, 1 on any error.
"""

import argparse
import struct
import sys
import zlib

import h5py
import numpy as np

NUM_CHANNELS = 700
NUM_CLASSES = 20
MAGIC = b"SPKEV1\x00\x00"
VERSION = 1


class ConversionError(Exception):
    pass


def read_shd(path):
    """Yield (times_us, units, label) per sample after validation."""
    with h5py.File(path, "r") as f:
        if "spikes" not in f or "labels" not in f:
            raise ConversionError(f"{path}: missing spikes/ or labels")
        spikes = f["spikes"]
        if "times" not in spikes or "units" not in spikes:
            raise ConversionError(f"{path}: missing spikes/times or "
                                  f"spikes/units")
        times = spikes["times"]
        units = spikes["units"]
        labels = f["labels"]
        if not len(times) == len(units) == len(labels):
            raise ConversionError(f"{path}: times/units/labels lengths differ")
        samples = []
        for i in range(len(labels)):
            t = np.asarray(times[i], dtype=np.float64)
            u = np.asarray(units[i], dtype=np.int64)
            if t.shape != u.shape:
                raise ConversionError(
                    f"{path}: sample {i}: times/units lengths differ")
            if t.size and (u.min() < 0 or u.max() >= NUM_CHANNELS):
                raise ConversionError(
                    f"{path}: sample {i}: unit id outside 0..{NUM_CHANNELS - 1}")
            label = int(labels[i])
            if not 0 <= label < NUM_CLASSES:
                raise ConversionError(
                    f"{path}: sample {i}: label {label} outside "
                    f"0..{NUM_CLASSES - 1}")
            t_us = np.rint(t * 1e6).astype(np.uint64)
            samples.append((t_us, u.astype(np.uint16), label))
    return samples


def write_spkev(path, samples, duration_us):
    parts = [MAGIC,
             struct.pack("<III", VERSION, len(samples), NUM_CHANNELS),
             struct.pack("<Q", duration_us)]
    for t_us, units, label in samples:
        order = np.argsort(t_us, kind="stable")
        ev = np.zeros(t_us.shape[0], dtype=[("t", "<u8"), ("c", "<u2")])
        ev["t"] = t_us[order]
        ev["c"] = units[order]
        parts.append(struct.pack("<II", label, t_us.shape[0]))
        parts.append(ev.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def convert(in_path, out_path, duration_policy="fixed1s"):
    """Returns (num_samples, num_events, duration_us)."""
    samples = read_shd(in_path)
    if duration_policy == "fixed1s":
        duration_us = 1_000_000
    elif duration_policy == "max":
        duration_us = max((int(t.max()) for t, _, _ in samples if t.size),
                          default=0)
    else:
        raise ConversionError(f"unknown duration policy {duration_policy!r}")
    write_spkev(out_path, samples, duration_us)
    n_events = sum(t.size for t, _, _ in samples)
    return len(samples), n_events, duration_us


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Convert SHD HDF5 spike data to SPKEV1")
    parser.add_argument("input", metavar="IN.h5")
    parser.add_argument("output", metavar="OUT.spkev")
    parser.add_argument("--duration", choices=("fixed1s", "max"),
                        default="fixed1s",
                        help="header sample duration: fixed 1 s or the "
                             "latest event time in the file")
    args = parser.parse_args(argv)
    try:
        n_samples, n_events, duration_us = convert(
            args.input, args.output, args.duration)
    except (ConversionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output}: {n_samples} samples, {n_events} events, "
          f"duration {duration_us} us")
    return 0


if __name__ == "__main__":
    sys.exit(main())
