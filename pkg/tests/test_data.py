import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclif.data import (CorruptionError, EventStream, FormatError,
                        PermutationSpec, SpikeDataset, bin_events, dechunk,
                        images_to_sequences, load_mnist_idx,
                        load_spike_events, permute, sequentialize,
                        spikes_to_sequences, write_mnist_idx,
                        write_spike_events)


def test_idx_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(7, 28, 28)).astype(np.uint8)
    labels = rng.integers(0, 10, size=7).astype(np.uint8)
    ip, lp = str(tmp_path / "imgs"), str(tmp_path / "labs")
    write_mnist_idx(ip, lp, images, labels)
    got_i, got_l = load_mnist_idx(ip, lp)
    np.testing.assert_array_equal(got_i, images)
    np.testing.assert_array_equal(got_l, labels)


def test_idx_rejects_bad_magic_and_truncation(tmp_path):
    ip, lp = str(tmp_path / "imgs"), str(tmp_path / "labs")
    write_mnist_idx(ip, lp, np.zeros((2, 28, 28), np.uint8),
                    np.zeros(2, np.uint8))
    raw = bytearray(open(ip, "rb").read())
    raw[3] = 0x99
    bad = str(tmp_path / "bad")
    open(bad, "wb").write(bytes(raw))
    with pytest.raises(FormatError):
        load_mnist_idx(bad, lp)
    open(bad, "wb").write(open(ip, "rb").read()[:-10])
    with pytest.raises(FormatError):
        load_mnist_idx(bad, lp)
    # image/label count mismatch
    write_mnist_idx(bad, str(tmp_path / "l3"),
                    np.zeros((3, 28, 28), np.uint8), np.zeros(3, np.uint8))
    with pytest.raises(FormatError):
        load_mnist_idx(bad, lp)


@given(k=st.integers(1, 784))
@settings(max_examples=40, deadline=None)
def test_sequentialize_round_trip(k):
    rng = np.random.default_rng(k)
    image = rng.random((28, 28))
    frames = sequentialize(image, k)
    assert frames.shape == (-(-784 // k), k)
    np.testing.assert_array_equal(dechunk(frames), image.reshape(-1))
    # the pad is zero
    assert np.all(frames.reshape(-1)[784:] == 0.0)


def test_sequentialize_known_shapes():
    image = np.arange(784).reshape(28, 28)
    assert sequentialize(image, 28).shape == (28, 28)
    assert sequentialize(image, 1).shape == (784, 1)
    assert sequentialize(image, 64).shape == (13, 64)
    np.testing.assert_array_equal(sequentialize(image, 28)[0],
                                  np.arange(28))
    with pytest.raises(ValueError):
        sequentialize(image, 0)


def test_permutation_fixed_and_applied_per_sample():
    spec = PermutationSpec(seed=42)
    p1, p2 = spec.perm, spec.perm
    np.testing.assert_array_equal(p1, p2)
    flat = np.arange(784, dtype=float)
    out = permute(flat, spec)
    np.testing.assert_array_equal(out, flat[p1])
    batch = np.stack([flat, flat + 1.0])
    out2 = permute(batch, spec)
    np.testing.assert_array_equal(out2[1], batch[1][p1])
    with pytest.raises(ValueError):
        permute(np.zeros(100), spec)


def test_images_to_sequences_scaling_and_shape():
    images = np.full((3, 28, 28), 255, dtype=np.uint8)
    x = images_to_sequences(images, 28)
    assert x.shape == (28, 3, 28)
    np.testing.assert_allclose(x, 1.0)
    xp = images_to_sequences(images, 64)
    assert xp.shape == (13, 3, 64)
    assert np.all(xp[-1, :, 16:] == 0.0)   # 13*64 - 784 = 48 pad zeros


def _dataset(rng, n_samples=5, num_channels=30, duration=1_000_000):
    samples = []
    for _ in range(n_samples):
        n = int(rng.integers(0, 40))
        t = np.sort(rng.integers(0, duration, size=n)).astype(np.uint64)
        c = rng.integers(0, num_channels, size=n).astype(np.uint16)
        samples.append(EventStream(times_us=t, channels=c,
                                   label=int(rng.integers(0, 20))))
    return SpikeDataset(samples=samples, num_channels=num_channels,
                        sample_duration_us=duration)


def test_spkev_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ds = _dataset(rng)
    path = str(tmp_path / "x.spkev")
    write_spike_events(path, ds)
    got = load_spike_events(path)
    assert got.num_channels == ds.num_channels
    assert got.sample_duration_us == ds.sample_duration_us
    assert len(got.samples) == len(ds.samples)
    for a, b in zip(got.samples, ds.samples):
        assert a.label == b.label
        np.testing.assert_array_equal(a.times_us, b.times_us)
        np.testing.assert_array_equal(a.channels, b.channels)


def test_spkev_empty_dataset(tmp_path):
    path = str(tmp_path / "empty.spkev")
    write_spike_events(path, SpikeDataset(samples=[], num_channels=700,
                                          sample_duration_us=1_000_000))
    got = load_spike_events(path)
    assert got.samples == [] and got.num_channels == 700


def test_spkev_crc_corruption_detected(tmp_path):
    rng = np.random.default_rng(2)
    path = str(tmp_path / "x.spkev")
    write_spike_events(path, _dataset(rng))
    raw = bytearray(open(path, "rb").read())
    raw[30] ^= 0xFF
    open(path, "wb").write(bytes(raw))
    with pytest.raises(CorruptionError):
        load_spike_events(path)


def test_spkev_structural_validation(tmp_path):
    path = str(tmp_path / "x.spkev")
    open(path, "wb").write(b"NOTSPKEV" + b"\x00" * 20)
    with pytest.raises(FormatError):
        load_spike_events(path)

    # channel out of range, with a valid CRC
    body = (b"SPKEV1\x00\x00" + struct.pack("<III", 1, 1, 4)
            + struct.pack("<Q", 1000) + struct.pack("<II", 0, 1)
            + struct.pack("<QH", 5, 4))
    open(path, "wb").write(body + struct.pack("<I", zlib.crc32(body)))
    with pytest.raises(FormatError):
        load_spike_events(path)

    # trailing garbage inside the checksummed region
    body2 = (b"SPKEV1\x00\x00" + struct.pack("<III", 1, 0, 4)
             + struct.pack("<Q", 1000) + b"junk")
    open(path, "wb").write(body2 + struct.pack("<I", zlib.crc32(body2)))
    with pytest.raises(FormatError):
        load_spike_events(path)


def test_bin_events_conserves_counts_and_clips_boundary():
    ev = EventStream(
        times_us=np.array([0, 400_000, 999_999, 1_000_000], dtype=np.uint64),
        channels=np.array([0, 1, 2, 2], dtype=np.uint16), label=3)
    out = bin_events(ev, num_bins=10, num_channels=3,
                     sample_duration_us=1_000_000)
    assert out.shape == (10, 3)
    assert out.sum() == 4
    assert out[0, 0] == 1
    assert out[4, 1] == 1
    assert out[9, 2] == 2      # last-bin clip catches t == duration
    clamped = bin_events(ev, 1, 3, 1_000_000, binary=True)
    assert clamped.max() == 1.0
    with pytest.raises(ValueError):
        bin_events(ev, 0, 3, 1_000_000)


def test_spikes_to_sequences_shapes_and_labels():
    rng = np.random.default_rng(3)
    ds = _dataset(rng, n_samples=4, num_channels=12)
    x, labels = spikes_to_sequences(ds, num_bins=25)
    assert x.shape == (25, 4, 12)
    assert labels.shape == (4,)
    assert x.sum() == sum(s.times_us.size for s in ds.samples)
