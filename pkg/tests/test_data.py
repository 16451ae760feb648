import numpy as np
import pytest

from spikeprune.data import (
    MAGIC,
    BadMagicError,
    NonBinarySpikeError,
    SessionDimensionError,
    SessionFormatError,
    SpikeSession,
    SplitSpec,
    TruncatedSessionError,
    generate_synthetic,
    load_session,
    save_session,
    split_session,
)


def sample_session(T=40, channels=3, seed=0):
    rng = np.random.default_rng(seed)
    return SpikeSession(
        spikes=(rng.random((T, channels)) < 0.4).astype(np.uint8),
        velocity=rng.normal(size=(T, 2)),
        dt_ms=4.0,
        session_id="sample",
    )


class TestFileFormat:
    def test_roundtrip_is_bitwise(self, tmp_path):
        session = sample_session()
        p1 = tmp_path / "a.spk"
        p2 = tmp_path / "b.spk"
        save_session(p1, session)
        loaded = load_session(p1)
        assert np.array_equal(loaded.spikes, session.spikes)
        assert np.array_equal(loaded.velocity, session.velocity)
        assert loaded.dt_ms == session.dt_ms
        assert loaded.session_id == session.session_id
        save_session(p2, loaded)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.spk"
        p.write_bytes(b"NOTASESS" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            load_session(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "t.spk"
        save_session(p, sample_session())
        blob = p.read_bytes()
        p.write_bytes(blob[:-10])
        with pytest.raises(TruncatedSessionError):
            load_session(p)
        p.write_bytes(blob[: len(MAGIC) + 3])
        with pytest.raises(TruncatedSessionError):
            load_session(p)

    def test_non_binary_spike(self, tmp_path):
        p = tmp_path / "nb.spk"
        session = sample_session(T=4, channels=2)
        save_session(p, session)
        blob = bytearray(p.read_bytes())
        # first spike byte sits right after magic + header + id
        off = len(blob) - 4 * 2 - 4 * 2 * 8
        blob[off] = 7
        p.write_bytes(bytes(blob))
        with pytest.raises(NonBinarySpikeError):
            load_session(p)

    def test_dimension_error_is_distinct(self):
        with pytest.raises(SessionDimensionError):
            SpikeSession(spikes=np.zeros((3, 2), dtype=np.uint8),
                         velocity=np.zeros((4, 2)), dt_ms=1.0)
        with pytest.raises(SessionDimensionError):
            SpikeSession(spikes=np.zeros((3, 2), dtype=np.uint8),
                         velocity=np.zeros((3, 3)), dt_ms=1.0)

    def test_error_taxonomy(self):
        for err in (BadMagicError, TruncatedSessionError, NonBinarySpikeError,
                    SessionDimensionError):
            assert issubclass(err, SessionFormatError)

    def test_empty_session_roundtrip(self, tmp_path):
        session = SpikeSession(spikes=np.zeros((0, 5), dtype=np.uint8),
                               velocity=np.zeros((0, 2)), dt_ms=4.0,
                               session_id="empty")
        p = tmp_path / "e.spk"
        save_session(p, session)
        loaded = load_session(p)
        assert loaded.timesteps == 0 and loaded.channels == 5


class TestSplit:
    def test_160_timesteps(self):
        session = sample_session(T=160)
        split = split_session(session)
        assert [s.timesteps for s in split["train"]] == [20, 20, 20, 20]
        assert [s.timesteps for s in split["val"]] == [10, 10, 10, 10]
        assert [s.timesteps for s in split["test"]] == [10, 10, 10, 10]

    def test_degenerate_t4(self):
        session = sample_session(T=4)
        split = split_session(session)
        # sub-sessions of one timestep: floor(0.5)=floor(0.25)=0, all to test
        assert split["train"] == [] and split["val"] == []
        assert [s.timesteps for s in split["test"]] == [1, 1, 1, 1]

    def test_partition_property(self):
        for T in (37, 100, 163):
            session = sample_session(T=T, seed=T)
            split = split_session(session)
            segs = split["train"] + split["val"] + split["test"]
            total = sum(s.timesteps for s in segs)
            assert total == T
            # reassemble in original order and compare content
            rebuilt = np.zeros_like(session.spikes)
            offsets = {}
            for name in ("train", "val", "test"):
                for i, seg in enumerate(split[name]):
                    offsets[(name, i)] = seg
            # order segments by locating them in the session
            pos = 0
            chunks = sorted(segs, key=lambda s: _find_offset(session, s))
            for seg in chunks:
                rebuilt[pos:pos + seg.timesteps] = seg.spikes
                pos += seg.timesteps
            assert np.array_equal(rebuilt, session.spikes)

    def test_too_small(self):
        with pytest.raises(ValueError):
            split_session(sample_session(T=3))

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            SplitSpec(fractions=(0.5, 0.5, 0.5))


def _find_offset(session, seg):
    T, k = session.timesteps, seg.timesteps
    for off in range(T - k + 1):
        if np.array_equal(session.spikes[off:off + k], seg.spikes) and \
                np.array_equal(session.velocity[off:off + k], seg.velocity):
            return off
    raise AssertionError("segment not found in session")


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(seed=5, channels=8, T=300, rate=0.2)
        b = generate_synthetic(seed=5, channels=8, T=300, rate=0.2)
        assert np.array_equal(a.spikes, b.spikes)
        assert np.array_equal(a.velocity, b.velocity)

    def test_rate_within_3_sigma(self):
        rate = 0.2
        s = generate_synthetic(seed=9, channels=50, T=400, rate=rate)
        n = s.spikes.size
        assert n >= 10_000
        sigma = np.sqrt(rate * (1 - rate) / n)
        assert abs(s.spikes.mean() - rate) <= 3 * sigma

    def test_vanishing_rate_gives_zero_labels(self):
        s = generate_synthetic(seed=1, channels=10, T=1000, rate=1e-9)
        assert not s.spikes.any()
        assert not s.velocity.any()

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            generate_synthetic(seed=0, channels=4, T=10, rate=0.0)
        with pytest.raises(ValueError):
            generate_synthetic(seed=0, channels=4, T=10, rate=1.0)

    def test_explicit_mixing(self):
        mix = np.zeros((2, 4))
        mix[0, 0] = 1.0
        mix[1, 3] = -1.0
        s = generate_synthetic(seed=2, channels=4, T=200, rate=0.5, mixing=mix)
        assert s.velocity.shape == (200, 2)
        with pytest.raises(ValueError):
            generate_synthetic(seed=2, channels=4, T=10, rate=0.5,
                               mixing=np.zeros((2, 5)))
