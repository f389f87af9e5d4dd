import numpy as np
import pytest

from tftex import (
    BlockSize,
    Dictionary,
    FormatError,
    StftConfig,
    ValidationError,
    default_sizes,
    load_dictionary,
    sample_blocks,
    save_dictionary,
)

from conftest import random_spectrogram


def make_training(rng, count=3, frames=40, bins=50):
    return [random_spectrogram(rng, frames, bins, source_id=f"rec{i}") for i in range(count)]


class TestDefaultSizes:
    def test_seven_sizes(self):
        assert len(default_sizes()) == 7

    def test_orientation_pairs_distinct(self):
        sizes = default_sizes()
        assert BlockSize(16, 8) in sizes
        assert BlockSize(8, 16) in sizes
        assert sizes == [
            BlockSize(16, 16), BlockSize(16, 8), BlockSize(8, 16), BlockSize(8, 8),
            BlockSize(8, 4), BlockSize(4, 8), BlockSize(4, 4),
        ]

    def test_fits_default_excerpt_spectrogram(self):
        # A 5 s excerpt at the default configuration yields 198 frames x 277
        # bins, comfortably larger than every stock block size.
        cfg = StftConfig()
        k = cfg.window_length(11025)
        u = cfg.hop_length(11025)
        frames = (5 * 11025 - k) // u + 1
        bins = k // 2 + 1
        for size in default_sizes():
            assert size.w <= frames and size.l <= bins

    def test_parse(self):
        assert BlockSize.parse("16x8") == BlockSize(16, 8)
        with pytest.raises(ValidationError):
            BlockSize.parse("16by8")


class TestSampleBlocks:
    def test_block_count(self, rng):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=10, seed=1)
        assert len(d) == 70

    def test_deterministic(self, rng):
        training = make_training(rng)
        a = sample_blocks(training, default_sizes(), per_size=4, seed=9)
        b = sample_blocks(training, default_sizes(), per_size=4, seed=9)
        assert len(a) == len(b)
        for x, y in zip(a.blocks, b.blocks):
            assert x.source_id == y.source_id
            assert x.origin == y.origin
            assert np.array_equal(x.values, y.values)

    def test_different_seed_differs(self, rng):
        training = make_training(rng)
        a = sample_blocks(training, default_sizes(), per_size=4, seed=9)
        b = sample_blocks(training, default_sizes(), per_size=4, seed=10)
        assert any(
            x.origin != y.origin or x.source_id != y.source_id
            for x, y in zip(a.blocks, b.blocks)
        )

    def test_single_position(self, rng):
        spect = random_spectrogram(rng, 16, 16)
        d = sample_blocks([spect], [BlockSize(16, 16)], per_size=3, seed=0)
        assert len(d) == 3
        for block in d.blocks:
            assert block.origin == (0, 0)
            assert np.array_equal(block.values, spect.values)

    def test_blocks_match_source_subarrays(self, rng):
        training = make_training(rng)
        by_id = {s.source_id: s for s in training}
        d = sample_blocks(training, default_sizes(), per_size=5, seed=3)
        for block in d.blocks:
            i, j = block.origin
            w, l = block.values.shape
            source = by_id[block.source_id]
            assert np.array_equal(block.values, source.values[i : i + w, j : j + l])

    def test_growing_per_size_extends_prefix(self, rng):
        training = make_training(rng)
        small = sample_blocks(training, default_sizes(), per_size=3, seed=5)
        large = sample_blocks(training, default_sizes(), per_size=7, seed=5)
        assert len(large.blocks) == 49
        for x, y in zip(small.blocks, large.blocks[: len(small.blocks)]):
            assert x.origin == y.origin and x.source_id == y.source_id
            assert np.array_equal(x.values, y.values)
        prefix = large.prefix(3)
        assert [b.origin for b in prefix.blocks] == [b.origin for b in small.blocks]

    def test_position_distribution_uniform(self, rng):
        # chi-square style smoke test: 10000 draws over the 9 valid positions
        # of a 4x4 block in a 6x6 spectrogram.
        spect = random_spectrogram(rng, 6, 6)
        d = sample_blocks([spect], [BlockSize(4, 4)], per_size=10000, seed=11)
        v = 9
        counts = np.zeros(v)
        for block in d.blocks:
            counts[block.origin[0] * 3 + block.origin[1]] += 1
        n = 10000
        p = 1.0 / v
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) < 5 * sigma)

    def test_rejects_empty_training(self):
        with pytest.raises(ValidationError):
            sample_blocks([], default_sizes(), per_size=1, seed=0)

    def test_rejects_too_small_spectrogram_naming_clip(self, rng):
        small = random_spectrogram(rng, 8, 8, source_id="tiny-clip")
        with pytest.raises(ValidationError, match="tiny-clip"):
            sample_blocks([small], [BlockSize(16, 16)], per_size=1, seed=0)

    def test_rejects_duplicate_sizes(self, rng):
        with pytest.raises(ValidationError):
            sample_blocks(make_training(rng), [BlockSize(4, 4), BlockSize(4, 4)], 1, 0)

    def test_rejects_bad_per_size(self, rng):
        with pytest.raises(ValidationError):
            sample_blocks(make_training(rng), default_sizes(), per_size=0, seed=0)


class TestPersistence:
    def test_round_trip_everything(self, rng, tmp_path):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=10, seed=42)
        path = tmp_path / "dict.tftx"
        save_dictionary(d, path)
        back = load_dictionary(path)
        assert back.seed == d.seed
        assert back.per_size == d.per_size
        assert back.sizes == d.sizes
        assert back.stft_cfg == d.stft_cfg
        assert len(back) == len(d)
        for x, y in zip(d.blocks, back.blocks):
            assert x.source_id == y.source_id
            assert x.origin == y.origin
            assert np.array_equal(x.values, y.values)
        assert back.fingerprint() == d.fingerprint()

    def test_save_is_deterministic(self, rng, tmp_path):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=2, seed=1)
        save_dictionary(d, tmp_path / "a.tftx")
        save_dictionary(d, tmp_path / "b.tftx")
        assert (tmp_path / "a.tftx").read_bytes() == (tmp_path / "b.tftx").read_bytes()

    def test_wrong_magic_names_path(self, tmp_path):
        p = tmp_path / "bogus.tftx"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError, match="bogus.tftx"):
            load_dictionary(p)

    def test_truncated_file(self, rng, tmp_path):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=2, seed=1)
        p = tmp_path / "trunc.tftx"
        save_dictionary(d, p)
        data = p.read_bytes()
        p.write_bytes(data[: len(data) // 2])
        with pytest.raises(FormatError):
            load_dictionary(p)

    @pytest.mark.parametrize("victim", [0, 1, 2, 3])
    def test_corrupt_payload_byte_detected(self, rng, tmp_path, victim):
        # Flip one byte inside a block payload; the CRC must catch it.
        d = sample_blocks(make_training(rng), [BlockSize(4, 4)], per_size=4, seed=7)
        p = tmp_path / "corrupt.tftx"
        save_dictionary(d, p)
        data = bytearray(p.read_bytes())
        header = 4 + 8 + 8 + 20  # magic, version+M, seed, stft fields
        block_head = 16 + 4 + len(d.blocks[0].source_id.encode())
        payload_len = 16 * 8
        record = block_head + payload_len + 4
        offset = header + victim * record + block_head + 5  # inside payload
        data[offset] ^= 0xFF
        p.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="checksum"):
            load_dictionary(p)

    def test_fingerprints_differ_across_contents(self, rng):
        training = make_training(rng)
        a = sample_blocks(training, default_sizes(), per_size=2, seed=1)
        b = sample_blocks(training, default_sizes(), per_size=2, seed=2)
        assert a.fingerprint() != b.fingerprint()


class TestDictionaryType:
    def test_length_invariant_enforced(self, rng):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=2, seed=1)
        with pytest.raises(ValidationError):
            Dictionary(d.blocks[:-1], d.sizes, d.per_size, d.seed, d.stft_cfg)

    def test_prefix_bounds(self, rng):
        d = sample_blocks(make_training(rng), default_sizes(), per_size=2, seed=1)
        with pytest.raises(ValidationError):
            d.prefix(0)
        with pytest.raises(ValidationError):
            d.prefix(3)
