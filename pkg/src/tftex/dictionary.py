"""Random block dictionaries: sampling from training spectrograms and persistence.

A dictionary holds per_size blocks for each configured size, drawn by first
picking a training spectrogram uniformly at random and then a top-left
position uniformly among all valid placements. Each size consumes its own
seeded RNG stream and the block list interleaves sizes round by round, so
growing per_size extends an existing dictionary instead of reshuffling it.
"""

import hashlib
import io
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .dsp import LogSpectrogram, StftConfig
from .errors import FormatError, ValidationError

MAGIC = b"TFTX"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BlockSize:
    """Block extent: w time frames by l frequency bins."""

    w: int
    l: int

    def __post_init__(self):
        if self.w < 1 or self.l < 1:
            raise ValidationError(f"block size must be at least 1x1, got {self.w}x{self.l}")

    @property
    def area(self) -> int:
        return self.w * self.l

    @classmethod
    def parse(cls, text: str) -> "BlockSize":
        try:
            w, l = text.lower().split("x")
            return cls(int(w), int(l))
        except (ValueError, TypeError):
            raise ValidationError(f"cannot parse block size {text!r}, expected WxL") from None

    def __str__(self) -> str:
        return f"{self.w}x{self.l}"


@dataclass(frozen=True)
class Block:
    """A w x l sub-array of a log-spectrogram plus where it came from."""

    values: np.ndarray
    source_id: str
    origin: tuple[int, int]  # (frame index, bin index) of the top-left corner

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"block values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("block contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @property
    def size(self) -> BlockSize:
        return BlockSize(self.values.shape[0], self.values.shape[1])


@dataclass(frozen=True)
class Dictionary:
    """An ordered, immutable list of sampled blocks spanning the configured sizes."""

    blocks: tuple[Block, ...]
    sizes: tuple[BlockSize, ...]
    per_size: int
    seed: int
    stft_cfg: StftConfig

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if len(self.blocks) != len(self.sizes) * self.per_size:
            raise ValidationError(
                f"dictionary has {len(self.blocks)} blocks, expected "
                f"{len(self.sizes)} sizes x {self.per_size} per size"
            )

    def __len__(self) -> int:
        return len(self.blocks)

    def prefix(self, per_size: int) -> "Dictionary":
        """The nested dictionary holding the first ``per_size`` rounds of draws."""
        if not 1 <= per_size <= self.per_size:
            raise ValidationError(f"prefix per_size {per_size} outside [1, {self.per_size}]")
        n = per_size * len(self.sizes)
        return Dictionary(self.blocks[:n], self.sizes, per_size, self.seed, self.stft_cfg)

    def fingerprint(self) -> str:
        """Stable content hash used as feature/model provenance id."""
        digest = hashlib.sha256(serialize_dictionary(self)).hexdigest()
        return digest[:16]


def default_sizes() -> list[BlockSize]:
    """The seven stock block sizes, from 16x16 down to 4x4 frames-by-bins."""
    return [
        BlockSize(16, 16),
        BlockSize(16, 8),
        BlockSize(8, 16),
        BlockSize(8, 8),
        BlockSize(8, 4),
        BlockSize(4, 8),
        BlockSize(4, 4),
    ]


def _size_streams(seed: int, n_sizes: int) -> list[np.random.Generator]:
    # One PCG64 stream per block size keyed by (seed, size index); draws for a
    # size are a deterministic sequence, so a larger per_size extends them.
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i,))))
        for i in range(n_sizes)
    ]


def sample_blocks(
    training: list[LogSpectrogram],
    sizes: list[BlockSize],
    per_size: int,
    seed: int,
    *,
    stft_cfg: StftConfig | None = None,
) -> Dictionary:
    """Learn a dictionary by uniform random sampling of training spectrograms."""
    if not training:
        raise ValidationError("training set is empty")
    if per_size < 1:
        raise ValidationError(f"per_size must be >= 1, got {per_size}")
    if not sizes:
        raise ValidationError("no block sizes given")
    if len(set((s.w, s.l) for s in sizes)) != len(sizes):
        raise ValidationError(f"duplicate block sizes in {[str(s) for s in sizes]}")
    if not (0 <= int(seed) < 2**64):
        raise ValidationError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    for size in sizes:
        for spect in training:
            if spect.frames < size.w or spect.bins < size.l:
                raise ValidationError(
                    f"spectrogram {spect.source_id!r} is {spect.frames}x{spect.bins}, "
                    f"too small for block size {size}"
                )

    streams = _size_streams(int(seed), len(sizes))
    blocks: list[Block] = []
    for _round in range(per_size):
        for size, rng in zip(sizes, streams):
            spect = training[int(rng.integers(len(training)))]
            l0 = int(rng.integers(spect.frames - size.w + 1))
            k0 = int(rng.integers(spect.bins - size.l + 1))
            values = np.array(spect.values[l0 : l0 + size.w, k0 : k0 + size.l])
            blocks.append(Block(values=values, source_id=spect.source_id, origin=(l0, k0)))
    return Dictionary(
        blocks=tuple(blocks),
        sizes=tuple(sizes),
        per_size=per_size,
        seed=int(seed),
        stft_cfg=stft_cfg if stft_cfg is not None else StftConfig(),
    )


def _write_str(out, text: str) -> None:
    raw = text.encode("utf-8")
    out.write(struct.pack("<I", len(raw)))
    out.write(raw)


def serialize_dictionary(d: Dictionary) -> bytes:
    """Little-endian binary image of a dictionary (also hashed for provenance)."""
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", FORMAT_VERSION, len(d.blocks)))
    out.write(struct.pack("<Q", d.seed))
    out.write(struct.pack("<dId", d.stft_cfg.window_ms, d.stft_cfg.hop_divisor, d.stft_cfg.epsilon))
    for block in d.blocks:
        w, l = block.values.shape
        out.write(struct.pack("<IIII", w, l, block.origin[0], block.origin[1]))
        _write_str(out, block.source_id)
        payload = np.ascontiguousarray(block.values, dtype="<f8").tobytes()
        out.write(payload)
        out.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    return out.getvalue()


def save_dictionary(d: Dictionary, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_dictionary(d))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated dictionary file {self.path}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_dictionary(path) -> Dictionary:
    """Read a dictionary back; verifies magic, version, shapes, and checksums."""
    with open(path, "rb") as f:
        r = _Reader(f.read(), path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path} is not a block dictionary file (bad magic)")
    version, n_blocks = r.unpack("<II")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    (seed,) = r.unpack("<Q")
    window_ms, hop_divisor, epsilon = r.unpack("<dId")
    blocks: list[Block] = []
    for i in range(n_blocks):
        w, l, o_frame, o_bin = r.unpack("<IIII")
        if w < 1 or l < 1:
            raise FormatError(f"{path}: block {i} has invalid shape {w}x{l}")
        (id_len,) = r.unpack("<I")
        source_id = r.take(id_len).decode("utf-8")
        payload = r.take(w * l * 8)
        (crc,) = r.unpack("<I")
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise FormatError(f"{path}: checksum mismatch in block {i}")
        values = np.frombuffer(payload, dtype="<f8").reshape(w, l)
        blocks.append(Block(values=values, source_id=source_id, origin=(o_frame, o_bin)))
    if r.pos != len(r.data):
        raise FormatError(f"{path}: {len(r.data) - r.pos} unexpected trailing bytes")

    sizes, per_size = _reconstruct_schedule(blocks, path)
    return Dictionary(
        blocks=tuple(blocks),
        sizes=sizes,
        per_size=per_size,
        seed=seed,
        stft_cfg=StftConfig(window_ms=window_ms, hop_divisor=int(hop_divisor), epsilon=epsilon),
    )


def _reconstruct_schedule(blocks: list[Block], path) -> tuple[tuple[BlockSize, ...], int]:
    # Block order is round-interleaved over the distinct sizes, so the sizes
    # list is the first run of distinct shapes.
    if not blocks:
        raise FormatError(f"{path}: dictionary holds no blocks")
    sizes: list[BlockSize] = []
    seen: set[tuple[int, int]] = set()
    for block in blocks:
        key = (block.values.shape[0], block.values.shape[1])
        if key in seen:
            break
        seen.add(key)
        sizes.append(block.size)
    n_sizes = len(sizes)
    if len(blocks) % n_sizes != 0:
        raise FormatError(f"{path}: {len(blocks)} blocks do not tile {n_sizes} sizes")
    per_size = len(blocks) // n_sizes
    for i, block in enumerate(blocks):
        expected = sizes[i % n_sizes]
        if block.size != expected:
            raise FormatError(f"{path}: block {i} has size {block.size}, expected {expected}")
    return tuple(sizes), per_size
