"""Block-matching energy maps and minimum-energy feature vectors.

For a block B of w x l entries slid over a log-spectrogram S, the energy at
placement (i, j) is the mean squared difference

    E[i, j] = sum_{p,q} (S[i+p, j+q] - B[p, q])^2 / (w l)

over all fully interior placements (no padding). One feature per block is
the minimum of its map, which makes the feature invariant to where in time
and frequency the best match occurs.

``energy_map_naive`` evaluates the definition placement by placement and
serves as the oracle. ``energy_map_fast`` expands the square as
sum(S^2) - 2 sum(S B) + sum(B^2): the sliding sum of S^2 comes from a
summed-area table (accumulated in extended precision, since the expansion
cancels catastrophically near perfect matches), and the cross term from
direct sliding dot products for tiny blocks or FFT cross-correlation
otherwise. Entries near zero are then re-evaluated directly so that exact
self-matches come out as exact zeros.
"""

import csv
import io
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view

from .dictionary import Block, Dictionary
from .dsp import LogSpectrogram
from .errors import FormatError, ValidationError

# Blocks with at most this many entries use direct sliding dot products;
# larger ones go through FFT cross-correlation (measured crossover).
DIRECT_AREA_MAX = 32
# Energies at or below this are recomputed by direct summation.
REFINE_BELOW = 1e-2
_REFINE_CHUNK = 4096
_FFT_BATCH = 64

FEATURE_MAGIC = b"TFTF"
FEATURE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnergyMap:
    """Matching energies over all valid placements of one block."""

    values: np.ndarray
    block_index: int = -1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"energy map must be 2-D, got shape {values.shape}")
        if values.size and (not np.all(np.isfinite(values)) or values.min() < 0):
            raise ValidationError("energy map entries must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class FeatureVector:
    """Minimum matching energies, one per dictionary block, in dictionary order."""

    values: np.ndarray
    dictionary_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError(f"feature vector must be 1-D, got shape {values.shape}")
        if values.size and (not np.all(np.isfinite(values)) or values.min() < 0):
            raise ValidationError("feature values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def _check_fits(spect_shape: tuple[int, int], block_shape: tuple[int, int], what: str) -> None:
    if block_shape[0] > spect_shape[0] or block_shape[1] > spect_shape[1]:
        raise ValidationError(
            f"{what} of size {block_shape[0]}x{block_shape[1]} does not fit in a "
            f"{spect_shape[0]}x{spect_shape[1]} spectrogram"
        )


def energy_map_naive(spect: LogSpectrogram, block: Block) -> EnergyMap:
    """Direct per-placement evaluation of the energy definition (test oracle)."""
    s = spect.values
    b = block.values
    w, l = b.shape
    _check_fits(s.shape, b.shape, "block")
    out = np.empty((s.shape[0] - w + 1, s.shape[1] - l + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            d = s[i : i + w, j : j + l] - b
            out[i, j] = np.sum(d * d) / (w * l)
    return EnergyMap(out)


class BlockMatcher:
    """Per-spectrogram scratch state shared while matching many blocks.

    Holds the extended-precision summed-area table of squares, cached
    per-size sliding window sums, and the spectrogram's FFT. All per-block
    arithmetic is independent of how blocks are grouped, so features do not
    change when a dictionary grows or extraction is batched differently.
    """

    def __init__(self, values: np.ndarray):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValidationError(f"spectrogram values must be 2-D, got {self.values.shape}")
        h, w = self.values.shape
        sq = np.square(self.values.astype(np.longdouble))
        sat = np.zeros((h + 1, w + 1), dtype=np.longdouble)
        sat[1:, 1:] = sq.cumsum(axis=0).cumsum(axis=1)
        self._sat = sat
        self._window_sq = {}
        self._fshape = (scipy.fft.next_fast_len(h), scipy.fft.next_fast_len(w))
        self._spectrum = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def window_sq_sums(self, w: int, l: int) -> np.ndarray:
        """Sliding-window sums of S^2 for a w x l window, as float64."""
        key = (w, l)
        if key not in self._window_sq:
            sat = self._sat
            win = sat[w:, l:] - sat[:-w, l:] - sat[w:, :-l] + sat[:-w, :-l]
            self._window_sq[key] = win.astype(np.float64)
        return self._window_sq[key]

    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = scipy.fft.rfft2(self.values, s=self._fshape)
        return self._spectrum

    def block_spectra(self, blocks: np.ndarray) -> np.ndarray:
        """rfft2 of a (n, w, l) stack of same-size blocks, zero-padded."""
        return scipy.fft.rfft2(blocks, s=self._fshape, axes=(-2, -1))

    def cross_from_spectra(self, block_spectra: np.ndarray, w: int, l: int) -> np.ndarray:
        """Valid-region cross-correlations for a stack of transformed blocks."""
        h, wid = self.values.shape
        prod = self.spectrum()[None, :, :] * np.conj(block_spectra)
        corr = scipy.fft.irfft2(prod, s=self._fshape, axes=(-2, -1))
        return corr[:, : h - w + 1, : wid - l + 1]

    def cross(self, block: np.ndarray) -> np.ndarray:
        """Sliding dot products of the spectrogram with one block."""
        w, l = block.shape
        if w * l <= DIRECT_AREA_MAX:
            win = sliding_window_view(self.values, (w, l))
            return np.einsum("ijkl,kl->ij", win, block)
        return self.cross_from_spectra(self.block_spectra(block[None, :, :]), w, l)[0]

    def energy_from_cross(self, block: np.ndarray, cross: np.ndarray) -> np.ndarray:
        w, l = block.shape
        sum_b2 = np.einsum("kl,kl->", block, block)
        e = (self.window_sq_sums(w, l) - 2.0 * cross + sum_b2) / (w * l)
        np.maximum(e, 0.0, out=e)
        self._refine(e, block)
        return e

    def energy(self, block: np.ndarray) -> np.ndarray:
        """Full energy map for one block (expansion plus near-zero refinement)."""
        w, l = block.shape
        _check_fits(self.values.shape, (w, l), "block")
        return self.energy_from_cross(block, self.cross(block))

    def _refine(self, e: np.ndarray, block: np.ndarray) -> None:
        # Catastrophic cancellation caps the expansion's absolute accuracy;
        # re-evaluate small entries directly so self-matches are exact zeros.
        idx = np.flatnonzero(e.ravel() <= REFINE_BELOW)
        if not idx.size:
            return
        w, l = block.shape
        win = sliding_window_view(self.values, (w, l))
        flat = e.reshape(-1)
        for start in range(0, idx.size, _REFINE_CHUNK):
            chunk = idx[start : start + _REFINE_CHUNK]
            rows, cols = np.unravel_index(chunk, e.shape)
            d = win[rows, cols] - block
            flat[chunk] = np.einsum("nwl,nwl->n", d, d) / (w * l)


def energy_map_fast(spect: LogSpectrogram, block: Block) -> EnergyMap:
    """Energy map via the expansion; matches the naive oracle within tolerance."""
    return EnergyMap(BlockMatcher(spect.values).energy(block.values))


def min_energy(energy: EnergyMap) -> float:
    """The smallest matching energy over all placements."""
    if energy.values.size == 0:
        raise ValidationError("energy map is empty")
    return float(energy.values.min())


def min_energy_location(energy: EnergyMap) -> tuple[float, tuple[int, int]]:
    """Diagnostic variant returning the minimum and its (frame, bin) placement."""
    if energy.values.size == 0:
        raise ValidationError("energy map is empty")
    flat = int(np.argmin(energy.values))
    i, j = np.unravel_index(flat, energy.values.shape)
    return float(energy.values[i, j]), (int(i), int(j))


def _validate_dictionary_fits(spect: LogSpectrogram, d: Dictionary) -> None:
    for m, block in enumerate(d.blocks):
        w, l = block.values.shape
        if w > spect.frames or l > spect.bins:
            raise ValidationError(
                f"spectrogram {spect.source_id!r} is {spect.frames}x{spect.bins}, "
                f"too small for block {m} of size {w}x{l}"
            )


def extract_features(spect: LogSpectrogram, d: Dictionary) -> FeatureVector:
    """Minimum matching energy of every dictionary block against one spectrogram."""
    _validate_dictionary_fits(spect, d)
    matcher = BlockMatcher(spect.values)
    out = np.empty(len(d.blocks))

    by_size: dict[tuple[int, int], list[int]] = {}
    for m, block in enumerate(d.blocks):
        by_size.setdefault(block.values.shape, []).append(m)

    for (w, l), members in by_size.items():
        if w * l <= DIRECT_AREA_MAX:
            for m in members:
                out[m] = matcher.energy(d.blocks[m].values).min()
        else:
            # One spectrogram FFT is shared; block transforms and inverse
            # transforms are batched, which is bitwise identical to doing
            # them one by one.
            for start in range(0, len(members), _FFT_BATCH):
                chunk = members[start : start + _FFT_BATCH]
                stack = np.stack([d.blocks[m].values for m in chunk])
                crosses = matcher.cross_from_spectra(matcher.block_spectra(stack), w, l)
                for m, cross in zip(chunk, crosses):
                    out[m] = matcher.energy_from_cross(d.blocks[m].values, cross).min()
    return FeatureVector(out, d.fingerprint())


def extract_features_batch(
    spects: list[LogSpectrogram], d: Dictionary, threads: int = 1
) -> list[FeatureVector]:
    """Feature vectors for many spectrograms; output order follows the input."""
    if threads <= 1:
        return [extract_features(s, d) for s in spects]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: extract_features(s, d), spects))


@dataclass(frozen=True)
class FeatureRecord:
    """One classified object: excerpt identity, class label, feature vector."""

    excerpt_id: str
    label: str
    vector: FeatureVector


def _common_dictionary_id(records: list[FeatureRecord]) -> str:
    ids = {r.vector.dictionary_id for r in records}
    if len(ids) > 1:
        raise ValidationError(f"records mix dictionary ids {sorted(ids)}")
    return ids.pop() if ids else ""


def write_feature_csv(path, records: list[FeatureRecord]) -> None:
    """CSV persistence: excerpt_id, label, then one column per feature."""
    if not records:
        raise ValidationError("no feature records to write")
    _common_dictionary_id(records)
    m = len(records[0].vector)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["excerpt_id", "label"] + [f"C{i + 1}" for i in range(m)])
        for rec in records:
            if len(rec.vector) != m:
                raise ValidationError(
                    f"record {rec.excerpt_id!r} has {len(rec.vector)} features, expected {m}"
                )
            writer.writerow(
                [rec.excerpt_id, rec.label] + [repr(float(v)) for v in rec.vector.values]
            )


def read_feature_csv(path, dictionary_id: str = "") -> list[FeatureRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature file") from None
        if header[:2] != ["excerpt_id", "label"]:
            raise FormatError(f"{path}: unexpected header {header[:2]}")
        m = len(header) - 2
        records = []
        for line, row in enumerate(reader, start=2):
            if len(row) != m + 2:
                raise FormatError(f"{path}: line {line} has {len(row)} fields, expected {m + 2}")
            try:
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}: line {line} holds a non-numeric feature") from None
            records.append(FeatureRecord(row[0], row[1], FeatureVector(values, dictionary_id)))
    if not records:
        raise FormatError(f"{path}: feature file holds no rows")
    return records


def write_feature_binary(path, records: list[FeatureRecord]) -> None:
    """Binary mirror of the CSV table with checksummed float64 payloads."""
    if not records:
        raise ValidationError("no feature records to write")
    dictionary_id = _common_dictionary_id(records)
    m = len(records[0].vector)
    out = io.BytesIO()
    out.write(FEATURE_MAGIC)
    out.write(struct.pack("<III", FEATURE_FORMAT_VERSION, len(records), m))
    raw_id = dictionary_id.encode("utf-8")
    out.write(struct.pack("<I", len(raw_id)))
    out.write(raw_id)
    for rec in records:
        if len(rec.vector) != m:
            raise ValidationError(
                f"record {rec.excerpt_id!r} has {len(rec.vector)} features, expected {m}"
            )
        for text in (rec.excerpt_id, rec.label):
            raw = text.encode("utf-8")
            out.write(struct.pack("<I", len(raw)))
            out.write(raw)
        payload = np.ascontiguousarray(rec.vector.values, dtype="<f8").tobytes()
        out.write(payload)
        out.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    with open(path, "wb") as f:
        f.write(out.getvalue())


def read_feature_binary(path) -> list[FeatureRecord]:
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated feature file {path}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4) != FEATURE_MAGIC:
        raise FormatError(f"{path} is not a feature table (bad magic)")
    version, n_rows, m = struct.unpack("<III", take(12))
    if version != FEATURE_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    (id_len,) = struct.unpack("<I", take(4))
    dictionary_id = take(id_len).decode("utf-8")
    records = []
    for i in range(n_rows):
        texts = []
        for _ in range(2):
            (n,) = struct.unpack("<I", take(4))
            texts.append(take(n).decode("utf-8"))
        payload = take(m * 8)
        (crc,) = struct.unpack("<I", take(4))
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise FormatError(f"{path}: checksum mismatch in row {i}")
        values = np.frombuffer(payload, dtype="<f8")
        records.append(FeatureRecord(texts[0], texts[1], FeatureVector(values, dictionary_id)))
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} unexpected trailing bytes")
    return records
