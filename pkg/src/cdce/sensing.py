"""Row-blocked linear sensing, pre-images and measurement quantization.

Every image row ``k`` is measured by its own ``M x N2`` block ``phi_k``, so
the full operator is block diagonal.  Three block families are available:

``scrambled-orthonormal``
    ``M`` randomly selected rows of the orthonormal DCT-II matrix applied
    after a random +-1 sign flip.  Stored as (row indices, signs) and applied
    with fast transforms, never materialized for whole images.
``gaussian-orthonormalized``
    i.i.d. normal rows orthonormalized (QR, i.e. Gram-Schmidt).
``bernoulli``
    +-1/sqrt(N2) entries.  Rows are only approximately orthonormal.

Each row block draws from its own sub-seed ``(seed, k)``, so blocks differ
across rows while the whole matrix is reproducible from ``seed``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft

from .core import as_image
from .errors import ConfigError, ParseError, ShapeError

SCRAMBLED = "scrambled-orthonormal"
GAUSSIAN = "gaussian-orthonormalized"
BERNOULLI = "bernoulli"
KINDS = (SCRAMBLED, GAUSSIAN, BERNOULLI)
_KIND_CODE = {SCRAMBLED: 0, GAUSSIAN: 1, BERNOULLI: 2}

MAGIC = b"CDCE"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sHBIIIQBdd")


@lru_cache(maxsize=8)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``F`` with ``F @ x == dct(x, norm='ortho')``."""
    f = fft.dct(np.eye(n), norm="ortho", axis=0)
    f.setflags(write=False)
    return f


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    kind: str
    m: int
    n1: int
    n2: int
    seed: int
    rows: np.ndarray = field(default=None, repr=False)    # (n1, m) DCT rows kept
    signs: np.ndarray = field(default=None, repr=False)   # (n1, n2) +-1
    blocks: np.ndarray = field(default=None, repr=False)  # (n1, m, n2) dense kinds

    @property
    def rate(self) -> float:
        return self.m / self.n2

    @property
    def orthonormal(self) -> bool:
        return self.kind != BERNOULLI

    @property
    def provenance(self) -> tuple:
        return (self.seed, self.kind, self.m, self.n1, self.n2)

    @property
    def shape(self) -> tuple:
        return (self.n1, self.n2)

    def block(self, k: int) -> np.ndarray:
        """Dense ``M x N2`` block for image row ``k``."""
        if self.blocks is not None:
            return self.blocks[k]
        return dct_matrix(self.n2)[self.rows[k]] * self.signs[k]

    def dense(self) -> np.ndarray:
        """Full ``K x N`` block-diagonal matrix (test-sized problems only)."""
        out = np.zeros((self.n1 * self.m, self.n1 * self.n2))
        for k in range(self.n1):
            out[k * self.m : (k + 1) * self.m, k * self.n2 : (k + 1) * self.n2] = self.block(k)
        return out

    def apply(self, img) -> np.ndarray:
        """Row measurements ``phi_k @ img[k]`` as an ``(N1, M)`` array."""
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.shape:
            raise ShapeError(f"image {img.shape} does not match sensing dims {self.shape}")
        if self.blocks is not None:
            return np.einsum("kmn,kn->km", self.blocks, img)
        coeffs = fft.dct(img * self.signs, norm="ortho", axis=1)
        return np.take_along_axis(coeffs, self.rows, axis=1)

    def apply_row(self, k: int, x) -> np.ndarray:
        return self.block(k) @ np.asarray(x, dtype=np.float64)

    def adjoint(self, y) -> np.ndarray:
        """Back-projection ``phi_k^T @ y[k]`` as an ``(N1, N2)`` array."""
        y = np.asarray(y, dtype=np.float64).reshape(self.n1, self.m)
        if self.blocks is not None:
            return np.einsum("kmn,km->kn", self.blocks, y)
        z = np.zeros(self.shape)
        np.put_along_axis(z, self.rows, y, axis=1)
        return fft.idct(z, norm="ortho", axis=1) * self.signs

    @cached_property
    def column_sq_norms(self) -> np.ndarray:
        """``||phi_k[:, l]||^2`` for every row ``k`` and column ``l``."""
        if self.blocks is not None:
            return np.einsum("kmn,kmn->kn", self.blocks, self.blocks)
        sel = np.zeros(self.shape)
        np.put_along_axis(sel, self.rows, 1.0, axis=1)
        return sel @ (dct_matrix(self.n2) ** 2)


def _row_rng(seed: int, k: int, kind: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(k), _KIND_CODE[kind]])


def build_sensing(kind, m, n1, n2, seed) -> SensingMatrix:
    """Build the per-row measurement blocks; deterministic in all arguments."""
    if kind not in KINDS:
        raise ConfigError(f"unknown sensing kind {kind!r}; expected one of {KINDS}")
    m, n1, n2, seed = int(m), int(n1), int(n2), int(seed)
    if not 1 <= m <= n2:
        raise ConfigError(f"need 1 <= M <= N2, got M={m}, N2={n2}")
    if n1 < 1:
        raise ConfigError("need at least one row")
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if kind == SCRAMBLED:
        rows = np.empty((n1, m), dtype=np.int64)
        signs = np.empty((n1, n2))
        for k in range(n1):
            rng = _row_rng(seed, k, kind)
            signs[k] = rng.choice([-1.0, 1.0], size=n2)
            rows[k] = np.sort(rng.choice(n2, size=m, replace=False))
        rows.setflags(write=False)
        signs.setflags(write=False)
        return SensingMatrix(kind, m, n1, n2, seed, rows=rows, signs=signs)
    blocks = np.empty((n1, m, n2))
    for k in range(n1):
        rng = _row_rng(seed, k, kind)
        if kind == GAUSSIAN:
            q, r = np.linalg.qr(rng.standard_normal((n2, m)))
            # fix column signs so the factorization is unique
            blocks[k] = (q * np.sign(np.diag(r))).T
        else:
            blocks[k] = rng.choice([-1.0, 1.0], size=(m, n2)) / np.sqrt(n2)
    blocks.setflags(write=False)
    return SensingMatrix(kind, m, n1, n2, seed, blocks=blocks)


def rate_to_m(rate: float, n2: int) -> int:
    """Measurements per row for a target rate (at least one)."""
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"measurement rate must be in (0, 1], got {rate}")
    return max(1, min(n2, int(round(rate * n2))))


@dataclass(frozen=True)
class Quantizer:
    bits: int
    lo: float
    hi: float

    @property
    def levels(self) -> int:
        return 2**self.bits

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.levels

    def encode(self, y) -> np.ndarray:
        codes = np.floor((np.asarray(y) - self.lo) / self.step)
        return np.clip(codes, 0, self.levels - 1).astype(np.uint16)

    def decode(self, codes) -> np.ndarray:
        return self.lo + (np.asarray(codes, dtype=np.float64) + 0.5) * self.step


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Stacked row measurements; ``y[k]`` holds ``Y_k`` (length ``M``).

    When ``quantizer`` is set, ``codes`` are the transmitted integers and
    ``y`` their dequantized cell midpoints.
    """

    y: np.ndarray
    provenance: tuple
    quantizer: Quantizer = None
    codes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        _, _, m, n1, _ = self.provenance
        y = np.asarray(self.y, dtype=np.float64)
        if y.size != m * n1:
            raise ShapeError(f"expected {m * n1} measurements, got {y.size}")
        y = y.reshape(n1, m)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def vector(self) -> np.ndarray:
        """Measurements flattened in row order, ``[Y_1; ...; Y_N1]``."""
        return self.y.reshape(-1)

    def __len__(self):
        return self.y.size


def check_provenance(Y: MeasurementSet, S: SensingMatrix):
    if tuple(Y.provenance) != S.provenance:
        raise ConfigError(f"measurements {Y.provenance} were not taken with {S.provenance}")


def measure(img, S: SensingMatrix) -> MeasurementSet:
    img = as_image(img)
    return MeasurementSet(S.apply(img), S.provenance)


def preimage(Y: MeasurementSet, S: SensingMatrix) -> np.ndarray:
    """Back-projection ``Phi^T Y`` reshaped to the image grid (not clamped)."""
    check_provenance(Y, S)
    return S.adjoint(Y.y)


def quantize(Y: MeasurementSet, bits: int, value_range=None) -> MeasurementSet:
    """Uniform mid-rise quantizer with ``2**bits`` cells.

    The cell range defaults to ``[min(Y), max(Y)]`` and is stored with the
    result.  A constant vector is returned unchanged.
    """
    if not 2 <= int(bits) <= 16:
        raise ConfigError(f"quantizer bits must be in 2..16, got {bits}")
    if Y.quantizer is not None:
        Y = dequantize(Y)
    lo, hi = value_range if value_range is not None else (Y.y.min(), Y.y.max())
    if not hi > lo:
        return Y
    q = Quantizer(int(bits), float(lo), float(hi))
    codes = q.encode(Y.y)
    return MeasurementSet(q.decode(codes), Y.provenance, q, codes)


def dequantize(Y: MeasurementSet) -> MeasurementSet:
    if Y.quantizer is None:
        return Y
    return MeasurementSet(Y.quantizer.decode(Y.codes), Y.provenance)


def write_measurements(path, Y: MeasurementSet):
    seed, kind, m, n1, n2 = Y.provenance
    q = Y.quantizer
    header = _HEADER.pack(
        MAGIC, FILE_VERSION, _KIND_CODE[kind], n1, n2, m, seed,
        q.bits if q else 0, q.lo if q else 0.0, q.hi if q else 0.0,
    )
    payload = Y.codes.astype("<u2").tobytes() if q else Y.y.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def read_measurements(path) -> MeasurementSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ParseError(f"{path}: file too short for a measurement header")
    magic, version, kind_code, n1, n2, m, seed, bits, lo, hi = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != FILE_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    kinds = {v: k for k, v in _KIND_CODE.items()}
    if kind_code not in kinds:
        raise ParseError(f"{path}: unknown sensing kind code {kind_code}")
    prov = (seed, kinds[kind_code], m, n1, n2)
    body = data[_HEADER.size :]
    count = m * n1
    if bits:
        if len(body) != 2 * count:
            raise ParseError(f"{path}: expected {count} u16 codes")
        codes = np.frombuffer(body, dtype="<u2").reshape(n1, m).astype(np.uint16)
        qz = Quantizer(bits, lo, hi)
        return MeasurementSet(qz.decode(codes), prov, qz, codes)
    if len(body) != 8 * count:
        raise ParseError(f"{path}: expected {count} f64 values")
    return MeasurementSet(np.frombuffer(body, dtype="<f8").copy(), prov)
