"""Base-2 digital sequences and point-set quality checks.

Generates van der Corput and Sobol' points (Joe-Kuo direction numbers),
verifies the digital-net property by exhaustive elementary-interval
counting, and computes the exact one-dimensional star discrepancy.

Coordinates are exact dyadic rationals with at most ``bit_depth`` binary
digits (52 by default, so every value is an exact double).  Generation is
deterministic and index-addressable: asking for indices ``i..i+n-1`` twice
gives byte-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, PrecisionError, WorkLimitError

DEFAULT_BIT_DEPTH = 52

# Hard cap on is_net work: compositions(m - t, d) * b**m cell increments.
WORK_LIMIT = 10**9

_BUNDLED_TABLE = "joe-kuo-64.txt"


@dataclass(frozen=True)
class DimensionRecord:
    """Generating data for one Sobol' dimension (Joe-Kuo convention).

    ``s`` is the degree of the primitive polynomial, ``a`` encodes its inner
    coefficients, and ``m`` holds the s initial values.
    """

    s: int
    a: int
    m: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.s < 1 or len(self.m) != self.s:
            raise ConfigError(f"need exactly s={self.s} initial values, got {len(self.m)}")
        if not 0 <= self.a < (1 << max(self.s - 1, 0)) + (self.s == 1):
            raise ConfigError(f"coefficient a={self.a} out of range for degree {self.s}")
        for k, mk in enumerate(self.m, start=1):
            if mk % 2 == 0 or not 0 < mk < (1 << k):
                raise ConfigError(f"initial value m_{k}={mk} must be odd and < 2^{k}")


@dataclass(frozen=True)
class DirectionNumbers:
    """Per-dimension generating data for the base-2 digital sequence.

    ``records[j]`` drives dimension j+2; dimension 1 is the reserved van der
    Corput dimension and needs no record.
    """

    records: tuple[DimensionRecord, ...]
    bit_depth: int = DEFAULT_BIT_DEPTH

    def __post_init__(self) -> None:
        if not 1 <= self.bit_depth <= 52:
            raise ConfigError(f"bit_depth must be in [1, 52], got {self.bit_depth}")

    @property
    def dimension_count(self) -> int:
        return len(self.records) + 1

    @classmethod
    def from_text(cls, text: str, bit_depth: int = DEFAULT_BIT_DEPTH) -> "DirectionNumbers":
        """Parse the Joe-Kuo text format: one line per dimension,
        whitespace-separated integers ``d s a m_1 ... m_s``.  A header line
        is tolerated and skipped."""
        records = []
        expected_dim = 2
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if not parts[0].isdigit():
                if lineno == 1:
                    continue  # header
                raise ConfigError(f"line {lineno}: expected integers, got {line!r}")
            vals = [int(p) for p in parts]
            d, s, a = vals[0], vals[1], vals[2]
            if d != expected_dim:
                raise ConfigError(f"line {lineno}: expected dimension {expected_dim}, got {d}")
            if len(vals) != 3 + s:
                raise ConfigError(f"line {lineno}: dimension {d} needs {s} initial values")
            records.append(DimensionRecord(s=s, a=a, m=tuple(vals[3:])))
            expected_dim += 1
        if not records:
            raise ConfigError("no direction-number records found")
        return cls(records=tuple(records), bit_depth=bit_depth)

    @classmethod
    def from_file(cls, path: str, bit_depth: int = DEFAULT_BIT_DEPTH) -> "DirectionNumbers":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read(), bit_depth=bit_depth)

    def integer_directions(self, dim: int) -> np.ndarray:
        """Direction integers V_1..V_bit_depth for one dimension (1-based).

        V_k = m_k * 2^(bit_depth - k); dimension 1 uses the identity
        generator matrix, which reproduces the van der Corput sequence.
        """
        if not 1 <= dim <= self.dimension_count:
            raise ConfigError(
                f"dimension {dim} exceeds direction-number table ({self.dimension_count})"
            )
        nb = self.bit_depth
        v = np.zeros(nb, dtype=np.uint64)
        if dim == 1:
            for k in range(nb):
                v[k] = 1 << (nb - 1 - k)
            return v
        rec = self.records[dim - 2]
        s, a = rec.s, rec.a
        m = list(rec.m)
        for k in range(1, nb + 1):
            if k <= s:
                mk = m[k - 1]
            else:
                # m_k = 2 a_1 m_{k-1} ^ ... ^ 2^{s-1} a_{s-1} m_{k-s+1}
                #       ^ 2^s m_{k-s} ^ m_{k-s}
                mk = m[k - s - 1] ^ (m[k - s - 1] << s)
                for i in range(1, s):
                    ai = (a >> (s - 1 - i)) & 1
                    if ai:
                        mk ^= m[k - i - 1] << i
                m.append(mk)
            v[k - 1] = mk << (nb - k)
        return v


_DEFAULT_DIRECTIONS: Optional[DirectionNumbers] = None


def default_directions() -> DirectionNumbers:
    """The bundled 64-dimension Joe-Kuo table (cached)."""
    global _DEFAULT_DIRECTIONS
    if _DEFAULT_DIRECTIONS is None:
        text = resources.files("qmcrisk.data").joinpath(_BUNDLED_TABLE).read_text()
        _DEFAULT_DIRECTIONS = DirectionNumbers.from_text(text)
    return _DEFAULT_DIRECTIONS


@dataclass(frozen=True)
class PointSetMeta:
    generator: str
    randomization: str = "none"
    seed: Optional[int] = None


@dataclass(frozen=True)
class PointSet:
    """An ordered batch of N points in [0,1)^d with provenance metadata."""

    points: np.ndarray  # (N, d) float64
    start_index: int = 0
    meta: PointSetMeta = field(default_factory=lambda: PointSetMeta("manual"))

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ConfigError("points must be a nonempty (N, d) array")
        if np.any(pts < 0.0) or np.any(pts >= 1.0):
            raise ConfigError("all coordinates must lie in [0, 1)")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_array(cls, arr, generator: str = "manual") -> "PointSet":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        return cls(points=a, meta=PointSetMeta(generator))

    def as_integers(self, bit_depth: int = DEFAULT_BIT_DEPTH) -> np.ndarray:
        """Coordinates on the 2^bit_depth dyadic grid, as uint64.

        Raises PrecisionError if any coordinate is not exactly representable
        with bit_depth binary digits.
        """
        scaled = self.points * float(1 << bit_depth)
        ints = np.floor(scaled)
        if not np.array_equal(ints, scaled):
            raise PrecisionError(
                f"coordinates are not dyadic with {bit_depth} bits; "
                "only base-2 generated point sets can be used here"
            )
        return ints.astype(np.uint64)


def radical_inverse(i: int, b: int = 2) -> float:
    """Base-b digit reversal of a nonnegative integer, in [0,1)."""
    if i < 0:
        raise ConfigError("index must be nonnegative")
    if b < 2:
        raise ConfigError("base must be >= 2")
    r = 0.0
    f = 1.0 / b
    while i > 0:
        i, digit = divmod(i, b)
        r += digit * f
        f /= b
    return r


def sobol_points(
    n: int,
    dim: int,
    start_index: int = 0,
    directions: Optional[DirectionNumbers] = None,
) -> PointSet:
    """Points start_index..start_index+n-1 of the base-2 Sobol' sequence.

    Dimension 1 is the van der Corput sequence (radical inverse base 2);
    index 0 is the origin.  Coordinates are exact multiples of
    2^-bit_depth.
    """
    dirs = directions if directions is not None else default_directions()
    if dim < 1 or dim > dirs.dimension_count:
        raise ConfigError(
            f"dimension {dim} exceeds direction-number table ({dirs.dimension_count})"
        )
    if n < 1:
        raise ConfigError("need at least one point")
    if start_index < 0:
        raise ConfigError("start_index must be nonnegative")
    last = start_index + n - 1
    if last >= (1 << dirs.bit_depth):
        raise ConfigError("index range exceeds the generator's bit depth")

    idx = np.arange(start_index, start_index + n, dtype=np.uint64)
    nbits = max(last.bit_length(), 1)
    pts = np.empty((n, dim), dtype=np.float64)
    scale = math.ldexp(1.0, -dirs.bit_depth)
    for j in range(1, dim + 1):
        v = dirs.integer_directions(j)
        x = np.zeros(n, dtype=np.uint64)
        for k in range(nbits):
            bit = (idx >> np.uint64(k)) & np.uint64(1)
            x ^= bit * v[k]
        pts[:, j - 1] = x * scale
    return PointSet(
        points=pts, start_index=start_index, meta=PointSetMeta(generator="sobol")
    )


def van_der_corput_points(n: int, start_index: int = 0) -> PointSet:
    """First dimension of the Sobol' sequence: the base-2 radical inverse."""
    ps = sobol_points(n, dim=1, start_index=start_index)
    return PointSet(
        points=ps.points, start_index=start_index, meta=PointSetMeta("van-der-corput")
    )


@dataclass(frozen=True)
class NetParams:
    """Parameters of the digital-net property to verify."""

    t: int
    m: int
    d: int
    b: int = 2

    def __post_init__(self) -> None:
        if self.t < 0 or self.m < 0 or self.t > self.m:
            raise ConfigError(f"need 0 <= t <= m, got t={self.t}, m={self.m}")
        if self.d < 1:
            raise ConfigError("d must be positive")
        if self.b < 2:
            raise ConfigError("base must be >= 2")


@dataclass(frozen=True)
class IntervalWitness:
    """One offending elementary interval: its box and its point count."""

    shape: tuple[int, ...]  # digit counts k_1..k_d
    cell: tuple[int, ...]  # cell coordinates t_1..t_d
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    count: int
    expected: int


@dataclass(frozen=True)
class NetCheckResult:
    ok: bool
    params: NetParams
    witness: Optional[IntervalWitness] = None

    def __bool__(self) -> bool:
        return self.ok


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All vectors of `parts` nonnegative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _cell_indices(coords: np.ndarray, k: int, b: int, ints: Optional[np.ndarray]) -> np.ndarray:
    if k == 0:
        return np.zeros(len(coords), dtype=np.int64)
    if ints is not None:
        # exact for dyadic points in base 2
        return (ints >> np.uint64(DEFAULT_BIT_DEPTH - k)).astype(np.int64)
    cells = np.floor(coords * float(b) ** k).astype(np.int64)
    return np.minimum(cells, b**k - 1)


def is_net(ps: PointSet, params: NetParams) -> NetCheckResult:
    """Exhaustively verify the (t,m,d)-net property in base b.

    Enumerates every shape vector (k_1..k_d) with sum m-t and counts points
    in every cell of the induced partition; passes iff every cell holds
    exactly b^t points.  On failure the result carries one offending
    interval and its count.
    """
    t, m, d, b = params.t, params.m, params.d, params.b
    if ps.dim != d:
        raise ConfigError(f"point set has dimension {ps.dim}, expected {d}")
    n_expected = b**m
    if ps.n != n_expected:
        raise ConfigError(f"point set has {ps.n} points, expected b^m = {n_expected}")

    n_shapes = math.comb(m - t + d - 1, d - 1)
    if n_shapes * n_expected > WORK_LIMIT:
        raise WorkLimitError(
            f"verification needs {n_shapes * n_expected:.2e} cell increments "
            f"(limit {WORK_LIMIT:.0e})"
        )

    ints = None
    if b == 2:
        try:
            ints = ps.as_integers()
        except PrecisionError:
            ints = None  # non-dyadic input: fall back to float binning
    n_cells = b ** (m - t)
    expected = b**t
    for shape in _compositions(m - t, d):
        cell = np.zeros(ps.n, dtype=np.int64)
        for j, k in enumerate(shape):
            col_ints = ints[:, j] if ints is not None else None
            cell = cell * (b**k) + _cell_indices(ps.points[:, j], k, b, col_ints)
        counts = np.bincount(cell, minlength=n_cells)
        bad = np.nonzero(counts != expected)[0]
        if bad.size:
            flat = int(bad[0])
            # decode mixed-radix flat index back to per-dimension cells
            cells = []
            rem = flat
            for k in reversed(shape):
                rem, tj = divmod(rem, b**k)
                cells.append(tj)
            cells.reverse()
            lower = tuple(tj / b**k for tj, k in zip(cells, shape))
            upper = tuple((tj + 1) / b**k for tj, k in zip(cells, shape))
            witness = IntervalWitness(
                shape=shape,
                cell=tuple(cells),
                lower=lower,
                upper=upper,
                count=int(counts[flat]),
                expected=expected,
            )
            return NetCheckResult(ok=False, params=params, witness=witness)
    return NetCheckResult(ok=True, params=params)


def find_t(ps: PointSet, m: int, d: int, b: int = 2) -> int:
    """Smallest t for which the point set is a (t,m,d)-net in base b.

    Terminates because t = m always passes (the whole cube is the only
    elementary interval of volume 1).
    """
    for t in range(m + 1):
        if is_net(ps, NetParams(t=t, m=m, d=d, b=b)).ok:
            return t
    raise AssertionError("unreachable: t = m must pass")


def star_discrepancy_1d(ps: PointSet) -> float:
    """Exact star discrepancy of a one-dimensional point set.

    max over sorted points x_(1) <= ... <= x_(N) of
    max(i/N - x_(i), x_(i) - (i-1)/N).
    """
    if ps.dim != 1:
        raise ConfigError(f"exact star discrepancy supported only for d=1, got d={ps.dim}")
    x = np.sort(ps.points[:, 0])
    n = len(x)
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(np.maximum(i / n - x, x - (i - 1) / n).max())
