"""Dense float64 matrices and a deterministic, platform-independent RNG.

Everything else in the package is built on two primitives defined here:

* ``Matrix`` -- a 2-D, C-contiguous ``float64`` numpy array. Row-major,
  64-bit everywhere; there is no 32-bit mode. Shape mismatches are hard
  errors, never broadcasts.
* ``SplitMix64`` -- a counter-based pseudo-random generator. The k-th raw
  output is ``mix64(seed + k * GOLDEN_GAMMA)`` where ``mix64`` is the
  SplitMix64 finalizer (xor-shift / multiply avalanche). Because each
  output depends only on (seed, k) through integer arithmetic mod 2^64,
  identical seeds give bit-identical streams on every platform, and whole
  blocks of outputs can be produced vectorized.
"""

from __future__ import annotations

import numpy as np

Matrix = np.ndarray

_U64 = np.uint64
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_MULT_1 = 0xBF58476D1CE4E5B9
_MIX_MULT_2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

# [0,1) doubles take the top 53 bits of each raw output.
_INV_2_53 = float(2.0 ** -53)


class ShapeError(ValueError):
    """Operand shapes do not satisfy the operation's contract."""


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a plain integer (mod 2^64)."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * _MIX_MULT_1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_MULT_2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *stream: int) -> int:
    """Derive an independent child seed from a master seed and stream tags.

    Hash-combines each tag into the running value, so (seed, tags...) maps
    to a well-spread 64-bit seed. Used to give every epoch / replica /
    scheduler its own reproducible stream.
    """
    z = mix64(seed)
    for word in stream:
        z = mix64(z ^ mix64((word + 1) * _GOLDEN_GAMMA))
    return z


def as_matrix(values) -> Matrix:
    """Coerce to a 2-D C-contiguous float64 array, validating rank."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def zeros(rows: int, cols: int) -> Matrix:
    if rows < 1 or cols < 1:
        raise ShapeError(f"matrix dims must be >= 1, got {rows}x{cols}")
    return np.zeros((rows, cols), dtype=np.float64)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with hard shape checking (no broadcasting).

    result[i][j] = sum_k a[i][k] * b[k][j]
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul requires 2-D operands, got ndim {a.ndim} and {b.ndim}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} times "
            f"{b.shape[0]}x{b.shape[1]} (inner dims {a.shape[1]} != {b.shape[0]})"
        )
    return a @ b


class SplitMix64:
    """Counter-based SplitMix64 generator.

    State is (seed, counter); output k is ``mix64(seed + (k+1)*GOLDEN_GAMMA)``.
    Single-owner: never share one instance across threads.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._count = 0

    def next_uint64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError(f"n must be >= 0, got {n}")
        ks = np.arange(self._count + 1, self._count + n + 1, dtype=_U64)
        self._count += n
        z = _U64(self.seed) + ks * _U64(_GOLDEN_GAMMA)
        z = (z ^ (z >> _U64(30))) * _U64(_MIX_MULT_1)
        z = (z ^ (z >> _U64(27))) * _U64(_MIX_MULT_2)
        return z ^ (z >> _U64(31))

    def random(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1)."""
        return (self.next_uint64(n) >> _U64(11)).astype(np.float64) * _INV_2_53

    def integer(self, bound: int) -> int:
        """One integer uniform on [0, bound). Modulo bias is < 2^-40 for the
        bounds used here (scheduling jitter), which is irrelevant and keeps
        the generator branch-free."""
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        return int(self.next_uint64(1)[0] % _U64(bound))

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of [0, n): stable argsort of raw keys."""
        return np.argsort(self.next_uint64(n), kind="stable")

    def normal(self, rows: int, cols: int) -> Matrix:
        """Standard-normal matrix via Box-Muller on pairs of uniforms."""
        if rows < 1 or cols < 1:
            raise ShapeError(f"matrix dims must be >= 1, got {rows}x{cols}")
        n = rows * cols
        half = (n + 1) // 2
        # u1 in (0, 1] so log() is finite; u2 in [0, 1).
        u1 = (self.next_uint64(half) >> _U64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * _INV_2_53
        u2 = self.random(half)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(rows, cols)


SeededRng = SplitMix64


def uniform(rng: SplitMix64, lo: float, hi: float, rows: int, cols: int) -> Matrix:
    """Matrix of uniforms on [lo, hi); advances the rng deterministically."""
    if not lo < hi:
        raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
    if rows < 1 or cols < 1:
        raise ShapeError(f"matrix dims must be >= 1, got {rows}x{cols}")
    u = rng.random(rows * cols).reshape(rows, cols)
    return lo + (hi - lo) * u
