"""Function spaces on which the transfer operator acts.

Two representations are provided:

* :class:`CylinderFunction` -- a locally constant function on the one-sided
  shift ``{0, ..., d-1}^N`` depending only on the first ``k`` coordinates.
* :class:`CircleGridFunction` -- a function on the circle sampled at
  ``x_j = j / N`` and extended off-grid by periodic linear interpolation.

Word order
----------
A word ``w = (x_0, ..., x_{k-1})`` is stored at index
``sum(x_i * d**(k-1-i))``, i.e. lexicographic order with ``x_0`` the most
significant digit.  For ``d=2, k=2`` the order is ``00, 01, 10, 11``.  With this
convention

* embedding depth ``j`` into depth ``k`` is ``np.repeat(c, d**(k-j))``;
* composition with the shift, ``f o T``, is ``np.tile(c, d)``;
* the preimage word ``a . prefix(w)`` of ``w`` has index ``a*d**(k-1) + w // d``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ResourceError, ValidationError

MAX_ALPHABET = 16
DEFAULT_DEPTH_CAP = 2**20


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ShiftSpace:
    """The depth-``k`` cylinder functions on the full shift over ``d`` symbols."""

    d: int
    k: int

    def __post_init__(self):
        if not (2 <= self.d <= MAX_ALPHABET):
            raise ValidationError(f"alphabet size must be in [2, {MAX_ALPHABET}], got {self.d}")
        if self.k < 1:
            raise ValidationError(f"cylinder depth must be >= 1, got {self.k}")

    @property
    def dim(self) -> int:
        return self.d**self.k

    def word(self, index: int) -> tuple[int, ...]:
        """Symbols ``(x_0, ..., x_{k-1})`` of the word stored at ``index``."""
        if not 0 <= index < self.dim:
            raise ValidationError(f"word index {index} out of range for d^k={self.dim}")
        digits = []
        for _ in range(self.k):
            index, r = divmod(index, self.d)
            digits.append(r)
        return tuple(reversed(digits))

    def index(self, word: Sequence[int]) -> int:
        if len(word) != self.k:
            raise ValidationError(f"expected a word of length {self.k}, got {len(word)}")
        idx = 0
        for x in word:
            if not 0 <= x < self.d:
                raise ValidationError(f"symbol {x} outside alphabet of size {self.d}")
            idx = idx * self.d + int(x)
        return idx

    def words(self) -> np.ndarray:
        """All words as a ``(d**k, k)`` integer array in storage order."""
        return np.array([self.word(i) for i in range(self.dim)], dtype=int).reshape(self.dim, self.k)

    def deeper(self, extra: int = 1) -> "ShiftSpace":
        return ShiftSpace(self.d, self.k + extra)


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """Real function on the shift that depends on the first ``space.k`` symbols."""

    space: ShiftSpace
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = _frozen(self.coeffs).ravel()
        if coeffs.size != self.space.dim:
            raise ValidationError(
                f"expected {self.space.dim} coefficients for d={self.space.d}, k={self.space.k}, got {coeffs.size}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    # construction -----------------------------------------------------------------
    @classmethod
    def from_coeffs(cls, d: int, k: int, coeffs) -> "CylinderFunction":
        return cls(ShiftSpace(d, k), np.asarray(coeffs, dtype=float))

    @classmethod
    def constant(cls, d: int, k: int, value: float) -> "CylinderFunction":
        return cls(ShiftSpace(d, k), np.full(d**k, float(value)))

    @classmethod
    def indicator(cls, d: int, word: Sequence[int], k: int | None = None) -> "CylinderFunction":
        """Indicator of the cylinder ``[word]``, optionally embedded at depth ``k``."""
        space = ShiftSpace(d, len(word))
        c = np.zeros(space.dim)
        c[space.index(word)] = 1.0
        f = cls(space, c)
        return f if k is None else f.embed(k)

    @classmethod
    def from_callable(cls, d: int, k: int, fn: Callable[[tuple[int, ...]], float]) -> "CylinderFunction":
        space = ShiftSpace(d, k)
        return cls(space, np.array([fn(space.word(i)) for i in range(space.dim)]))

    # basic access -----------------------------------------------------------------
    @property
    def d(self) -> int:
        return self.space.d

    @property
    def k(self) -> int:
        return self.space.k

    def __call__(self, point: Sequence[int]) -> float:
        """Evaluate at a point given by (at least ``k``) leading symbols."""
        if len(point) < self.k:
            raise ValidationError(f"need at least {self.k} symbols to evaluate a depth-{self.k} function")
        return float(self.coeffs[self.space.index(tuple(point[: self.k]))])

    def __repr__(self):
        return f"CylinderFunction(d={self.d}, k={self.k}, coeffs={np.array2string(self.coeffs, precision=6)})"

    def embed(self, k: int) -> "CylinderFunction":
        """The same function viewed at depth ``k >= self.k``."""
        if k < self.k:
            raise ValidationError(f"cannot embed depth {self.k} into shallower depth {k}")
        if k == self.k:
            return self
        return CylinderFunction(ShiftSpace(self.d, k), np.repeat(self.coeffs, self.d ** (k - self.k)))

    def reduce(self, j: int, atol: float = 1e-12) -> "CylinderFunction":
        """Drop trailing coordinates the function does not depend on.

        Raises :class:`ValidationError` if the values differ by more than
        ``atol`` across the discarded coordinates.
        """
        if j > self.k or j < 1:
            raise ValidationError(f"cannot reduce depth {self.k} to {j}")
        table = self.coeffs.reshape(self.d**j, self.d ** (self.k - j))
        spread = np.max(table.max(axis=1) - table.min(axis=1))
        if spread > atol:
            raise ValidationError(f"function depends on coordinates beyond depth {j} (spread {spread:.3e})")
        return CylinderFunction(ShiftSpace(self.d, j), table[:, 0])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    # arithmetic sugar, delegating to pointwise -------------------------------------
    def __add__(self, other):
        return pointwise("add", self, other)

    def __radd__(self, other):
        return pointwise("add", self, other)

    def __sub__(self, other):
        return pointwise("sub", self, other)

    def __rsub__(self, other):
        return pointwise("sub", _as_function(other, self), self)

    def __mul__(self, other):
        return pointwise("mul", self, other)

    def __rmul__(self, other):
        return pointwise("mul", self, other)

    def __neg__(self):
        return pointwise("scale", self, -1.0)

    def __truediv__(self, other):
        if np.isscalar(other):
            return pointwise("scale", self, 1.0 / float(other))
        return NotImplemented

    # serialization -----------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, data: dict) -> "CylinderFunction":
        try:
            return cls.from_coeffs(int(data["d"]), int(data["k"]), data["coeffs"])
        except KeyError as exc:
            raise ValidationError(f"cylinder JSON is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CylinderFunction":
        return cls.from_dict(json.loads(text))


def _as_function(value, like: CylinderFunction) -> CylinderFunction:
    if isinstance(value, CylinderFunction):
        return value
    if np.isscalar(value):
        return CylinderFunction.constant(like.d, 1, float(value))
    raise ValidationError(f"cannot combine CylinderFunction with {type(value).__name__}")


def common_depth(*fs: CylinderFunction) -> list[CylinderFunction]:
    """Embed all operands at the largest depth among them."""
    ds = {f.d for f in fs}
    if len(ds) != 1:
        raise ValidationError(f"operands live on different alphabets: {sorted(ds)}")
    k = max(f.k for f in fs)
    return [f.embed(k) for f in fs]


_BINARY = {"add": np.add, "sub": np.subtract, "mul": np.multiply}


def pointwise(op: str, f: CylinderFunction, g=None) -> CylinderFunction:
    """Coefficientwise ``add | sub | mul | scale | log | exp``.

    Binary operands are embedded to their common depth; ``scale`` takes a real
    number as ``g``; ``log`` requires a strictly positive operand.
    """
    if op in _BINARY:
        if g is None:
            raise ValidationError(f"operation {op!r} needs two operands")
        f, g = common_depth(f, _as_function(g, f))
        return CylinderFunction(f.space, _BINARY[op](f.coeffs, g.coeffs))
    if op == "scale":
        if g is None or not np.isscalar(g):
            raise ValidationError("scale needs a real factor")
        return CylinderFunction(f.space, float(g) * f.coeffs)
    if op == "exp":
        return CylinderFunction(f.space, np.exp(f.coeffs))
    if op == "log":
        bad = np.flatnonzero(~(f.coeffs > 0))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"log of non-positive value {f.coeffs[i]!r} on cylinder {list(f.space.word(i))}")
        return CylinderFunction(f.space, np.log(f.coeffs))
    raise ValidationError(f"unknown pointwise operation {op!r}")


def shift_compose(f: CylinderFunction) -> CylinderFunction:
    """``f o T`` as a depth ``k+1`` function: ``(f o T)(x) = f(x_1, ..., x_k)``."""
    return CylinderFunction(f.space.deeper(), np.tile(f.coeffs, f.d))


def birkhoff_sum(f: CylinderFunction, n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> CylinderFunction:
    """``S_n f = sum_{j<n} f o T^j`` at depth ``k + n - 1``."""
    if n < 1:
        raise ValidationError(f"Birkhoff sum length must be >= 1, got {n}")
    depth = f.k + n - 1
    if f.d**depth > depth_cap:
        raise ResourceError(f"Birkhoff sum needs d^{depth} = {f.d**depth} cylinders, above cap {depth_cap}")
    total = f.embed(depth).coeffs.copy()
    g = f
    for _ in range(1, n):
        g = shift_compose(g)
        total += g.embed(depth).coeffs
    return CylinderFunction(ShiftSpace(f.d, depth), total)


# --------------------------------------------------------------------------------------
# circle


def interpolate_periodic(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise-linear periodic interpolation of grid values at points ``x``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    u = np.mod(np.asarray(x, dtype=float), 1.0) * n
    i0 = np.floor(u).astype(int) % n
    w = u - np.floor(u)
    return (1.0 - w) * values[i0] + w * values[(i0 + 1) % n]


@dataclass(frozen=True, eq=False)
class CircleGridFunction:
    """Values at ``x_j = j/N`` of a function on the circle."""

    N: int
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values).ravel()
        if self.N < 2 or vals.size != self.N:
            raise ValidationError(f"expected {self.N} grid values, got {vals.size}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, N: int, fn: Callable[[np.ndarray], np.ndarray]) -> "CircleGridFunction":
        x = np.arange(N) / N
        return cls(N, np.broadcast_to(np.asarray(fn(x), dtype=float), (N,)))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    def __call__(self, x):
        return interpolate_periodic(self.values, x)

    def compose_T(self, d: int) -> "CircleGridFunction":
        """``f o T`` for ``T(x) = d x mod 1``; exact on the grid."""
        idx = (d * np.arange(self.N)) % self.N
        return CircleGridFunction(self.N, self.values[idx])

    def to_dict(self) -> dict:
        return {"N": self.N, "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, data: dict) -> "CircleGridFunction":
        try:
            return cls(int(data["N"]), np.asarray(data["values"], dtype=float))
        except KeyError as exc:
            raise ValidationError(f"circle JSON is missing field {exc}") from None
