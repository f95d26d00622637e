"""
Prime-field arithmetic and Shamir t-n threshold secret sharing.

Shares support pointwise addition (degree preserved) and local squaring
(degree doubled); reconstruction is Lagrange interpolation at x = 0 and
redundant share sets can be searched for a majority polynomial to expose
outliers.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import galois
import numpy as np


class SharingError(ValueError):
    """Base class for secret sharing failures."""


class ParameterError(SharingError):
    """Invalid sharing parameters or share sets."""


class InsufficientSharesError(SharingError):
    """Too few shares for the requested polynomial degree."""


class AlignmentError(SharingError):
    """Shares combined pointwise do not belong to the same worker or degree."""


class DegreeOverflowError(SharingError):
    """A share product would exceed the reconstructable degree."""


class CannotDetectError(SharingError):
    """No redundancy: outliers cannot be detected."""


class AmbiguityError(SharingError):
    """No polynomial is supported by a majority of the shares."""


@lru_cache(maxsize=None)
def field_for(modulus: int):
    """galois field class for a prime modulus (cached per modulus)."""
    # GF() also builds extension fields for prime powers; only GF(p) is modular arithmetic
    if modulus < 3 or not galois.is_prime(modulus):
        raise ParameterError(f"Modulus {modulus} is not an odd prime")
    return galois.GF(modulus)


def check_modulus(modulus: int, max_voters: int) -> None:
    """
    Reject moduli too small for the sums a referendum produces.

    The outcome and checksum of max_voters votes embedded as {1, p-1}
    must not wrap around, which needs p > 4 * max_voters**2.
    """
    if modulus <= 2:
        raise ParameterError(f"Modulus must be an odd prime, got {modulus}")
    field_for(modulus)
    if modulus <= 4 * max_voters ** 2:
        raise ParameterError(
            f"Modulus {modulus} too small for {max_voters} voters (needs p > {4 * max_voters ** 2})"
        )


@dataclass(frozen=True)
class FieldElement:
    """Residue in [0, modulus)."""

    value: int
    modulus: int

    def __post_init__(self):
        if not 0 <= self.value < self.modulus:
            raise ParameterError(f"{self.value} is not a canonical residue modulo {self.modulus}")

    @classmethod
    def of(cls, value: int, modulus: int) -> "FieldElement":
        """Embed any integer (negative values wrap to p - |value|)."""
        return cls(value % modulus, modulus)

    @classmethod
    def from_gf(cls, element, modulus: int) -> "FieldElement":
        return cls(int(element), modulus)

    def gf(self):
        return field_for(self.modulus)(self.value)

    def to_signed(self) -> int:
        """Representative in (-p/2, p/2)."""
        return self.value - self.modulus if self.value > self.modulus // 2 else self.value

    def _check(self, other: "FieldElement"):
        if other.modulus != self.modulus:
            raise AlignmentError(f"Field mismatch: {self.modulus} vs {other.modulus}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement.from_gf(self.gf() + other.gf(), self.modulus)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement.from_gf(self.gf() * other.gf(), self.modulus)

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True)
class Share:
    """
    One polynomial evaluation held by one worker.

    power counts how many share polynomials were multiplied into this one:
    1 for a fresh share (degree t-1), 2 after squaring (degree 2(t-1)).
    """

    eval_point: FieldElement
    value: FieldElement
    degree_hint: int
    power: int = 1

    def __post_init__(self):
        if self.eval_point.value == 0:
            raise ParameterError("Evaluation point 0 is reserved for the secret")
        if self.eval_point.modulus != self.value.modulus:
            raise ParameterError("Share coordinates live in different fields")
        if self.power not in (1, 2):
            raise ParameterError(f"Unsupported share power {self.power}")

    @classmethod
    def of(cls, x: int, y: int, modulus: int, degree_hint: int, power: int = 1) -> "Share":
        return cls(FieldElement.of(x, modulus), FieldElement.of(y, modulus), degree_hint, power)

    @property
    def modulus(self) -> int:
        return self.value.modulus


@dataclass(frozen=True)
class SharingParams:
    """
    Threshold t, share count n, prime modulus and one evaluation point per worker.

    Position j of eval_points belongs to worker w_(j+1).
    """

    t: int
    n: int
    modulus: int
    eval_points: Tuple[FieldElement, ...]

    def __post_init__(self):
        if self.t < 1 or self.t > self.n:
            raise ParameterError(f"Threshold must satisfy 1 <= t <= n, got t={self.t}, n={self.n}")
        if self.n >= self.modulus:
            raise ParameterError(f"Share count {self.n} must be below the modulus {self.modulus}")
        if self.n < 2 * self.t - 1:
            raise ParameterError(
                f"n={self.n} workers cannot reconstruct a degree-{2 * (self.t - 1)} checksum "
                f"(needs n >= 2t-1 = {2 * self.t - 1})"
            )
        if len(self.eval_points) != self.n:
            raise ParameterError(f"Expected {self.n} evaluation points, got {len(self.eval_points)}")
        values = [p.value for p in self.eval_points]
        if len(set(values)) != len(values):
            raise ParameterError("Evaluation points must be pairwise distinct")
        if 0 in values:
            raise ParameterError("Evaluation point 0 is reserved for the secret")
        if any(p.modulus != self.modulus for p in self.eval_points):
            raise ParameterError("Evaluation points live in a different field")
        field_for(self.modulus)

    @classmethod
    def default(cls, t: int, n: int, modulus: int) -> "SharingParams":
        """Worker w_j evaluates at x = j (1-based)."""
        return cls(t, n, modulus, tuple(FieldElement.of(j, modulus) for j in range(1, n + 1)))

    @property
    def share_degree(self) -> int:
        return self.t - 1

    @property
    def checksum_degree(self) -> int:
        return 2 * (self.t - 1)


def share_secret(secret: FieldElement, params: SharingParams, randomness) -> List[Share]:
    """
    Split a secret into n shares of a random degree-(t-1) polynomial.

    Args:
        secret: Value placed at f(0)
        params: Sharing parameters
        randomness: Seeded source exposing numpy Generator's integers(low, high, size)

    Returns:
        Shares in worker order
    """
    if secret.modulus != params.modulus:
        raise ParameterError(f"Secret lives in field {secret.modulus}, params use {params.modulus}")

    GF = field_for(params.modulus)
    degree = params.share_degree
    # Random coefficients above the constant term
    coefficients = np.asarray(randomness.integers(0, params.modulus, size=degree), dtype=np.int64)
    poly = galois.Poly(GF([secret.value] + [int(c) for c in coefficients]), order="asc")

    # Evaluate at every worker's point
    xs = GF([p.value for p in params.eval_points])
    ys = poly(xs)
    return [
        Share(x, FieldElement.from_gf(y, params.modulus), degree)
        for x, y in zip(params.eval_points, ys)
    ]


def _points(shares: Sequence[Share]):
    if not shares:
        raise InsufficientSharesError("No shares given")
    modulus = shares[0].modulus
    if any(s.modulus != modulus for s in shares):
        raise ParameterError("Shares live in different fields")
    hints = {s.degree_hint for s in shares}
    if len(hints) != 1:
        raise ParameterError(f"Shares carry mismatching degree hints {sorted(hints)}")
    xs = [s.eval_point.value for s in shares]
    if len(set(xs)) != len(xs):
        raise ParameterError("Duplicate evaluation points")
    GF = field_for(modulus)
    return GF, GF(xs), GF([s.value.value for s in shares])


def reconstruct(shares: Sequence[Share], degree: int) -> FieldElement:
    """
    Interpolate the first degree+1 shares and return f(0).

    Raises InsufficientSharesError when fewer than degree+1 shares are given.
    """
    if len(shares) < degree + 1:
        raise InsufficientSharesError(
            f"Degree-{degree} reconstruction needs {degree + 1} shares, got {len(shares)}"
        )
    GF, xs, ys = _points(shares)
    if degree < shares[0].degree_hint:
        raise InsufficientSharesError(
            f"Shares encode a degree-{shares[0].degree_hint} polynomial, "
            f"reconstruction at degree {degree} would be underdetermined"
        )
    # Extra shares are ignored
    poly = galois.lagrange_poly(xs[: degree + 1], ys[: degree + 1])
    return FieldElement.from_gf(poly(GF(0)), shares[0].modulus)


def add_shares(a: Share, b: Share) -> Share:
    """Pointwise sum; reconstructs to the sum of the secrets."""
    if a.eval_point != b.eval_point:
        raise AlignmentError(f"Evaluation points differ: {a.eval_point.value} vs {b.eval_point.value}")
    if a.degree_hint != b.degree_hint or a.power != b.power:
        raise AlignmentError(f"Degree hints differ: {a.degree_hint} vs {b.degree_hint}")
    return Share(a.eval_point, a.value + b.value, a.degree_hint, a.power)


def sum_shares(shares: Iterable[Share]) -> Share:
    """Pointwise sum of a non-empty share sequence."""
    shares = list(shares)
    if not shares:
        raise InsufficientSharesError("Cannot sum an empty share list")
    total = shares[0]
    for share in shares[1:]:
        total = add_shares(total, share)
    return total


def square_share(a: Share) -> Share:
    """Local square; the underlying polynomial degree doubles."""
    if a.power != 1:
        raise DegreeOverflowError(
            f"Share at x={a.eval_point.value} is already a product of degree {a.degree_hint}"
        )
    return Share(a.eval_point, a.value * a.value, 2 * a.degree_hint, 2)


def zero_share(eval_point: FieldElement, degree_hint: int, power: int = 1) -> Share:
    """Share of the empty sum held at one evaluation point."""
    return Share(eval_point, FieldElement(0, eval_point.modulus), degree_hint, power)


def detect_outliers(shares: Sequence[Share], degree: int) -> Tuple[FieldElement, Set[int]]:
    """
    Find the degree-bounded polynomial agreeing with the most shares.

    Every (degree+1)-subset is interpolated and scored by how many shares
    it passes through. Ties go to the lexicographically smallest agreeing
    set of evaluation points.

    Args:
        shares: Redundant shares (at least degree+2)
        degree: Polynomial degree bound

    Returns:
        (f(0) of the consensus polynomial, evaluation points of disagreeing shares)
    """
    if len(shares) < degree + 2:
        raise CannotDetectError(
            f"{len(shares)} shares of a degree-{degree} polynomial carry no redundancy"
        )
    GF, xs, ys = _points(shares)
    modulus = shares[0].modulus

    best: Optional[Tuple[int, Tuple[int, ...]]] = None
    best_secret = None
    for subset in itertools.combinations(range(len(shares)), degree + 1):
        idx = list(subset)
        poly = galois.lagrange_poly(xs[idx], ys[idx])
        agree = poly(xs) == ys
        agreeing = tuple(sorted(int(x) for x, ok in zip(xs, agree) if ok))
        # Most agreement first, then smallest point set
        key = (-len(agreeing), agreeing)
        if best is None or key < best:
            best = key
            best_secret = poly(GF(0))

    # Any degree+1 points fit some polynomial; agreement must exceed that
    count = -best[0]
    if count <= degree + 1:
        raise AmbiguityError(
            f"Best degree-{degree} polynomial agrees with only {count} of {len(shares)} shares"
        )
    agreeing = set(best[1])
    outliers = {int(x) for x in xs if int(x) not in agreeing}
    return FieldElement.from_gf(best_secret, modulus), outliers
