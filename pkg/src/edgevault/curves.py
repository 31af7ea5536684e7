"""Long-Weierstrass curves over prime fields and unique point selection.

Points here are identity material only: they are selected, sealed, and
hashed, never added or multiplied.  The curve lives over F_p (p an odd prime,
small test primes through 256-bit) rather than the reals so that point
encoding is exact and uniqueness is decidable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import CurveError, GroupFullError

__all__ = [
    "CurvePoint",
    "WeierstrassCurve",
    "discriminant",
    "is_on_curve",
    "sqrt_mod",
    "select_unique_point",
    "point_to_bytes",
    "point_from_bytes",
    "standard_curve",
    "tiny_curve",
    "P256",
]

MAX_SELECT_TRIES = 4096

#: 256-bit prime (p = 2^256 - 2^32 - 977, p % 4 == 3 for the fast sqrt path)
P256 = 2 ** 256 - 2 ** 32 - 977

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def standard_curve() -> "WeierstrassCurve":
    """Default production-scale curve: y^2 = x^3 + 7 over the 256-bit prime."""
    return WeierstrassCurve.short(P256, 0, 7)


def tiny_curve() -> "WeierstrassCurve":
    """Desk-scale test curve y^2 = x^3 + x + 1 over F_5 (8 affine points)."""
    return WeierstrassCurve.short(5, 1, 1)


def _is_probable_prime(n: int) -> bool:
    """Miller-Rabin; deterministic for n < 3.3e24 via fixed witnesses."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class CurvePoint:
    """An affine point (x, y) or the distinguished point at infinity."""

    x: int | None
    y: int | None

    @classmethod
    def infinity(cls) -> "CurvePoint":
        return cls(None, None)

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def as_tuple(self) -> tuple[int, int]:
        if self.is_infinity:
            raise ValueError("the infinity point has no affine coordinates")
        return (self.x, self.y)


def discriminant(p: int, a1: int, a2: int, a3: int, a4: int, a6: int) -> int:
    """Discriminant of y^2 + a1*x*y + a3*y = x^3 + a2*x^2 + a4*x + a6 over F_p.

    Computed through the standard b-quantities:
    b2 = a1^2 + 4*a2, b4 = 2*a4 + a1*a3, b6 = a3^2 + 4*a6,
    b8 = a1^2*a6 + 4*a2*a6 - a1*a3*a4 + a2*a3^2 - a4^2, then
    delta = -b2^2*b8 - 8*b4^3 - 27*b6^2 + 9*b2*b4*b6 (mod p).
    """
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    delta = -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    return delta % p


@dataclass(frozen=True)
class WeierstrassCurve:
    """A non-singular long-Weierstrass curve over F_p.

    Construction rejects composite or tiny moduli and singular coefficient
    sets (discriminant zero); coefficients are reduced mod p.
    """

    p: int
    a1: int = 0
    a2: int = 0
    a3: int = 0
    a4: int = 0
    a6: int = 0

    def __post_init__(self):
        if self.p <= 3 or not _is_probable_prime(self.p):
            raise CurveError(f"modulus must be an odd prime > 3, got {self.p}")
        for name in ("a1", "a2", "a3", "a4", "a6"):
            object.__setattr__(self, name, getattr(self, name) % self.p)
        if discriminant(self.p, self.a1, self.a2, self.a3, self.a4, self.a6) == 0:
            raise CurveError("singular curve: discriminant is zero")

    @classmethod
    def short(cls, p: int, a: int, b: int) -> "WeierstrassCurve":
        """Short form y^2 = x^3 + a*x + b."""
        return cls(p=p, a4=a, a6=b)

    @property
    def discriminant(self) -> int:
        return discriminant(self.p, self.a1, self.a2, self.a3, self.a4, self.a6)

    def coordinate_width(self) -> int:
        """Bytes needed for one reduced coordinate."""
        return (self.p.bit_length() + 7) // 8

    def rhs_completed_square(self, x: int) -> int:
        """4*(x^3 + a2*x^2 + a4*x + a6) + (a1*x + a3)^2 mod p.

        Equals (2y + a1*x + a3)^2 for points on the curve, turning the curve
        equation into a single square root in y.
        """
        p = self.p
        cubic = (x * x % p * x + self.a2 * x * x + self.a4 * x + self.a6) % p
        lin = (self.a1 * x + self.a3) % p
        return (4 * cubic + lin * lin) % p

    def to_json_dict(self) -> dict:
        return {
            "p": hex(self.p),
            "a1": hex(self.a1),
            "a2": hex(self.a2),
            "a3": hex(self.a3),
            "a4": hex(self.a4),
            "a6": hex(self.a6),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "WeierstrassCurve":
        return cls(**{k: int(str(d[k]), 0) for k in ("p", "a1", "a2", "a3", "a4", "a6")})


def is_on_curve(curve: WeierstrassCurve, point: CurvePoint) -> bool:
    """True for infinity, else checks the curve equation with reduced coords."""
    if point.is_infinity:
        return True
    p = curve.p
    x, y = point.x % p, point.y % p
    lhs = (y * y + curve.a1 * x * y + curve.a3 * y) % p
    rhs = (x * x % p * x + curve.a2 * x * x + curve.a4 * x + curve.a6) % p
    return lhs == rhs


def sqrt_mod(a: int, p: int) -> int | None:
    """A square root of a mod odd prime p via Tonelli-Shanks, or None.

    Uses the direct exponent when p % 4 == 3.
    """
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    # Tonelli-Shanks: write p-1 = q * 2^s with q odd.
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c = s, pow(z, q, p)
    t, r = pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        t2, i = t, 0
        while t2 != 1:
            t2 = (t2 * t2) % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, (b * b) % p
        t, r = (t * c) % p, (r * b) % p
    return r


def select_unique_point(
    curve: WeierstrassCurve,
    used_points: set[tuple[int, int]],
    rng_seed: int,
    max_tries: int = MAX_SELECT_TRIES,
) -> CurvePoint:
    """Draw a fresh affine point not in ``used_points``, deterministic per seed.

    Random x, then the curve equation is solved for y by completing the
    square and taking a modular square root; non-residues and collisions are
    retried.  Exhausting ``max_tries`` raises GroupFullError (realistic only
    for tiny fields).
    """
    rng = random.Random(rng_seed)
    p = curve.p
    inv2 = pow(2, -1, p)
    for _ in range(max_tries):
        x = rng.randrange(p)
        t = sqrt_mod(curve.rhs_completed_square(x), p)
        if t is None:
            continue
        if rng.getrandbits(1):
            t = (-t) % p
        y = (t - curve.a1 * x - curve.a3) * inv2 % p
        if (x, y) in used_points:
            continue
        point = CurvePoint(x, y)
        assert is_on_curve(curve, point)
        return point
    raise GroupFullError(f"no fresh point found in {max_tries} tries")


def point_to_bytes(curve: WeierstrassCurve, point: CurvePoint) -> bytes:
    """Fixed-width big-endian x ‖ y; width = ceil(bits(p)/8) per coordinate."""
    if point.is_infinity:
        raise ValueError("cannot serialize the infinity point as identity material")
    w = curve.coordinate_width()
    return point.x.to_bytes(w, "big") + point.y.to_bytes(w, "big")


def point_from_bytes(curve: WeierstrassCurve, data: bytes) -> CurvePoint:
    w = curve.coordinate_width()
    if len(data) != 2 * w:
        raise ValueError(f"expected {2 * w} point bytes, got {len(data)}")
    return CurvePoint(int.from_bytes(data[:w], "big"), int.from_bytes(data[w:], "big"))
