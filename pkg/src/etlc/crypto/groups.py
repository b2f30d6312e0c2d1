"""Prime-order groups used by the crypto suite.

Two families share one multiplicative interface (``mul``, ``exp``, ``gexp``):

* :class:`CurveGroup` -- short-Weierstrass curve points (secp256k1 by default).
  Elements are affine ``(x, y)`` tuples, the identity is ``None``.
* :class:`SchnorrGroup` -- the order-``q`` subgroup of ``Z_p^*`` with
  ``p = 2q + 1``.  Elements are plain ints.  Only meant for toy parameters
  where brute-force oracles are tractable.

Element values are raw Python objects, so they hash and compare cheaply and
can be used as dict keys.  Never mix elements from different groups.
"""

from __future__ import annotations

from typing import Any, Optional, Tuple

Element = Any
Point = Optional[Tuple[int, int]]


class GroupError(ValueError):
    """Raised when bytes do not decode to a subgroup element."""


class CurveGroup:
    """Prime-order elliptic curve ``y^2 = x^3 + a*x + b`` over ``F_p``."""

    def __init__(self, name: str, p: int, a: int, b: int, gx: int, gy: int, n: int):
        self.name = name
        self.p = p
        self.a = a
        self.b = b
        self.order = n
        self.generator: Point = (gx, gy)
        self.identity: Point = None
        self.field_len = (p.bit_length() + 7) // 8
        self.scalar_len = (n.bit_length() + 7) // 8
        self.element_len = 1 + self.field_len
        self._g_table = self._fixed_base_table(self.generator)

    # -- Jacobian arithmetic ------------------------------------------------

    def _jdouble(self, P):
        X, Y, Z = P
        if Y == 0 or Z == 0:
            return (0, 1, 0)
        p = self.p
        YY = Y * Y % p
        S = 4 * X * YY % p
        M = 3 * X * X % p
        if self.a:
            M = (M + self.a * pow(Z, 4, p)) % p
        X3 = (M * M - 2 * S) % p
        Y3 = (M * (S - X3) - 8 * YY * YY) % p
        Z3 = 2 * Y * Z % p
        return (X3, Y3, Z3)

    def _jadd_affine(self, P, Q):
        """Mixed addition: Jacobian ``P`` plus affine ``Q``."""
        if Q is None:
            return P
        X1, Y1, Z1 = P
        x2, y2 = Q
        if Z1 == 0:
            return (x2, y2, 1)
        p = self.p
        Z1Z1 = Z1 * Z1 % p
        U2 = x2 * Z1Z1 % p
        S2 = y2 * Z1 * Z1Z1 % p
        H = (U2 - X1) % p
        R = (S2 - Y1) % p
        if H == 0:
            if R == 0:
                return self._jdouble(P)
            return (0, 1, 0)
        HH = H * H % p
        HHH = H * HH % p
        V = X1 * HH % p
        X3 = (R * R - HHH - 2 * V) % p
        Y3 = (R * (V - X3) - Y1 * HHH) % p
        Z3 = Z1 * H % p
        return (X3, Y3, Z3)

    def _to_affine(self, P) -> Point:
        X, Y, Z = P
        if Z == 0:
            return None
        p = self.p
        zi = pow(Z, -1, p)
        zi2 = zi * zi % p
        return (X * zi2 % p, Y * zi2 * zi % p)

    def _fixed_base_table(self, base: Point, window: int = 4):
        # table[i][j] = j * 16^i * base, affine
        rows = (self.order.bit_length() + window - 1) // window
        table = []
        row_base = base
        for _ in range(rows):
            row = [None]
            acc = (0, 1, 0)
            for _ in range((1 << window) - 1):
                acc = self._jadd_affine(acc, row_base)
                row.append(self._to_affine(acc))
            table.append(row)
            row_base = self._to_affine(self._jdouble(self._jdouble(self._jdouble(self._jdouble((*row_base, 1))))))
        return table

    # -- public interface ---------------------------------------------------

    def mul(self, P: Point, Q: Point) -> Point:
        if P is None:
            return Q
        return self._to_affine(self._jadd_affine((P[0], P[1], 1), Q))

    def inv(self, P: Point) -> Point:
        if P is None:
            return None
        return (P[0], (-P[1]) % self.p)

    def exp(self, P: Point, k: int) -> Point:
        k %= self.order
        if P is None or k == 0:
            return None
        if P == self.generator:
            return self.gexp(k)
        # width-4 window, left to right
        pre = [None, P]
        acc = (P[0], P[1], 1)
        for _ in range(14):
            acc = self._jadd_affine(acc, P)
            pre.append(self._to_affine(acc))
        R = (0, 1, 0)
        nibbles = []
        while k:
            nibbles.append(k & 15)
            k >>= 4
        for nib in reversed(nibbles):
            R = self._jdouble(self._jdouble(self._jdouble(self._jdouble(R))))
            if nib:
                R = self._jadd_affine(R, pre[nib])
        return self._to_affine(R)

    def gexp(self, k: int) -> Point:
        k %= self.order
        R = (0, 1, 0)
        i = 0
        while k:
            nib = k & 15
            if nib:
                R = self._jadd_affine(R, self._g_table[i][nib])
            k >>= 4
            i += 1
        return self._to_affine(R)

    def contains(self, P: Point) -> bool:
        if P is None:
            return True
        x, y = P
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        # cofactor 1: every curve point lies in the prime-order group
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0

    def encode(self, P: Point) -> bytes:
        """SEC1 compressed encoding; the identity is all-zero bytes."""
        if P is None:
            return bytes(self.element_len)
        x, y = P
        return bytes([2 + (y & 1)]) + x.to_bytes(self.field_len, "big")

    def decode(self, data: bytes) -> Point:
        if len(data) != self.element_len:
            raise GroupError("bad point length")
        if data == bytes(self.element_len):
            return None
        prefix = data[0]
        if prefix not in (2, 3):
            raise GroupError("bad point prefix")
        x = int.from_bytes(data[1:], "big")
        p = self.p
        if x >= p:
            raise GroupError("x out of range")
        rhs = (x * x * x + self.a * x + self.b) % p
        if p % 4 != 3:
            raise GroupError("unsupported field for square roots")
        y = pow(rhs, (p + 1) // 4, p)
        if y * y % p != rhs:
            raise GroupError("not on curve")
        if (y & 1) != (prefix & 1):
            y = p - y
        return (x, y)

    def __repr__(self) -> str:
        return f"CurveGroup({self.name})"


class SchnorrGroup:
    """Quadratic-residue subgroup of a safe-prime field."""

    def __init__(self, name: str, p: int, q: int, g: int):
        if p != 2 * q + 1:
            raise ValueError("expected a safe prime p = 2q + 1")
        self.name = name
        self.p = p
        self.order = q
        self.generator = g
        self.identity = 1
        self.scalar_len = (q.bit_length() + 7) // 8
        self.element_len = (p.bit_length() + 7) // 8

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def inv(self, a: int) -> int:
        return pow(a, -1, self.p)

    def exp(self, a: int, k: int) -> int:
        return pow(a, k % self.order, self.p)

    def gexp(self, k: int) -> int:
        return pow(self.generator, k % self.order, self.p)

    def contains(self, a: int) -> bool:
        return 0 < a < self.p and pow(a, self.order, self.p) == 1

    def encode(self, a: int) -> bytes:
        return a.to_bytes(self.element_len, "big")

    def decode(self, data: bytes) -> int:
        if len(data) != self.element_len:
            raise GroupError("bad element length")
        a = int.from_bytes(data, "big")
        if not self.contains(a):
            raise GroupError("not in the prime-order subgroup")
        return a

    def __repr__(self) -> str:
        return f"SchnorrGroup({self.name})"


SECP256K1 = CurveGroup(
    "secp256k1",
    p=2**256 - 2**32 - 977,
    a=0,
    b=7,
    gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
    n=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
)

# 64-bit safe prime; g = 4 is a square, hence generates the order-q subgroup.
TOY64 = SchnorrGroup("toy64", p=18446744073709550147, q=9223372036854775073, g=4)

# Small enough to enumerate every exponent.
TINY = SchnorrGroup("tiny", p=2039, q=1019, g=4)

GROUPS = {grp.name: grp for grp in (SECP256K1, TOY64, TINY)}


def get_group(name: str):
    try:
        return GROUPS[name]
    except KeyError:
        raise KeyError(f"unknown group {name!r}; expected one of {sorted(GROUPS)}") from None
