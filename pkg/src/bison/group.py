"""Prime-order group arithmetic with two interchangeable backends.

The production backend is ristretto255 with SHA-512 as its companion hash,
driven through the system libsodium. The test backend is the order-11
subgroup of the multiplicative group mod 23, small enough that every
protocol property can be checked by exhaustive enumeration and every
expected value recomputed with ``pow``.

Both backends expose the same surface: hash-to-group, hash-to-scalar,
uniform scalar sampling, scalar multiplication, scalar inversion, and
fixed-length canonical encodings. Group elements exclude the identity and
scalars exclude zero, so blinding is always invertible.

Scalar multiplications and hash evaluations can be tallied with
:func:`count_ops`; the derivation pipeline is expected to cost exactly four
of each, and the benchmark harness asserts that.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import hashlib
import secrets
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .encoding import b64u_decode, b64u_encode

__all__ = [
    "GroupDescriptor",
    "GroupElement",
    "GroupScalar",
    "Group",
    "TestGroup",
    "Ristretto255Group",
    "OpCounter",
    "count_ops",
    "record_hash_eval",
    "counted_sha512",
    "GroupError",
    "DecodeError",
]


class GroupError(Exception):
    """Invalid group value or misuse of the group API."""


class DecodeError(GroupError):
    """A byte string is not the canonical encoding of a group value."""


# ---------------------------------------------------------------------------
# Operation counting


@dataclass
class OpCounter:
    """Tally of scalar multiplications and hash evaluations in a counting scope."""

    scalar_mults: int = 0
    hash_evals: int = 0


_active_counter: ContextVar[Optional[OpCounter]] = ContextVar("bison_op_counter", default=None)


@contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Count scalar mults and hash evaluations performed in this scope.

    Scopes are confined to a single thread of execution; the counter starts
    at zero and only ever increases while the scope is open.
    """
    counter = OpCounter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


def _record_scalar_mult() -> None:
    counter = _active_counter.get()
    if counter is not None:
        counter.scalar_mults += 1


def record_hash_eval(count: int = 1) -> None:
    """Attribute ``count`` hash evaluations to the active counting scope.

    Used by callers whose hashing happens inside a primitive we cannot hook
    (e.g. the message digest inside a signature scheme).
    """
    counter = _active_counter.get()
    if counter is not None:
        counter.hash_evals += count


def counted_sha512(*parts: bytes) -> bytes:
    """SHA-512 over the concatenation of ``parts``, tallied as one hash evaluation."""
    h = hashlib.sha512()
    for part in parts:
        h.update(part)
    record_hash_eval()
    return h.digest()


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True)
class GroupDescriptor:
    name: str
    order: int  # prime
    element_byte_length: int
    scalar_byte_length: int


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A non-identity element, held as its canonical encoding."""

    group: "Group" = field(repr=False)
    data: bytes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.group.descriptor.name == other.group.descriptor.name and self.data == other.data

    def __hash__(self) -> int:
        return hash((self.group.descriptor.name, self.data))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"GroupElement({self.group.descriptor.name}, {self.data.hex()})"


@dataclass(frozen=True, eq=False)
class GroupScalar:
    """A nonzero scalar mod the group order."""

    group: "Group" = field(repr=False)
    value: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupScalar):
            return NotImplemented
        return self.group.descriptor.name == other.group.descriptor.name and self.value == other.value

    def __hash__(self) -> int:
        return hash((self.group.descriptor.name, self.value))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"GroupScalar({self.group.descriptor.name}, {self.value})"


def _check_same_group(a: "Group", value_group: "Group", what: str) -> None:
    if a.descriptor.name != value_group.descriptor.name:
        raise GroupError(f"{what} belongs to group {value_group.descriptor.name!r}, "
                         f"expected {a.descriptor.name!r}")


# ---------------------------------------------------------------------------
# Backend base


class Group:
    """Common behaviour for both backends; subclasses supply the raw arithmetic."""

    descriptor: GroupDescriptor

    # -- scalars ------------------------------------------------------------

    def scalar(self, value: int) -> GroupScalar:
        order = self.descriptor.order
        value %= order
        if value == 0:
            raise GroupError("scalar must be nonzero mod the group order")
        return GroupScalar(self, value)

    def random_scalar(self, rng=None) -> GroupScalar:
        """Uniform over the nonzero scalars; zero is rejection-sampled away."""
        nbits = self.descriptor.order.bit_length() + 256  # headroom makes mod-bias negligible
        while True:
            if rng is None:
                raw = int.from_bytes(secrets.token_bytes((nbits + 7) // 8), "big")
            else:
                raw = rng.getrandbits(nbits)
            value = raw % self.descriptor.order
            if value != 0:
                return GroupScalar(self, value)

    def scalar_invert(self, s: GroupScalar) -> GroupScalar:
        _check_same_group(self, s.group, "scalar")
        return GroupScalar(self, pow(s.value, -1, self.descriptor.order))

    def hash_to_scalar(self, data: bytes) -> GroupScalar:
        raise NotImplementedError

    # -- elements -----------------------------------------------------------

    def hash_to_group(self, data: bytes) -> GroupElement:
        raise NotImplementedError

    def scalar_mult(self, s: GroupScalar, x: GroupElement) -> GroupElement:
        _check_same_group(self, s.group, "scalar")
        _check_same_group(self, x.group, "element")
        _record_scalar_mult()
        return self._mult(s, x)

    def _mult(self, s: GroupScalar, x: GroupElement) -> GroupElement:
        raise NotImplementedError

    # -- encodings ------------------------------------------------------------

    def encode_element(self, x: GroupElement) -> bytes:
        _check_same_group(self, x.group, "element")
        return x.data

    def decode_element(self, data: bytes) -> GroupElement:
        raise NotImplementedError

    def encode_scalar(self, s: GroupScalar) -> bytes:
        raise NotImplementedError

    def decode_scalar(self, data: bytes) -> GroupScalar:
        raise NotImplementedError

    # -- base64url conveniences (token claims and wire parameters) -----------

    def element_to_b64(self, x: GroupElement) -> str:
        return b64u_encode(self.encode_element(x))

    def element_from_b64(self, text: str) -> GroupElement:
        return self.decode_element(b64u_decode(text))

    def scalar_to_b64(self, s: GroupScalar) -> str:
        return b64u_encode(self.encode_scalar(s))

    def scalar_from_b64(self, text: str) -> GroupScalar:
        return self.decode_scalar(b64u_decode(text))


# ---------------------------------------------------------------------------
# Test backend: order-11 subgroup of (Z/23Z)^x, written multiplicatively


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


class TestGroup(Group):
    """Brute-forceable group: the subgroup of order 11 generated by 2 mod 23.

    Scalar multiplication is modular exponentiation, so every operation has
    an obvious independent oracle (``pow(x, s, 23)``) and exhaustive checks
    over all 10 scalars and 10 non-identity elements cost nothing.
    """

    MODULUS = 23
    GENERATOR = 2
    ORDER = 11

    __test__ = False  # not a pytest class, despite the name

    def __init__(self) -> None:
        if not _is_prime(self.ORDER):
            raise GroupError("test group order must be prime")
        self.descriptor = GroupDescriptor(
            name="testgroup-p11",
            order=self.ORDER,
            element_byte_length=2,
            scalar_byte_length=2,
        )
        members = set()
        x = 1
        for _ in range(self.ORDER):
            x = x * self.GENERATOR % self.MODULUS
            members.add(x)
        if len(members) != self.ORDER:
            raise GroupError("generator does not have the declared order")
        self._members = frozenset(members)

    def element(self, residue: int) -> GroupElement:
        if residue not in self._members or residue == 1:
            raise GroupError(f"{residue} is not a non-identity member of the subgroup")
        return GroupElement(self, residue.to_bytes(2, "big"))

    def element_value(self, x: GroupElement) -> int:
        _check_same_group(self, x.group, "element")
        return int.from_bytes(x.data, "big")

    def non_identity_elements(self) -> list[GroupElement]:
        return [self.element(v) for v in sorted(self._members - {1})]

    def nonzero_scalars(self) -> list[GroupScalar]:
        return [self.scalar(v) for v in range(1, self.ORDER)]

    def hash_to_group(self, data: bytes) -> GroupElement:
        suffix = b""
        counter = 0
        while True:
            digest = counted_sha512(data, suffix)
            exponent = int.from_bytes(digest, "big") % (self.ORDER - 1) + 1
            residue = pow(self.GENERATOR, exponent, self.MODULUS)
            if residue != 1:
                return GroupElement(self, residue.to_bytes(2, "big"))
            # Unreachable with the exponent in 1..order-1; kept so the
            # construction stays total if parameters ever change.
            counter += 1
            suffix = bytes([counter])

    def hash_to_scalar(self, data: bytes) -> GroupScalar:
        # Reducing mod (order-1) then adding 1 lands in 1..order-1; the bias
        # is irrelevant at this group size.
        digest = counted_sha512(data)
        return GroupScalar(self, int.from_bytes(digest, "big") % (self.ORDER - 1) + 1)

    def _mult(self, s: GroupScalar, x: GroupElement) -> GroupElement:
        residue = pow(self.element_value(x), s.value, self.MODULUS)
        if residue == 1:
            raise GroupError("scalar multiplication produced the identity")
        return GroupElement(self, residue.to_bytes(2, "big"))

    def decode_element(self, data: bytes) -> GroupElement:
        if len(data) != self.descriptor.element_byte_length:
            raise DecodeError(f"element encoding must be {self.descriptor.element_byte_length} bytes")
        residue = int.from_bytes(data, "big")
        if residue == 1 or residue == 0:
            raise DecodeError("identity element rejected")
        if residue not in self._members:
            raise DecodeError(f"{residue} is not in the subgroup")
        return GroupElement(self, data)

    def encode_scalar(self, s: GroupScalar) -> bytes:
        _check_same_group(self, s.group, "scalar")
        return s.value.to_bytes(2, "big")

    def decode_scalar(self, data: bytes) -> GroupScalar:
        if len(data) != self.descriptor.scalar_byte_length:
            raise DecodeError(f"scalar encoding must be {self.descriptor.scalar_byte_length} bytes")
        value = int.from_bytes(data, "big")
        if value == 0:
            raise DecodeError("zero scalar rejected")
        if value >= self.ORDER:
            raise DecodeError("scalar encoding is not canonical")
        return GroupScalar(self, value)


# ---------------------------------------------------------------------------
# Production backend: ristretto255 via libsodium


# Order of the ristretto255 group (= order of the Curve25519 prime subgroup).
RISTRETTO255_ORDER = 2**252 + 27742317777372353535851937790883648493


class _Sodium:
    """Minimal ctypes binding to the libsodium ristretto255 core."""

    def __init__(self) -> None:
        path = ctypes.util.find_library("sodium")
        if path is None:  # pragma: no cover - environment-dependent
            raise GroupError(
                "libsodium shared library not found; the ristretto255 backend needs "
                "libsodium >= 1.0.18 (e.g. the libsodium-dev package)"
            )
        lib = ctypes.CDLL(path)
        if lib.sodium_init() < 0:  # pragma: no cover
            raise GroupError("sodium_init failed")
        for name in (
            "crypto_core_ristretto255_from_hash",
            "crypto_core_ristretto255_is_valid_point",
            "crypto_scalarmult_ristretto255",
        ):
            if not hasattr(lib, name):  # pragma: no cover
                raise GroupError(f"libsodium is too old: missing {name}")
        self._lib = lib

    def from_hash(self, uniform64: bytes) -> bytes:
        out = ctypes.create_string_buffer(32)
        self._lib.crypto_core_ristretto255_from_hash(out, uniform64)
        return out.raw

    def is_valid_point(self, data: bytes) -> bool:
        return self._lib.crypto_core_ristretto255_is_valid_point(data) == 1

    def scalarmult(self, scalar32: bytes, point: bytes) -> bytes:
        out = ctypes.create_string_buffer(32)
        rc = self._lib.crypto_scalarmult_ristretto255(out, scalar32, point)
        if rc != 0:
            raise GroupError("scalar multiplication produced the identity")
        return out.raw


_sodium_instance: Optional[_Sodium] = None


def _sodium() -> _Sodium:
    global _sodium_instance
    if _sodium_instance is None:
        _sodium_instance = _Sodium()
    return _sodium_instance


_IDENTITY32 = bytes(32)


class Ristretto255Group(Group):
    """ristretto255 with SHA-512, the parameter set used by the live services.

    Point arithmetic is delegated to libsodium; scalar arithmetic mod the
    (prime) group order is plain Python integers with the standard 32-byte
    little-endian canonical encoding. Hash-to-group is the one-way map
    applied to a SHA-512 digest, which matches the RFC 9496 derivation test
    vectors. Swapping in another prime-order group (e.g. P-256) only means
    providing another subclass of :class:`Group`; callers never touch curve
    internals.
    """

    def __init__(self) -> None:
        self.descriptor = GroupDescriptor(
            name="ristretto255",
            order=RISTRETTO255_ORDER,
            element_byte_length=32,
            scalar_byte_length=32,
        )
        self._sodium = _sodium()

    def hash_to_group(self, data: bytes) -> GroupElement:
        suffix = b""
        counter = 0
        while True:
            digest = counted_sha512(data, suffix)
            point = self._sodium.from_hash(digest)
            if point != _IDENTITY32:
                return GroupElement(self, point)
            counter += 1  # pragma: no cover - probability ~2^-252
            suffix = bytes([counter])

    def hash_to_scalar(self, data: bytes) -> GroupScalar:
        suffix = b""
        counter = 0
        while True:
            digest = counted_sha512(data, suffix)
            value = int.from_bytes(digest, "little") % self.descriptor.order
            if value != 0:
                return GroupScalar(self, value)
            counter += 1  # pragma: no cover - probability ~2^-252
            suffix = bytes([counter])

    def _mult(self, s: GroupScalar, x: GroupElement) -> GroupElement:
        return GroupElement(self, self._sodium.scalarmult(self.encode_scalar(s), x.data))

    def decode_element(self, data: bytes) -> GroupElement:
        if len(data) != 32:
            raise DecodeError("element encoding must be 32 bytes")
        if data == _IDENTITY32:
            raise DecodeError("identity element rejected")
        if not self._sodium.is_valid_point(data):
            raise DecodeError("not a canonical ristretto255 encoding")
        return GroupElement(self, data)

    def encode_scalar(self, s: GroupScalar) -> bytes:
        _check_same_group(self, s.group, "scalar")
        return s.value.to_bytes(32, "little")

    def decode_scalar(self, data: bytes) -> GroupScalar:
        if len(data) != 32:
            raise DecodeError("scalar encoding must be 32 bytes")
        value = int.from_bytes(data, "little")
        if value == 0:
            raise DecodeError("zero scalar rejected")
        if value >= self.descriptor.order:
            raise DecodeError("scalar encoding is not canonical")
        return GroupScalar(self, value)


_DEFAULT_GROUPS: dict[str, Group] = {}


def get_group(name: str) -> Group:
    """Shared backend instances by name: ``testgroup`` or ``ristretto255``."""
    key = {"testgroup": "testgroup-p11", "curve": "ristretto255"}.get(name, name)
    if key not in _DEFAULT_GROUPS:
        if key == "testgroup-p11":
            _DEFAULT_GROUPS[key] = TestGroup()
        elif key == "ristretto255":
            _DEFAULT_GROUPS[key] = Ristretto255Group()
        else:
            raise GroupError(f"unknown group {name!r}")
    return _DEFAULT_GROUPS[key]
