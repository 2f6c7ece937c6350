"""Device admission at the 5G access point.

Implements iterated-HMAC key stretching (PBKDF2), simulated
challenge/response PUF enrollment and verification, the published Boolean
admission gate, and the elastic virtual-authority pool that holds
credential state.

Two admission semantics coexist deliberately: :func:`boolean_gate_literal`
evaluates the published gate expression exactly as written (which rejects
the all-valid case), while :func:`authenticate` applies the stated intent,
a plain three-way conjunction of timestamp, PUF and key validity.  Both are
kept because the gate expression is part of the external contract and the
conjunction is what admission must actually do.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

DEFAULT_ITERATION_COUNT = 1000
MIN_SALT_LENGTH = 8
DEFAULT_PRF_HASH = "sha256"
DEFAULT_FRESHNESS_WINDOW = 2.0  # seconds, mirrors the flow-timeout setting
DEVICES_PER_AUTHORITY = 125
DEFAULT_CHALLENGES_PER_DEVICE = 8


class AuthError(Exception):
    """Base class for admission failures that are errors, not verdicts."""


class UnknownDeviceError(AuthError):
    """The device has no registration or enrolled challenge material."""


class TamperError(AuthError):
    """An enrollment conflicts with already-stored challenge material."""


@dataclass(frozen=True)
class KeyDerivationParams:
    """Inputs of the key-stretching function."""

    password: bytes
    salt: bytes
    iteration_count: int = DEFAULT_ITERATION_COUNT
    output_key_length: int = 32
    prf: str = DEFAULT_PRF_HASH

    def __post_init__(self):
        if self.iteration_count < 1:
            raise ValueError("iteration_count must be >= 1")
        if self.output_key_length < 1:
            raise ValueError("output_key_length must be >= 1")
        if len(self.salt) < MIN_SALT_LENGTH:
            raise ValueError(f"salt must be at least {MIN_SALT_LENGTH} octets")
        hashlib.new(self.prf)  # raises for unknown hash names


def _prf_block_size(prf: str) -> int:
    return hashlib.new(prf).digest_size


def pbkdf2_bytes(
    password: bytes, salt: bytes, iteration_count: int, output_key_length: int, prf: str
) -> bytes:
    """Low-level iterated-HMAC key stretching on raw arguments.

    As many PRF blocks as needed to cover the output length, each block the
    XOR of ``iteration_count`` chained HMAC invocations.  Deterministic.
    Interoperates with the published vector sets; prefer :func:`derive_key`
    (which enforces parameter hygiene) outside of cross-checks.
    """
    if iteration_count < 1:
        raise ValueError("iteration_count must be >= 1")
    h_len = _prf_block_size(prf)
    max_len = (2**32 - 1) * h_len
    if output_key_length > max_len:
        raise ValueError("output_key_length exceeds the PRF block-count limit")

    n_blocks = -(-output_key_length // h_len)  # ceil
    out = bytearray()
    for i in range(1, n_blocks + 1):
        u = hmac.new(password, salt + struct.pack(">I", i), prf).digest()
        t = bytearray(u)
        for _ in range(iteration_count - 1):
            u = hmac.new(password, u, prf).digest()
            for j in range(h_len):
                t[j] ^= u[j]
        out.extend(t)
    return bytes(out[:output_key_length])


def derive_key(params: KeyDerivationParams) -> bytes:
    """Stretch a password into a key of the requested length."""
    return pbkdf2_bytes(
        params.password,
        params.salt,
        params.iteration_count,
        params.output_key_length,
        params.prf,
    )


def boolean_gate_literal(timestamp_valid: int, puf_valid: int, key_valid: int) -> int:
    """Evaluate the published admission gate exactly as written.

    gate = NOT((t AND p) AND (t OR p)) AND k.  Note that this expression
    yields 0 when all three inputs are 1; see :func:`authenticate` for the
    semantics actually used for admission.
    """
    for bit in (timestamp_valid, puf_valid, key_valid):
        if bit not in (0, 1):
            raise ValueError("gate inputs must be bits")
    t, p, k = timestamp_valid, puf_valid, key_valid
    return (1 - ((t & p) & (t | p))) & k


class VerdictReason(Enum):
    OK = "ok"
    BAD_KEY = "bad_key"
    BAD_PUF = "bad_puf"
    STALE_TIMESTAMP = "stale_timestamp"
    UNKNOWN_DEVICE = "unknown_device"


@dataclass(frozen=True)
class AuthVerdict:
    accepted: bool
    reason: VerdictReason

    def __post_init__(self):
        if self.accepted != (self.reason is VerdictReason.OK):
            raise ValueError("accepted must hold exactly when reason is ok")


class SimulatedPuf:
    """Per-device keyed response function standing in for silicon.

    A hidden per-device seed is mixed with the challenge through HMAC, so
    responses are deterministic for the owner yet unpredictable without
    the seed (the unclonability property, within the model).
    """

    def __init__(self, secret_seed: bytes):
        self._seed = bytes(secret_seed)

    def respond(self, challenge: bytes) -> bytes:
        return hmac.new(self._seed, challenge, "sha256").digest()


@dataclass(frozen=True)
class PufChallengeResponse:
    device_id: str
    challenge: bytes
    response: bytes


@dataclass
class RegistrationRecord:
    """Credential material the authority holds for one device."""

    device_id: str
    salt: bytes
    derived_key: bytes
    params: KeyDerivationParams

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "salt": self.salt.hex(),
            "derived_key": self.derived_key.hex(),
            "iteration_count": self.params.iteration_count,
            "output_key_length": self.params.output_key_length,
            "prf": self.params.prf,
        }


@dataclass
class VirtualAuthority:
    """One elastic authentication worker: CRP store plus registrations."""

    va_id: str
    crp_store: dict[str, dict[bytes, bytes]] = field(default_factory=dict)
    registered: dict[str, RegistrationRecord] = field(default_factory=dict)

    def enrolled_devices(self) -> list[str]:
        return list(self.crp_store)


def puf_enroll(va: VirtualAuthority, crp: PufChallengeResponse) -> None:
    """Store one challenge/response pair; idempotent for identical pairs.

    A different response for an already-stored challenge is a tamper
    signal and raises instead of overwriting.
    """
    pairs = va.crp_store.setdefault(crp.device_id, {})
    existing = pairs.get(crp.challenge)
    if existing is not None and existing != crp.response:
        raise TamperError(
            f"conflicting response enrolled for device {crp.device_id!r}"
        )
    pairs[crp.challenge] = crp.response


def issue_challenge(va: VirtualAuthority, device_id: str, rng: np.random.Generator) -> bytes:
    """Draw one enrolled challenge for the device, uniformly at random."""
    pairs = va.crp_store.get(device_id)
    if not pairs:
        raise UnknownDeviceError(f"device {device_id!r} has no enrolled challenges")
    challenges = sorted(pairs)  # stable order regardless of insertion history
    return challenges[int(rng.integers(len(challenges)))]


PufResponder = Callable[[bytes], bytes]


def puf_verify(
    va: VirtualAuthority,
    device_id: str,
    response: Union[bytes, PufResponder],
    rng: np.random.Generator,
) -> bool:
    """Issue a random enrolled challenge and check the response against it.

    ``response`` is either raw octets (compared literally) or a responder
    callable that is handed the issued challenge, which is how a live
    device answers since it cannot know the challenge in advance.
    """
    challenge = issue_challenge(va, device_id, rng)
    stored = va.crp_store[device_id][challenge]
    supplied = response(challenge) if callable(response) else response
    return hmac.compare_digest(stored, supplied)


def register_device(
    va: VirtualAuthority,
    device_id: str,
    password: bytes,
    puf: SimulatedPuf,
    rng: np.random.Generator,
    *,
    n_challenges: int = DEFAULT_CHALLENGES_PER_DEVICE,
    params: Optional[KeyDerivationParams] = None,
) -> RegistrationRecord:
    """Enroll a device: derive and store its key, enroll CRPs."""
    salt = bytes(rng.integers(0, 256, size=16, dtype=np.uint8))
    if params is None:
        params = KeyDerivationParams(password=password, salt=salt)
    record = RegistrationRecord(
        device_id=device_id,
        salt=params.salt,
        derived_key=derive_key(params),
        params=params,
    )
    va.registered[device_id] = record
    for _ in range(n_challenges):
        challenge = bytes(rng.integers(0, 256, size=16, dtype=np.uint8))
        puf_enroll(va, PufChallengeResponse(device_id, challenge, puf.respond(challenge)))
    return record


def authenticate(
    va: VirtualAuthority,
    device_id: str,
    password: bytes,
    timestamp: float,
    puf_response: Union[bytes, PufResponder],
    *,
    now: float,
    rng: np.random.Generator,
    freshness_window: float = DEFAULT_FRESHNESS_WINDOW,
) -> AuthVerdict:
    """Admit a device iff timestamp, PUF response and derived key all check.

    Failures are reported in fixed precedence: unknown device, stale
    timestamp, bad PUF, bad key.
    """
    record = va.registered.get(device_id)
    if record is None or device_id not in va.crp_store:
        return AuthVerdict(False, VerdictReason.UNKNOWN_DEVICE)

    if abs(now - timestamp) > freshness_window:
        return AuthVerdict(False, VerdictReason.STALE_TIMESTAMP)

    if not puf_verify(va, device_id, puf_response, rng):
        return AuthVerdict(False, VerdictReason.BAD_PUF)

    attempt = KeyDerivationParams(
        password=password,
        salt=record.params.salt,
        iteration_count=record.params.iteration_count,
        output_key_length=record.params.output_key_length,
        prf=record.params.prf,
    )
    if not hmac.compare_digest(derive_key(attempt), record.derived_key):
        return AuthVerdict(False, VerdictReason.BAD_KEY)

    return AuthVerdict(True, VerdictReason.OK)


class VirtualAuthorityPool:
    """Elastic pool of authorities audited by the access point.

    Sizing follows demand: one authority per ``devices_per_authority``
    unverified devices, never fewer than one while any device is pending.
    Devices map to authorities by enrollment order.
    """

    def __init__(self, *, devices_per_authority: int = DEVICES_PER_AUTHORITY):
        self.devices_per_authority = devices_per_authority
        self.authorities: list[VirtualAuthority] = []
        self._assignment: dict[str, int] = {}

    def _ensure_size(self, n: int) -> None:
        while len(self.authorities) < n:
            self.authorities.append(VirtualAuthority(va_id=f"VA{len(self.authorities)}"))

    def authority_for(self, device_id: str) -> VirtualAuthority:
        idx = self._assignment.get(device_id)
        if idx is None:
            idx = len(self._assignment) // self.devices_per_authority
            self._ensure_size(idx + 1)
            self._assignment[device_id] = idx
        return self.authorities[idx]

    def release_idle(self) -> int:
        """Drop authorities with no registrations left; returns count removed.

        At least one authority is retained while any device remains
        assigned but unregistered.
        """
        keep: list[VirtualAuthority] = []
        removed = 0
        for idx, va in enumerate(self.authorities):
            in_use = bool(va.registered) or any(
                i == idx for i in self._assignment.values()
            )
            if in_use or (not keep and idx == len(self.authorities) - 1):
                keep.append(va)
            else:
                removed += 1
        self.authorities = keep
        return removed

    def export_records(self) -> list[dict]:
        """Registration records in a serializable form for scenario files."""
        out = []
        for va in self.authorities:
            for record in va.registered.values():
                entry = record.to_dict()
                entry["va_id"] = va.va_id
                entry["enrolled_challenges"] = len(va.crp_store.get(record.device_id, {}))
                out.append(entry)
        return out
