"""Round message schema and its wire encoding.

Every message is one length-prefixed frame: a 4-byte big-endian unsigned
body length followed by a UTF-8 JSON object with exactly the keys

    {"kind", "round", "participant_id", "payload", "objective_part"}

``payload`` is either null or a row-major nested array of decimal
floats; floats are written with 17 significant digits so decoding
returns bit-identical values.  ``objective_part`` is null or a float.
On a Register message ``objective_part`` doubles as the label-ownership
flag (1.0 owner, 0.0 otherwise) since the schema has no other slot.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

KIND_REGISTER = "Register"
KIND_ZK_UPLOAD = "ZkUpload"
KIND_Z_BROADCAST = "ZBroadcast"
KIND_CONVERGED = "Converged"
KIND_ABORT = "Abort"

KINDS = (KIND_REGISTER, KIND_ZK_UPLOAD, KIND_Z_BROADCAST, KIND_CONVERGED, KIND_ABORT)

# Kinds whose payload is a pseudo-label or consensus matrix.
MATRIX_KINDS = (KIND_ZK_UPLOAD, KIND_Z_BROADCAST, KIND_CONVERGED)

_BODY_KEYS = {"kind", "round", "participant_id", "payload", "objective_part"}

HEADER = struct.Struct("!I")

# Far above anything a training round produces; guards the frame reader
# against garbage lengths.
MAX_BODY_BYTES = 256 * 1024 * 1024


class ProtocolError(Exception):
    """A frame or message violated the wire schema."""


@dataclass
class RoundMessage:
    """One protocol message; payload is a float64 matrix or None."""

    kind: str
    round: int
    participant_id: int
    payload: np.ndarray | None = None
    objective_part: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown message kind {self.kind!r}")
        if self.round < 0:
            raise ProtocolError("round must be >= 0")
        if self.participant_id < 0:
            raise ProtocolError("participant_id must be >= 0")


def _format_float(value: float) -> str:
    value = float(value)
    if not np.isfinite(value):
        raise ProtocolError(f"non-finite value cannot go on the wire: {value!r}")
    return format(value, ".17g")


def _format_matrix(matrix: np.ndarray) -> str:
    rows = (",".join(_format_float(v) for v in row) for row in matrix.tolist())
    return "[[" + "],[".join(rows) + "]]"


def encode_body(message: RoundMessage) -> bytes:
    """Serialize a message to its JSON body bytes."""
    if message.payload is None:
        payload = "null"
    else:
        payload = np.asarray(message.payload, dtype=np.float64)
        if payload.ndim != 2 or payload.size == 0:
            raise ProtocolError("payload must be a non-empty 2-D matrix")
        payload = _format_matrix(payload)
    part = "null" if message.objective_part is None else _format_float(message.objective_part)
    body = (
        '{"kind":%s,"round":%d,"participant_id":%d,"payload":%s,"objective_part":%s}'
        % (json.dumps(message.kind), message.round, message.participant_id, payload, part)
    )
    return body.encode("utf-8")


def decode_body(body: bytes) -> RoundMessage:
    """Parse JSON body bytes back into a message, validating the schema."""
    try:
        raw = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable message body: {exc}") from exc
    if not isinstance(raw, dict) or set(raw) != _BODY_KEYS:
        raise ProtocolError("message body must carry exactly the schema keys")
    kind = raw["kind"]
    if not isinstance(kind, str):
        raise ProtocolError("kind must be a string")
    if not isinstance(raw["round"], int) or isinstance(raw["round"], bool):
        raise ProtocolError("round must be an integer")
    if not isinstance(raw["participant_id"], int) or isinstance(raw["participant_id"], bool):
        raise ProtocolError("participant_id must be an integer")
    payload = raw["payload"]
    if payload is not None:
        try:
            payload = np.asarray(payload, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed payload: {exc}") from exc
        if payload.ndim != 2 or payload.size == 0:
            raise ProtocolError("payload must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(payload)):
            raise ProtocolError("payload contains non-finite entries")
    part = raw["objective_part"]
    if part is not None:
        if isinstance(part, bool) or not isinstance(part, (int, float)):
            raise ProtocolError("objective_part must be a float")
        part = float(part)
        if not np.isfinite(part):
            raise ProtocolError("objective_part must be finite")
    return RoundMessage(kind=kind, round=raw["round"],
                        participant_id=raw["participant_id"],
                        payload=payload, objective_part=part)


def frame(body: bytes) -> bytes:
    """Prefix a body with its 4-byte big-endian length."""
    if len(body) > MAX_BODY_BYTES:
        raise ProtocolError(f"body of {len(body)} bytes exceeds the frame limit")
    return HEADER.pack(len(body)) + body


def frame_size(body: bytes) -> int:
    """Total on-wire size of a framed body."""
    return HEADER.size + len(body)
