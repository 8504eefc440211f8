"""Binary checkpoint container for trained networks.

Layout::

    RFORCE-CHECKPOINT <version>\\n
    <one-line JSON header: dims, g, init kind, seeds, schedule, array names>\\n
    for each array: uint64 LE element count, then float64 LE values (row-major)
    uint64 LE checksum (BLAKE2b, 8-byte digest) of every preceding byte
"""

import hashlib
import json
import struct

import numpy as np

from .dynamics import NetworkState, Rank1Network, RankNNetwork

MAGIC = b"RFORCE-CHECKPOINT"
FORMAT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Unreadable, truncated, corrupted or incompatible checkpoint."""


def _checksum(data):
    return struct.unpack("<Q", hashlib.blake2b(data, digest_size=8).digest())[0]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_checkpoint(network, path, schedule=None, state=None, extra=None):
    """Write ``network`` (and optionally a state) losslessly to ``path``."""
    arrays = {"reservoir": network.reservoir, "w_readout": network.w_readout}
    if network.architecture == "rank1":
        arrays["w_feedback"] = network.w_feedback
    else:
        arrays["error_injection"] = network.error_injection
    if state is not None:
        arrays["state_x"] = state.x
    header = {
        "version": FORMAT_VERSION,
        "architecture": network.architecture,
        "n": network.n,
        "k": network.k,
        "g": network.g,
        "init_kind": network.init_kind,
        "meta": _jsonable(network.meta),
        "schedule": _jsonable(schedule.to_dict()) if schedule is not None else None,
        "state": {"t": state.t, "step_index": state.step_index} if state is not None else None,
        "extra": _jsonable(extra or {}),
        "arrays": [[name, list(a.shape)] for name, a in arrays.items()],
    }
    buf = bytearray()
    buf += MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n"
    buf += json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    for a in arrays.values():
        flat = np.ascontiguousarray(a, dtype="<f8").reshape(-1)
        buf += struct.pack("<Q", flat.size)
        buf += flat.tobytes()
    buf += struct.pack("<Q", _checksum(bytes(buf)))
    with open(path, "wb") as fh:
        fh.write(buf)


def read_checkpoint(path):
    """Parse ``path``; returns ``(header, {name: array})``."""
    with open(path, "rb") as fh:
        data = fh.read()
    first = data.find(b"\n")
    if first < 0 or not data.startswith(MAGIC + b" "):
        raise CheckpointFormatError(f"{path}: not an R-FORCE checkpoint")
    try:
        version = int(data[len(MAGIC) + 1:first])
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: unreadable version field") from exc
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"{path}: checkpoint version {version}, this reader supports {FORMAT_VERSION}"
        )
    if len(data) < first + 1 + 8:
        raise CheckpointFormatError(f"{path}: truncated")
    body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
    second = data.find(b"\n", first + 1)
    if second < 0 or second >= len(body):
        raise CheckpointFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[first + 1:second])
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"{path}: corrupted header ({exc})") from exc
    arrays = {}
    pos = second + 1
    for name, shape in header.get("arrays", []):
        if pos + 8 > len(body):
            raise CheckpointFormatError(f"{path}: truncated before array {name!r}")
        (count,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        if count != int(np.prod(shape)) or pos + 8 * count > len(body):
            raise CheckpointFormatError(f"{path}: truncated or inconsistent array {name!r}")
        arrays[name] = np.frombuffer(body, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
    if pos != len(body):
        raise CheckpointFormatError(f"{path}: {len(body) - pos} unexpected trailing bytes")
    if _checksum(body) != stored:
        raise CheckpointFormatError(f"{path}: checksum mismatch (file corrupted)")
    return header, arrays


def load_checkpoint(path, with_state=False):
    """Rebuild the network stored at ``path`` (and its state if requested)."""
    header, arrays = read_checkpoint(path)
    arch = header["architecture"]
    if arch == "rank1":
        net = Rank1Network(arrays["reservoir"], header["g"], arrays["w_feedback"],
                           arrays["w_readout"], header["init_kind"], header.get("meta") or {})
    elif arch == "rankN":
        net = RankNNetwork(arrays["reservoir"], header["g"], arrays["w_readout"],
                           arrays["error_injection"], header["init_kind"],
                           header.get("meta") or {})
    else:
        raise CheckpointFormatError(f"{path}: unknown architecture {arch!r}")
    if not with_state:
        return net
    state = None
    if "state_x" in arrays:
        info = header.get("state") or {}
        state = NetworkState(arrays["state_x"], info.get("t", 0.0), info.get("step_index", 0))
    return net, state
