"""On-disk formats: flat binary feature/label arrays and the corpus manifest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

ARRAY_MAGIC = b"BARR"
ARRAY_VERSION = 1

_DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("<i1"): 2, np.dtype("<i8"): 3}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def config_hash(config_dict: dict) -> str:
    """Stable 16-hex-digit digest of a configuration mapping."""
    blob = json.dumps(config_dict, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_array(path, array: np.ndarray, cfg_hash: str = "") -> None:
    """Write an array with a small self-describing header (dims, dtype, hash)."""
    array = np.ascontiguousarray(array)
    dtype = array.dtype.newbyteorder("<")
    if dtype not in _DTYPE_TAGS:
        raise FormatError(f"unsupported array dtype {array.dtype}")
    digest = cfg_hash.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(ARRAY_MAGIC)
        fh.write(struct.pack("<I", ARRAY_VERSION))
        fh.write(struct.pack("<B", _DTYPE_TAGS[dtype]))
        fh.write(struct.pack("<B", array.ndim))
        fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
        fh.write(struct.pack("<H", len(digest)))
        fh.write(digest)
        fh.write(array.astype(dtype).tobytes())


def load_array(path) -> tuple[np.ndarray, str]:
    """Read an array written by :func:`save_array`; returns (array, cfg_hash)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        if blob[:4] != ARRAY_MAGIC:
            raise FormatError(f"bad magic in array file {path}")
        offset = 4
        (version,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if version != ARRAY_VERSION:
            raise FormatError(f"unsupported array file version {version}")
        tag, ndim = struct.unpack_from("<BB", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        (hash_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        digest = blob[offset : offset + hash_len].decode("ascii")
        offset += hash_len
        dtype = _TAG_DTYPES[tag]
        count = int(np.prod(shape)) if ndim else 1
        array = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
    except (struct.error, ValueError, KeyError) as exc:
        raise FormatError(f"truncated or corrupt array file {path}: {exc}") from exc
    return array.copy(), digest


@dataclass
class ClipRecord:
    """One corpus clip: everything needed to regenerate it bit-identically."""

    clip_id: str
    split: str  # train | test
    content_class: str  # low | medium | high
    speaker_seed: int
    content_seed: int
    assembly_seed: int
    noise_kind: str
    noise_seed: int
    distractor_seed: int
    snr_db: float
    level_dbfs: float
    n_frames: int = 0
    speech_fraction: float = 0.0
    feature_file: str = ""
    label_file: str = ""


def save_manifest(path, records: list[ClipRecord]) -> None:
    """One JSON object per line, sorted by clip id for stable diffs."""
    with open(path, "w", encoding="ascii") as fh:
        for record in sorted(records, key=lambda r: r.clip_id):
            fh.write(json.dumps(dataclasses.asdict(record), sort_keys=True))
            fh.write("\n")


def load_manifest(path) -> list[ClipRecord]:
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                records.append(ClipRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise FormatError(f"bad manifest line in {path}: {exc}") from exc
    return records
