"""
Model and prior persistence.

Model file (little-endian):

    magic "DPMD" | version u32 | header length u32 | header JSON (utf-8)
    parameter blobs in header order, raw values in the network dtype
    prior block: mean, components, eigenvalues as f64 (absent without a prior)
    sha256 of everything above (32 bytes)

The header holds the architecture description, the parameter names and
shapes, the prior shape, the run config fingerprint and free-form
metadata (cube size, number of joints).
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from deepprior.errors import (
    ArchitectureMismatchError,
    ChecksumError,
    DatasetFormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from deepprior.neuralnet.network import Network
from deepprior.prior.pca import PcaPrior

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"DPMD"
MODEL_VERSION = 1
PRIOR_VERSION = 1
PREAMBLE = struct.Struct("<4sII")
DIGEST_SIZE = 32


@dataclass
class SavedModel:
    net: Network
    prior: Optional[PcaPrior] = None
    fingerprint: str = ""
    metadata: dict = field(default_factory=dict)


def encode_model(net: Network, prior: Optional[PcaPrior] = None, fingerprint: str = "",
                 metadata: Optional[dict] = None) -> bytes:
    params = net.parameters()
    header = {
        "architecture": net.describe(),
        "parameters": [[key, list(value.shape)] for key, value in params.items()],
        "prior": None if prior is None else {"k": prior.k, "dim": prior.dim},
        "fingerprint": fingerprint,
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    little = net.dtype.newbyteorder("<")
    parts = [PREAMBLE.pack(MODEL_MAGIC, MODEL_VERSION, len(header_bytes)), header_bytes]
    parts += [np.ascontiguousarray(value, dtype=little).tobytes() for value in params.values()]
    if prior is not None:
        for array in (prior.mean, prior.components, prior.eigenvalues):
            parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_model(path: Union[str, Path], net: Network, prior: Optional[PcaPrior] = None,
               fingerprint: str = "", metadata: Optional[dict] = None) -> Path:
    path = Path(path)
    path.write_bytes(encode_model(net, prior, fingerprint, metadata))
    logger.info(f"Saved {net.kind} ({net.parameter_count()} parameters) to {path}")
    return path


class _Reader:
    def __init__(self, blob: bytes, offset: int):
        self.blob = blob
        self.offset = offset

    def take(self, dtype, shape) -> np.ndarray:
        dtype = np.dtype(dtype)
        count = int(np.prod(shape)) if len(shape) else 1
        end = self.offset + count * dtype.itemsize
        if end > len(self.blob) - DIGEST_SIZE:
            raise TruncatedFileError("Model file ends inside a parameter block")
        array = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset)
        self.offset = end
        return array.reshape(shape).copy()


def decode_model(blob: bytes, expected_kind: Optional[str] = None) -> SavedModel:
    if blob[:4] != MODEL_MAGIC:
        raise DatasetFormatError("Not a model file (bad magic)")
    if len(blob) < PREAMBLE.size + DIGEST_SIZE:
        raise TruncatedFileError("Model file header truncated")
    _, version, header_len = PREAMBLE.unpack_from(blob)
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"Model format version {version}, this build reads {MODEL_VERSION}")
    if hashlib.sha256(blob[:-DIGEST_SIZE]).digest() != blob[-DIGEST_SIZE:]:
        if len(blob) < PREAMBLE.size + header_len + DIGEST_SIZE:
            raise TruncatedFileError("Model file ends inside its header")
        raise ChecksumError("Model checksum mismatch")
    header = json.loads(blob[PREAMBLE.size:PREAMBLE.size + header_len].decode("utf-8"))

    architecture = header["architecture"]
    if expected_kind is not None and architecture["kind"] != expected_kind:
        raise ArchitectureMismatchError(
            f"Model file holds a {architecture['kind']}, expected a {expected_kind}"
        )
    net = Network.from_description(architecture)
    reader = _Reader(blob, PREAMBLE.size + header_len)
    little = net.dtype.newbyteorder("<")
    values = {key: reader.take(little, tuple(shape)).astype(net.dtype) for key, shape in header["parameters"]}
    net.load_parameters(values)

    prior = None
    if header["prior"] is not None:
        k, dim = header["prior"]["k"], header["prior"]["dim"]
        prior = PcaPrior(reader.take("<f8", (dim,)), reader.take("<f8", (k, dim)), reader.take("<f8", (k,)))
    if reader.offset != len(blob) - DIGEST_SIZE:
        raise DatasetFormatError("Model file has trailing bytes after the prior block")
    return SavedModel(net, prior, header.get("fingerprint", ""), header.get("metadata", {}))


def load_model(path: Union[str, Path], expected_kind: Optional[str] = None) -> SavedModel:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError as e:
        raise DatasetFormatError(f"Missing model file: {path}") from e
    model = decode_model(blob, expected_kind)
    logger.info(f"Loaded {model.net.kind} from {path}")
    return model


def save_prior(prior: PcaPrior, path: Union[str, Path], fingerprint: str = "") -> Path:
    path = Path(path)
    document = {"version": PRIOR_VERSION, "fingerprint": fingerprint, **prior.to_dict()}
    path.write_text(json.dumps(document, sort_keys=True, separators=(",", ":")), encoding="utf-8")
    return path


def load_prior(path: Union[str, Path]) -> PcaPrior:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DatasetFormatError(f"Missing prior file: {path}") from e
    except json.JSONDecodeError as e:
        raise TruncatedFileError(f"Prior file is not valid JSON: {e}") from e
    if document.get("version") != PRIOR_VERSION:
        raise VersionMismatchError(f"Prior file version {document.get('version')}")
    return PcaPrior.from_dict(document)
