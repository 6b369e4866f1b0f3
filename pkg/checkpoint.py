"""Points de contrôle CARF (tenseurs nommés + CRC-32) et fichier compagnon model.json."""
import dataclasses
import json
import logging
import os
import struct
import zlib

import numpy as np

from crp import ModelSpec, build_model
from errors import FormatError, InputError, ModeMismatchError

logger = logging.getLogger(__name__)

CARF_MAGIC = b"CARF"
CARF_VERSION = 1
WEIGHTS_FILE = "model.carf"
SIDECAR_FILE = "model.json"


def encode_carf(tensors):
    """Noms triés ; float32 little-endian ; CRC-32 final sur tous les octets précédents."""
    chunks = [CARF_MAGIC, struct.pack("<HI", CARF_VERSION, len(tensors))]
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)) + raw_name)
        chunks.append(struct.pack("<B", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes(order="C"))
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_carf(blob, source="<mémoire>"):
    if len(blob) < 14 or blob[:4] != CARF_MAGIC:
        raise FormatError(f"{source} : en-tête CARF invalide")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise FormatError(f"{source} : CRC-32 incorrect, fichier corrompu")
    try:
        version, count = struct.unpack_from("<HI", body, 4)
        if version != CARF_VERSION:
            raise FormatError(f"{source} : version CARF {version} non supportée")
        offset = 10
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            name = body[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", body, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", body, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 4 * size > len(body):
                raise FormatError(f"{source} : tenseur {name} tronqué")
            tensors[name] = np.frombuffer(body, dtype="<f4", count=size, offset=offset).reshape(shape).astype(np.float32)
            offset += 4 * size
    except (struct.error, UnicodeDecodeError) as e:
        raise FormatError(f"{source} : fichier CARF corrompu ({e})")
    if offset != len(body):
        raise FormatError(f"{source} : {len(body) - offset} octets en trop")
    return tensors


def write_carf(path, tensors):
    with open(path, "wb") as f:
        f.write(encode_carf(tensors))


def read_carf(path):
    if not os.path.exists(path):
        raise InputError(f"Point de contrôle introuvable : {path}")
    with open(path, "rb") as f:
        return decode_carf(f.read(), path)


@dataclasses.dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict
    metadata: dict = dataclasses.field(default_factory=dict)
    history: list = dataclasses.field(default_factory=list)

    @classmethod
    def from_model(cls, model, metadata=None, history=None):
        return cls(model.spec, model.state_dict(), dict(metadata or {}), list(history or []))

    def build(self, provider=None):
        model = build_model(self.spec, provider)
        try:
            model.load_state_dict(self.params)
        except KeyError as e:
            raise ModeMismatchError(f"Point de contrôle incompatible avec sa spécification : {e}")
        return model.eval()

    def sidecar(self):
        return {
            "spec": self.spec.to_dict(),
            "digest": self.spec.digest,
            "metadata": self.metadata,
        }

    def save(self, run_dir):
        os.makedirs(run_dir, exist_ok=True)
        write_carf(os.path.join(run_dir, WEIGHTS_FILE), self.params)
        with open(os.path.join(run_dir, SIDECAR_FILE), "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(self.sidecar(), sort_keys=True, indent=2) + "\n")
        logger.info(f"Point de contrôle écrit dans {run_dir} ({len(self.params)} tenseurs)")

    @classmethod
    def load(cls, run_dir):
        sidecar_path = os.path.join(run_dir, SIDECAR_FILE)
        if not os.path.exists(sidecar_path):
            raise InputError(f"{SIDECAR_FILE} introuvable dans {run_dir}")
        with open(sidecar_path, encoding="utf-8") as f:
            sidecar = json.load(f)
        spec = ModelSpec.from_dict(sidecar["spec"])
        if spec.digest != sidecar.get("digest"):
            raise FormatError(f"{sidecar_path} : empreinte de spécification incohérente")
        params = read_carf(os.path.join(run_dir, WEIGHTS_FILE))
        return cls(spec, params, sidecar.get("metadata", {}))
