"""Repositorio de checkpoints del motor PATH.

Formato binario (little-endian):
    magic "PATHCKPT" | u32 versión | i64 semilla | u32 len + JSON de metadatos
    u32 número de entradas
    por entrada: u32 len + nombre utf-8 | u32 ndim | u32 × ndim extensiones | payload f32
    u32 CRC32 de todo lo anterior
"""

import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from src.config.settings import CHECKPOINT
from src.models.errors import CheckpointError

logger = logging.getLogger(__name__)

@dataclass
class Checkpoint:
    """Contenido de un checkpoint cargado."""

    seed: int
    entries: Dict[str, np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)
    version: int = CHECKPOINT["format_version"]

    def names(self) -> List[str]:
        return list(self.entries)


def encode_checkpoint(
    entries: Mapping[str, np.ndarray],
    seed: int,
    metadata: Optional[Dict[str, Any]] = None,
) -> bytes:
    """Serializa las entradas en el formato binario."""
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    parts = [
        CHECKPOINT["magic"],
        struct.pack("<Iq", CHECKPOINT["format_version"], seed),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<I", len(entries)),
    ]
    for name, value in entries.items():
        array = np.asarray(value)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError("checkpoint truncado")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Deserializa un checkpoint validando magic, versión y CRC.

    Raises:
        CheckpointError: Si el contenido está corrupto o la versión no se soporta
    """
    magic = CHECKPOINT["magic"]
    if len(data) < len(magic) + 4 or not data.startswith(magic):
        raise CheckpointError("no es un checkpoint PATH (magic inválido)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint corrupto (CRC no coincide)")

    reader = _Reader(body)
    reader.take(len(magic))
    version, seed = reader.unpack("<Iq")
    if version != CHECKPOINT["format_version"]:
        raise CheckpointError(f"versión de formato no soportada: {version}")
    (meta_len,) = reader.unpack("<I")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError("metadatos ilegibles") from exc

    (count,) = reader.unpack("<I")
    entries: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<I")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        payload = reader.take(4 * size)
        entries[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    if reader.offset != len(body):
        raise CheckpointError("bytes sobrantes al final del checkpoint")
    return Checkpoint(seed=seed, entries=entries, metadata=metadata, version=version)


def save_checkpoint(
    path: Union[str, Path],
    entries: Mapping[str, np.ndarray],
    seed: int,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Escribe un checkpoint de forma atómica (archivo temporal y renombrado).

    Args:
        path: Destino
        entries: Entradas (nombre → arreglo) en el orden a escribir
        seed: Semilla global de la corrida
        metadata: Datos JSON adicionales (por ejemplo, la configuración)

    Returns:
        Path: Ruta escrita
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temporary = target.with_suffix(target.suffix + ".tmp")
    temporary.write_bytes(encode_checkpoint(entries, seed, metadata))
    os.replace(temporary, target)
    logger.info("checkpoint guardado: %s (%d entradas)", target, len(entries))
    return target


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Carga un checkpoint del disco.

    Raises:
        CheckpointError: Si el contenido es inválido
        FileNotFoundError: Si el archivo no existe
    """
    return decode_checkpoint(Path(path).read_bytes())


def diff_checkpoints(a: Checkpoint, b: Checkpoint) -> List[str]:
    """Nombres cuyas entradas difieren bit a bit (o existen en uno solo)."""
    names = sorted(set(a.entries) | set(b.entries))
    changed = []
    for name in names:
        left, right = a.entries.get(name), b.entries.get(name)
        if left is None or right is None or left.shape != right.shape or left.tobytes() != right.tobytes():
            changed.append(name)
    return changed
