"""On-disk formats: STCA coefficient files, 8-bit PGM, STFM/CSV feature
matrices. All binary formats are little-endian.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dctdomain import CoefArray, PixelImage

STCA_MAGIC = b"STCA"
STCA_VERSION = 1
STFM_MAGIC = b"STFM"
SCHEMA_IDS = {"PEV274": 1, "LI250": 2, "PROJECTED": 3}
_SCHEMA_NAMES = {v: k for k, v in SCHEMA_IDS.items()}

_STCA_HEAD = struct.Struct("<4sHII")
_STFM_HEAD = struct.Struct("<4sHII")


def coef_to_bytes(c: CoefArray) -> bytes:
    head = _STCA_HEAD.pack(STCA_MAGIC, STCA_VERSION, c.blocks_x, c.blocks_y)
    table = c.table.astype("<u2").tobytes()
    return head + table + c.coefs.astype("<i2").tobytes()


def coef_from_bytes(buf: bytes) -> CoefArray:
    magic, version, bx, by = _STCA_HEAD.unpack_from(buf, 0)
    if magic != STCA_MAGIC:
        raise ValueError("not an STCA file")
    if version != STCA_VERSION:
        raise ValueError(f"unsupported STCA version {version}")
    off = _STCA_HEAD.size
    table = np.frombuffer(buf, "<u2", 64, off).reshape(8, 8).astype(np.int32)
    off += 128
    expected = off + by * bx * 128
    if len(buf) != expected:
        raise ValueError(f"STCA payload is {len(buf)} bytes, expected {expected}")
    coefs = np.frombuffer(buf, "<i2", by * bx * 64, off).reshape(by, bx, 8, 8).astype(np.int32)
    return CoefArray(coefs, table)


def save_coef(c: CoefArray, path) -> None:
    Path(path).write_bytes(coef_to_bytes(c))


def load_coef(path) -> CoefArray:
    return coef_from_bytes(Path(path).read_bytes())


def save_pgm(img: PixelImage, path) -> None:
    data = np.clip(np.rint(img.samples), 0, 255).astype(np.uint8)
    head = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(head + data.tobytes())


def load_pgm(path) -> PixelImage:
    buf = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        end = pos
        while not buf[end : end + 1].isspace():
            end += 1
        fields.append(buf[pos:end])
        pos = end
    pos += 1  # single whitespace before the raster
    if fields[0] != b"P5":
        raise ValueError("only binary 8-bit PGM (P5) is supported")
    w, h, maxval = (int(x) for x in fields[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    data = np.frombuffer(buf, np.uint8, w * h, pos).reshape(h, w)
    return PixelImage(data.astype(np.float64))


def features_to_bytes(F: np.ndarray, schema: str) -> bytes:
    if schema not in SCHEMA_IDS:
        raise ValueError(f"unknown feature schema {schema!r}")
    F = np.asarray(F, dtype="<f8")
    head = _STFM_HEAD.pack(STFM_MAGIC, SCHEMA_IDS[schema], F.shape[0], F.shape[1])
    return head + np.ascontiguousarray(F).tobytes()


def features_from_bytes(buf: bytes) -> tuple[np.ndarray, str]:
    magic, sid, rows, cols = _STFM_HEAD.unpack_from(buf, 0)
    if magic != STFM_MAGIC:
        raise ValueError("not an STFM file")
    if sid not in _SCHEMA_NAMES:
        raise ValueError(f"unknown schema id {sid}")
    F = np.frombuffer(buf, "<f8", rows * cols, _STFM_HEAD.size).reshape(rows, cols)
    return F.astype(np.float64), _SCHEMA_NAMES[sid]


def save_features(F: np.ndarray, schema: str, path) -> None:
    Path(path).write_bytes(features_to_bytes(F, schema))


def load_features(path) -> tuple[np.ndarray, str]:
    return features_from_bytes(Path(path).read_bytes())


def save_features_csv(F: np.ndarray, schema: str, path) -> None:
    F = np.asarray(F, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(f"{schema}:{i}" for i in range(F.shape[1])) + "\n")
        for row in F:
            f.write(",".join(repr(float(x)) for x in row) + "\n")


def load_features_csv(path) -> tuple[np.ndarray, str]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [[float(x) for x in ln.split(",")] for ln in f if ln.strip()]
    schema = header[0].split(":")[0]
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(header)), schema
