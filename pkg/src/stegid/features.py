"""JPEG steganalysis features: PEV-274 (calibrated DCT + Markov) and LI-250
(intra/inter-block joint densities of coefficient magnitudes).

The ``*_stack`` functions take an integer array ``(N, by, bx, 8, 8)`` of
equally sized images sharing one quantization table and return an
``(N, H)`` matrix; they make one pass per statistic family over the whole
stack. The single-image functions wrap them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .dctdomain import CALIBRATION_CROP, CoefArray, calibrate_stack, dequantize_pixels, quantize_pixels

__all__ = [
    "DUAL_MODES",
    "FeatureSet",
    "FeatureVector",
    "HIST_MODES",
    "SCHEMAS",
    "extract",
    "li250",
    "li250_stack",
    "markov_tpm",
    "markov_tpm_stack",
    "pev274",
    "pev274_stack",
    "pev_markov_avg",
]

SCHEMAS = {"PEV274": 274, "LI250": 250}

# (row, col) zero-based; (0, 0) is DC
HIST_MODES = [(0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]
DUAL_MODES = [(1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (0, 3)]

HIST_RANGE = _kernels.HR
COOC_RANGE = _kernels.CR
MARKOV_T = _kernels.MT
JOINT_T = _kernels.JT


@dataclass(frozen=True)
class FeatureVector:
    schema: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if self.schema in SCHEMAS and v.shape != (SCHEMAS[self.schema],):
            raise ValueError(f"{self.schema} vector must have length {SCHEMAS[self.schema]}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class FeatureSet:
    """All feature vectors of one actor, one row per image."""

    actor: int
    schema: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("a feature set needs a non-empty (m, H) matrix")
        if self.schema in SCHEMAS and v.shape[1] != SCHEMAS[self.schema]:
            raise ValueError(f"{self.schema} sets need {SCHEMAS[self.schema]} columns, got {v.shape[1]}")
        object.__setattr__(self, "vectors", v)

    def __len__(self):
        return self.vectors.shape[0]


def _dct_part(coefs: np.ndarray, pix: np.ndarray) -> np.ndarray:
    """The 193 uncalibrated DCT statistics of each image in the stack.

    ``pix`` holds the decompressed images, used for the blockiness terms.
    """
    n, by, bx = coefs.shape[:3]
    nb = by * bx
    out = np.empty((n, 193))
    for i in range(n):
        glob, local, dual, var, cooc = _kernels.dct_counts(np.ascontiguousarray(coefs[i]))
        out[i, :11] = glob
        out[i, 11:66] = local.ravel()
        out[i, 66:165] = dual.ravel()  # d outer, mode inner
        out[i, 165:190] = cooc / (64.0 * 2 * (nb - 1))
        out[i, 190] = var / (2.0 * nb)
    out[:, :165] /= 64.0 * nb

    h, w = pix.shape[1:]
    kr, kc = (h - 1) // 8, (w - 1) // 8
    dr = pix[:, 7 : 8 * kr : 8, :] - pix[:, 8 : 8 * kr + 1 : 8, :]
    dc = pix[:, :, 7 : 8 * kc : 8] - pix[:, :, 8 : 8 * kc + 1 : 8]
    denom = w * kr + h * kc
    out[:, 191] = (np.abs(dr).sum(axis=(1, 2)) + np.abs(dc).sum(axis=(1, 2))) / denom
    out[:, 192] = ((dr**2).sum(axis=(1, 2)) + (dc**2).sum(axis=(1, 2))) / denom
    return out


def _magnitude_image(c: np.ndarray) -> np.ndarray:
    by, bx = c.shape[:2]
    return np.ascontiguousarray(np.abs(np.swapaxes(c, 1, 2)).reshape(by * 8, bx * 8))


def _normalize_rows(counts: np.ndarray) -> np.ndarray:
    counts = counts.astype(np.float64)
    rows = counts.sum(axis=-1, keepdims=True)
    return np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)


def markov_tpm_stack(coefs: np.ndarray) -> dict[str, np.ndarray]:
    """Four ``(N, 9, 9)`` transition matrices of clipped magnitude differences."""
    coefs = np.asarray(coefs, dtype=np.int32)
    counts = np.stack([_kernels.markov_counts(_magnitude_image(c)) for c in coefs])
    tpm = _normalize_rows(counts)
    return {k: tpm[:, i] for i, k in enumerate("hvdm")}


def _markov_avg(coefs: np.ndarray) -> np.ndarray:
    tpm = markov_tpm_stack(coefs)
    return ((tpm["h"] + tpm["v"] + tpm["d"] + tpm["m"]) / 4.0).reshape(coefs.shape[0], -1)


def pev274_stack(coefs: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Calibrated PEV-274 features of every image in the stack."""
    coefs = np.asarray(coefs, dtype=np.int32)
    by, bx = coefs.shape[1:3]
    if by < 3 or bx < 3:
        raise ValueError("image too small to calibrate (need at least 24x24 pixels)")
    pix = dequantize_pixels(coefs, table)
    crop = CALIBRATION_CROP
    cal = quantize_pixels(pix[:, crop : crop + (by - 1) * 8, crop : crop + (bx - 1) * 8], table)
    raw = np.concatenate([_dct_part(coefs, pix), _markov_avg(coefs)], axis=1)
    ref = np.concatenate([_dct_part(cal, dequantize_pixels(cal, table)), _markov_avg(cal)], axis=1)
    return raw - ref


def li250_stack(coefs: np.ndarray) -> np.ndarray:
    """LI-250 joint-density features of every image in the stack."""
    coefs = np.asarray(coefs, dtype=np.int32)
    n, by, bx = coefs.shape[:3]
    if by < 3 or bx < 3:
        raise ValueError("LI-250 needs at least 3x3 blocks")
    # triples per direction, dropped ones included
    intra_total = np.array([by * bx * 48, by * bx * 48, by * bx * 36], dtype=np.float64)
    inter_total = np.array([by * (bx - 2) * 64, (by - 2) * bx * 64, (by - 2) * (bx - 2) * 64], dtype=np.float64)
    out = np.empty((n, 250))
    for i in range(n):
        intra, inter = _kernels.joint_counts(np.ascontiguousarray(np.abs(coefs[i])))
        out[i, :125] = (intra / intra_total[:, None]).mean(axis=0)
        out[i, 125:] = (inter / inter_total[:, None]).mean(axis=0)
    return out


def pev274(c: CoefArray) -> FeatureVector:
    return FeatureVector("PEV274", pev274_stack(c.coefs[None], c.table)[0])


def li250(c: CoefArray) -> FeatureVector:
    return FeatureVector("LI250", li250_stack(c.coefs[None])[0])


def markov_tpm(c: CoefArray) -> dict[str, np.ndarray]:
    """Transition matrices ``{'h','v','d','m'}`` of one image, rows/cols -4..4."""
    return {k: v[0] for k, v in markov_tpm_stack(c.coefs[None]).items()}


def pev_markov_avg(c: CoefArray) -> np.ndarray:
    """Calibrated Markov block of PEV-274: 81 values."""
    cal = calibrate_stack(c.coefs[None], c.table)
    return (_markov_avg(c.coefs[None]) - _markov_avg(cal))[0]


_STACK_FUNCS = {
    "PEV274": lambda coefs, table: pev274_stack(coefs, table),
    "LI250": lambda coefs, table: li250_stack(coefs),
}


def extract(images: Sequence[CoefArray], schema: str = "PEV274", chunk: int = 8) -> np.ndarray:
    """Feature matrix ``(len(images), H)``; images are batched by shape and table.

    Small chunks keep the decompressed stack in cache, which is roughly
    twice as fast as one large batch on 320x320 images.
    """
    if schema not in _STACK_FUNCS:
        raise ValueError(f"unknown feature schema {schema!r}")
    func = _STACK_FUNCS[schema]
    out = np.empty((len(images), SCHEMAS[schema]))
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(images):
        groups.setdefault((c.coefs.shape, c.table.tobytes()), []).append(i)
    for idx in groups.values():
        table = images[idx[0]].table
        for s in range(0, len(idx), chunk):
            part = idx[s : s + chunk]
            stack = np.stack([images[i].coefs for i in part])
            out[part] = func(stack, table)
    return out
