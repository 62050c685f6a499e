"""Luminance-only JPEG model: color transform, 8x8 block DCT, quantization,
calibration, and synthetic per-actor cover sources.

Coefficients are stored densely as an integer array of shape
``(blocks_y, blocks_x, 8, 8)``; index ``[by, bx, u, v]`` holds the quantized
coefficient at row frequency ``u`` and column frequency ``v`` of block
``(by, bx)``.  Batched helpers accept any leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "BASE_LUMA_TABLE",
    "CALIBRATION_CROP",
    "CoefArray",
    "CoverSourceParams",
    "PixelImage",
    "block_dct",
    "block_idct",
    "calibrate",
    "compress",
    "decompress",
    "draw_source_params",
    "quality_to_table",
    "rgb_to_ycbcr",
    "synth_cover",
]

BASE_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

CALIBRATION_CROP = 4
MAX_COEF = 1024


def _dct_matrix() -> np.ndarray:
    x = np.arange(8)
    u = x[:, None]
    m = 0.5 * np.cos((2 * x[None, :] + 1) * u * np.pi / 16)
    m[0] *= 1 / math.sqrt(2)
    return m


# Orthonormal: F = D f D^T reproduces the (1/4) C(u) C(v) double-cosine sum.
_D = _dct_matrix()
_DT = _D.T.copy()
# row-major vec(D X D^T) = kron(D, D) vec(X): one GEMM for a whole stack
_K = np.kron(_D, _D)
_KT = _K.T.copy()


@dataclass(frozen=True)
class PixelImage:
    """Grayscale image with real-valued samples in [0, 255]."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError(f"expected a 2-D luminance array, got shape {s.shape}")
        h, w = s.shape
        if h < 16 or w < 16:
            raise ValueError(f"image must be at least 16x16, got {h}x{w}")
        if h % 8 or w % 8:
            raise ValueError(f"image dimensions must be multiples of 8, got {h}x{w}")
        if not np.all(np.isfinite(s)):
            raise ValueError("image samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class CoefArray:
    """Quantized luminance DCT coefficients of one image plus its table."""

    coefs: np.ndarray
    table: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefs)
        if c.ndim != 4 or c.shape[2:] != (8, 8):
            raise ValueError(f"coefs must have shape (by, bx, 8, 8), got {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            raise TypeError("coefs must be integers")
        if c.shape[0] * c.shape[1] < 4:
            raise ValueError("need at least 4 blocks")
        if c.size and np.abs(c).max() > MAX_COEF:
            raise ValueError(f"coefficient magnitude exceeds {MAX_COEF}")
        t = _check_table(self.table)
        object.__setattr__(self, "coefs", c.astype(np.int32, copy=False))
        object.__setattr__(self, "table", t)

    @property
    def blocks_y(self) -> int:
        return self.coefs.shape[0]

    @property
    def blocks_x(self) -> int:
        return self.coefs.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.blocks_x * self.blocks_y

    def replace(self, coefs: np.ndarray) -> "CoefArray":
        return CoefArray(coefs, self.table)

    def __eq__(self, other):
        if not isinstance(other, CoefArray):
            return NotImplemented
        return (
            self.coefs.shape == other.coefs.shape
            and np.array_equal(self.coefs, other.coefs)
            and np.array_equal(self.table, other.table)
        )

    __hash__ = None


def _check_table(table) -> np.ndarray:
    t = np.asarray(table)
    if t.shape != (8, 8):
        raise ValueError(f"quantization table must be 8x8, got {t.shape}")
    if np.any(t < 1) or np.any(t > 255) or np.any(t != np.round(t)):
        raise ValueError("quantization table entries must be integers in [1, 255]")
    return t.astype(np.int64)


def rgb_to_ycbcr(r, g, b):
    """Convert RGB samples (scalars or arrays) to (Y, Cb, Cr)."""
    r = np.asarray(r, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    return y, 0.564 * (b - y), 0.713 * (r - y)


def block_dct(blocks) -> np.ndarray:
    """Forward 8x8 DCT over the last two axes."""
    x = np.asarray(blocks, dtype=np.float64)
    return (x.reshape(-1, 64) @ _KT).reshape(x.shape)


def block_idct(coefs) -> np.ndarray:
    """Inverse 8x8 DCT over the last two axes."""
    x = np.asarray(coefs, dtype=np.float64)
    return (x.reshape(-1, 64) @ _K).reshape(x.shape)


def quality_to_table(qf: int) -> np.ndarray:
    """Scale the Annex K luminance table to quality factor ``qf`` (1..100)."""
    if isinstance(qf, bool) or int(qf) != qf or not 1 <= qf <= 100:
        raise ValueError(f"quality factor must be an integer in [1, 100], got {qf!r}")
    qf = int(qf)
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    return np.clip((BASE_LUMA_TABLE * scale + 50) // 100, 1, 255)


def _to_blocks(samples: np.ndarray) -> np.ndarray:
    h, w = samples.shape[-2:]
    lead = samples.shape[:-2]
    b = samples.reshape(*lead, h // 8, 8, w // 8, 8)
    return np.swapaxes(b, -3, -2)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    by, bx = blocks.shape[-4:-2]
    lead = blocks.shape[:-4]
    return np.swapaxes(blocks, -3, -2).reshape(*lead, by * 8, bx * 8)


def quantize_pixels(samples: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Level shift, block DCT and round-to-nearest quantization.

    Works on a stack of equally sized images (leading axes are kept).
    """
    h, w = samples.shape[-2:]
    if h % 8 or w % 8:
        raise ValueError(f"image dimensions must be multiples of 8, got {h}x{w}")
    blocks = _to_blocks(np.asarray(samples, dtype=np.float64) - 128.0)
    f = (blocks.reshape(-1, 64) @ _KT).reshape(blocks.shape)
    f /= table
    return np.rint(f, out=f).astype(np.int32)


def dequantize_pixels(coefs: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quantize_pixels` up to quantization, clamped to [0, 255]."""
    c = np.asarray(coefs)
    f = (c.reshape(-1, 64) * np.asarray(table, dtype=np.float64).reshape(64)) @ _K
    f += 128.0
    np.clip(f, 0.0, 255.0, out=f)
    return _from_blocks(f.reshape(c.shape))


def compress(img, qf=None, table=None) -> CoefArray:
    """Compress a luminance image (or an ``(h, w, 3)`` RGB array).

    Exactly one of ``qf`` or ``table`` must be given.
    """
    if (qf is None) == (table is None):
        raise ValueError("give exactly one of qf or table")
    if table is None:
        table = quality_to_table(qf)
    table = _check_table(table)
    if isinstance(img, PixelImage):
        samples = img.samples
    else:
        arr = np.asarray(img, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 3:
            arr = rgb_to_ycbcr(arr[..., 0], arr[..., 1], arr[..., 2])[0]
        samples = PixelImage(arr).samples
    return CoefArray(quantize_pixels(samples, table), table)


def decompress(c: CoefArray) -> PixelImage:
    return PixelImage(dequantize_pixels(c.coefs, c.table))


def calibrate_stack(coefs: np.ndarray, table: np.ndarray, crop: int = CALIBRATION_CROP) -> np.ndarray:
    """Calibrate a stack ``(..., by, bx, 8, 8)`` of equally sized coefficient arrays."""
    by, bx = coefs.shape[-4:-2]
    if by < 3 or bx < 3:
        raise ValueError("image too small to calibrate (need at least 24x24 pixels)")
    pix = dequantize_pixels(coefs, table)
    cropped = pix[..., crop : crop + (by - 1) * 8, crop : crop + (bx - 1) * 8]
    return quantize_pixels(cropped, table)


def calibrate(c: CoefArray, crop: int = CALIBRATION_CROP) -> CoefArray:
    """Decompress, crop ``crop`` pixels from top and left, recompress.

    The block grid shrinks by one block in each direction.
    """
    return CoefArray(calibrate_stack(c.coefs, c.table, crop), c.table)


@dataclass(frozen=True)
class CoverSourceParams:
    """Parameters of one synthetic camera.

    ``smoothness`` is the Gaussian low-pass width of the scene field,
    ``contrast`` its standard deviation, ``noise_std``/``noise_corr`` the
    strength and spatial correlation of sensor noise, and ``texture_spread``
    the log-normal spread of per-image scene contrast.
    """

    source_id: int
    smoothness: float
    contrast: float
    noise_std: float
    noise_corr: float
    mean_level: float
    texture_spread: float = 0.5
    height: int = 64
    width: int = 64

    def to_dict(self) -> dict:
        return dict(self.__dict__)


SOURCE_RANGES = {
    "smoothness": (1.5, 4.0),
    "contrast": (25.0, 45.0),
    "noise_std": (1.5, 3.0),
    "noise_corr": (0.3, 0.8),
    "mean_level": (100.0, 150.0),
    "texture_spread": (0.3, 0.6),
}


def draw_source_params(
    n: int, rng: np.random.Generator, height: int = 64, width: int = 64, spread: float = 1.0
) -> list[CoverSourceParams]:
    """Draw ``n`` camera parameter sets.

    Each parameter is uniform on its range in ``SOURCE_RANGES``; ``spread``
    shrinks the draws toward the range midpoints (0 makes all sources equal).
    """
    if not 0.0 <= spread <= 1.0:
        raise ValueError("spread must be in [0, 1]")
    out = []
    for i in range(n):
        vals = {}
        for name, (lo, hi) in SOURCE_RANGES.items():
            mid = 0.5 * (lo + hi)
            vals[name] = float(mid + spread * (rng.uniform(lo, hi) - mid))
        out.append(CoverSourceParams(source_id=i, height=height, width=width, **vals))
    return out


def synth_cover_samples(params: CoverSourceParams, rng: np.random.Generator) -> np.ndarray:
    h, w = params.height, params.width
    pad = 8
    # float32 fields: the draws dominate generation time
    scene = rng.standard_normal((h + 2 * pad, w + 2 * pad), dtype=np.float32)
    scene = ndimage.gaussian_filter(scene, params.smoothness, mode="wrap", truncate=3.0)[pad:-pad, pad:-pad]
    scene /= scene.std() + 1e-12
    gain = params.contrast * math.exp(params.texture_spread * rng.standard_normal())
    noise = rng.standard_normal((h, w), dtype=np.float32)
    if params.noise_corr > 0:
        noise = ndimage.gaussian_filter(noise, params.noise_corr, mode="wrap", truncate=3.0)
        noise /= noise.std() + 1e-12
    level = params.mean_level + 10.0 * rng.standard_normal()
    out = level + gain * scene.astype(np.float64) + params.noise_std * noise.astype(np.float64)
    return np.clip(out, 0.0, 255.0, out=out)


def synth_cover(params: CoverSourceParams, rng: np.random.Generator) -> PixelImage:
    """One synthetic cover image: smooth scene plus source-specific noise."""
    return PixelImage(synth_cover_samples(params, rng))
