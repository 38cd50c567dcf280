"""Image container, PNG I/O, quality metrics and the pixel coordinate grid.

All intensities live in the unit interval. Images are stored as read-only
``(height, width, channels)`` float64 arrays; flattening in C order gives the
row-major, channel-interleaved layout used everywhere else in the package.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import png

from .errors import FormatError, ImageIOError, ShapeMismatch

#: Returned by :func:`psnr` for identical images.
INF_PSNR = math.inf


@dataclass(frozen=True)
class Image:
    """An ``H x W x C`` intensity grid with ``C`` in {1, 3}.

    Parameters
    ----------
    data : array_like
        Either ``(H, W)`` (promoted to one channel) or ``(H, W, C)``.
    bit_depth : int
        Bit depth of the source file, kept as provenance only.
    """

    data: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ShapeMismatch(f"expected (H, W) or (H, W, 1|3) array, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"empty image {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite intensities")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Row-major, channel-interleaved copy of the intensities."""
        return self.data.reshape(-1).copy()

    def pixels(self) -> np.ndarray:
        """``(H*W, C)`` view; row ``r*W + c`` holds pixel (r, c)."""
        return self.data.reshape(-1, self.channels)

    def clamped(self) -> "Image":
        return Image(np.clip(self.data, 0.0, 1.0), self.bit_depth)

    @classmethod
    def from_pixels(cls, values, height: int, width: int) -> "Image":
        """Inverse of :meth:`pixels`."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values.reshape(height, width, -1))


def load_png(path) -> Image:
    """Read an 8- or 16-bit grayscale or RGB PNG into the unit interval.

    Palette images are expanded to RGB. Anything carrying an alpha channel is
    rejected rather than silently flattened.
    """
    path = os.fspath(path)
    try:
        reader = png.Reader(filename=path)
        width, height, rows, info = reader.read()
        if info.get("alpha"):
            raise FormatError(f"{path}: alpha channel is not supported")
        if info.get("palette"):
            width, height, rows, info = png.Reader(filename=path).asRGB8()
            if info.get("alpha"):
                raise FormatError(f"{path}: alpha channel is not supported")
        planes = info["planes"]
        bitdepth = info["bitdepth"]
        raw = np.vstack([np.asarray(row, dtype=np.float64) for row in rows])
    except FileNotFoundError as exc:
        raise ImageIOError(f"{path}: no such file") from exc
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc}") from exc
    except png.FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except png.ProtocolError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if planes not in (1, 3):
        raise FormatError(f"{path}: unsupported number of planes {planes}")
    if bitdepth not in (1, 2, 4, 8, 16):
        raise FormatError(f"{path}: unsupported bit depth {bitdepth}")
    maxval = float(2**bitdepth - 1)
    data = raw.reshape(height, width, planes) / maxval
    return Image(data, bit_depth=bitdepth)


def to_bytes(img: Image) -> np.ndarray:
    """Clamp to [0, 1] and quantize to uint8 with ``round(v * 255)``."""
    # round half up; np.rint rounds half to even
    q = np.floor(np.clip(img.data, 0.0, 1.0) * 255.0 + 0.5)
    return q.astype(np.uint8)


def save_png(img: Image, path) -> None:
    """Write an 8-bit PNG (grayscale or RGB, matching the channel count)."""
    path = os.fspath(path)
    q = to_bytes(img)
    greyscale = img.channels == 1
    rows = q.reshape(img.height, img.width * img.channels)
    writer = png.Writer(img.width, img.height, greyscale=greyscale, bitdepth=8)
    try:
        with open(path, "wb") as fh:
            writer.write(fh, rows.tolist())
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc}") from exc


def _check_same(a: Image, b: Image):
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")


def mse(a: Image, b: Image) -> float:
    """Mean squared difference over all H*W*C intensities."""
    _check_same(a, b)
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(test: Image, reference: Image) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0.

    Returns :data:`INF_PSNR` when the images are identical.
    """
    err = mse(test, reference)
    return psnr_from_mse(err)


def psnr_from_mse(err: float) -> float:
    if err == 0.0:
        return INF_PSNR
    return float(-10.0 * np.log10(err))


def make_grid(height: int, width: int) -> np.ndarray:
    """Normalized pixel-center coordinates as an ``(H*W, 2)`` array.

    Column 0 is x (varies along a row), column 1 is y. Each axis spans
    ``{0, 1/(n-1), ..., 1}``; a single-pixel axis collapses to 0.
    Row ``r*W + c`` holds pixel (r, c).
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    xs = np.linspace(0.0, 1.0, width) if width > 1 else np.zeros(1)
    ys = np.linspace(0.0, 1.0, height) if height > 1 else np.zeros(1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def center_crop(img: Image, height: int, width: int) -> Image:
    if height > img.height or width > img.width:
        raise ShapeMismatch(
            f"crop {height}x{width} larger than image {img.height}x{img.width}"
        )
    r0 = (img.height - height) // 2
    c0 = (img.width - width) // 2
    return Image(img.data[r0 : r0 + height, c0 : c0 + width], img.bit_depth)
