"""Image preprocessing: grayscale, downsample, equalize, vectorize.

Images are carried as float64 numpy arrays with intensities on the 0-255
scale (never rescaled to [0, 1]; the gallery perturbation bound of 0.5 is
defined against this range). A single-channel raster is a ``(rows, cols)``
array, a color raster is ``(rows, cols, 3)`` in RGB order. A feature
vector is the column-major flattening of a ``(c, d)`` grayscale raster
into a length ``c*d`` vector.

The full pipeline is grayscale -> downsample -> histogram equalization
(optional) -> vectorize, and is deterministic: identical input bytes give
bit-identical feature vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import InvalidInputError

# Rec.601 luma weights for R, G, B.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class PreprocessConfig:
    """Preprocessing decisions applied to every image of a run."""

    resolution: tuple[int, int]  # (c, d) = (rows, cols)
    histeq: bool = True


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert an RGB raster to grayscale with Rec.601 luma weights.

    Single-channel input passes through unchanged; any other channel
    count is rejected.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    if img.ndim == 3 and img.shape[2] == 3:
        _, g, b = _LUMA_WEIGHTS
        red = img[:, :, 0]
        # anchored at R so achromatic pixels are exact fixed points
        return red + g * (img[:, :, 1] - red) + b * (img[:, :, 2] - red)
    raise InvalidInputError(
        f"expected 1 or 3 channels, got array of shape {img.shape}"
    )


def downsample(img: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Resample a grayscale raster to ``target`` = (c, d) rows x cols.

    Bilinear interpolation, switching to area averaging when either axis
    shrinks by more than 2x. Both filters are convex combinations of
    input pixels, so the output is clipped to the input's [min, max] to
    keep the range invariant exact against float rounding. Upsampling is
    permitted but warned about, since it adds no information.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"expected a 2-D raster, got shape {img.shape}")
    c, d = int(target[0]), int(target[1])
    if c < 1 or d < 1:
        raise InvalidInputError(f"target resolution must be positive, got {(c, d)}")
    h, w = img.shape
    if (c, d) == (h, w):
        return img.copy()
    if c > h or d > w:
        warnings.warn(
            f"upsampling {h}x{w} image to {c}x{d}", RuntimeWarning, stacklevel=2
        )
    if h > 2 * c or w > 2 * d:
        interp = cv2.INTER_AREA
    else:
        interp = cv2.INTER_LINEAR
    out = cv2.resize(img, (d, c), interpolation=interp)
    return np.clip(out, img.min(), img.max())


def equalize_histogram(img: np.ndarray) -> np.ndarray:
    """Spread a grayscale raster over the full 0-255 range.

    Intensities are quantized to integer levels first, then remapped with
    the cdf-min normalization h(v) = round(255 * (cdf(v) - cdf_min) /
    (N - cdf_min)). The mapping is monotone non-decreasing. An image
    occupying a single level passes through unchanged (the denominator
    would be zero).
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"expected a 2-D raster, got shape {img.shape}")
    levels = np.rint(np.clip(img, 0.0, 255.0)).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    n = levels.size
    cdf_min = cdf[hist > 0][0]
    if cdf_min == n:
        return levels.astype(np.float64)
    mapping = np.rint(255.0 * (cdf - cdf_min) / float(n - cdf_min))
    return mapping[levels].astype(np.float64)


def vectorize(img: np.ndarray, resolution: tuple[int, int] | None = None) -> np.ndarray:
    """Flatten a grayscale raster column by column into a feature vector.

    Element order is column 1 top-to-bottom, then column 2, and so on.
    If ``resolution`` is given the raster must match it exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"expected a 2-D raster, got shape {img.shape}")
    if resolution is not None and img.shape != tuple(resolution):
        raise InvalidInputError(
            f"raster is {img.shape}, expected {tuple(resolution)}"
        )
    return img.reshape(-1, order="F")


def devectorize(vec: np.ndarray, resolution: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vectorize`: rebuild the (c, d) raster."""
    vec = np.asarray(vec, dtype=np.float64)
    c, d = resolution
    if vec.ndim != 1 or vec.size != c * d:
        raise InvalidInputError(
            f"vector of length {vec.size} does not match resolution {(c, d)}"
        )
    return vec.reshape((c, d), order="F")


def preprocess_image(
    img: np.ndarray, resolution: tuple[int, int], histeq: bool = True
) -> np.ndarray:
    """Run the full pipeline on one raster, returning its feature vector."""
    gray = to_grayscale(img)
    small = downsample(gray, resolution)
    if histeq:
        small = equalize_histogram(small)
    return vectorize(small, resolution)


def read_image(path: str | Path) -> np.ndarray:
    """Load a raster file as float64 intensities in [0, 255].

    Binary PGM (P5) is parsed directly so ingestion is bit-exact; other
    formats (PNG at minimum) go through Pillow. 16-bit samples are scaled
    onto the 0-255 range.
    """
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm_p5(path)
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L"):
                return np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
            if im.mode == "L":
                return np.asarray(im, dtype=np.float64)
            if im.mode != "RGB":
                im = im.convert("RGB")
            return np.asarray(im, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc


def _read_pgm_p5(path: Path) -> np.ndarray:
    """Parse a binary PGM file.

    Header tokens are width, height and maxval as ASCII decimals;
    '#' comments run to end of line and may appear between tokens. A
    single whitespace byte separates maxval from the raster. Samples are
    one byte for maxval < 256, otherwise two bytes big-endian.
    """
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise InvalidInputError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidInputError(f"{path}: truncated PGM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError as exc:
            raise InvalidInputError(f"{path}: bad PGM header token") from exc
    pos += 1  # the single whitespace byte before the raster
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise InvalidInputError(f"{path}: invalid PGM dimensions {fields}")
    count = width * height
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if len(data) - pos < count * dtype.itemsize:
        raise InvalidInputError(f"{path}: PGM raster shorter than header promises")
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    img = raster.reshape((height, width)).astype(np.float64)
    if maxval != 255:
        img *= 255.0 / maxval
    return img
