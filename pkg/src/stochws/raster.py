"""Raster data model and file I/O.

Scalar fields, label maps and binary masks are plain 2-D numpy arrays
(``float``, integer and ``bool`` respectively) indexed ``[row, col]`` in the
usual matrix order. Only multiband images get a dedicated container.

File formats
------------
* Channel manifest: JSON ``{"width", "height", "channels": [{"name", "path"}]}``
  where each path points at a binary PGM (``P5``, 8 or 16 bit, big-endian)
  or a PFM file. Relative paths resolve against the manifest directory.
* Float fields: PFM (``Pf``), little-endian, scale ``-1.0``, rows stored
  bottom-to-top as the format requires.
* Label maps: 16-bit PGM plus an optional JSON legend sidecar.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError

__all__ = [
    "MultispectralImage",
    "load_multispectral",
    "save_multispectral",
    "downsample_average",
    "read_pgm",
    "write_pgm",
    "read_pfm",
    "write_pfm",
    "write_ppm",
    "export_artifact",
    "import_artifact",
    "rgb_composite",
]


@dataclass(frozen=True)
class MultispectralImage:
    """An ``L``-channel image stored as an ``(L, height, width)`` float array."""

    data: np.ndarray
    channel_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3 or data.shape[0] < 1:
            raise DataError(f"expected (L, H, W) data, got shape {data.shape}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise DataError("image must have at least one pixel")
        if not np.all(np.isfinite(data)):
            raise DataError("non-finite intensities")
        if np.any(data < 0):
            raise DataError("intensities must be non-negative")
        data.setflags(write=False)
        names = tuple(self.channel_names) or tuple(
            f"channel{j + 1}" for j in range(data.shape[0])
        )
        if len(names) != data.shape[0]:
            raise DataError("one name per channel required")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def table(self) -> np.ndarray:
        """Pixel x channel table of shape ``(P, L)``, rows in raster order."""
        return self.data.reshape(self.n_channels, -1).T

    def channel(self, j: int) -> np.ndarray:
        return self.data[j]


# --------------------------------------------------------------------------
# PGM / PFM


def _read_header_tokens(fh, count):
    tokens = []
    while len(tokens) < count:
        line = fh.readline()
        if not line:
            raise DataError("truncated header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return tokens


def _ints(path, tokens):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise DataError(f"{path}: malformed header") from None


def _open(path):
    try:
        return open(path, "rb")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def read_pgm(path) -> np.ndarray:
    """Read a binary (``P5``) PGM file into an unsigned integer array."""
    with _open(path) as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise DataError(f"{path}: not a binary PGM (magic {magic!r})")
        w, h, maxval = _ints(path, _read_header_tokens(fh, 3))
        if not 0 < maxval < 65536:
            raise DataError(f"{path}: bad maxval {maxval}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = fh.read(w * h * dtype.itemsize)
    if len(raw) != w * h * dtype.itemsize:
        raise DataError(f"{path}: truncated pixel data")
    arr = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8)


def write_pgm(path, arr, maxval=None) -> None:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise DataError("PGM holds a single 2-D plane")
    if arr.dtype.kind == "b":
        arr = arr.astype(np.uint8)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise DataError("PGM requires integer samples; quantize first")
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise DataError("sample values exceed 16-bit PGM range")
    if maxval is None:
        maxval = 255 if (arr.size == 0 or arr.max() <= 255) else 65535
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr.astype(dtype)).tobytes())


def write_ppm(path, rgb) -> None:
    """Write an ``(H, W, 3)`` uint8 array as binary PPM (``P6``)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise DataError("write_ppm expects an (H, W, 3) uint8 array")
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb).tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a greyscale (``Pf``) or colour (``PF``) PFM file.

    Colour files are returned as ``(H, W, 3)``.
    """
    with _open(path) as fh:
        magic = fh.readline().strip()
        if magic not in (b"Pf", b"PF"):
            raise DataError(f"{path}: not a PFM file")
        w, h = _ints(path, _read_header_tokens(fh, 2))
        try:
            scale = float(_read_header_tokens(fh, 1)[0])
        except ValueError:
            raise DataError(f"{path}: malformed header") from None
        nch = 3 if magic == b"PF" else 1
        dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
        raw = fh.read(w * h * nch * 4)
    if len(raw) != w * h * nch * 4:
        raise DataError(f"{path}: truncated pixel data")
    arr = np.frombuffer(raw, dtype=dtype).reshape(h, w, nch)
    arr = np.flipud(arr).astype(np.float32)
    return arr[..., 0] if nch == 1 else arr


def write_pfm(path, arr) -> None:
    """Write a 2-D float plane as little-endian PFM (float32 samples)."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim != 2:
        raise DataError("write_pfm expects a 2-D plane")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(np.flipud(arr)).astype("<f4").tobytes())


def _read_plane(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        arr = read_pfm(path)
        if arr.ndim != 2:
            raise DataError(f"{path}: channel rasters must be greyscale")
        return arr.astype(np.float64)
    return read_pgm(path).astype(np.float64)


# --------------------------------------------------------------------------
# Manifests


def load_multispectral(manifest_path) -> MultispectralImage:
    """Load the channels listed in a JSON manifest, in manifest order."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(manifest, dict):
        raise DataError(f"{manifest_path}: manifest must be a JSON object")
    channels = manifest.get("channels") or []
    if not channels:
        raise DataError("empty manifest")
    planes, names = [], []
    for k, ch in enumerate(channels):
        if not isinstance(ch, dict) or "path" not in ch:
            raise DataError(f"channel {k}: expected an object with a 'path' entry")
        path = Path(ch["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        if not path.is_file():
            raise DataError(f"missing channel file: {path}")
        plane = _read_plane(path)
        if planes and plane.shape != planes[0].shape:
            raise DataError(
                f"dimension mismatch: channel {k} is {plane.shape[1]}x{plane.shape[0]}, "
                f"expected {planes[0].shape[1]}x{planes[0].shape[0]}"
            )
        planes.append(plane)
        names.append(str(ch.get("name", f"channel{k + 1}")))
    h, w = planes[0].shape
    if ("width" in manifest and int(manifest["width"]) != w) or (
        "height" in manifest and int(manifest["height"]) != h
    ):
        raise DataError("dimension mismatch between manifest and channel rasters")
    return MultispectralImage(np.stack(planes), tuple(names))


def save_multispectral(img: MultispectralImage, directory, stem="channel") -> Path:
    """Write every channel and a ``manifest.json`` into ``directory``.

    Integer-valued channels within 16 bits go to PGM, anything else to PFM.
    Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for j, (name, plane) in enumerate(zip(img.channel_names, img.data)):
        if np.all(plane == np.round(plane)) and plane.max() <= 65535:
            fname = f"{stem}{j + 1}.pgm"
            write_pgm(directory / fname, plane.astype(np.uint16),
                      maxval=255 if plane.max() <= 255 else 65535)
        else:
            fname = f"{stem}{j + 1}.pfm"
            write_pfm(directory / fname, plane)
        entries.append({"name": name, "path": fname})
    manifest = {"width": img.width, "height": img.height, "channels": entries}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


# --------------------------------------------------------------------------
# Resampling


def downsample_average(img: MultispectralImage, factor: int) -> MultispectralImage:
    """Replace each ``factor x factor`` block by its mean, channel by channel."""
    factor = int(factor)
    if factor < 1:
        raise DataError("factor must be a positive integer")
    L, h, w = img.data.shape
    if h % factor or w % factor:
        raise DataError(f"{w}x{h} is not divisible by {factor}")
    blocks = img.data.reshape(L, h // factor, factor, w // factor, factor)
    return MultispectralImage(blocks.mean(axis=(2, 4)), img.channel_names)


def rgb_composite(img: MultispectralImage, channels=(2, 1, 0)) -> np.ndarray:
    """8-bit RGB debug composite with a min-max stretch per channel.

    ``channels`` are zero-based indices mapped to R, G, B.
    """
    out = np.zeros(img.shape + (3,), dtype=np.uint8)
    for k, j in enumerate(channels):
        plane = img.data[j]
        lo, hi = plane.min(), plane.max()
        if hi > lo:
            out[..., k] = np.round(255 * (plane - lo) / (hi - lo)).astype(np.uint8)
    return out


# --------------------------------------------------------------------------
# Artifact export


_FORMATS = ("pfm", "pgm8", "pgm16", "manifest")


def export_artifact(artifact, path, format=None, quantize=False, legend=None) -> None:
    """Write a field, label map, mask or multispectral image to disk.

    Parameters
    ----------
    artifact : ndarray or MultispectralImage
        ``bool`` arrays are masks, integer arrays label maps, float arrays
        scalar fields.
    path : path-like
        Target file (a directory for ``format="manifest"``).
    format : {"pfm", "pgm8", "pgm16", "manifest"}, optional
        Inferred from the artifact kind when omitted: float -> ``pfm``,
        labels -> ``pgm16``, masks -> ``pgm8``.
    quantize : bool
        Allow a float field in ``[0, 1]`` to be written as ``pgm8`` / ``pgm16``
        by rounding to the nearest level.
    legend : dict, optional
        Written next to label maps as ``<path>.json``.
    """
    path = Path(path)
    if isinstance(artifact, MultispectralImage):
        if format not in (None, "manifest"):
            raise DataError("multispectral images export as a manifest")
        save_multispectral(artifact, path)
        return
    arr = np.asarray(artifact)
    if format is None:
        format = {"b": "pgm8", "f": "pfm"}.get(arr.dtype.kind, "pgm16")
    if format not in _FORMATS:
        raise DataError(f"unknown format {format!r}")
    parent = path.parent if str(path.parent) else Path(".")
    if not os.access(parent, os.W_OK):
        raise DataError(f"unwritable path: {path}")

    if format == "pfm":
        write_pfm(path, arr)
        return
    if format == "manifest":
        raise DataError("manifest format is for multispectral images")
    maxval = 255 if format == "pgm8" else 65535
    if arr.dtype.kind == "b":
        write_pgm(path, arr.astype(np.uint8) * 255, maxval=maxval)
    elif arr.dtype.kind == "f":
        if not quantize:
            raise DataError("float field needs quantize=True for PGM export")
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise DataError("quantized export expects values in [0, 1]")
        write_pgm(path, np.round(arr * maxval).astype(np.uint16), maxval=maxval)
    else:
        if arr.size and arr.max() > maxval:
            raise DataError(f"label values exceed {format} capacity")
        write_pgm(path, arr.astype(np.uint16), maxval=maxval)
        if legend is not None:
            Path(str(path) + ".json").write_text(json.dumps(legend, indent=2))


def import_artifact(path, kind=None) -> np.ndarray:
    """Inverse of :func:`export_artifact` for single-plane files.

    ``kind`` may be ``"mask"`` (PGM > 0), ``"labels"`` (integers),
    ``"quantized"`` (PGM scaled back to ``[0, 1]``) or ``None``.
    """
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return read_pfm(path)
    arr = read_pgm(path)
    if kind == "mask":
        return arr > 0
    if kind == "quantized":
        with open(path, "rb") as fh:
            fh.readline()
            maxval = int(_read_header_tokens(fh, 3)[2])
        return arr.astype(np.float64) / maxval
    return arr.astype(np.int64)
