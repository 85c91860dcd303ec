"""Grayscale image file I/O.

Images are 2-D float64 arrays with values in [0, 1]; quantization happens
only at the file boundary. Supported formats: PGM (P2/P5, 8- or 16-bit)
and grayscale PNG (8- or 16-bit). 16-bit PGM (P5) is the canonical
interchange format for reconstructions. Color files are rejected, never
converted.
"""

import re

import numpy as np
from PIL import Image as _PILImage


class ImageFormatError(ValueError):
    """Unsupported, malformed, or color image file."""


_PGM_MAXVAL_16 = 65535


def validate_image(pixels, name="image"):
    """Check that ``pixels`` is a finite 2-D float array; return it as float64."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("%s must be a non-empty 2-D array, got shape %r"
                         % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite values" % name)
    return arr


def load_image(path):
    """Load a PGM or grayscale PNG file as a float64 array in [0, 1].

    Values are divided by the format maximum (PGM maxval, or 255/65535 for
    PNG). Raises ImageFormatError for color or unsupported files.
    """
    path = str(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head in (b"P2", b"P5"):
        return _load_pgm(path)
    if head == b"\x89P":
        return _load_png(path)
    raise ImageFormatError("unsupported image format in %r "
                           "(expected PGM P2/P5 or PNG)" % path)


def save_image(image, path):
    """Write ``image`` to ``path`` as 16-bit PGM (P5) or 16-bit PNG.

    The format follows the file extension (.png for PNG, anything else is
    PGM). Values are clamped to [0, 1] then quantized to 0..65535.
    """
    arr = validate_image(image)
    quant = np.round(np.clip(arr, 0.0, 1.0) * _PGM_MAXVAL_16).astype(np.uint16)
    if str(path).lower().endswith(".png"):
        _PILImage.fromarray(quant, mode="I;16").save(str(path))
    else:
        _save_pgm16(quant, path)


def _load_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    pos = 2
    fields = []
    while len(fields) < 3:
        token, pos = _next_pgm_token(data, pos, path)
        fields.append(token)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ImageFormatError("malformed PGM header in %r" % path) from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ImageFormatError("invalid PGM dimensions or maxval in %r" % path)

    if magic == b"P2":
        values = data[pos:].split()
        if len(values) != width * height:
            raise ImageFormatError("PGM P2 sample count mismatch in %r" % path)
        try:
            samples = np.array([int(v) for v in values], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-numeric PGM P2 sample in %r" % path) from None
    else:
        pos += 1  # single whitespace byte after maxval
        nbytes = 2 if maxval > 255 else 1
        raw = data[pos:pos + width * height * nbytes]
        if len(raw) != width * height * nbytes:
            raise ImageFormatError("truncated PGM P5 data in %r" % path)
        dtype = ">u2" if nbytes == 2 else np.uint8
        samples = np.frombuffer(raw, dtype=dtype).astype(np.int64)

    if samples.min() < 0 or samples.max() > maxval:
        raise ImageFormatError("PGM sample out of range in %r" % path)
    return samples.reshape(height, width).astype(np.float64) / maxval


def _next_pgm_token(data, pos, path):
    while True:
        match = re.compile(rb"\s*(#[^\n]*\n\s*)*").match(data, pos)
        pos = match.end()
        token = re.compile(rb"\S+").match(data, pos)
        if token is None:
            raise ImageFormatError("truncated PGM header in %r" % path)
        return token.group(), token.end()


def _save_pgm16(quant, path):
    header = ("P5\n%d %d\n%d\n" % (quant.shape[1], quant.shape[0],
                                   _PGM_MAXVAL_16)).encode("ascii")
    with open(str(path), "wb") as fh:
        fh.write(header)
        fh.write(quant.astype(">u2").tobytes())


def _load_png(path):
    with _PILImage.open(path) as im:
        mode = im.mode
        if mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float64)
            if arr.min() < 0 or arr.max() > 65535:
                raise ImageFormatError("PNG sample out of 16-bit range in %r" % path)
            return arr / 65535.0
        raise ImageFormatError("PNG mode %r in %r is not 8/16-bit grayscale "
                               "(color images are rejected, not converted)"
                               % (mode, path))
