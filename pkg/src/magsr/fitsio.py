"""Minimal FITS image reader/writer: primary HDU plus IMAGE extensions.

Supports 2-D float32/float64 (BITPIX -32/-64) image HDUs with string,
numeric and logical header cards, which covers magnetogram ingestion and
multi-extension uncertainty-map files. Not a general FITS implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BLOCK = 2880
CARD = 80

_BITPIX_DTYPE = {-32: ">f4", -64: ">f8", 8: ">u1", 16: ">i2", 32: ">i4", 64: ">i8"}


class FitsFormatError(OSError):
    """Raised when a file does not parse as the supported FITS subset."""


@dataclass
class ImageHDU:
    data: np.ndarray | None
    header: dict = field(default_factory=dict)
    name: str = ""


def _format_card(key: str, value, comment: str = "") -> bytes:
    if len(key) > 8:
        raise ValueError(f"FITS keyword too long: {key!r}")
    if isinstance(value, bool):
        val = "T" if value else "F"
        body = f"{key:<8}= {val:>20}"
    elif isinstance(value, (int, np.integer)):
        body = f"{key:<8}= {int(value):>20}"
    elif isinstance(value, (float, np.floating)):
        body = f"{key:<8}= {float(value):>20.13E}"
    elif isinstance(value, str):
        quoted = "'" + value.replace("'", "''") + "'"
        body = f"{key:<8}= {quoted:<20}"
    else:
        raise ValueError(f"unsupported header value type for {key}: {type(value)}")
    if comment:
        body += f" / {comment}"
    card = body[:CARD].ljust(CARD)
    return card.encode("ascii")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("'"):
        # string value; '' escapes a quote, comment follows the closing quote
        out = []
        i = 1
        while i < len(raw):
            if raw[i] == "'":
                if i + 1 < len(raw) and raw[i + 1] == "'":
                    out.append("'")
                    i += 2
                    continue
                break
            out.append(raw[i])
            i += 1
        return "".join(out).rstrip()
    if "/" in raw:
        raw = raw.split("/", 1)[0].strip()
    if raw == "T":
        return True
    if raw == "F":
        return False
    if raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw.replace("D", "E"))
    except ValueError:
        return raw


def _read_header(buf: bytes, offset: int) -> tuple[dict, int]:
    header: dict = {}
    pos = offset
    while True:
        block = buf[pos : pos + BLOCK]
        if len(block) < BLOCK:
            raise FitsFormatError("truncated FITS header")
        pos += BLOCK
        done = False
        for i in range(0, BLOCK, CARD):
            card = block[i : i + CARD].decode("ascii", errors="replace")
            key = card[:8].strip()
            if key == "END":
                done = True
                break
            if not key or key in ("COMMENT", "HISTORY"):
                continue
            if card[8:10] != "= ":
                continue
            header[key] = _parse_value(card[10:])
        if done:
            return header, pos


def _read_data(buf: bytes, offset: int, header: dict) -> tuple[np.ndarray | None, int]:
    naxis = int(header.get("NAXIS", 0))
    if naxis == 0:
        return None, offset
    bitpix = int(header["BITPIX"])
    if bitpix not in _BITPIX_DTYPE:
        raise FitsFormatError(f"unsupported BITPIX {bitpix}")
    dims = [int(header[f"NAXIS{i}"]) for i in range(1, naxis + 1)]
    count = int(np.prod(dims))
    itemsize = abs(bitpix) // 8
    nbytes = count * itemsize
    raw = buf[offset : offset + nbytes]
    if len(raw) < nbytes:
        raise FitsFormatError("truncated FITS data segment")
    arr = np.frombuffer(raw, dtype=_BITPIX_DTYPE[bitpix]).reshape(dims[::-1])
    padded = ((nbytes + BLOCK - 1) // BLOCK) * BLOCK
    return arr.astype(arr.dtype.newbyteorder("=")), offset + padded


def read_fits(path) -> list[ImageHDU]:
    """Parse every HDU in the file; data arrays come back in native byte order."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < BLOCK:
        raise FitsFormatError(f"{path}: file too short to be FITS")
    if not buf.startswith(b"SIMPLE  ="):
        raise FitsFormatError(f"{path}: missing SIMPLE card")
    hdus = []
    pos = 0
    while pos < len(buf):
        header, pos = _read_header(buf, pos)
        data, pos = _read_data(buf, pos, header)
        hdus.append(ImageHDU(data=data, header=header, name=str(header.get("EXTNAME", ""))))
    return hdus


def _write_hdu(fh, data: np.ndarray | None, header: dict, primary: bool, name: str = "") -> None:
    cards = []
    if primary:
        cards.append(_format_card("SIMPLE", True, "conforms to FITS standard"))
    else:
        cards.append(_format_card("XTENSION", "IMAGE   ", "image extension"))
    if data is None:
        cards.append(_format_card("BITPIX", 8))
        cards.append(_format_card("NAXIS", 0))
    else:
        arr = np.asarray(data)
        if arr.dtype == np.float64:
            bitpix = -64
        else:
            arr = arr.astype(np.float32)
            bitpix = -32
        cards.append(_format_card("BITPIX", bitpix))
        cards.append(_format_card("NAXIS", arr.ndim))
        for i, n in enumerate(arr.shape[::-1], start=1):
            cards.append(_format_card(f"NAXIS{i}", n))
    if not primary:
        cards.append(_format_card("PCOUNT", 0))
        cards.append(_format_card("GCOUNT", 1))
        if name:
            cards.append(_format_card("EXTNAME", name))
    if primary:
        cards.append(_format_card("EXTEND", True))
    for key, value in header.items():
        if key in ("SIMPLE", "XTENSION", "BITPIX", "NAXIS", "PCOUNT", "GCOUNT", "EXTEND"):
            continue
        if key.startswith("NAXIS"):
            continue
        cards.append(_format_card(key, value))
    cards.append(b"END".ljust(CARD))
    blob = b"".join(cards)
    fh.write(blob.ljust(((len(blob) + BLOCK - 1) // BLOCK) * BLOCK))
    if data is not None:
        arr = np.asarray(data)
        payload = arr.astype(">f8" if arr.dtype == np.float64 else ">f4").tobytes()
        fh.write(payload.ljust(((len(payload) + BLOCK - 1) // BLOCK) * BLOCK, b"\x00"))


def write_fits(path, hdus: list[tuple[np.ndarray | None, dict, str]]) -> None:
    """Write HDUs as (data, header, extname) triples; the first is primary."""
    if not hdus:
        raise ValueError("at least one HDU required")
    with open(path, "wb") as fh:
        for i, (data, header, name) in enumerate(hdus):
            _write_hdu(fh, data, header, primary=(i == 0), name=name)


def write_image(path, data: np.ndarray, header: dict | None = None) -> None:
    """Write a single-image FITS file (primary HDU only)."""
    write_fits(path, [(data, dict(header or {}), "")])
