"""On-disk formats: NFSAR1 complex images, scene text files, 16-bit PGM
heatmaps, and CSV reports.  All writes are atomic (temp file + rename).

NFSAR1 layout (little-endian): magic "NFSAR1\\n", u32 n_azimuth,
u32 n_range, f64 spacing_azimuth_m, f64 spacing_range_m,
f64 origin_azimuth_m, f64 origin_range_m, then row-major samples as
interleaved (real, imag) f64 pairs with axis 0 = azimuth.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .simulate import ComplexImage, Scatterer, SceneSpec

NFSAR_MAGIC = b"NFSAR1\n"
_HEADER = struct.Struct("<II4d")

SCENE_HEADER = "NFSAR-SCENE 1"


class FormatError(ValueError):
    """Malformed file content."""


class SceneFormatError(FormatError):
    """Malformed scene file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_image(path: str | Path, image: ComplexImage) -> None:
    n_az, n_rg = image.data.shape
    header = NFSAR_MAGIC + _HEADER.pack(n_az, n_rg,
                                        image.spacing_azimuth_m,
                                        image.spacing_range_m,
                                        image.origin_azimuth_m,
                                        image.origin_range_m)
    samples = np.ascontiguousarray(image.data, dtype="<c16")
    atomic_write_bytes(path, header + samples.tobytes())


def read_image(path: str | Path) -> ComplexImage:
    payload = Path(path).read_bytes()
    if not payload.startswith(NFSAR_MAGIC):
        raise FormatError(f"{path}: not an NFSAR1 image (bad magic)")
    offset = len(NFSAR_MAGIC)
    if len(payload) < offset + _HEADER.size:
        raise FormatError(f"{path}: truncated NFSAR1 header")
    n_az, n_rg, sp_az, sp_rg, or_az, or_rg = _HEADER.unpack_from(payload, offset)
    offset += _HEADER.size
    expected = n_az * n_rg * 16
    if len(payload) - offset != expected:
        raise FormatError(f"{path}: expected {expected} sample bytes, "
                          f"found {len(payload) - offset}")
    data = np.frombuffer(payload, dtype="<c16", offset=offset).reshape(n_az, n_rg)
    return ComplexImage(data=data.astype(np.complex128),
                        spacing_azimuth_m=sp_az, spacing_range_m=sp_rg,
                        origin_azimuth_m=or_az, origin_range_m=or_rg)


def write_scene(path: str | Path, scene: SceneSpec) -> None:
    lines = [SCENE_HEADER,
             "# azimuth_m range_m amplitude_dbsm phase_deg"]
    for sc in scene.scatterers:
        lines.append(f"{sc.azimuth_m!r} {sc.range_m!r} {sc.amplitude_dbsm!r} "
                     f"{math.degrees(sc.phase_rad)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_scene(path: str | Path, label: str | None = None) -> SceneSpec:
    """Parse a scene text file; raises SceneFormatError with a line number
    on malformed content."""
    text = Path(path).read_text(encoding="utf-8")
    scatterers = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line != SCENE_HEADER:
                raise SceneFormatError(
                    f"expected header {SCENE_HEADER!r}, found {line!r}", lineno)
            header_seen = True
            continue
        fields = line.split()
        if len(fields) != 4:
            raise SceneFormatError(
                f"expected 4 fields (azimuth_m range_m amplitude_dbsm phase_deg), "
                f"found {len(fields)}", lineno)
        try:
            az, rg, amp, phase_deg = (float(f) for f in fields)
        except ValueError as exc:
            raise SceneFormatError(f"non-numeric field: {exc}", lineno) from exc
        try:
            scatterers.append(Scatterer(azimuth_m=az, range_m=rg,
                                        amplitude_dbsm=amp,
                                        phase_rad=math.radians(phase_deg)))
        except ValueError as exc:
            raise SceneFormatError(str(exc), lineno) from exc
    if not header_seen:
        raise SceneFormatError(f"missing header {SCENE_HEADER!r}", 1)
    return SceneSpec(scatterers=tuple(scatterers),
                     label=label or Path(path).stem)


def write_pgm_heatmap(path: str | Path, image: ComplexImage,
                      range_db: float = 40.0) -> None:
    """16-bit P5 heatmap of |image| in dB: pixel = round(65535 * clamp(
    (dB - (peak_dB - range_db)) / range_db, 0, 1))."""
    if range_db <= 0.0:
        raise ValueError("range_db must be > 0")
    magnitude = np.abs(image.data)
    peak = magnitude.max(initial=0.0)
    if peak == 0.0:
        pixels = np.zeros(image.data.shape, dtype=np.uint16)
    else:
        with np.errstate(divide="ignore"):
            level_db = 20.0 * np.log10(magnitude / peak)
        scaled = (level_db + range_db) / range_db
        pixels = np.rint(65535.0 * np.clip(scaled, 0.0, 1.0)).astype(np.uint16)
    n_az, n_rg = pixels.shape
    # PGM rows scan left-to-right, top-to-bottom: emit range as width.
    header = f"P5\n{n_rg} {n_az}\n65535\n".encode("ascii")
    atomic_write_bytes(path, header + pixels.astype(">u2").tobytes())


def format_csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def write_csv(path: str | Path, rows: list[list]) -> None:
    """CSV with a header row, '.' decimal separator, 6 significant digits."""
    lines = [",".join(format_csv_value(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")
