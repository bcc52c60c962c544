"""Reading and writing 3D label maps stored as NIfTI-1.

Only the subset of the format needed for label maps is handled: a 3D grid
(trailing singleton dimensions are tolerated), integer or integral-valued
float voxels, and the voxel spacing from ``pixdim``.  Orientation fields are
parsed past but not interpreted; all metric code assumes reference and
prediction live on the same voxel grid.
"""

from __future__ import annotations

import gzip
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .exceptions import (
    BadMagic,
    IoFailure,
    NonIntegralLabels,
    TruncatedStream,
    UnsupportedDatatype,
)

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# NIfTI-1 datatype code -> numpy dtype (byte order applied at parse time)
DATATYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    256: np.dtype(np.int8),
    512: np.dtype(np.uint16),
}
_CODE_FOR_DTYPE = {dt: code for code, dt in DATATYPES.items()}


@dataclass(frozen=True)
class LabelScheme:
    """Ordered mapping of integer label codes to tissue names."""

    entries: tuple[tuple[int, str], ...]
    background_code: int = 0

    def __post_init__(self):
        codes = [c for c, _ in self.entries]
        if len(set(codes)) != len(codes):
            raise ValueError(f"duplicate label codes in scheme: {codes}")
        if self.background_code not in codes:
            raise ValueError(f"background code {self.background_code} not in scheme")

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.entries)

    @property
    def foreground(self) -> tuple[tuple[int, str], ...]:
        return tuple((c, n) for c, n in self.entries if c != self.background_code)

    def name(self, code: int) -> str:
        for c, n in self.entries:
            if c == code:
                return n
        raise KeyError(code)

    def __contains__(self, code) -> bool:
        return int(code) in self.codes

    @classmethod
    def from_mapping(cls, mapping: Mapping[int | str, str], background_code: int = 0) -> "LabelScheme":
        entries = tuple(sorted((int(k), str(v)) for k, v in mapping.items()))
        return cls(entries, background_code)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "LabelScheme":
        """Load a scheme from JSON: ``{"labels": {"0": "background", ...}, "background": 0}``."""
        with open(path) as fh:
            doc = json.load(fh)
        labels = doc.get("labels", doc)
        return cls.from_mapping(labels, int(doc.get("background", 0)))

    def to_dict(self) -> dict:
        return {"labels": {str(c): n for c, n in self.entries}, "background": self.background_code}


# Tissue order as listed by the challenge; the numeric assignment is a convention.
DEFAULT_SCHEME = LabelScheme(
    (
        (0, "background"),
        (1, "eCSF"),
        (2, "GM"),
        (3, "WM"),
        (4, "ventricles"),
        (5, "cerebellum"),
        (6, "deepGM"),
        (7, "brainstem"),
    )
)


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Immutable 3D label map indexed as ``voxels[x, y, z]``."""

    voxels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.voxels)
        if arr.ndim != 3:
            raise ValueError(f"label volume must be 3D, got shape {arr.shape}")
        if arr.dtype.kind not in "iu":
            raise ValueError(f"label volume must hold integers, got {arr.dtype}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive lengths, got {self.spacing}")
        arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "voxels", arr)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.voxels.shape)

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and bool(np.array_equal(self.voxels, other.voxels))
        )

    __hash__ = None


def validate_labels(volume: LabelVolume, scheme: LabelScheme = DEFAULT_SCHEME) -> dict[int, int]:
    """Return ``{code: voxel_count}`` for every code not declared by ``scheme``."""
    codes, counts = np.unique(volume.voxels, return_counts=True)
    allowed = set(scheme.codes)
    return {int(c): int(n) for c, n in zip(codes, counts) if int(c) not in allowed}


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise TruncatedStream(f"corrupt gzip stream: {exc}") from exc
    return data


def _byte_order(header: bytes) -> str:
    (size_le,) = struct.unpack("<i", header[:4])
    if size_le == HEADER_SIZE:
        return "<"
    (size_be,) = struct.unpack(">i", header[:4])
    if size_be == HEADER_SIZE:
        return ">"
    raise BadMagic(f"sizeof_hdr is {size_le}, expected {HEADER_SIZE}")


def parse_header(data: bytes) -> dict:
    """Decode the fields of a 348-byte NIfTI-1 header that matter for label maps."""
    if len(data) < HEADER_SIZE:
        raise TruncatedStream(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    bo = _byte_order(data)
    magic = data[344:348]
    if magic not in (MAGIC_SINGLE, MAGIC_PAIR):
        raise BadMagic(f"unrecognised magic {magic!r}")
    dim = struct.unpack(bo + "8h", data[40:56])
    datatype, bitpix = struct.unpack(bo + "2h", data[70:74])
    pixdim = struct.unpack(bo + "8f", data[76:108])
    vox_offset, slope, inter = struct.unpack(bo + "3f", data[108:120])
    qform_code, sform_code = struct.unpack(bo + "2h", data[252:256])
    srow = np.array(struct.unpack(bo + "12f", data[280:328]), dtype=float).reshape(3, 4)

    ndim = dim[0]
    if not 3 <= ndim <= 7:
        raise BadMagic(f"dim[0]={ndim}: not a 3D volume")
    extents = dim[1:4]
    if any(e < 1 for e in extents) or any(e != 1 for e in dim[4 : ndim + 1]):
        raise BadMagic(f"unsupported extents {dim[1:ndim + 1]}")
    spacing = tuple(abs(float(p)) for p in pixdim[1:4])
    if any(s <= 0 for s in spacing):
        raise BadMagic(f"non-positive voxel spacing {spacing}")
    if datatype not in DATATYPES:
        raise UnsupportedDatatype(f"datatype code {datatype}")
    return {
        "byte_order": bo,
        "magic": magic,
        "dims": tuple(int(e) for e in extents),
        "datatype": datatype,
        "bitpix": bitpix,
        "spacing": spacing,
        "vox_offset": int(vox_offset),
        "scl_slope": float(slope),
        "scl_inter": float(inter),
        "affine": np.vstack([srow, [0, 0, 0, 1]]) if sform_code > 0 else None,
    }


def _to_labels(raw: np.ndarray, slope: float, inter: float) -> np.ndarray:
    scaled = slope != 0 and (slope != 1 or inter != 0)
    if raw.dtype.kind in "iu" and not scaled:
        return raw
    values = raw.astype(np.float64)
    if scaled:
        values = values * slope + inter
    if not np.all(np.isfinite(values)):
        raise NonIntegralLabels("volume contains non-finite values")
    rounded = np.rint(values)
    if not np.array_equal(rounded, values):
        raise NonIntegralLabels("volume contains fractional label values")
    if rounded.size and (rounded.min() < np.iinfo(np.int32).min or rounded.max() > np.iinfo(np.int32).max):
        raise NonIntegralLabels("label values exceed int32 range")
    return rounded.astype(np.int32)


def parse_nifti(data: bytes, image: bytes | None = None) -> LabelVolume:
    """Parse a NIfTI-1 byte stream (plain or gzip) into a :class:`LabelVolume`.

    For the paired ``.hdr``/``.img`` layout pass the header bytes as ``data``
    and the image bytes as ``image``.
    """
    data = _maybe_gunzip(bytes(data))
    hdr = parse_header(data)
    if hdr["magic"] == MAGIC_PAIR:
        if image is None:
            raise TruncatedStream("paired header given without image data")
        payload, offset = _maybe_gunzip(bytes(image)), hdr["vox_offset"]
    else:
        payload, offset = data, max(hdr["vox_offset"], HEADER_SIZE)
    dtype = DATATYPES[hdr["datatype"]].newbyteorder(hdr["byte_order"])
    nx, ny, nz = hdr["dims"]
    count = nx * ny * nz
    needed = offset + count * dtype.itemsize
    if len(payload) < needed:
        raise TruncatedStream(f"expected {needed} bytes, stream has {len(payload)}")
    raw = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
    labels = _to_labels(raw, hdr["scl_slope"], hdr["scl_inter"])
    voxels = np.ascontiguousarray(labels.astype(labels.dtype.newbyteorder("="), copy=False).reshape((nx, ny, nz), order="F"))
    return LabelVolume(voxels, hdr["spacing"], hdr["affine"])


def _header_bytes(volume: LabelVolume, dtype: np.dtype) -> bytes:
    buf = bytearray(HEADER_SIZE)
    struct.pack_into("<i", buf, 0, HEADER_SIZE)
    struct.pack_into("<b", buf, 39, 0)
    struct.pack_into("<8h", buf, 40, 3, *volume.dims, 1, 1, 1, 1)
    struct.pack_into("<2h", buf, 70, _CODE_FOR_DTYPE[dtype], dtype.itemsize * 8)
    struct.pack_into("<8f", buf, 76, 1.0, *volume.spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<3f", buf, 108, float(VOX_OFFSET), 1.0, 0.0)
    struct.pack_into("<B", buf, 123, 2)  # xyzt_units: mm
    struct.pack_into("<2h", buf, 252, 0, 1)  # qform 0, sform 1 (scanner)
    sx, sy, sz = volume.spacing
    struct.pack_into("<12f", buf, 280, sx, 0, 0, 0, 0, sy, 0, 0, 0, 0, sz, 0)
    buf[344:348] = MAGIC_SINGLE
    return bytes(buf)


def to_nifti_bytes(volume: LabelVolume) -> bytes:
    """Serialise as single-file NIfTI-1: uint8 when codes fit, int16 otherwise."""
    vox = volume.voxels
    lo, hi = (int(vox.min()), int(vox.max())) if vox.size else (0, 0)
    if lo >= 0 and hi <= 255:
        dtype = np.dtype(np.uint8)
    elif lo >= -32768 and hi <= 32767:
        dtype = np.dtype(np.int16)
    else:
        dtype = np.dtype(np.int32)
    body = np.asarray(vox, dtype=dtype.newbyteorder("<")).tobytes(order="F")
    return _header_bytes(volume, dtype) + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + body


def write_nifti(volume: LabelVolume, path: str | os.PathLike) -> None:
    """Write ``volume`` to ``path``; a ``.gz`` suffix selects gzip compression."""
    path = Path(path)
    data = to_nifti_bytes(volume)
    try:
        if path.suffix == ".gz":
            # no file name and mtime=0 keep the bytes a function of the volume alone
            path.write_bytes(gzip.compress(data, compresslevel=6, mtime=0))
        else:
            path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_nifti(path: str | os.PathLike) -> LabelVolume:
    path = Path(path)
    try:
        data = path.read_bytes()
        if path.name.endswith((".hdr", ".hdr.gz")):
            stem = path.name[: -len(".hdr.gz")] if path.name.endswith(".gz") else path.name[:-4]
            candidates = [path.with_name(stem + ".img"), path.with_name(stem + ".img.gz")]
            img = next((p for p in candidates if p.exists()), None)
            if img is None:
                raise TruncatedStream(f"no image file next to {path}")
            return parse_nifti(data, img.read_bytes())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_nifti(data)


def case_id_from_path(path: str | os.PathLike) -> str:
    """Strip the NIfTI suffix from a file name."""
    name = Path(path).name
    for suffix in (".nii.gz", ".nii", ".hdr.gz", ".hdr"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(name).stem


def list_volumes(directory: str | os.PathLike) -> dict[str, Path]:
    """Map case id to file for every NIfTI volume in ``directory``."""
    out = {}
    for p in sorted(Path(directory).iterdir()):
        if p.is_file() and p.name.endswith((".nii", ".nii.gz", ".hdr", ".hdr.gz")):
            out[case_id_from_path(p)] = p
    return out
