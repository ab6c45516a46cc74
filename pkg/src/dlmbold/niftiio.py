"""NIfTI-1 volume reading/writing and tabular file I/O.

Only the single-file and two-file NIfTI-1 layouts are handled (348-byte
header, magic ``n+1`` / ``ni1``).  Byte order is detected from the
plausibility of ``dim[0]``; big-endian files are normalised to
little-endian in memory.  Supported on-disk datatypes: uint8, int16,
int32, float32, float64.  Values are exposed as float64 with the header
scaling ``slope * raw + inter`` applied (slope 0 means unscaled).

Volumes can be loaded eagerly (data copied into memory) or lazily
(memory-mapped raw payload, scaled on access) so that many-subject runs
do not hold every volume in RAM.  Gzipped files are decompressed to a
private temporary file before mapping; the temporary file is removed when
the volume is garbage collected.
"""

import gzip
import os
import tempfile
import weakref

import numpy as np

from .exceptions import (
    BadDimCountError,
    BadMagicError,
    DesignFormatError,
    FormatError,
    TruncatedPayloadError,
    UnsupportedDatatypeError,
    VolumeIOError,
)

HEADER_SIZE = 348
SINGLE_FILE_OFFSET = 352  # header + 4-byte extension flag

_HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]


def _header_dtype(byteorder):
    fields = []
    for field in _HEADER_FIELDS:
        name, kind = field[0], field[1]
        kind = kind if kind.startswith(("S", "u1")) else byteorder + kind
        fields.append((name, kind) + tuple(field[2:]))
    return np.dtype(fields)


HEADER_DTYPE_LE = _header_dtype("<")
HEADER_DTYPE_BE = _header_dtype(">")
assert HEADER_DTYPE_LE.itemsize == HEADER_SIZE

# NIfTI datatype code -> numpy kind (byte order applied at read time)
DATATYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
_WRITE_CODES = {np.dtype("f4"): (16, 32), np.dtype("f8"): (64, 64)}

_GZ_MAGIC = b"\x1f\x8b"


def _is_gzipped(path):
    try:
        with open(path, "rb") as f:
            return f.read(2) == _GZ_MAGIC
    except OSError as exc:
        raise VolumeIOError(f"cannot open {path}: {exc}") from exc


def _open_payload(path):
    try:
        if _is_gzipped(path):
            return gzip.open(path, "rb")
        return open(path, "rb")
    except OSError as exc:
        raise VolumeIOError(f"cannot open {path}: {exc}") from exc


def _parse_header(raw, path):
    """Decode 348 header bytes, normalising to little-endian."""
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"{path}: file ends inside the header ({len(raw)} of {HEADER_SIZE} bytes)"
        )
    first_word = int.from_bytes(raw[:4], "little", signed=True)
    if first_word == 540 or int.from_bytes(raw[:4], "big", signed=True) == 540:
        raise FormatError(
            f"{path}: this is a NIfTI-2 file (header size 540); only NIfTI-1 "
            "is supported — convert the volume first"
        )
    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE_LE)[0]
    swapped = False
    if not 1 <= hdr["dim"][0] <= 7:
        hdr_be = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE_BE)[0]
        if 1 <= hdr_be["dim"][0] <= 7:
            # normalise to little-endian via a 1-element array byteswap
            arr = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE_BE).byteswap()
            hdr = arr.view(HEADER_DTYPE_LE)[0]
            swapped = True
        else:
            raise BadDimCountError(
                f"{path}: dim[0] is implausible in either byte order "
                f"({int(hdr['dim'][0])} little-endian)"
            )
    magic = bytes(hdr["magic"])
    if magic not in (b"n+1", b"ni1"):
        raise BadMagicError(f"{path}: bad magic {magic!r} (expected 'n+1' or 'ni1')")
    code = int(hdr["datatype"])
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(
            f"{path}: unsupported datatype code {code} "
            f"(supported: {sorted(DATATYPES)})"
        )
    ndim = int(hdr["dim"][0])
    if ndim not in (3, 4):
        raise BadDimCountError(f"{path}: expected a 3-D or 4-D image, dim[0]={ndim}")
    dims = tuple(int(d) for d in hdr["dim"][1 : ndim + 1])
    if any(d < 1 for d in dims):
        raise BadDimCountError(f"{path}: non-positive dimension in {dims}")
    return hdr, dims, swapped


class _Payload:
    """Raw voxel payload behind a volume: eager array or lazy memmap."""

    def __init__(self, path, offset, dtype_str, shape, is_temp=False, array=None):
        self.path = path
        self.offset = offset
        self.dtype_str = dtype_str
        self.shape = tuple(shape)
        self._mm = None
        self._eager = array
        if is_temp:
            weakref.finalize(self, _remove_quietly, path)

    def array(self):
        if self._eager is not None:
            return self._eager
        if self._mm is None:
            self._mm = np.memmap(
                self.path,
                dtype=np.dtype(self.dtype_str),
                mode="r",
                offset=self.offset,
                shape=self.shape,
                order="F",
            )
        return self._mm

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_mm"] = None  # memmaps reopen lazily in worker processes
        return state


def _remove_quietly(path):
    try:
        os.unlink(path)
    except OSError:
        pass


class _Volume:
    """Shared behaviour of 3-D and 4-D volumes."""

    def __init__(self, payload, voxel_sizes, header=None, path=None,
                 slope=1.0, inter=0.0):
        self._payload = payload
        self.voxel_sizes = tuple(float(v) for v in voxel_sizes)
        self.header = header
        self.path = path
        self._slope = float(slope)
        self._inter = float(inter)

    @property
    def shape(self):
        return self._payload.shape

    @property
    def datatype_code(self):
        """On-disk datatype code of the source (None for in-memory volumes)."""
        return int(self.header["datatype"]) if self.header is not None else None

    def _scale(self, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if self._slope != 1.0 or self._inter != 0.0:
            arr = arr * self._slope + self._inter
        return arr

    @property
    def data(self):
        """Full volume as float64 (materialises lazy payloads)."""
        return self._scale(self._payload.array())


class Volume3D(_Volume):
    pass


class Volume4D(_Volume):
    @property
    def dims(self):
        return self.shape[:3]

    @property
    def n_scans(self):
        return self.shape[3]

    def timeseries(self, i, j, k, n_scans=None):
        """Scaled (T,) series at one voxel (optionally truncated)."""
        arr = self._payload.array()
        series = self._scale(arr[i, j, k, :])
        return series if n_scans is None else series[:n_scans]

    def block(self, members, n_scans=None):
        """Scaled (T, q) block for the listed voxels, in order."""
        arr = self._payload.array()
        cols = [arr[i, j, k, :] for (i, j, k) in members]
        block = self._scale(np.stack(cols, axis=1))
        return block if n_scans is None else block[:n_scans]

    def temporal_mean(self, n_scans=None):
        """Per-voxel mean over scans, computed slab-by-slab."""
        arr = self._payload.array()
        t = self.n_scans if n_scans is None else int(n_scans)
        d1, d2, d3 = self.dims
        out = np.empty((d1, d2, d3))
        for k in range(d3):
            out[:, :, k] = np.asarray(arr[:, :, k, :t], dtype=np.float64).mean(axis=2)
        if self._slope != 1.0 or self._inter != 0.0:
            out = out * self._slope + self._inter
        return out


def read_nifti(path, lazy=False):
    """Read a NIfTI-1 file into a Volume3D or Volume4D.

    With ``lazy=True`` (4-D only) the payload stays on disk as a memory
    map and is scaled on access; gzipped inputs are decompressed once to
    a temporary file that backs the map.
    """
    gzipped = _is_gzipped(path)
    with _open_payload(path) as f:
        raw = f.read(HEADER_SIZE)
        hdr, dims, _ = _parse_header(raw, path)
        magic = bytes(hdr["magic"])
        disk_dtype = "<" + DATATYPES[int(hdr["datatype"])]
        if _parse_header_is_big_endian(raw):
            disk_dtype = ">" + DATATYPES[int(hdr["datatype"])]
        slope = float(hdr["scl_slope"])
        inter = float(hdr["scl_inter"])
        if slope == 0.0:
            slope, inter = 1.0, 0.0
        voxel_sizes = tuple(abs(float(v)) for v in hdr["pixdim"][1:4])
        nbytes = int(np.prod(dims)) * np.dtype(disk_dtype).itemsize

        if magic == b"ni1":
            data_path, offset = _pair_data_path(path), max(int(hdr["vox_offset"]), 0)
            payload = _read_payload(data_path, offset, disk_dtype, dims, lazy)
        else:
            offset = int(hdr["vox_offset"])
            if offset < HEADER_SIZE:
                raise TruncatedPayloadError(
                    f"{path}: vox_offset {offset} points inside the header"
                )
            if lazy and not gzipped:
                payload = _Payload(path, offset, disk_dtype, dims)
            elif lazy and gzipped:
                payload = _spool_to_temp(f, raw, offset, nbytes, disk_dtype, dims, path)
            else:
                _skip(f, offset - HEADER_SIZE)
                payload = _eager_payload(f, nbytes, disk_dtype, dims, path)

    cls = Volume4D if len(dims) == 4 else Volume3D
    return cls(payload, voxel_sizes, header=hdr.copy(), path=path,
               slope=slope, inter=inter)


def _parse_header_is_big_endian(raw):
    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE_LE)[0]
    return not 1 <= hdr["dim"][0] <= 7


def _skip(f, n):
    if n <= 0:
        return
    f.read(n)


def _eager_payload(f, nbytes, disk_dtype, dims, path):
    buf = f.read(nbytes)
    if len(buf) < nbytes:
        raise TruncatedPayloadError(
            f"{path}: payload truncated ({len(buf)} of {nbytes} bytes)"
        )
    arr = np.frombuffer(buf, dtype=np.dtype(disk_dtype)).reshape(dims, order="F")
    return _Payload(path, 0, disk_dtype, dims, array=arr)


def _spool_to_temp(f, raw_header, offset, nbytes, disk_dtype, dims, path):
    """Decompress exactly the payload bytes of a gzipped file to a temp file."""
    _skip(f, offset - len(raw_header))
    tmp = tempfile.NamedTemporaryFile(prefix="dlmbold_", suffix=".raw", delete=False)
    try:
        remaining = nbytes
        while remaining > 0:
            chunk = f.read(min(remaining, 1 << 24))
            if not chunk:
                break
            tmp.write(chunk)
            remaining -= len(chunk)
        tmp.close()
        if remaining > 0:
            raise TruncatedPayloadError(
                f"{path}: payload truncated ({nbytes - remaining} of {nbytes} bytes)"
            )
    except BaseException:
        tmp.close()
        _remove_quietly(tmp.name)
        raise
    return _Payload(tmp.name, 0, disk_dtype, dims, is_temp=True)


def _pair_data_path(header_path):
    base = header_path
    for ext in (".hdr.gz", ".hdr", ".nii"):
        if base.endswith(ext):
            base = base[: -len(ext)]
            break
    for candidate in (base + ".img", base + ".img.gz"):
        if os.path.exists(candidate):
            return candidate
    raise VolumeIOError(f"no data file found for two-file image {header_path}")


def _read_payload(data_path, offset, disk_dtype, dims, lazy):
    nbytes = int(np.prod(dims)) * np.dtype(disk_dtype).itemsize
    if lazy and not _is_gzipped(data_path):
        return _Payload(data_path, offset, disk_dtype, dims)
    with _open_payload(data_path) as f:
        _skip(f, offset)
        return _eager_payload(f, nbytes, disk_dtype, dims, data_path)


def _default_header():
    hdr = np.zeros((), dtype=HEADER_DTYPE_LE)
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["pixdim"][0] = 1.0
    return hdr


def write_nifti(path, data, voxel_sizes=None, header=None, dtype=np.float32,
                compress=None):
    """Write an array as a single-file little-endian NIfTI-1 image.

    ``header``, when given (e.g. from a source volume), is copied and only
    the fields the writer owns (dims, datatype, scaling, offsets, magic)
    are replaced, so orientation and annotation fields round-trip.
    Compression defaults to the path suffix (.gz).
    """
    data = np.asarray(data)
    if data.ndim not in (3, 4):
        raise VolumeIOError(f"can only write 3-D or 4-D arrays, got shape {data.shape}")
    dtype = np.dtype(dtype)
    if dtype not in _WRITE_CODES:
        raise VolumeIOError(f"write dtype must be float32 or float64, got {dtype}")
    code, bitpix = _WRITE_CODES[dtype]

    hdr = (np.asarray(header).copy() if header is not None
           else _default_header()).reshape(())
    hdr["sizeof_hdr"] = HEADER_SIZE
    dim = np.ones(8, dtype=np.int16)
    dim[0] = data.ndim
    dim[1 : data.ndim + 1] = data.shape
    hdr["dim"] = dim
    hdr["datatype"] = code
    hdr["bitpix"] = bitpix
    if voxel_sizes is not None:
        hdr["pixdim"][1:4] = voxel_sizes
    if float(hdr["pixdim"][0]) == 0.0:
        hdr["pixdim"][0] = 1.0
    hdr["vox_offset"] = SINGLE_FILE_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["scl_inter"] = 0.0
    hdr["magic"] = b"n+1"

    if compress is None:
        compress = str(path).endswith(".gz")
    payload = np.asarray(data, dtype=dtype.newbyteorder("<")).tobytes(order="F")
    blob = hdr.tobytes() + b"\x00\x00\x00\x00" + payload
    try:
        if compress:
            with open(path, "wb") as raw_f:
                # fixed mtime and no embedded name keep identical volumes
                # byte-identical on disk
                with gzip.GzipFile(filename="", fileobj=raw_f, mode="wb",
                                   mtime=0) as gz:
                    gz.write(blob)
        else:
            with open(path, "wb") as raw_f:
                raw_f.write(blob)
    except OSError as exc:
        raise VolumeIOError(f"cannot write {path}: {exc}") from exc


def volume_from_array(data, voxel_sizes=(1.0, 1.0, 1.0)):
    """Wrap an in-memory float array as a Volume3D/Volume4D."""
    data = np.asarray(data, dtype=np.float64)
    payload = _Payload("<memory>", 0, str(data.dtype), data.shape, array=data)
    cls = Volume4D if data.ndim == 4 else Volume3D
    return cls(payload, voxel_sizes)


# -- tabular I/O -------------------------------------------------------------


def read_design(path):
    """Read a design matrix: one scan per row, whitespace- or comma-separated.

    Returns a (T, p) float64 array.  Blank lines and lines starting with
    '#' are skipped; ragged or non-numeric rows raise DesignFormatError
    with their 1-based line number.
    """
    rows = []
    width = None
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                parts = [p for p in text.replace(",", " ").split() if p]
                try:
                    values = [float(p) for p in parts]
                except ValueError:
                    raise DesignFormatError(
                        f"{path}: line {lineno}: non-numeric field"
                    ) from None
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise DesignFormatError(
                        f"{path}: line {lineno}: expected {width} fields, "
                        f"got {len(values)}"
                    )
                rows.append(values)
    except OSError as exc:
        raise VolumeIOError(f"cannot read design {path}: {exc}") from exc
    if not rows:
        raise DesignFormatError(f"{path}: design matrix is empty")
    return np.asarray(rows, dtype=np.float64)


def write_trajectories_csv(path, draws):
    """Write theta draws as CSV rows t,covariate,column,sim,value.

    ``t`` is the absolute 1-based scan number; covariate, column and sim
    are 1-based as well.  Row count is (T - cutpos) * p * q * nsim.
    """
    theta = draws.theta
    n_ret, p, q, nsim = theta.shape
    scans = draws.scan_numbers()
    tt, jj, vv, ss = np.meshgrid(
        scans, np.arange(1, p + 1), np.arange(1, q + 1), np.arange(1, nsim + 1),
        indexing="ij",
    )
    table = np.column_stack(
        [tt.ravel(), jj.ravel(), vv.ravel(), ss.ravel(), theta.ravel()]
    )
    np.savetxt(
        path, table, fmt=["%d", "%d", "%d", "%d", "%.17g"], delimiter=",",
        header="t,covariate,column,sim,value", comments="",
    )


def write_bold_csv(path, draws):
    """Write simulated responses as CSV rows t,column,sim,value."""
    bold = draws.bold
    n_ret, q, nsim = bold.shape
    scans = draws.scan_numbers()
    tt, vv, ss = np.meshgrid(
        scans, np.arange(1, q + 1), np.arange(1, nsim + 1), indexing="ij"
    )
    table = np.column_stack([tt.ravel(), vv.ravel(), ss.ravel(), bold.ravel()])
    np.savetxt(
        path, table, fmt=["%d", "%d", "%d", "%.17g"], delimiter=",",
        header="t,column,sim,value", comments="",
    )
