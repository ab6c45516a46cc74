import gc
import gzip
import os

import numpy as np
import pytest

from dlmbold import (
    FormatError,
    Volume4D,
    VolumeIOError,
    read_design,
    read_nifti,
    volume_from_array,
    write_nifti,
)
from dlmbold.exceptions import (
    BadDimCountError,
    BadMagicError,
    DesignFormatError,
    TruncatedPayloadError,
    UnsupportedDatatypeError,
)
from dlmbold.niftiio import (
    HEADER_DTYPE_LE,
    HEADER_SIZE,
    write_bold_csv,
    write_trajectories_csv,
)
from dlmbold.trajectories import TrajectoryDraws


def random_volume(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


def craft_header(dims, datatype=16, bitpix=32, vox_offset=352.0, slope=1.0,
                 inter=0.0, magic=b"n+1"):
    hdr = np.zeros((), dtype=HEADER_DTYPE_LE)
    hdr["sizeof_hdr"] = HEADER_SIZE
    dim = np.ones(8, dtype=np.int16)
    dim[0] = len(dims)
    dim[1 : len(dims) + 1] = dims
    hdr["dim"] = dim
    hdr["datatype"] = datatype
    hdr["bitpix"] = bitpix
    hdr["pixdim"][:4] = (1.0, 2.0, 2.0, 2.0)
    hdr["vox_offset"] = vox_offset
    hdr["scl_slope"] = slope
    hdr["scl_inter"] = inter
    hdr["magic"] = magic
    return hdr


def write_raw(path, hdr, payload_bytes, pad=4):
    with open(path, "wb") as f:
        f.write(hdr.tobytes() + b"\x00" * pad + payload_bytes)


@pytest.mark.parametrize("suffix", [".nii", ".nii.gz"])
@pytest.mark.parametrize("shape", [(4, 5, 3), (4, 5, 3, 6)])
def test_round_trip(tmp_path, suffix, shape):
    data = random_volume(shape).astype(np.float32)
    path = str(tmp_path / f"vol{suffix}")
    write_nifti(path, data, voxel_sizes=(2.0, 2.5, 3.0))
    vol = read_nifti(path)
    assert vol.shape == shape
    assert np.array_equal(vol.data, data)
    assert vol.voxel_sizes == (2.0, 2.5, 3.0)
    assert vol.datatype_code == 16


def test_round_trip_float64(tmp_path):
    data = random_volume((3, 3, 3, 4))
    path = str(tmp_path / "v.nii.gz")
    write_nifti(path, data, dtype=np.float64)
    vol = read_nifti(path)
    assert vol.datatype_code == 64
    assert np.array_equal(vol.data, data)  # no precision loss


def test_header_fields_survive_rewrite(tmp_path):
    data = random_volume((2, 2, 2)).astype(np.float32)
    src = str(tmp_path / "src.nii")
    write_nifti(src, data)
    hdr = read_nifti(src).header.copy()
    hdr["descrip"] = b"session 4"
    dst = str(tmp_path / "dst.nii")
    write_nifti(dst, data, header=hdr)
    out = read_nifti(dst)
    assert bytes(out.header["descrip"]).rstrip(b"\x00") == b"session 4"


def test_big_endian_volume_reads_identically(tmp_path):
    data = random_volume((3, 4, 2, 5)).astype(np.float32)
    le_path = str(tmp_path / "le.nii")
    write_nifti(le_path, data, voxel_sizes=(1.5, 2.0, 2.5))
    with open(le_path, "rb") as f:
        raw = f.read()
    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE_LE).copy()
    be_path = str(tmp_path / "be.nii")
    with open(be_path, "wb") as f:
        f.write(hdr.byteswap().tobytes())
        f.write(b"\x00" * 4)
        f.write(np.asarray(data, dtype=">f4").tobytes(order="F"))
    le, be = read_nifti(le_path), read_nifti(be_path)
    assert np.array_equal(be.data, le.data)
    assert be.voxel_sizes == le.voxel_sizes

    # same bytes inside a gzip container
    be_gz = str(tmp_path / "be.nii.gz")
    with open(be_path, "rb") as f_in, gzip.open(be_gz, "wb") as f_out:
        f_out.write(f_in.read())
    assert np.array_equal(read_nifti(be_gz).data, le.data)


def test_int16_scaling(tmp_path):
    vals = np.arange(24, dtype=np.int16).reshape((2, 3, 4))
    hdr = craft_header((2, 3, 4), datatype=4, bitpix=16, slope=0.01, inter=5.0)
    path = str(tmp_path / "scaled.nii")
    write_raw(path, hdr, vals.astype("<i2").tobytes(order="F"))
    vol = read_nifti(path)
    # the header stores scale factors as float32
    expected = vals * float(np.float32(0.01)) + float(np.float32(5.0))
    assert np.allclose(vol.data, expected, atol=0, rtol=0)


def test_zero_slope_means_unscaled(tmp_path):
    vals = np.arange(8, dtype=np.int16).reshape((2, 2, 2))
    hdr = craft_header((2, 2, 2), datatype=4, bitpix=16, slope=0.0, inter=7.0)
    path = str(tmp_path / "raw.nii")
    write_raw(path, hdr, vals.astype("<i2").tobytes(order="F"))
    assert np.array_equal(read_nifti(path).data, vals)


@pytest.mark.parametrize("suffix", [".nii", ".nii.gz"])
def test_lazy_matches_eager(tmp_path, suffix):
    data = random_volume((4, 4, 4, 10), seed=3).astype(np.float32)
    path = str(tmp_path / f"v{suffix}")
    write_nifti(path, data)
    eager = read_nifti(path)
    lazy = read_nifti(path, lazy=True)
    assert np.array_equal(np.asarray(lazy.data), eager.data)
    assert np.array_equal(lazy.timeseries(1, 2, 3), eager.timeseries(1, 2, 3))
    members = [(0, 0, 0), (1, 2, 3), (3, 3, 3)]
    assert np.array_equal(lazy.block(members), eager.block(members))
    assert np.allclose(lazy.temporal_mean(), data.mean(axis=3), atol=1e-6)


def test_lazy_gz_temp_file_is_cleaned_up(tmp_path):
    data = random_volume((3, 3, 3, 4)).astype(np.float32)
    path = str(tmp_path / "v.nii.gz")
    write_nifti(path, data)
    vol = read_nifti(path, lazy=True)
    tmp = vol._payload.path
    assert os.path.exists(tmp)
    vol._payload.array()  # force the memmap open and closed again
    del vol
    gc.collect()
    assert not os.path.exists(tmp)


def test_volume4d_accessors():
    data = random_volume((3, 4, 5, 12), seed=9)
    vol = volume_from_array(data, voxel_sizes=(2.0, 2.0, 2.0))
    assert isinstance(vol, Volume4D)
    assert vol.dims == (3, 4, 5)
    assert vol.n_scans == 12
    assert np.array_equal(vol.timeseries(1, 1, 1), data[1, 1, 1, :])
    assert np.array_equal(vol.timeseries(1, 1, 1, n_scans=5), data[1, 1, 1, :5])
    blk = vol.block([(0, 0, 0), (2, 3, 4)], n_scans=6)
    assert blk.shape == (6, 2)
    assert np.array_equal(blk[:, 1], data[2, 3, 4, :6])
    assert np.allclose(vol.temporal_mean(n_scans=7), data[..., :7].mean(axis=3))


def test_two_file_image(tmp_path):
    data = random_volume((3, 3, 3)).astype(np.float32)
    hdr = craft_header((3, 3, 3), vox_offset=0.0, magic=b"ni1")
    with open(tmp_path / "pair.hdr", "wb") as f:
        f.write(hdr.tobytes())
    with open(tmp_path / "pair.img", "wb") as f:
        f.write(np.asarray(data, dtype="<f4").tobytes(order="F"))
    vol = read_nifti(str(tmp_path / "pair.hdr"))
    assert np.array_equal(vol.data, data)

    os.remove(tmp_path / "pair.img")
    with pytest.raises(VolumeIOError):
        read_nifti(str(tmp_path / "pair.hdr"))


def test_newer_format_rejected_with_clear_error(tmp_path):
    for first_word in ((540).to_bytes(4, "little"), (540).to_bytes(4, "big")):
        path = str(tmp_path / "v2.nii")
        with open(path, "wb") as f:
            f.write(first_word + b"\x00" * 600)
        with pytest.raises(FormatError, match="NIfTI-2"):
            read_nifti(path)


def test_bad_magic(tmp_path):
    hdr = craft_header((2, 2, 2), magic=b"xxx")
    path = str(tmp_path / "bad.nii")
    write_raw(path, hdr, np.zeros(8, dtype="<f4").tobytes())
    with pytest.raises(BadMagicError):
        read_nifti(path)


def test_unsupported_datatype(tmp_path):
    hdr = craft_header((2, 2, 2), datatype=32, bitpix=64)
    path = str(tmp_path / "cplx.nii")
    write_raw(path, hdr, np.zeros(8, dtype="<c8").tobytes())
    with pytest.raises(UnsupportedDatatypeError):
        read_nifti(path)


def test_bad_dim_counts(tmp_path):
    for dims in [(5,), (2, 2)]:
        hdr = craft_header(dims)
        path = str(tmp_path / "dims.nii")
        write_raw(path, hdr, b"\x00" * 64)
        with pytest.raises(BadDimCountError):
            read_nifti(path)
    # implausible in both byte orders
    hdr = craft_header((2, 2, 2))
    hdr["dim"][0] = 99
    path = str(tmp_path / "implausible.nii")
    write_raw(path, hdr, b"\x00" * 64)
    with pytest.raises(BadDimCountError):
        read_nifti(path)
    # zero-length axis
    hdr = craft_header((2, 0, 2))
    path = str(tmp_path / "zero.nii")
    write_raw(path, hdr, b"\x00" * 64)
    with pytest.raises(BadDimCountError):
        read_nifti(path)


def test_truncated_files(tmp_path):
    # ends inside the header
    short = str(tmp_path / "short.nii")
    with open(short, "wb") as f:
        f.write(b"\x00" * 100)
    with pytest.raises(TruncatedPayloadError):
        read_nifti(short)

    # header fine, payload short (both plain and gzipped lazy spool)
    hdr = craft_header((4, 4, 4))
    cut = str(tmp_path / "cut.nii")
    write_raw(cut, hdr, b"\x00" * 100)  # needs 256 bytes
    with pytest.raises(TruncatedPayloadError):
        read_nifti(cut)

    cut_gz = str(tmp_path / "cut.nii.gz")
    with open(cut, "rb") as f_in, gzip.open(cut_gz, "wb") as f_out:
        f_out.write(f_in.read())
    with pytest.raises(TruncatedPayloadError):
        read_nifti(cut_gz, lazy=True)

    # vox_offset pointing inside the header
    hdr = craft_header((2, 2, 2), vox_offset=100.0)
    inside = str(tmp_path / "inside.nii")
    write_raw(inside, hdr, b"\x00" * 32)
    with pytest.raises(TruncatedPayloadError):
        read_nifti(inside)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(VolumeIOError):
        read_nifti(str(tmp_path / "nope.nii"))


def test_write_validation(tmp_path):
    with pytest.raises(VolumeIOError):
        write_nifti(str(tmp_path / "x.nii"), np.zeros((2, 2)))
    with pytest.raises(VolumeIOError):
        write_nifti(str(tmp_path / "x.nii"), np.zeros((2, 2, 2)), dtype=np.int16)
    with pytest.raises(VolumeIOError):
        write_nifti(str(tmp_path / "no" / "dir" / "x.nii"), np.zeros((2, 2, 2)))


def test_gzip_output_is_byte_deterministic(tmp_path):
    data = random_volume((4, 4, 4, 3)).astype(np.float32)
    a, b = str(tmp_path / "a.nii.gz"), str(tmp_path / "b.nii.gz")
    write_nifti(a, data)
    write_nifti(b, data)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_read_design_formats(tmp_path):
    p = tmp_path / "design.txt"
    p.write_text("# header comment\n1.0 0.5\n\n2.0,0.25\n3,0\n")
    d = read_design(str(p))
    assert d.shape == (3, 2)
    assert np.array_equal(d, [[1.0, 0.5], [2.0, 0.25], [3.0, 0.0]])

    single = tmp_path / "one.txt"
    single.write_text("1\n2\n3\n")
    assert read_design(str(single)).shape == (3, 1)


def test_read_design_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n3 oops\n")
    with pytest.raises(DesignFormatError, match="line 2"):
        read_design(str(bad))

    ragged = tmp_path / "ragged.txt"
    ragged.write_text("1 2\n3\n")
    with pytest.raises(DesignFormatError, match="line 2"):
        read_design(str(ragged))

    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n\n")
    with pytest.raises(DesignFormatError, match="empty"):
        read_design(str(empty))

    with pytest.raises(VolumeIOError):
        read_design(str(tmp_path / "missing.txt"))


def test_trajectory_csv(tmp_path):
    rng = np.random.default_rng(0)
    theta = rng.standard_normal((2, 2, 2, 3))
    draws = TrajectoryDraws(theta=theta, cutpos=3, algorithm="fest")
    path = str(tmp_path / "traj.csv")
    write_trajectories_csv(path, draws)
    with open(path) as f:
        header = f.readline().strip()
        rows = f.readlines()
    assert header == "t,covariate,column,sim,value"
    assert len(rows) == 2 * 2 * 2 * 3
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert set(table[:, 0]) == {4.0, 5.0}  # absolute scan numbers
    # row (t=5, covariate=2, column=1, sim=3) carries theta[1, 1, 0, 2]
    hit = table[
        (table[:, 0] == 5) & (table[:, 1] == 2) & (table[:, 2] == 1) & (table[:, 3] == 3)
    ]
    assert hit.shape[0] == 1
    assert hit[0, 4] == theta[1, 1, 0, 2]


def test_bold_csv(tmp_path):
    rng = np.random.default_rng(1)
    bold = rng.standard_normal((3, 2, 4))
    draws = TrajectoryDraws(theta=np.zeros((3, 1, 2, 4)), cutpos=10,
                            algorithm="fest", bold=bold)
    path = str(tmp_path / "bold.csv")
    write_bold_csv(path, draws)
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (3 * 2 * 4, 4)
    hit = table[(table[:, 0] == 12) & (table[:, 1] == 2) & (table[:, 2] == 4)]
    assert hit[0, 3] == bold[1, 1, 3]
