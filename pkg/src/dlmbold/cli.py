"""Command line interface.

Subcommands:
  map                 whole-volume evidence maps for one subject
  single-voxel        detailed report for one cluster
  group-map           pooled multi-subject evidence maps
  group-single-voxel  detailed pooled report for one cluster
  synth               generate a synthetic dataset with known truth
  info                print header facts about a volume

Exit codes: 0 success, 2 usage/configuration, 3 malformed input file,
4 numerical failure, 5 file I/O failure.  Progress goes to stderr; data
only ever goes to the output files.
"""

import argparse
import os
import sys

import numpy as np

from .exceptions import DlmBoldError
from .group import read_manifest
from .mapping import (
    RunConfig,
    analyze_voxel,
    default_workers,
    run_map,
    write_evidence_maps,
)
from .niftiio import (
    read_design,
    read_nifti,
    write_bold_csv,
    write_nifti,
    write_trajectories_csv,
)
from .synth import TaskDesign, box_region, design_matrix, generate_volume
from .validation import coerce_mask, coerce_volume

_DATATYPE_NAMES = {2: "uint8", 4: "int16", 8: "int32", 16: "float32", 64: "float64"}


def _add_model_args(sub, workers_default=None):
    sub.add_argument("--algorithm", choices=("fest", "ffbs", "fsts"),
                     default="fest", help="trajectory sampler (default fest)")
    sub.add_argument("--test", choices=("ltt", "joint"), default=None,
                     help="fest evidence test (default ltt; "
                          "ffbs/fsts always report all tests)")
    sub.add_argument("--delta", type=float, default=0.95,
                     help="discount factor in (0, 1] (default 0.95)")
    sub.add_argument("--m0", type=float, default=0.0,
                     help="prior state mean fill (default 0)")
    sub.add_argument("--c0", type=float, default=100.0,
                     help="prior state covariance scale (default 100)")
    sub.add_argument("--s0", type=float, default=1.0,
                     help="prior response scale (default 1)")
    sub.add_argument("--n0", type=float, default=1.0,
                     help="prior degrees of freedom (default 1)")
    sub.add_argument("--nsim", type=int, default=100,
                     help="Monte Carlo draws per voxel (default 100)")
    sub.add_argument("--cutpos", type=int, default=30,
                     help="scans discarded before evidence is taken (default 30)")
    sub.add_argument("--r", type=float, default=1.0,
                     help="cluster radius in voxels (default 1)")
    sub.add_argument("--min-vol", type=float, default=0.10, dest="min_vol",
                     help="intensity mask threshold as a fraction of the "
                          "peak temporal mean (default 0.10)")
    sub.add_argument("--n1", type=int, default=None,
                     help="analyse only the first N1 scans")
    sub.add_argument("--seed", type=int, default=0,
                     help="random seed (default 0)")
    sub.add_argument("--workers", type=int, default=workers_default,
                     help="worker processes (default: DLMBOLD_WORKERS env "
                          "var, else all CPUs for map commands)")


def _config_from_args(args, workers):
    return RunConfig(
        algorithm=args.algorithm, test=args.test, delta=args.delta,
        m0=args.m0, c0=args.c0, s0=args.s0, n0=args.n0, nsim=args.nsim,
        cutpos=args.cutpos, r=args.r, min_vol=args.min_vol, n1=args.n1,
        seed=args.seed, workers=workers,
    )


def _resolve_workers(args):
    if args.workers:
        return args.workers
    env = os.environ.get("DLMBOLD_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            _usage_error(f"DLMBOLD_WORKERS must be an integer, got {env!r}")
    return default_workers()


def _progress_printer(stream):
    state = {"last": -1}

    def cb(done, total):
        pct = int(100 * done / total) if total else 100
        if pct != state["last"] or done == total:
            state["last"] = pct
            print(f"\rprogress: {pct:3d}% ({done}/{total} voxels)",
                  end="", file=stream, flush=True)
        if done == total:
            print(file=stream)

    return cb


def _usage_error(message):
    from .exceptions import ConfigurationError

    raise ConfigurationError(message)


# -- subcommand bodies -------------------------------------------------------


def _cmd_map(args):
    vol = coerce_volume(args.input, lazy=True)
    design = read_design(args.design)
    config = _config_from_args(args, _resolve_workers(args))
    result = run_map(vol, design, config, mask_volume=coerce_mask(args.mask),
                     progress=_progress_printer(sys.stderr))
    dtype = np.float64 if args.float64 else np.float32
    paths = write_evidence_maps(args.out, result, header=vol.header,
                                voxel_sizes=vol.voxel_sizes, dtype=dtype)
    for p in paths:
        print(p)
    print(f"analysed {result.n_analyzed} voxels", file=sys.stderr)
    return 0


def _cmd_group_map(args):
    from .group import load_subjects

    volumes = load_subjects(_collect_subjects(args), lazy=True)
    design = read_design(args.design)
    config = _config_from_args(args, _resolve_workers(args))
    result = run_map(volumes, design, config,
                     mask_volume=coerce_mask(args.mask),
                     progress=_progress_printer(sys.stderr))
    dtype = np.float64 if args.float64 else np.float32
    paths = write_evidence_maps(args.out, result, header=volumes[0].header,
                                voxel_sizes=volumes[0].voxel_sizes, dtype=dtype)
    for p in paths:
        print(p)
    print(f"analysed {result.n_analyzed} voxels over {len(volumes)} subjects",
          file=sys.stderr)
    return 0


def _collect_subjects(args):
    paths = []
    if args.manifest:
        paths.extend(read_manifest(args.manifest))
    paths.extend(args.inputs)
    if not paths:
        _usage_error("group commands need subject volumes "
                     "(positional paths or --manifest)")
    return paths


def _report_lines(report, n_scans, cutpos):
    lines = [
        f"center: {report.center[0]} {report.center[1]} {report.center[2]}",
        f"algorithm: {report.algorithm}",
        f"subjects: {report.n_subjects}",
        f"cluster size: {len(report.members)}",
        f"scans: {n_scans} (retained {n_scans - cutpos} after cutpos {cutpos})",
    ]
    for test in report.tests:
        vals = " ".join(f"{v:.6f}" for v in report.evidence[test])
        lines.append(f"evidence {test}: {vals}")
    if report.n_subjects == 1:
        fit = report.fitness
        lines.append("fitness: undefined" if np.isnan(fit)
                     else f"fitness: {fit:.6f}")
    return lines


def _run_single_voxel(args, volumes):
    design = read_design(args.design)
    config = _config_from_args(args, workers=1)
    mask = coerce_mask(args.mask)
    report = analyze_voxel(volumes, design, config, tuple(args.voxel),
                           mask_volume=mask)
    n_scans = args.n1 if args.n1 else volumes[0].n_scans
    lines = _report_lines(report, n_scans, args.cutpos)
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    written = []
    if args.out:
        report_path = f"{args.out}_report.txt"
        with open(report_path, "w") as f:
            f.write(text)
        written.append(report_path)
        traj_path = f"{args.out}_trajectories.csv"
        write_trajectories_csv(traj_path, report.draws)
        written.append(traj_path)
        if report.draws.bold is not None:
            bold_path = f"{args.out}_bold.csv"
            write_bold_csv(bold_path, report.draws)
            written.append(bold_path)
    for p in written:
        print(p, file=sys.stderr)
    return 0


def _cmd_single_voxel(args):
    vol = coerce_volume(args.input, lazy=True)
    return _run_single_voxel(args, [vol])


def _cmd_group_single_voxel(args):
    from .group import load_subjects

    volumes = load_subjects(_collect_subjects(args), lazy=True)
    return _run_single_voxel(args, volumes)


def _parse_block(text):
    try:
        onset, duration = text.split(":")
        return int(onset), int(duration)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"block must look like onset:duration, got {text!r}"
        ) from None


def _parse_box(text):
    try:
        ranges = []
        for part in text.split(","):
            lo, hi = part.split(":")
            ranges.append((int(lo), int(hi)))
        if len(ranges) != 3:
            raise ValueError
        return ranges
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"region must look like i0:i1,j0:j1,k0:k1, got {text!r}"
        ) from None


def _cmd_synth(args):
    dims = tuple(args.dims)
    design = TaskDesign(n_scans=args.scans, tr=args.tr,
                        blocks=args.block or _default_blocks(args.scans))
    active = np.zeros(dims, dtype=bool)
    boxes = args.active or [_default_box(dims)]
    for box in boxes:
        lo = [b[0] for b in box]
        hi = [b[1] for b in box]
        active |= box_region(dims, lo, hi)

    written = []
    matrix = design_matrix(design)
    design_path = f"{args.out}_design.txt"
    np.savetxt(design_path, matrix, fmt="%.17g")
    written.append(design_path)

    truth_path = f"{args.out}_truth.nii.gz"
    write_nifti(truth_path, active.astype(np.float32), voxel_sizes=(2, 2, 2))
    written.append(truth_path)

    subject_paths = []
    for s in range(args.subjects):
        vol = generate_volume(dims, design, active, amplitude=args.amplitude,
                              noise_sd=args.noise_sd, baseline=args.baseline,
                              seed=args.seed + s)
        if args.subjects == 1:
            path = f"{args.out}.nii.gz"
        else:
            path = f"{args.out}_sub{s + 1:02d}.nii.gz"
        write_nifti(path, vol.data, voxel_sizes=vol.voxel_sizes)
        subject_paths.append(path)
    written.extend(subject_paths)

    if args.subjects > 1:
        manifest_path = f"{args.out}_manifest.txt"
        with open(manifest_path, "w") as f:
            for p in subject_paths:
                f.write(p + "\n")
        written.append(manifest_path)

    for p in written:
        print(p)
    return 0


def _default_blocks(n_scans):
    """Alternate 10 scans rest / 10 scans task across the run."""
    return [(onset, 10) for onset in range(10, max(n_scans - 9, 11), 20)]


def _default_box(dims):
    return [(d // 4, 3 * d // 4) for d in dims]


def _cmd_info(args):
    vol = read_nifti(args.input)
    hdr = vol.header
    shape = vol.shape
    print(f"file: {args.input}")
    print(f"dims: {' '.join(str(d) for d in shape)}")
    code = int(hdr["datatype"])
    print(f"datatype: {_DATATYPE_NAMES.get(code, '?')} (code {code})")
    print(f"voxel size: {' '.join(f'{v:g}' for v in vol.voxel_sizes)}")
    print(f"scaling: slope {float(hdr['scl_slope']):g} "
          f"inter {float(hdr['scl_inter']):g}")
    data = vol.data
    print(f"range: {data.min():g} .. {data.max():g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dlmbold",
        description="Activation evidence maps for task fMRI via cluster-wise "
                    "dynamic linear models.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("map", help="whole-volume evidence maps")
    sp.add_argument("input", help="4-D NIfTI volume")
    sp.add_argument("--design", required=True, help="design matrix file")
    sp.add_argument("--out", required=True, help="output file prefix")
    sp.add_argument("--mask", default=None,
                    help="reference mask volume (nonzero voxels analysed)")
    sp.add_argument("--float64", action="store_true",
                    help="write maps as float64 instead of float32")
    _add_model_args(sp)
    sp.set_defaults(func=_cmd_map)

    sp = subs.add_parser("single-voxel", help="one-cluster detailed report")
    sp.add_argument("input", help="4-D NIfTI volume")
    sp.add_argument("--voxel", nargs=3, type=int, required=True,
                    metavar=("I", "J", "K"), help="cluster centre voxel")
    sp.add_argument("--design", required=True, help="design matrix file")
    sp.add_argument("--out", default=None,
                    help="prefix for report and CSV draws (optional)")
    sp.add_argument("--mask", default=None,
                    help="reference mask volume (nonzero voxels analysed)")
    _add_model_args(sp, workers_default=1)
    sp.set_defaults(func=_cmd_single_voxel)

    sp = subs.add_parser("group-map", help="pooled multi-subject evidence maps")
    sp.add_argument("inputs", nargs="*", help="subject 4-D volumes, in order")
    sp.add_argument("--manifest", default=None,
                    help="file listing one subject volume per line")
    sp.add_argument("--design", required=True, help="design matrix file")
    sp.add_argument("--out", required=True, help="output file prefix")
    sp.add_argument("--mask", required=True,
                    help="reference mask volume (required for group runs)")
    sp.add_argument("--float64", action="store_true",
                    help="write maps as float64 instead of float32")
    _add_model_args(sp)
    sp.set_defaults(func=_cmd_group_map)

    sp = subs.add_parser("group-single-voxel",
                         help="one-cluster pooled group report")
    sp.add_argument("inputs", nargs="*", help="subject 4-D volumes, in order")
    sp.add_argument("--manifest", default=None,
                    help="file listing one subject volume per line")
    sp.add_argument("--voxel", nargs=3, type=int, required=True,
                    metavar=("I", "J", "K"), help="cluster centre voxel")
    sp.add_argument("--design", required=True, help="design matrix file")
    sp.add_argument("--out", default=None,
                    help="prefix for report and CSV draws (optional)")
    sp.add_argument("--mask", required=True,
                    help="reference mask volume (required for group runs)")
    _add_model_args(sp, workers_default=1)
    sp.set_defaults(func=_cmd_group_single_voxel)

    sp = subs.add_parser("synth", help="synthetic dataset with known truth")
    sp.add_argument("--dims", nargs=3, type=int, default=[16, 16, 16],
                    metavar=("D1", "D2", "D3"), help="volume dims (default 16^3)")
    sp.add_argument("--scans", type=int, default=60,
                    help="number of scans (default 60)")
    sp.add_argument("--tr", type=float, default=2.0,
                    help="repetition time in seconds (default 2)")
    sp.add_argument("--block", action="append", type=_parse_block,
                    metavar="ONSET:DURATION",
                    help="task block in scans (repeatable; default "
                         "10-on/10-off)")
    sp.add_argument("--active", action="append", type=_parse_box,
                    metavar="I0:I1,J0:J1,K0:K1",
                    help="truly active box (repeatable; default central box)")
    sp.add_argument("--amplitude", type=float, default=3.0,
                    help="signal amplitude (default 3)")
    sp.add_argument("--noise-sd", type=float, default=1.0, dest="noise_sd",
                    help="noise standard deviation (default 1)")
    sp.add_argument("--baseline", type=float, default=0.0,
                    help="additive baseline level (default 0)")
    sp.add_argument("--subjects", type=int, default=1,
                    help="number of subject volumes (default 1)")
    sp.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    sp.add_argument("--out", required=True, help="output file prefix")
    sp.set_defaults(func=_cmd_synth)

    sp = subs.add_parser("info", help="print volume header facts")
    sp.add_argument("input", help="NIfTI volume")
    sp.set_defaults(func=_cmd_info)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DlmBoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
