"""Command-line front end.

Every run echoes the fully resolved configuration to stdout and writes
all artifacts (including a ``resolved.cfg`` copy of that echo) under the
chosen output directory. Nothing depends on wall-clock time, so
re-running a command reproduces its outputs byte for byte.

Exit codes: 0 success, 1 run/validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from .config import ConfigError, DesignConfig, default_config, parse_config, serialize_config
from .design import DesignRun, optimize, seeded_initial_volume
from .experiments import (
    CrosstalkReport,
    optimized_curve,
    ring_positions,
    superposed_curve,
)
from .fields import Grid2D, IndexVolume, LayeredElement, MappingTask
from .interconnect import footprint_scaling, haar_filter_bank
from .io import (
    atomic_write_text,
    export_field,
    export_volume,
    import_volume,
    read_pgm,
    render_field,
    write_csv,
)
from .propagation import absorber_mask, propagate
from .sources import HAAR_KINDS, gaussian, haar_mask_field, lp_modes, plane_wave, spot_target

__all__ = ["main"]


def _load_config(path: str | None) -> DesignConfig:
    if path is None:
        return default_config()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _emit_config(cfg: DesignConfig, outdir: str):
    text = serialize_config(cfg)
    sys.stdout.write(text)
    atomic_write_text(os.path.join(outdir, "resolved.cfg"), text)


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _tilt_angles(num: int, step_bins: float, grid: Grid2D,
                 wavelength_um: float) -> list[tuple[float, float]]:
    """Symmetric fan of x-tilts spaced by FFT bins."""
    angles = []
    for k in range(num):
        bins = (k - (num - 1) / 2.0) * step_bins
        s = bins * wavelength_um / (grid.nx * grid.dx)
        if abs(s) >= 1.0:
            raise ValueError(f"aliased source: tilt of {bins} bins needs |sin| = {abs(s):.3g}")
        angles.append((math.asin(s), 0.0))
    return angles


def _apodization(cfg: DesignConfig):
    if cfg.propagation.boundary == "absorber":
        return absorber_mask(cfg.grid, cfg.propagation.absorber_width)
    return None


def _build_task(cfg: DesignConfig) -> MappingTask:
    grid, lam = cfg.grid, cfg.wavelength_um
    env = _apodization(cfg)
    if cfg.task_kind == "lantern":
        modes = lp_modes(cfg.fiber, grid)
        angles = _tilt_angles(cfg.task_num_pairs, cfg.task_angle_step_bins, grid, lam)
        if len(angles) > len(modes):
            raise ValueError(
                f"task overdetermined for fiber: {len(angles)} inputs but only "
                f"{len(modes)} guided modes at V={cfg.fiber.v_number:.3f}"
            )
        inputs = [plane_wave(grid, lam, tx, ty, envelope=env) for tx, ty in angles]
        targets = [m.field for m in modes[: len(angles)]]
    elif cfg.task_kind == "haar-grin":
        inputs, targets = [], []
        lobes = []
        for kind in HAAR_KINDS:
            masks = haar_mask_field(grid, lam, kind, cfg.task_patch_extent_um)
            lobes.append(masks.plus)
            if masks.minus is not None:
                lobes.append(masks.minus)
        spots = [spot_target(grid, lam, c, cfg.task_spot_radius_um)
                 for c in ring_positions(len(lobes), cfg.task_spot_ring_um)]
        inputs, targets = lobes, spots
    elif cfg.task_kind == "fanout":
        source = plane_wave(grid, lam, envelope=env)
        spots = [spot_target(grid, lam, c, cfg.task_spot_radius_um)
                 for c in ring_positions(cfg.task_fan, cfg.task_spot_ring_um)]
        inputs, targets = [source] * cfg.task_fan, spots
    elif cfg.task_kind == "custom":
        # Mode sorter: tilted plane waves to their own focal spots.
        angles = _tilt_angles(cfg.task_num_pairs, cfg.task_angle_step_bins, grid, lam)
        inputs = [plane_wave(grid, lam, tx, ty, envelope=env) for tx, ty in angles]
        targets = [spot_target(grid, lam, c, cfg.task_spot_radius_um)
                   for c in ring_positions(len(inputs), cfg.task_spot_ring_um)]
    else:
        raise ValueError(f"unhandled task kind {cfg.task_kind!r}")
    return MappingTask.from_fields(inputs, targets)


def _initial_design(cfg: DesignConfig):
    if cfg.element_kind == "volume":
        return seeded_initial_volume(
            cfg.grid, cfg.volume_nz, cfg.volume_dz_um, cfg.n0,
            dn_min=cfg.dn_min, dn_max=cfg.dn_max, seed=cfg.optimizer.seed,
        )
    layers = tuple(np.zeros((cfg.grid.nx, cfg.grid.ny))
                   for _ in range(cfg.layered_num_layers))
    gaps = tuple(cfg.layered_gap_um for _ in range(cfg.layered_num_layers))
    return LayeredElement(grid=cfg.grid, layers=layers, gaps=gaps, n_gap=1.0)


def _export_design(design, outdir: str):
    """Volumes go out as ivol-1; layered phases reuse the same container
    with radians in place of index contrast (documented in the README)."""
    path = os.path.join(outdir, "design.ivol")
    if isinstance(design, IndexVolume):
        export_volume(design, path)
        return
    stack = np.stack(design.layers, axis=-1)
    lo, hi = float(stack.min()), float(stack.max())
    volume = IndexVolume(
        grid=design.grid, nz=design.num_layers,
        dz=max(design.gaps[0], 1e-6) if design.gaps else 1.0,
        n0=design.n_gap, dn=stack, dn_min=lo, dn_max=max(hi, lo + 1e-12),
    )
    export_volume(volume, path)


def _write_run_outputs(run: DesignRun, task: MappingTask, cfg: DesignConfig, outdir: str):
    _export_design(run.result, outdir)

    loss_rows = [(0, run.initial_loss)]
    loss_rows += [(i + 1, v) for i, v in enumerate(run.loss_history)]
    write_csv(os.path.join(outdir, "loss.csv"), ["iteration", "loss"], loss_rows)

    rows = []
    for t in range(run.coupling_before.shape[0]):
        for i in range(run.coupling_before.shape[1]):
            rows.append((t, i, run.coupling_before[t, i], run.coupling_after[t, i]))
    write_csv(os.path.join(outdir, "coupling.csv"),
              ["target", "input", "before", "after"], rows)

    report = CrosstalkReport.from_matrix(run.coupling_after)
    final = run.loss_history[-1] if run.loss_history else run.initial_loss
    write_csv(os.path.join(outdir, "metrics.csv"), ["metric", "value"], [
        ("initial_loss", run.initial_loss),
        ("final_loss", final),
        ("iterations", len(run.loss_history)),
        ("diagonal_mean", report.diagonal_mean),
        ("offdiag_mean", report.offdiag_mean),
        ("worst_extinction_db", report.worst_extinction_db),
    ])

    for k, (inp, target, _w) in enumerate(task.pairs):
        out = propagate(run.result, inp, cfg.propagation)
        render_field(inp, os.path.join(outdir, f"input_{k:02d}.pgm"))
        render_field(target, os.path.join(outdir, f"target_{k:02d}.pgm"))
        render_field(out, os.path.join(outdir, f"output_{k:02d}.pgm"))


def _cmd_design(args) -> int:
    cfg = _load_config(args.config)
    if args.task_kind is not None:
        cfg = dataclasses.replace(cfg, task_kind=args.task_kind)
    outdir = _ensure_outdir(args.out)
    _emit_config(cfg, outdir)
    task = _build_task(cfg)
    run = optimize(task, _initial_design(cfg), cfg.loss, cfg.optimizer, cfg.propagation)
    _write_run_outputs(run, task, cfg, outdir)
    return 0


def _cmd_propagate(args) -> int:
    cfg = _load_config(args.config)
    volume = import_volume(args.volume)
    outdir = _ensure_outdir(args.out)
    _emit_config(cfg, outdir)
    grid, lam = volume.grid, cfg.wavelength_um
    if args.source == "plane":
        src = plane_wave(grid, lam, math.radians(args.theta_x_deg),
                         math.radians(args.theta_y_deg))
    else:
        src = gaussian(grid, lam, args.waist_um)
    out = propagate(volume, src, cfg.propagation)
    export_field(out, os.path.join(outdir, "output.cfield"))
    render_field(out, os.path.join(outdir, "output.pgm"))
    return 0


def _cmd_holography(args) -> int:
    m_values = _parse_int_list(args.m)
    outdir = _ensure_outdir(args.out)
    cfg = default_config()
    _emit_config(cfg, outdir)
    if args.scheme == "superposed":
        curve = superposed_curve(m_values, args.budget)
    else:
        curve, _runs = optimized_curve(m_values, args.budget)
    write_csv(os.path.join(outdir, "efficiency.csv"), ["m", "eta_per_output"],
              list(zip(curve.m_values, curve.eta_per_output)))
    write_csv(os.path.join(outdir, "metrics.csv"), ["metric", "value"], [
        ("scheme", args.scheme),
        ("dn_budget", args.budget),
        ("fitted_log_slope", curve.fitted_log_slope),
    ])
    return 0


def _cmd_scaling(args) -> int:
    n_values = _parse_int_list(args.n)
    outdir = _ensure_outdir(args.out)
    rows = []
    for n in n_values:
        r = footprint_scaling(n, args.pitch, args.fan)
        rows.append((r.n_neurons, r.elements_2d, r.planes_3d, r.elements_per_plane_3d,
                     r.pitch_um, r.footprint_2d_um2, r.footprint_3d_um2))
    write_csv(os.path.join(outdir, "scaling.csv"),
              ["n_neurons", "elements_2d", "planes_3d", "elements_per_plane_3d",
               "pitch_um", "footprint_2d_um2", "footprint_3d_um2"], rows)
    return 0


def _cmd_haar_bank(args) -> int:
    image = read_pgm(args.image)
    if image.shape != (21, 21):
        raise ValueError(f"{args.image}: image must be 21x21, got {image.shape}")
    kinds = HAAR_KINDS if args.kind == "all" else (args.kind,)
    outdir = _ensure_outdir(args.out)
    rows = []
    for kind in kinds:
        bank = haar_filter_bank(image, kind)
        for i in range(7):
            for j in range(7):
                rows.append((kind, i, j, bank.s_plus[i, j], bank.s_minus[i, j],
                             bank.response[i, j]))
    write_csv(os.path.join(outdir, "haar_bank.csv"),
              ["kind", "patch_x", "patch_y", "s_plus", "s_minus", "response"], rows)
    return 0


def _parse_int_list(raw: str) -> list[int]:
    try:
        vals = [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"expected a comma-separated integer list, got {raw!r}") from None
    if not vals:
        raise ValueError(f"expected a non-empty integer list, got {raw!r}")
    return vals


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ove",
        description="Inverse design and analysis of 3D optical interconnects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_positional=True):
        if config_positional:
            p.add_argument("config", nargs="?", default=None,
                           help="config file (defaults apply when omitted)")
        p.add_argument("--out", default="ove-out", help="output directory")

    p = sub.add_parser("design", help="optimize an element for the configured task")
    add_common(p)
    p.set_defaults(fn=_cmd_design, task_kind=None)

    p = sub.add_parser("lantern", help="design: plane waves to fiber modes")
    add_common(p)
    p.set_defaults(fn=_cmd_design, task_kind="lantern")

    p = sub.add_parser("haar-grin", help="design: Haar lobes to detector spots")
    add_common(p)
    p.set_defaults(fn=_cmd_design, task_kind="haar-grin")

    p = sub.add_parser("propagate", help="run a source through a stored volume")
    add_common(p)
    p.add_argument("--volume", required=True, help="ivol-1 file")
    p.add_argument("--source", choices=("plane", "gaussian"), default="plane")
    p.add_argument("--theta-x-deg", type=float, default=0.0)
    p.add_argument("--theta-y-deg", type=float, default=0.0)
    p.add_argument("--waist-um", type=float, default=4.0)
    p.set_defaults(fn=_cmd_propagate)

    p = sub.add_parser("holography", help="multiplexing efficiency vs M")
    p.add_argument("--m", default="1,2,4,8", help="comma-separated multiplexing degrees")
    p.add_argument("--budget", type=float, default=0.005, help="total |dn| budget")
    p.add_argument("--scheme", choices=("superposed", "optimized"), default="superposed")
    p.add_argument("--out", default="ove-out")
    p.set_defaults(fn=_cmd_holography)

    p = sub.add_parser("scaling", help="2D vs 3D interconnect footprint counts")
    p.add_argument("--n", default="15,225", help="comma-separated neuron counts")
    p.add_argument("--pitch", type=float, default=20.0, help="element pitch in um")
    p.add_argument("--fan", type=int, default=1)
    p.add_argument("--out", default="ove-out")
    p.set_defaults(fn=_cmd_scaling)

    p = sub.add_parser("haar-bank", help="digital Haar responses of a 21x21 PGM")
    p.add_argument("--image", required=True, help="binary P5 PGM, 21x21")
    p.add_argument("--kind", choices=("all",) + HAAR_KINDS, default="all")
    p.add_argument("--out", default="ove-out")
    p.set_defaults(fn=_cmd_haar_bank)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
