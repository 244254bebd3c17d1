#!/usr/bin/env python3
"""Recompute every recorded regression baseline and freeze it as JSON.

The numbers written here are the reference values the test suite
compares against. Rerunning this script on the same platform must
reproduce the file bit for bit; run it only when a deliberate physics
or configuration change invalidates the committed numbers, and review
the diff before committing.
"""

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ove.design import LossSpec, OptimizerConfig, optimize, seeded_initial_volume
from ove.experiments import (
    CrosstalkReport,
    HolographySetup,
    fit_log_slope,
    haar_grin_experiment,
    haar_grin_task,
    lantern_experiment,
    optimized_fanout_efficiency,
    ring_positions,
    spot_centroid,
    superposed_grating_efficiency,
    toy_sorter_experiment,
    weak_grating_efficiency,
)
from ove.fields import ComplexField, Grid2D, LayeredElement, MappingTask, normalize, overlap
from ove.propagation import PropagationSpec, bpm, free_space, layered
from ove.sources import FiberSpec, gaussian, plane_wave, spot_target

FIXTURE_PATH = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures",
                            "baselines.json")

LANTERN_GRID = dict(nx=64, ny=64, dx=0.5, dy=0.5)
LANTERN_ANGLE_BINS = (-1.0, 1.0)


def lantern_angles(grid: Grid2D, wavelength_um: float) -> list[tuple[float, float]]:
    """x-tilts at +-1 FFT bin, the same fan the CLI would build."""
    window = grid.nx * grid.dx
    return [(math.asin(b * wavelength_um / window), 0.0) for b in LANTERN_ANGLE_BINS]


def lantern_block() -> dict:
    fiber = FiberSpec(core_radius_um=5.0, n_core=1.45, n_clad=1.444,
                      wavelength_um=1.55)
    grid = Grid2D(**LANTERN_GRID)
    run, report = lantern_experiment(fiber, lantern_angles(grid, 1.55))
    return {
        "config": {
            "fiber": {"core_radius_um": 5.0, "n_core": 1.45, "n_clad": 1.444},
            "wavelength_um": 1.55,
            "grid": LANTERN_GRID,
            "angle_bins": list(LANTERN_ANGLE_BINS),
            "nz": 48, "dz_um": 1.0,
            "optimizer": {"step_size": 2e-3, "max_iters": 400, "seed": 11},
        },
        "initial_loss": run.initial_loss,
        "final_loss": run.loss_history[-1],
        "loss_ratio": run.loss_history[-1] / run.initial_loss,
        "coupling_matrix": report.matrix.tolist(),
        "diagonal_mean": report.diagonal_mean,
        "offdiag_mean": report.offdiag_mean,
        "worst_extinction_db": report.worst_extinction_db,
    }


def haar_grin_block() -> dict:
    run, report = haar_grin_experiment()
    grid = Grid2D(64, 64, 0.5, 0.5)
    task = haar_grin_task(grid, 1.55)
    centers = ring_positions(len(task.pairs), 6.5)
    worst = 0.0
    for (inp, _tgt, _w), c in zip(task.pairs, centers):
        out = bpm(run.result, inp, PropagationSpec())
        cx, cy = spot_centroid(out, window_radius_um=3 * 1.3)
        worst = max(worst, math.hypot(cx - c[0], cy - c[1]))
    return {
        "config": {
            "grid": LANTERN_GRID, "wavelength_um": 1.55,
            "nz": 48, "dz_um": 1.5, "dn_max": 0.05,
            "patch_extent_um": 12.0, "spot_ring_um": 6.5, "spot_radius_um": 1.3,
            "optimizer": {"step_size": 6e-3, "max_iters": 400, "seed": 13},
        },
        "initial_loss": run.initial_loss,
        "final_loss": run.loss_history[-1],
        "loss_ratio": run.loss_history[-1] / run.initial_loss,
        "coupling_matrix": report.matrix.tolist(),
        "diagonal_mean": report.diagonal_mean,
        "offdiag_mean": report.offdiag_mean,
        "worst_extinction_db": report.worst_extinction_db,
        "worst_spot_centroid_um": worst,
        "centroid_window_radius_um": 3 * 1.3,
    }


def holography_block() -> dict:
    sup_budget, opt_budget = 0.005, 0.05
    sup_m = [1, 2, 4, 8]
    opt_m = [1, 2, 4]

    sup_means = []
    for m in sup_m:
        etas = superposed_grating_efficiency(m, sup_budget)
        sup_means.append(float(np.mean(etas)))
    sup_slope = fit_log_slope(sup_m, sup_means)

    opt_means, opt_per_output, opt_uniformity = [], [], []
    for m in opt_m:
        etas, _run = optimized_fanout_efficiency(m, opt_budget)
        opt_per_output.append([float(e) for e in etas])
        opt_means.append(float(np.mean(etas)))
        opt_uniformity.append(float(etas.max() / etas.min()))
    opt_slope = fit_log_slope(opt_m, opt_means)

    # analytic weak-coupling formula vs a BPM read of one real grating
    weak_dn, weak_l = 1e-3, 20.0
    analytic = weak_grating_efficiency(weak_dn, weak_l, 1.55)
    weak_setup = HolographySetup(nz=40, dz=0.5)
    bpm_eta = float(superposed_grating_efficiency(1, weak_dn, weak_setup)[0])

    return {
        "superposed": {
            "dn_budget": sup_budget, "m_values": sup_m,
            "eta_per_output": sup_means, "fitted_log_slope": sup_slope,
        },
        "optimized": {
            "dn_budget": opt_budget, "m_values": opt_m,
            "eta_per_output": opt_means, "per_output_detail": opt_per_output,
            "uniformity_max_over_min": opt_uniformity,
            "fitted_log_slope": opt_slope,
            "optimizer": {"step_size": 2e-3, "max_iters": 400, "seed": 7},
        },
        "slope_gap": abs(opt_slope - sup_slope),
        "weak_grating_point": {
            "dn_amplitude": weak_dn, "thickness_um": weak_l,
            "wavelength_um": 1.55, "analytic": analytic, "bpm": bpm_eta,
            "relative_error": abs(bpm_eta - analytic) / analytic,
        },
    }


def toy_sorter_block() -> dict:
    """Small two-way mode sorter at its default settings."""
    run, report = toy_sorter_experiment()
    return {
        "config": {
            "grid": {"nx": 64, "ny": 64, "dx": 0.5, "dy": 0.5},
            "angle_bins": [-1.5, 1.5], "spot_ring_um": 5.0, "spot_radius_um": 2.0,
            "nz": 32, "dz_um": 1.5,
            "optimizer": {"step_size": 2e-3, "max_iters": 300, "seed": 5},
        },
        "initial_loss": run.initial_loss,
        "final_loss": run.loss_history[-1],
        "loss_ratio": run.loss_history[-1] / run.initial_loss,
        "coupling_matrix": report.matrix.tolist(),
        "diagonal_mean": report.diagonal_mean,
        "offdiag_mean": report.offdiag_mean,
        "diag_over_offdiag": report.diagonal_mean / report.offdiag_mean,
    }


def _rayleigh_sommerfeld(field: ComplexField, distance_um: float) -> ComplexField:
    """Direct RS-I integral, an oracle independent of any FFT propagator."""
    grid = field.grid
    k = 2.0 * math.pi / field.wavelength_um
    xs, ys = grid.meshgrid()
    src = field.values * grid.cell_area
    out = np.zeros_like(field.values)
    z = distance_um
    for i in range(grid.nx):
        dx2 = (xs[i, :, None, None] - xs[None, :, :]) ** 2
        dy2 = (ys[i, :, None, None] - ys[None, :, :]) ** 2
        r = np.sqrt(dx2 + dy2 + z * z)
        kern = (z / (1j * field.wavelength_um)) * np.exp(1j * k * r) / r**2
        kern = kern * (1.0 + 1j / (k * r))
        out[i, :] = np.tensordot(kern, src, axes=([1, 2], [0, 1]))
    return ComplexField(grid, field.wavelength_um, out)


def lens_block() -> dict:
    grid = Grid2D(64, 64, 0.5, 0.5)
    lam, f = 1.55, 60.0
    xs, ys = grid.meshgrid()
    phase = -(2 * math.pi / lam) * (xs**2 + ys**2) / (2 * f)
    element = LayeredElement(grid=grid, layers=(phase,), gaps=(f,), n_gap=1.0)
    src = plane_wave(grid, lam)
    spec = PropagationSpec(boundary="none")
    out = layered(element, src, spec)

    spot_radius = 1.22 * lam * f / (grid.nx * grid.dx)
    r2 = xs**2 + ys**2
    inside = r2 <= (3 * spot_radius) ** 2

    def fraction(field: ComplexField) -> float:
        intensity = np.abs(field.values) ** 2
        return float(intensity[inside].sum() / intensity.sum())

    # oracle sanity: the direct integral must agree with the FFT
    # propagator on a beam that never reaches the window edge
    probe = gaussian(grid, lam, waist_um=4.0)
    probe_fft = free_space(probe, 30.0, 1.0, spec)
    probe_rs = _rayleigh_sommerfeld(probe, 30.0)
    oracle_agreement = abs(overlap(normalize(probe_fft), normalize(probe_rs)))

    focus_rs = _rayleigh_sommerfeld(
        ComplexField(grid, lam, src.values * np.exp(1j * phase)), f)
    return {
        "config": {
            "grid": LANTERN_GRID, "wavelength_um": lam, "focal_length_um": f,
            "spot_radius_um": spot_radius, "encircle_radius_um": 3 * spot_radius,
        },
        "encircled_fraction_package": fraction(out),
        "encircled_fraction_bruteforce": fraction(focus_rs),
        "oracle_overlap_with_fft": float(oracle_agreement),
    }


def main() -> int:
    baselines = {
        "lantern": lantern_block(),
        "haar_grin": haar_grin_block(),
        "holography": holography_block(),
        "toy_sorter": toy_sorter_block(),
        "thin_lens": lens_block(),
    }
    with open(FIXTURE_PATH, "w", encoding="utf-8") as fh:
        json.dump(baselines, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {os.path.normpath(FIXTURE_PATH)}")
    for name, block in baselines.items():
        keys = ", ".join(k for k in block if k != "config")
        print(f"  {name}: {keys}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
