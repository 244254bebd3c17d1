"""Forward scalar propagation: angular-spectrum steps, split-step BPM
through index volumes, and thin-mask propagation through layered elements.

Sign convention: time dependence exp(-i w t), forward propagation phase
exp(+i kz z). A plane wave propagated a whole number of wavelengths in a
homogeneous medium therefore returns to its input phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import ComplexField, Grid2D, IndexVolume, LayeredElement

__all__ = [
    "PropagationSpec",
    "free_space",
    "bpm",
    "layered",
    "propagate",
    "absorber_mask",
    "transfer_function",
]

TRANSFER_MODELS = ("exact-nonparaxial", "fresnel-paraxial")
EVANESCENT_POLICIES = ("zero", "keep")
BOUNDARIES = ("none", "absorber")

# Absorber amplitude at the outermost sample of the super-Gaussian skirt.
_EDGE_AMPLITUDE = 1e-3


@dataclass(frozen=True)
class PropagationSpec:
    """Knobs for the spectral propagator.

    ``absorber_width`` is the fraction of the window, per edge, covered
    by the super-Gaussian amplitude skirt; it only matters when
    ``boundary == "absorber"``. Conservation tests want ``boundary="none"``
    together with ``evanescent_policy="keep"``.
    """

    transfer_model: str = "exact-nonparaxial"
    evanescent_policy: str = "zero"
    boundary: str = "absorber"
    absorber_width: float = 0.1

    def __post_init__(self):
        if self.transfer_model not in TRANSFER_MODELS:
            raise ValueError(f"unknown transfer model {self.transfer_model!r}")
        if self.evanescent_policy not in EVANESCENT_POLICIES:
            raise ValueError(f"unknown evanescent policy {self.evanescent_policy!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "absorber" and not 0.0 <= self.absorber_width < 0.5:
            raise ValueError(f"absorber width must lie in [0, 0.5), got {self.absorber_width}")


@lru_cache(maxsize=256)
def transfer_function(grid: Grid2D, wavelength_um: float, n_medium: float,
                      distance_um: float, transfer_model: str,
                      evanescent_policy: str) -> np.ndarray:
    """Spectral transfer function H(kx, ky) for one homogeneous step.

    Exact model: H = exp(i d sqrt(k^2 - kx^2 - ky^2)) with k = 2 pi n / lambda.
    Fresnel model: H = exp(i k d) exp(-i d (kx^2 + ky^2) / (2k)).
    Evanescent components (radicand < 0) are zeroed under policy "zero";
    under "keep" the exact model applies the physical exponential decay
    and the paraxial model keeps its quadratic phase everywhere.
    """
    k = 2.0 * np.pi * n_medium / wavelength_um
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)[:, None]
    ky = 2.0 * np.pi * np.fft.fftfreq(grid.ny, grid.dy)[None, :]
    kt2 = kx * kx + ky * ky
    radicand = k * k - kt2
    propagating = radicand >= 0.0

    if transfer_model == "exact-nonparaxial":
        kz = np.sqrt(np.maximum(radicand, 0.0))
        h = np.exp(1j * distance_um * kz)
        if evanescent_policy == "zero":
            h = np.where(propagating, h, 0.0)
        else:
            decay = np.exp(-distance_um * np.sqrt(np.maximum(-radicand, 0.0)))
            h = np.where(propagating, h, decay)
    else:
        h = np.exp(1j * k * distance_um) * np.exp(-1j * distance_um * kt2 / (2.0 * k))
        if evanescent_policy == "zero":
            h = np.where(propagating, h, 0.0)

    h = np.ascontiguousarray(h)
    h.flags.writeable = False
    return h


@lru_cache(maxsize=64)
def absorber_mask(grid: Grid2D, width_fraction: float) -> np.ndarray | None:
    """Separable super-Gaussian amplitude skirt hugging the window edges.

    Returns None when the width is zero (no absorption). The profile is 1
    in the interior and falls to ~1e-3 at the outermost sample, following
    exp(log(eps) * s^4) with s the normalized depth into the skirt.
    """
    if width_fraction <= 0.0:
        return None

    def profile(n: int) -> np.ndarray:
        u = (np.arange(n) + 0.5) / n
        edge_dist = np.minimum(u, 1.0 - u)
        s = np.clip((width_fraction - edge_dist) / width_fraction, 0.0, 1.0)
        return np.exp(np.log(_EDGE_AMPLITUDE) * s**4)

    mask = profile(grid.nx)[:, None] * profile(grid.ny)[None, :]
    mask.flags.writeable = False
    return mask


def _spec_mask(grid: Grid2D, spec: PropagationSpec) -> np.ndarray | None:
    if spec.boundary != "absorber":
        return None
    return absorber_mask(grid, spec.absorber_width)


def drift(values: np.ndarray, h: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """One spectral step: FFT, multiply by H, inverse FFT, boundary mask."""
    out = np.fft.ifft2(h * np.fft.fft2(values))
    if mask is not None:
        out = mask * out
    return out


def drift_adjoint(g: np.ndarray, h: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Adjoint of :func:`drift` (mask first, then conjugate transfer)."""
    if mask is not None:
        g = mask * g
    return np.fft.ifft2(np.conj(h) * np.fft.fft2(g))


def free_space(field: ComplexField, distance_um: float, n_medium: float = 1.0,
               spec: PropagationSpec = PropagationSpec()) -> ComplexField:
    """Propagate through a homogeneous medium by the angular-spectrum method."""
    if distance_um < 0:
        raise ValueError(f"propagation distance must be >= 0, got {distance_um}")
    if distance_um == 0:
        return field
    h = transfer_function(field.grid, field.wavelength_um, n_medium, distance_um,
                          spec.transfer_model, spec.evanescent_policy)
    return field.with_values(drift(field.values, h, _spec_mask(field.grid, spec)))


def phase_screen(volume: IndexVolume, wavelength_um: float) -> np.ndarray:
    """Per-voxel phase accumulated over one axial step, (nx, ny, nz) radians."""
    return (2.0 * np.pi / wavelength_um) * volume.dz * volume.dn


def bpm(volume: IndexVolume, field: ComplexField,
        spec: PropagationSpec = PropagationSpec()) -> ComplexField:
    """Symmetric split-step propagation through an index volume.

    Per slice: half drift over dz/2 in the background index, pointwise
    phase kick exp(i (2 pi / lambda) dn dz), half drift. Deterministic for
    fixed inputs.
    """
    out, _ = bpm_with_trace(volume, field, spec, keep_trace=False)
    return field.with_values(out)


def bpm_with_trace(volume: IndexVolume, field: ComplexField, spec: PropagationSpec,
                   keep_trace: bool = True) -> tuple[np.ndarray, list[np.ndarray]]:
    """Split-step forward pass, optionally recording the field right after
    each phase screen (what the adjoint sweep needs)."""
    if field.grid != volume.grid:
        raise ValueError(f"grid mismatch: field {field.grid} vs volume {volume.grid}")
    h_half = transfer_function(volume.grid, field.wavelength_um, volume.n0,
                               0.5 * volume.dz, spec.transfer_model,
                               spec.evanescent_policy)
    mask = _spec_mask(volume.grid, spec)
    kick = np.exp(1j * phase_screen(volume, field.wavelength_um))

    u = field.values
    trace: list[np.ndarray] = []
    for k in range(volume.nz):
        u = drift(u, h_half, mask)
        u = kick[:, :, k] * u
        if keep_trace:
            trace.append(u)
        u = drift(u, h_half, mask)
    return u, trace


def layered(element: LayeredElement, field: ComplexField,
            spec: PropagationSpec = PropagationSpec()) -> ComplexField:
    """Propagate through a stack of thin phase masks.

    Each layer multiplies the field by exp(i phase) and is followed by a
    drift over its gap in the gap medium. Zero gaps skip the drift, so a
    zero-phase layer with zero gap is an exact identity.
    """
    out, _ = layered_with_trace(element, field, spec, keep_trace=False)
    return field.with_values(out)


def layered_with_trace(element: LayeredElement, field: ComplexField, spec: PropagationSpec,
                       keep_trace: bool = True) -> tuple[np.ndarray, list[np.ndarray]]:
    if field.grid != element.grid:
        raise ValueError(f"grid mismatch: field {field.grid} vs element {element.grid}")
    mask = _spec_mask(element.grid, spec)

    u = field.values
    trace: list[np.ndarray] = []
    for phase, gap in zip(element.layers, element.gaps):
        u = np.exp(1j * phase) * u
        if keep_trace:
            trace.append(u)
        if gap > 0:
            h = transfer_function(element.grid, field.wavelength_um, element.n_gap,
                                  gap, spec.transfer_model, spec.evanescent_policy)
            u = drift(u, h, mask)
    return u, trace


def propagate(design: IndexVolume | LayeredElement, field: ComplexField,
              spec: PropagationSpec = PropagationSpec()) -> ComplexField:
    """Forward pass through either design family."""
    if isinstance(design, IndexVolume):
        return bpm(design, field, spec)
    if isinstance(design, LayeredElement):
        return layered(design, field, spec)
    raise TypeError(f"cannot propagate through {type(design).__name__}")
