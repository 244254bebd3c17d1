"""Inverse design by adjoint gradients through the split-step model.

The forward model is the scalar beam propagation in propagation.py; the
adjoint pass reuses the same cached transfer functions, so the gradient
is exact for the discretized model (matches finite differences to
roundoff-limited accuracy, not just to O(dz)).

Gradients are with respect to the real parameters (index contrast dn for
volumes, per-layer phase for layered elements) of a real loss of complex
fields, i.e. Wirtinger cogradients folded back onto the real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import ComplexField, IndexVolume, LayeredElement, MappingTask, overlap
from .propagation import (
    PropagationSpec,
    absorber_mask,
    bpm_with_trace,
    drift_adjoint,
    layered_with_trace,
    phase_screen,
    propagate,
    transfer_function,
)

__all__ = [
    "LossSpec",
    "OptimizerConfig",
    "DesignRun",
    "loss",
    "gradient",
    "loss_and_gradient",
    "optimize",
    "coupling_matrix",
    "seeded_initial_volume",
    "total_variation",
]

LOSS_KINDS = ("mode-coupling", "intensity-mse")
PROJECTIONS = ("clip-to-bounds", "sigmoid-reparameterization")

# Smoothing inside the TV square root; keeps the functional differentiable
# at zero contrast without visibly biasing the value.
_TV_EPS = 1e-12

# Safeguard: max step halvings in one iteration before accepting defeat.
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class LossSpec:
    """What the optimizer minimizes."""

    kind: str = "mode-coupling"
    tv_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if not (self.tv_weight >= 0.0 and math.isfinite(self.tv_weight)):
            raise ValueError(f"tv_weight must be finite and >= 0, got {self.tv_weight}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam settings plus the parameterization of the bound constraint.

    step_size defaults to 1% of the default index-contrast budget. Zero is
    tolerated in both step_size and max_iters so a run can be used as a pure
    evaluation pass: step 0 iterates without moving, max_iters 0 skips the
    loop entirely.
    """

    step_size: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 200
    seed: int = 0
    projection: str = "clip-to-bounds"

    def __post_init__(self):
        if not (self.step_size >= 0 and math.isfinite(self.step_size)):
            raise ValueError(f"step_size must be finite and >= 0, got {self.step_size}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ValueError(f"beta1 must be in [0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError(f"beta2 must be in [0, 1), got {self.beta2}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.projection not in PROJECTIONS:
            raise ValueError(
                f"unknown projection {self.projection!r}, expected one of {PROJECTIONS}"
            )


@dataclass(frozen=True)
class DesignRun:
    """Everything a finished optimization reports.

    loss_history[t] is the loss after the accepted update of iteration t,
    so it is non-increasing and its last entry is the loss of ``result``.
    """

    config: OptimizerConfig
    loss_spec: LossSpec
    initial_loss: float
    loss_history: tuple[float, ...]
    result: IndexVolume | LayeredElement
    coupling_before: np.ndarray
    coupling_after: np.ndarray


# ---------------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------------

def total_variation(x: np.ndarray) -> tuple[float, np.ndarray]:
    """Smoothed isotropic total variation and its gradient.

    Works for any array rank; forward differences along every axis are
    combined per sample under one square root.
    """
    diffs = []
    sq = np.full(x.shape, _TV_EPS**2)
    for ax in range(x.ndim):
        d = np.zeros_like(x)
        sl_hi = [slice(None)] * x.ndim
        sl_lo = [slice(None)] * x.ndim
        sl_hi[ax] = slice(1, None)
        sl_lo[ax] = slice(None, -1)
        d[tuple(sl_lo)] = x[tuple(sl_hi)] - x[tuple(sl_lo)]
        diffs.append(d)
        sq += d * d
    r = np.sqrt(sq)
    value = float(np.sum(r - _TV_EPS))

    grad = np.zeros_like(x)
    for ax, d in enumerate(diffs):
        t = d / r
        sl_hi = [slice(None)] * x.ndim
        sl_lo = [slice(None)] * x.ndim
        sl_hi[ax] = slice(1, None)
        sl_lo[ax] = slice(None, -1)
        grad[tuple(sl_lo)] -= t[tuple(sl_lo)]
        grad[tuple(sl_hi)] += t[tuple(sl_lo)]
    return value, grad


def _pair_loss_and_seed(out_values: np.ndarray, target: ComplexField, weight: float,
                        kind: str) -> tuple[float, np.ndarray]:
    """Pair loss and its cogradient dL/d(conj(out)) as an array."""
    area = target.grid.cell_area
    o, t = out_values, target.values
    if kind == "mode-coupling":
        c = np.sum(np.conj(o) * t) * area
        return weight * (1.0 - abs(c) ** 2), -weight * np.conj(c) * t * area
    # intensity-mse
    diff = np.abs(o) ** 2 - np.abs(t) ** 2
    return (weight * float(np.sum(diff**2)) * area,
            2.0 * weight * diff * o * area)


def _design_params(design: IndexVolume | LayeredElement) -> np.ndarray:
    if isinstance(design, IndexVolume):
        return design.dn.copy()
    return np.stack([layer for layer in design.layers])


def _with_params(design: IndexVolume | LayeredElement,
                 params: np.ndarray) -> IndexVolume | LayeredElement:
    if isinstance(design, IndexVolume):
        return design.with_dn(params)
    return design.with_layers(tuple(params[k] for k in range(params.shape[0])))


def _volume_adjoint(volume: IndexVolume, task: MappingTask, spec: LossSpec,
                    prop: PropagationSpec) -> tuple[float, np.ndarray]:
    grid = task.grid
    lam = task.wavelength_um
    gamma_dz = (2.0 * np.pi / lam) * volume.dz
    h_half = transfer_function(grid, lam, volume.n0, volume.dz / 2.0,
                               prop.transfer_model, prop.evanescent_policy)
    mask = absorber_mask(grid, prop.absorber_width) if prop.boundary == "absorber" else None
    kicks = np.exp(1j * phase_screen(volume, lam))

    total = 0.0
    grad = np.zeros_like(volume.dn)
    for inp, target, weight in task.pairs:
        out, trace = bpm_with_trace(volume, inp, prop)
        pair_loss, g = _pair_loss_and_seed(out, target, weight, spec.kind)
        total += pair_loss
        for k in reversed(range(volume.nz)):
            g_b = drift_adjoint(g, h_half, mask)
            grad[:, :, k] += 2.0 * gamma_dz * np.imag(np.conj(trace[k]) * g_b)
            g = np.conj(kicks[:, :, k]) * g_b
            g = drift_adjoint(g, h_half, mask)
    return total, grad


def _layered_adjoint(element: LayeredElement, task: MappingTask, spec: LossSpec,
                     prop: PropagationSpec) -> tuple[float, np.ndarray]:
    grid = task.grid
    lam = task.wavelength_um
    mask = absorber_mask(grid, prop.absorber_width) if prop.boundary == "absorber" else None
    hs = [
        transfer_function(grid, lam, element.n_gap, gap,
                          prop.transfer_model, prop.evanescent_policy)
        if gap > 0 else None
        for gap in element.gaps
    ]
    phases = [np.exp(1j * layer) for layer in element.layers]

    total = 0.0
    grad = np.zeros((element.num_layers, grid.nx, grid.ny))
    for inp, target, weight in task.pairs:
        out, trace = layered_with_trace(element, inp, prop)
        pair_loss, g = _pair_loss_and_seed(out, target, weight, spec.kind)
        total += pair_loss
        for k in reversed(range(element.num_layers)):
            if hs[k] is not None:
                g = drift_adjoint(g, hs[k], mask)
            grad[k] += 2.0 * np.imag(np.conj(trace[k]) * g)
            g = np.conj(phases[k]) * g
    return total, grad


def loss(design: IndexVolume | LayeredElement, task: MappingTask,
         spec: LossSpec = LossSpec(), prop: PropagationSpec = PropagationSpec()) -> float:
    """Scalar objective for a design against a mapping task."""
    total = 0.0
    for inp, target, weight in task.pairs:
        out = propagate(design, inp, prop)
        pair_loss, _ = _pair_loss_and_seed(out.values, target, weight, spec.kind)
        total += pair_loss
    if spec.tv_weight > 0.0:
        tv, _ = total_variation(_design_params(design))
        total += spec.tv_weight * tv
    return float(total)


def loss_and_gradient(design: IndexVolume | LayeredElement, task: MappingTask,
                      spec: LossSpec = LossSpec(),
                      prop: PropagationSpec = PropagationSpec(),
                      ) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient for the discretized model.

    The gradient has the shape of the design parameters: (nx, ny, nz)
    for a volume's dn, (num_layers, nx, ny) for layer phases.
    """
    if isinstance(design, IndexVolume):
        total, grad = _volume_adjoint(design, task, spec, prop)
    elif isinstance(design, LayeredElement):
        total, grad = _layered_adjoint(design, task, spec, prop)
    else:
        raise TypeError(f"cannot differentiate through {type(design).__name__}")
    if spec.tv_weight > 0.0:
        tv, tv_grad = total_variation(_design_params(design))
        total += spec.tv_weight * tv
        grad = grad + spec.tv_weight * tv_grad
    return float(total), grad


def gradient(design: IndexVolume | LayeredElement, task: MappingTask,
             spec: LossSpec = LossSpec(),
             prop: PropagationSpec = PropagationSpec()) -> np.ndarray:
    return loss_and_gradient(design, task, spec, prop)[1]


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _Parameterization:
    """Maps between optimizer space and physical design parameters."""

    def __init__(self, design, projection: str):
        self.projection = projection
        self.is_volume = isinstance(design, IndexVolume)
        if self.is_volume:
            self.lo, self.hi = design.dn_min, design.dn_max
        self.bounded = self.is_volume  # layer phases are unconstrained

    def to_optimizer(self, params: np.ndarray) -> np.ndarray:
        if not (self.bounded and self.projection == "sigmoid-reparameterization"):
            return params.copy()
        span = self.hi - self.lo
        frac = np.clip((params - self.lo) / span, 1e-9, 1.0 - 1e-9)
        return np.log(frac / (1.0 - frac))

    def to_physical(self, z: np.ndarray) -> np.ndarray:
        if not self.bounded:
            return z
        if self.projection == "sigmoid-reparameterization":
            return self.lo + (self.hi - self.lo) * _sigmoid(z)
        return np.clip(z, self.lo, self.hi)

    def chain_gradient(self, grad_phys: np.ndarray, z: np.ndarray) -> np.ndarray:
        if not (self.bounded and self.projection == "sigmoid-reparameterization"):
            return grad_phys
        s = _sigmoid(z)
        return grad_phys * (self.hi - self.lo) * s * (1.0 - s)


def coupling_matrix(design: IndexVolume | LayeredElement,
                    inputs: list[ComplexField], targets: list[ComplexField],
                    prop: PropagationSpec = PropagationSpec()) -> np.ndarray:
    """|overlap|^2 of each propagated input against each target.

    Shape (targets, inputs); entry [t, i] is the power fraction of
    input i delivered into target mode t.
    """
    outs = [propagate(design, f, prop) for f in inputs]
    mat = np.empty((len(targets), len(inputs)))
    for ti, tgt in enumerate(targets):
        for ii, out in enumerate(outs):
            mat[ti, ii] = abs(overlap(out, tgt)) ** 2
    return mat


def seeded_initial_volume(grid, nz: int, dz: float, n0: float,
                          dn_min: float = 0.0, dn_max: float = 0.05,
                          seed: int = 0, noise_relative: float = 1e-4) -> IndexVolume:
    """Mid-bounds volume plus a small seeded uniform perturbation.

    The noise breaks the symmetry of an otherwise uniform start; its
    amplitude is noise_relative * dn_max, kept inside the bounds.
    """
    rng = np.random.default_rng(seed)
    mid = 0.5 * (dn_min + dn_max)
    amp = noise_relative * dn_max
    dn = mid + rng.uniform(-amp, amp, size=(grid.nx, grid.ny, nz))
    dn = np.clip(dn, dn_min, dn_max)
    return IndexVolume(grid=grid, nz=nz, dz=dz, n0=n0, dn=dn,
                       dn_min=dn_min, dn_max=dn_max)


def optimize(task: MappingTask, initial_design: IndexVolume | LayeredElement,
             loss_spec: LossSpec = LossSpec(),
             config: OptimizerConfig = OptimizerConfig(),
             prop: PropagationSpec = PropagationSpec()) -> DesignRun:
    """Adam with a monotonicity safeguard.

    Each iteration proposes an Adam update; if the resulting loss is
    higher than the current one the step size is halved (sticky, up to
    60 times) and the proposal recomputed from the same moments. The
    returned history is therefore non-increasing. Non-finite loss or
    gradient aborts with the iteration index in the message.
    """
    pm = _Parameterization(initial_design, config.projection)
    z = pm.to_optimizer(_design_params(initial_design))
    design = _with_params(initial_design, pm.to_physical(z))

    inputs = [p[0] for p in task.pairs]
    targets = [p[1] for p in task.pairs]
    coupling_before = coupling_matrix(design, inputs, targets, prop)

    current_loss, grad_phys = loss_and_gradient(design, task, loss_spec, prop)
    initial_loss = current_loss
    if not math.isfinite(current_loss):
        raise ArithmeticError(f"non-finite loss at iteration 0: {current_loss}")

    m = np.zeros_like(z)
    v = np.zeros_like(z)
    lr = config.step_size
    history: list[float] = []

    for t in range(1, config.max_iters + 1):
        g = pm.chain_gradient(grad_phys, z)
        if not np.all(np.isfinite(g)):
            raise ArithmeticError(f"non-finite gradient at iteration {t - 1}")
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        direction = m_hat / (np.sqrt(v_hat) + config.eps)

        accepted = False
        for _ in range(_MAX_HALVINGS):
            z_new = z - lr * direction
            cand = _with_params(design, pm.to_physical(z_new))
            cand_loss = loss(cand, task, loss_spec, prop)
            if not math.isfinite(cand_loss):
                raise ArithmeticError(f"non-finite loss at iteration {t}")
            if cand_loss <= current_loss:
                z = z_new
                design = cand
                current_loss = cand_loss
                accepted = True
                break
            lr *= 0.5
        history.append(current_loss)
        if not accepted:
            # Step size exhausted; remaining iterations cannot move.
            history.extend([current_loss] * (config.max_iters - t))
            break
        if t < config.max_iters:
            current_loss, grad_phys = loss_and_gradient(design, task, loss_spec, prop)
            history[-1] = current_loss  # identical value, recomputed form

    coupling_after = coupling_matrix(design, inputs, targets, prop)
    return DesignRun(
        config=config,
        loss_spec=loss_spec,
        initial_loss=initial_loss,
        loss_history=tuple(history),
        result=design,
        coupling_before=coupling_before,
        coupling_after=coupling_after,
    )
