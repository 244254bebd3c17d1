"""ove: inverse design of 3D optical interconnects.

Scalar wave propagation (angular spectrum + split-step), adjoint
optimization of GRIN volumes and layered phase elements, fiber LP mode
targets, and the multiplexing/footprint experiments built on top.
"""

from .config import ConfigError, DesignConfig, default_config, parse_config, serialize_config
from .design import (
    DesignRun,
    LossSpec,
    OptimizerConfig,
    coupling_matrix,
    gradient,
    loss,
    loss_and_gradient,
    optimize,
    seeded_initial_volume,
    total_variation,
)
from .experiments import (
    CrosstalkReport,
    EfficiencyCurve,
    HolographySetup,
    crosstalk,
    fit_log_slope,
    ring_positions,
    spot_centroid,
    haar_grin_experiment,
    lantern_experiment,
    toy_sorter_experiment,
    multiplexed_grating_volume,
    optimized_curve,
    optimized_fanout_efficiency,
    superposed_curve,
    superposed_grating_efficiency,
    weak_grating_efficiency,
)
from .fields import (
    ComplexField,
    Grid2D,
    IndexVolume,
    LayeredElement,
    MappingTask,
    default_grid,
    normalize,
    overlap,
    power,
    zero_volume,
)
from .interconnect import (
    CouplingMatrix,
    ScalingReport,
    apply_coupling,
    fanout_matrix,
    footprint_scaling,
    haar_filter_bank,
    neuron_nonlinearity,
)
from .io import (
    export_field,
    export_volume,
    import_field,
    import_volume,
    read_pgm,
    render_field,
    write_csv,
)
from .propagation import PropagationSpec, bpm, free_space, layered, propagate, transfer_function
from .sources import (
    FiberSpec,
    HaarFields,
    LPMode,
    gaussian,
    haar_mask_field,
    haar_pattern,
    lp_modes,
    plane_wave,
    spot_target,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexField", "Grid2D", "IndexVolume", "LayeredElement", "MappingTask",
    "default_grid", "normalize", "overlap", "power", "zero_volume",
    "PropagationSpec", "bpm", "free_space", "layered", "propagate", "transfer_function",
    "FiberSpec", "LPMode", "HaarFields", "gaussian", "haar_mask_field", "haar_pattern",
    "lp_modes", "plane_wave", "spot_target",
    "LossSpec", "OptimizerConfig", "DesignRun", "loss", "gradient", "loss_and_gradient",
    "optimize", "coupling_matrix", "seeded_initial_volume", "total_variation",
    "CouplingMatrix", "ScalingReport", "apply_coupling", "fanout_matrix",
    "footprint_scaling", "haar_filter_bank", "neuron_nonlinearity",
    "CrosstalkReport", "EfficiencyCurve", "HolographySetup", "crosstalk",
    "weak_grating_efficiency", "multiplexed_grating_volume",
    "superposed_grating_efficiency", "optimized_fanout_efficiency",
    "superposed_curve", "optimized_curve", "fit_log_slope",
    "lantern_experiment", "toy_sorter_experiment", "haar_grin_experiment",
    "ring_positions", "spot_centroid",
    "ConfigError", "DesignConfig", "parse_config", "serialize_config", "default_config",
    "export_volume", "import_volume", "export_field", "import_field",
    "render_field", "read_pgm", "write_csv",
]
