"""Virtual H&E staining of quantitative phase images.

Thin Python layer over the C++ core: synthetic phantoms, DPC phase
reconstruction, tiled inference, CycleGAN training and reader-study statistics.
Images are NumPy arrays, (H, W) for gray and (H, W, 3) for RGB, valued in [0, 1].
"""

import torch as _torch  # noqa: F401  (loads libtorch before the extension)

from ._core import (
    CheckpointIncompatible,
    ConfigError,
    CoverageError,
    DimensionError,
    DomainMismatch,
    IndexError,
    IoError,
    ParameterError,
    RangeError,
    ScheduleComplete,
    StratificationError,
    TrainingDivergence,
    TranslationModel,
    UndefinedKappa,
    VhistError,
    band_limit,
    cohens_kappa,
    convert_fov,
    forward_dpc,
    full_objective,
    kfold_split,
    lr_at,
    make_tiles,
    mean_pairwise_kappa,
    phantom,
    preprocess,
    reconstruct_phase,
    relative_l2,
    tile_layout,
    tile_positions,
)

__version__ = "0.1.0"
