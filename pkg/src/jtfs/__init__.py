"""Joint time-frequency scattering with an analytic gradient, for audio
analysis and metamer synthesis."""

from .adjoint import gradcheck, loss_and_direction, scattering_loss
from .audio import AudioBuffer, read_wav, write_wav
from .errors import (
    ConfigurationError,
    ConsistencyError,
    FormatError,
    IncompatibleError,
    JTFSError,
    NumericError,
    ResolutionError,
    SizeError,
    StateError,
)
from .features import read_features, write_features
from .filterbank import FilterbankPlan, build_plan, littlewood_paley
from .metamer import ReconstructionConfig, reconstruct
from .scattering import CoefficientSet, PathKey, enumerate_paths, jtfs_forward

__version__ = "0.1.0"
