"""Two-branch spectral diffusion for multivariate time series, in numpy."""
from .denoiser import DenoiserConfig
from .noise import SpectralNoiseModel, build_noise_model
from .sampler import SamplerConfig
from .schedule import NoiseSchedule, build_schedule
from .spectral import SpectralState, compress, decompress, dft, idft

__version__ = "0.1.0"

__all__ = [
    "DenoiserConfig",
    "NoiseSchedule",
    "SamplerConfig",
    "SpectralNoiseModel",
    "SpectralState",
    "build_noise_model",
    "build_schedule",
    "compress",
    "decompress",
    "dft",
    "idft",
]
