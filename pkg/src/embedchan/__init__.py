"""embedchan: embedding-potential conduction channels for quantum transport.

A lead's self-energy Sigma(E + i eta), taken over the surface it replaces,
carries the lead's full scattering content: the eigenvectors of its
anti-Hermitian part are the conduction channels, open channels carry flux
-2 lambda, and the transmission through a device follows either from the
channel t-matrix or from the trace formula 4 Tr[S_l g_rl^dag S_r g_rl];
the two agree identically.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BlochSolveError,
    ChannelCountMismatchError,
    DecimationError,
    DimensionError,
    EmbedchanError,
    FluxNormalizationError,
    HermiticityError,
    ModelValidationError,
    SingularSolveError,
)
from .model import (
    DeviceSpec,
    HamiltonianBlocks,
    LatticeSpec,
    Model,
    Transverse,
    build_lead_blocks,
    fold_momentum,
    model_hash,
    parse_model,
    parse_model_dict,
    parse_model_file,
    serialize_model,
)
from .embed import (
    DEFAULT_ETA_POINT,
    DEFAULT_ETA_SWEEP,
    TAU_PSD,
    EmbeddingPotential,
    ImSigma,
    anti_hermitian_part,
    chain_surface_green_exact,
    embedding_potential,
    surface_green,
)
from .channels import (
    ChannelBasis,
    bond_current,
    channel_decomposition,
    default_tau_open,
    flux,
    reconstruct_im_sigma,
    unit_flux,
)
from .bloch import (
    TAU_PROP,
    BlochSpectrum,
    BlochState,
    ChannelTransform,
    bloch_flux_matrix,
    bloch_states,
    channel_transform,
    outgoing_unit_flux,
    surface_overlap,
)
from .transport import (
    DeviceGreenFunction,
    TransmissionResult,
    device_green,
    embed_self_energy,
    right_surface_wave,
    scattered_wave,
    t_matrix,
    transmission,
)
from .spectra import (
    EdgeFit,
    Peak,
    PeakReport,
    PointRecord,
    PointSolution,
    SweepResult,
    detect_peaks,
    fit_band_edge,
    solve_point,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
