"""Quantum correlations of top-antitop spin states.

Core objects: :class:`~ttqcorr.states.TwoQubitState` in Bloch decomposition,
correlation measures (discord, entanglement, steering, Bell nonlocality),
leading-order production models over (beta, theta), dileptonic decay
simulation, moment tomography and CP witnesses.
"""

__version__ = "0.1.0"

from .states import (  # noqa: F401
    BEAM,
    HELICITY,
    ConditionalOutcome,
    Frame,
    TwoQubitState,
    binary_entropy,
    conditional_state,
    from_density_matrix,
    maximally_mixed,
    reduced_state,
    rotate_frame,
    singlet,
    t_state,
    t_state_eigenvalues,
    to_density_matrix,
    validate_state,
    von_neumann_entropy,
)
from .measures import (  # noqa: F401
    DiscordResult,
    HierarchyClass,
    SteeringEllipsoid,
    classify,
    discord,
    discord_t_state,
    is_bell_nonlocal,
    is_entangled,
    qqbar_discord_closed_form,
    steering_boundary_cperp,
    steering_ellipsoid,
    steering_functional,
)
from .production import (  # noqa: F401
    GG,
    QQBAR,
    IntegratedTState,
    KinematicPoint,
    LuminosityTable,
    beta_from_mass,
    integrated_matrix_helicity,
    integrated_state,
    load_luminosity_csv,
    mass_from_beta,
    mixed_state,
    partonic_weight,
    spin_state,
    trajectory,
)
from .decay import (  # noqa: F401
    EventBatch,
    ProductionSource,
    decay_pdf,
    generate_events,
    marginal_pdf,
    read_events_csv,
    sample_decay,
    write_events_csv,
)
from .tomography import (  # noqa: F401
    ConditionalEstimate,
    StateEstimate,
    conditional_bloch,
    direct_discord,
    direct_discord_exact,
    estimate_state,
    reconstruct_ellipsoid,
)
from .witnesses import (  # noqa: F401
    WitnessReport,
    discord_asymmetry,
    ellipsoid_asymmetry,
    inject_cp_violation,
    witness_report,
)
