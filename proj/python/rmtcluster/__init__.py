"""Consistent log-Euclidean distances between sample covariance matrices."""

from ._core import (  # noqa: F401
    ConfigError,
    ContractError,
    DomainError,
    IoError,
    NumericalError,
    SpectralDecomposition,
    alpha_term,
    asymptotic_covariance,
    beta_coeffs,
    build_scenario,
    consistent_distance,
    dilog,
    draw_scm,
    log_hermitian,
    mu_roots,
    pathloss_db,
    phi2,
    plugin_distance,
    spectral_decomposition,
    steering_vector,
    sweep,
    true_distance,
    ula_covariance,
)
