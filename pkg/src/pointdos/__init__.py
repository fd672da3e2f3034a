"""Disorder-averaged Green function of random lattice point interactions.

The package evaluates the averaged inverse principal matrix of a random
point-interaction Hamiltonian on Z^d (d = 1, 2, 3) by a random-walk
expansion with certified truncation bounds, and validates every averaged
quantity against brute-force Monte Carlo ensembles.
"""
from .errors import *  # noqa: F401,F403
from .kernels import (SpectralPoint, bessel_k0, bessel_k1, dz_free_kernel,  # noqa: F401
                      free_kernel, hop_kernel, renorm_diag, sqrt_neg)
from .lattice import (BandWindow, LatticeSumResult, band_window,  # noqa: F401
                      dispersion_root, lattice_sum_S, qbound_S, schur_certificate)
from .sites import (GapCertificate, SingleSiteLaw, joint_moment_J, moment_bound,  # noqa: F401
                    moment_I, pole_gap, pole_location, regime_map, w_weight)
from .principal import (PrincipalMatrix, SiteConfiguration, assemble_gamma,  # noqa: F401
                        count_eigenvalues, dense_inverse, herglotz_check,
                        neumann_inverse, theta_minus_M_check)
from .expansion import (ExpansionResult, LatticePath, averaged_kernel_F,  # noqa: F401
                        enumerate_paths, hop_tail, mc_average)
from .dos import (analyticity_probe, averaged_green_diff, conductivity_probe,  # noqa: F401
                  dos_density, ids_crosscheck)

__version__ = "0.1.0"
