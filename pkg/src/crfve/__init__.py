"""Crouzeix-Raviart finite volume elements with additive average Schwarz
preconditioning and GMRES."""

from .mesh import (DualMesh, TriMesh, build_dual_mesh, build_unit_square_mesh,
                   read_mesh, validate_mesh, write_mesh)
from .quadrature import QuadratureRule
from .discretization import (CoefficientField, assemble_fe_matrix, assemble_fe_rhs,
                             assemble_fve_matrix, assemble_fve_rhs, broken_h1_error,
                             constant_coefficient, piecewise_constant_coefficient,
                             sinusoidal_coefficient)
from .decomposition import (Partition, apply_IA, build_block_partition, layer_contrast,
                            partition_from_labels)
from .schwarz import SchwarzOperator, build_g, build_schwarz
from .krylov import InnerProduct, estimate_Cp, estimate_cp, gmres, spectral_norm

__version__ = "0.1.0"
