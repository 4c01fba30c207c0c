"""Coherent-control simulator for a spin-9/2 nuclear qudit.

Raman rotations between isolated Zeeman-level pairs, Lindblad
dissipation, interferometry protocols, projection-noise sampling,
and the estimation pipeline on top of them.
"""

from .spin_core import (
    DIM,
    F,
    M_VALUES,
    MajoranaRoots,
    SpinError,
    SubBlochVector,
    basis_state,
    clebsch_gordan,
    majorana_roots,
    pair_generator,
    pair_rotation,
    spin_operators,
    state_from_majorana_roots,
    sub_bloch_vector,
)

__version__ = "0.1.0"
