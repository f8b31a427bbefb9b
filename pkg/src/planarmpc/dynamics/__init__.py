"""Planar soft-contact dynamics: model specs, kinematics, simulation."""

from .builtins import builtin_model, builtin_models
from .kinematics import ChainState, body_segments, forward_chain, \
    mass_matrix_and_bias
from .model import ContactParams, ContactPoint, JointSpec, LinkSpec, Marker, \
    ModelSpec, load_model
from .simulate import DiscreteModel, apply_impulse, contact_forces, \
    mechanical_energy, pd_torque

__all__ = [
    "ChainState", "ContactParams", "ContactPoint", "DiscreteModel",
    "JointSpec", "LinkSpec", "Marker", "ModelSpec", "apply_impulse",
    "body_segments", "builtin_model", "builtin_models", "contact_forces",
    "forward_chain", "load_model", "mass_matrix_and_bias",
    "mechanical_energy", "pd_torque",
]
