"""Closed-form simulation of entanglement swapping with noisy PDC sources and detectors."""

from .detectors import DetectorSpec, ThresholdOutcome
from .inference import DetectorBank, Posterior4, Truncation, posterior_joint
from .sources import Occupation4, SourceParams, phi_state, prior_prob
from .swapstate import MixedStateAD, assemble_state, fidelity_psi_minus, postselect, werner_visibility

__all__ = [
    "DetectorSpec",
    "ThresholdOutcome",
    "DetectorBank",
    "Posterior4",
    "Truncation",
    "posterior_joint",
    "Occupation4",
    "SourceParams",
    "phi_state",
    "prior_prob",
    "MixedStateAD",
    "assemble_state",
    "fidelity_psi_minus",
    "postselect",
    "werner_visibility",
]

__version__ = "0.1.0"
