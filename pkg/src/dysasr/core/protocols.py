"""
Dysasr Core Protocols

Contract shared by the acoustic models and the recognizer, so the decoder
and the adaptation code do not depend on one concrete network class.
"""

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class AcousticModel(Protocol):
    """Anything that maps spliced feature frames to state log-posteriors."""

    @property
    def n_states(self) -> int:
        """Size of the primary (HMM state) output layer."""
        ...

    def log_posteriors(self, frames: np.ndarray, hooks: dict | None = None) -> np.ndarray:
        """
        Evaluate the model in eval mode.

        Args:
            frames: (N, input_dim) spliced feature rows
            hooks: Optional per-layer speaker transform hooks

        Returns:
            (N, n_states) log posteriors of the primary head
        """
        ...
