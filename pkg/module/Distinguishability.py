import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from module.Fock import H, V, ModeLabel, ModeTransform

SPEED_OF_LIGHT_UM_PER_FS = 0.299792458

# Amplitude overlap of two identical wavepackets displaced by tau, as a function of (tau, tau_c).
SHAPES = {
    'gaussian': lambda tau, tau_c: math.exp(-tau ** 2 / (2.0 * tau_c ** 2)),
}


@dataclass(frozen=True)
class WavepacketModel:
    """
    Single-photon temporal wavepacket, described only by its coherence time.

    The interference filter's spectral profile is not known, so the shape is a convention: the
    gaussian amplitude overlap v(tau) = exp(-tau^2 / (2 tau_c^2)).

    Example Usage:
        >>> overlap(210.0, WavepacketModel(coherence_time=210.0))
        0.6065306597126334
    """

    coherence_time: float = 210.0
    shape: str = 'gaussian'

    def __post_init__(self):
        if not self.coherence_time > 0:
            raise ValueError(f"Coherence time must be positive, got {self.coherence_time} fs")
        if self.shape not in SHAPES:
            raise ValueError(f"Unknown wavepacket shape {self.shape!r}; known: {', '.join(SHAPES)}")


@dataclass(frozen=True)
class DelaySetting:
    path_difference: float  # micrometers

    @property
    def delay(self):
        return delay_from_path(self.path_difference)

    @classmethod
    def from_delay(cls, delay: float) -> 'DelaySetting':
        return cls(delay * SPEED_OF_LIGHT_UM_PER_FS)


def delay_from_path(path_difference: float) -> float:
    """Arrival-time difference in fs for a path-length difference in micrometers."""
    return path_difference / SPEED_OF_LIGHT_UM_PER_FS


def overlap(delay: float, model: WavepacketModel) -> float:
    return SHAPES[model.shape](delay, model.coherence_time)


def temporal_decomposition(delay: float, model: WavepacketModel) -> Tuple[float, float]:
    """
    Splits the delayed wavepacket over the reference wavepacket (temporal mode 0) and its orthogonal
    complement (temporal mode 1). The overlap's phase is taken real and positive.
    """
    c_parallel = overlap(delay, model)
    c_perp = math.sqrt(max(0.0, 1.0 - c_parallel ** 2))
    return c_parallel, c_perp


def delay_line_transform(delay: float, model: WavepacketModel, path: str,
                         polarizations: Sequence[str] = (H, V)) -> ModeTransform:
    """
    The delay line as a rotation of the two temporal modes of one path:
    mode 0 -> v mode 0 + sqrt(1 - v^2) mode 1, mode 1 -> -sqrt(1 - v^2) mode 0 + v mode 1.
    """
    c_parallel, c_perp = temporal_decomposition(delay, model)
    block = np.array([[c_parallel, -c_perp], [c_perp, c_parallel]])
    domain = []
    for pol in polarizations:
        domain += [ModeLabel(path, pol, 0), ModeLabel(path, pol, 1)]
    return ModeTransform(tuple(domain), np.kron(np.eye(len(polarizations)), block),
                         name=f"delay({delay:.1f}fs)")
