import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from module.Distinguishability import delay_line_transform
from module.Fock import (A, A_OUT, B, B_OUT, H, V, NORM_TOLERANCE, TEMPORAL_MODES, ModeLabel,
                         ModeTransform, PhotonicState, apply_transform, normalize, norm, restrict,
                         subspace_probability)


class ZeroProbabilityError(ValueError):
    pass


@dataclass(frozen=True)
class ElementSpec:
    """
    Settings of one optical element of the bench.

    Parameters:
        kind: One of the element kinds below.
        angle: Fast axis (half wave plate) or transmission axis (polarizer) in radians, measured from H.
        reflectivity: Beam splitter intensity reflectivity.
        transmission: Polarizer per-photon intensity transmission.
        delay: Delay line setting in femtoseconds.

    Kinds:
        HALF_WAVE_PLATE: Lossless, dispersion-free retarder.
        POLARIZER: Rank-1 projection with infinite extinction ratio.
        BEAM_SPLITTER: Polarization-independent two-port splitter.
        DELAY_LINE: Acts on the temporal coordinate only (see module.Distinguishability).

    Example Usage:
        >>> ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=math.pi / 4).to_transform(B).name
        'hwp(45.0deg)'
    """

    HALF_WAVE_PLATE = 'half_wave_plate'
    POLARIZER = 'polarizer'
    BEAM_SPLITTER = 'beam_splitter'
    DELAY_LINE = 'delay_line'
    KINDS = (HALF_WAVE_PLATE, POLARIZER, BEAM_SPLITTER, DELAY_LINE)

    kind: str
    angle: float = 0.0
    reflectivity: float = 0.5
    transmission: float = 1.0
    delay: float = 0.0

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"Unknown element kind: {self.kind!r}")
        if not 0.0 <= self.angle < math.pi:
            raise ValueError(f"Element angle must lie in [0, pi), got {self.angle}")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"Reflectivity must lie in [0, 1], got {self.reflectivity}")
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"Transmission must lie in [0, 1], got {self.transmission}")

    def to_transform(self, path: str, temporal_modes: Sequence[int] = TEMPORAL_MODES,
                     model=None) -> ModeTransform:
        if self.kind == self.HALF_WAVE_PLATE:
            return hwp_transform(self.angle, path, temporal_modes)
        if self.kind == self.POLARIZER:
            return polarizer_projection(self.angle, self.transmission, path, temporal_modes)[0]
        if self.kind == self.BEAM_SPLITTER:
            return beam_splitter_transform(self.reflectivity, temporal_modes=temporal_modes)
        if model is None:
            raise ValueError("A delay line needs a wavepacket model to act on temporal modes")
        return delay_line_transform(self.delay, model, path)

    def get_status(self):
        return {
            "kind": self.kind,
            "angle_deg": math.degrees(self.angle),
            "reflectivity": self.reflectivity,
            "transmission": self.transmission,
            "delay_fs": self.delay,
        }


def _polarization_block(path, block, temporal_modes, name, projection=False):
    domain = []
    for t in temporal_modes:
        domain += [ModeLabel(path, H, t), ModeLabel(path, V, t)]
    matrix = np.kron(np.eye(len(temporal_modes)), block)
    return ModeTransform(tuple(domain), matrix, projection=projection, name=name)


def hwp_transform(angle: float, path: str = B, temporal_modes: Sequence[int] = TEMPORAL_MODES) -> ModeTransform:
    """Half wave plate Jones matrix [[cos2t, sin2t], [sin2t, -cos2t]] on the (H, V) modes of one path."""
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return _polarization_block(path, np.array([[c, s], [s, -c]]), temporal_modes,
                               name=f"hwp({math.degrees(angle):.1f}deg)")


def polarizer_projection(angle: float, transmission: float = 1.0, path: str = A_OUT,
                         temporal_modes: Sequence[int] = TEMPORAL_MODES) -> Tuple[ModeTransform, bool]:
    """
    Projection onto cos(t)|H> + sin(t)|V>, amplitude-scaled by sqrt(transmission) per photon.

    Applied to a normalized two-photon state the result is unnormalized and its squared norm is the
    probability that both photons pass. Returns the transform and the non-unitary flag.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"Transmission must lie in [0, 1], got {transmission}")
    axis = np.array([math.cos(angle), math.sin(angle)])
    block = math.sqrt(transmission) * np.outer(axis, axis)
    transform = _polarization_block(path, block, temporal_modes, projection=True,
                                    name=f"polarizer({math.degrees(angle):.1f}deg, T={transmission})")
    return transform, True


def pass_probability(state: PhotonicState, polarizer: ModeTransform) -> float:
    return norm(apply_transform(state, polarizer)) ** 2


def beam_splitter_transform(reflectivity: float = 0.5, inputs: Tuple[str, str] = (A, B),
                            outputs: Tuple[str, str] = (A_OUT, B_OUT),
                            polarizations: Sequence[str] = (H, V),
                            temporal_modes: Sequence[int] = TEMPORAL_MODES) -> ModeTransform:
    """
    Polarization- and time-independent splitter:
        a -> sqrt(r) a' + sqrt(1-r) b'
        b -> -sqrt(1-r) a' + sqrt(r) b'
    At r = 0.5 this is a -> (a' + b')/sqrt2, b -> (b' - a')/sqrt2; the minus sign sits on b.
    At r = 0 the routing is straight through: a -> b', b -> -a'.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"Reflectivity must lie in [0, 1], got {reflectivity}")
    r, t = math.sqrt(reflectivity), math.sqrt(1.0 - reflectivity)
    block = np.array([[r, -t], [t, r]])
    domain, codomain = [], []
    for pol in polarizations:
        for tm in temporal_modes:
            domain += [ModeLabel(inputs[0], pol, tm), ModeLabel(inputs[1], pol, tm)]
            codomain += [ModeLabel(outputs[0], pol, tm), ModeLabel(outputs[1], pol, tm)]
    matrix = np.kron(np.eye(len(polarizations) * len(temporal_modes)), block)
    return ModeTransform(tuple(domain), matrix, tuple(codomain), name=f"bs(R={reflectivity})")


def _all_in(path: str):
    return lambda occ: all(m.path == path for m in occ.modes)


def post_select_same_output(state: PhotonicState, output_path: str) -> Tuple[PhotonicState, float]:
    """Keeps the branch with every photon in `output_path`; returns it renormalized with its probability."""
    probability = subspace_probability(state, _all_in(output_path))
    if probability < NORM_TOLERANCE:
        raise ZeroProbabilityError(f"No amplitude has both photons in {output_path}")
    selected = normalize(restrict(state, _all_in(output_path)))
    logging.debug(f"Post-selected both photons in {output_path} with probability {probability:.6f}")
    return selected, probability


def coincidence_probability(state: PhotonicState, path1: str = A_OUT, path2: str = B_OUT) -> float:
    """Probability of exactly one photon in each of two paths."""
    def one_each(occ):
        photons = occ.photons()
        return (len(photons) == 2 and sum(m.path == path1 for m in photons) == 1
                and sum(m.path == path2 for m in photons) == 1)
    return subspace_probability(state, one_each)
