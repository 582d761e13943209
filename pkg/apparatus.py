import logging
import math
from typing import Tuple

import numpy as np

from module.Distinguishability import WavepacketModel
from module.Fock import (A, A_OUT, B, B_OUT, H, OUT1, OUT2, V, ModeLabel, PhotonicState, apply_transform,
                         create, normalize, norm, subspace_probability, vacuum)
from module.Optics import (ElementSpec, beam_splitter_transform, coincidence_probability,
                           post_select_same_output)

POLARIZATION_INDEX = {H: 0, V: 1}


class Apparatus:
    """
    The two-photon bench: SPDC pair in paths a and b, polarization preparation, a delay line on b,
    BS1 combining the paths, the analysis polarizer and the BS2 pair counter.

    Parameters:
        model: Temporal wavepacket model of both photons.
        hwp: Half wave plate on path b (+45 deg turns H into V; 0 deg leaves H alone).
        cleanup_a, cleanup_b: Polarizers that fix the prepared polarization of each path.
        bs1: Beam splitter combining paths a and b into a' and b'.
        analyzer: Projection polarizer acting on a' (+45 deg transmits |D>).
        bs2: Beam splitter of the pair counter, a' and b' into the two detectors.

    Example Usage:
        >>> bench = Apparatus.projection_bench(WavepacketModel(210.0))
        >>> state, p = bench.combine(bench.prepare(0.0))
        >>> round(p, 6), round(bench.project(state), 6)
        (0.25, 0.5)
    """

    def __init__(self, model: WavepacketModel,
                 hwp: ElementSpec = ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=math.pi / 4),
                 cleanup_a: ElementSpec = ElementSpec(ElementSpec.POLARIZER, angle=0.0),
                 cleanup_b: ElementSpec = ElementSpec(ElementSpec.POLARIZER, angle=math.pi / 2),
                 bs1: ElementSpec = ElementSpec(ElementSpec.BEAM_SPLITTER, reflectivity=0.5),
                 analyzer: ElementSpec = ElementSpec(ElementSpec.POLARIZER, angle=math.pi / 4),
                 bs2: ElementSpec = ElementSpec(ElementSpec.BEAM_SPLITTER, reflectivity=0.5)):
        self.model = model
        self.hwp = hwp
        self.cleanup_a = cleanup_a
        self.cleanup_b = cleanup_b
        self.bs1 = bs1
        self.analyzer = analyzer
        self.bs2 = bs2

    @classmethod
    def projection_bench(cls, model: WavepacketModel, transmission: float = 1.0,
                         hwp_angle: float = math.pi / 4, analyzer_angle: float = math.pi / 4,
                         reflectivity: float = 0.5) -> 'Apparatus':
        """Orthogonally polarized photons and the |D>|D> projection."""
        return cls(model,
                   hwp=ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=hwp_angle),
                   bs1=ElementSpec(ElementSpec.BEAM_SPLITTER, reflectivity=reflectivity),
                   analyzer=ElementSpec(ElementSpec.POLARIZER, angle=analyzer_angle, transmission=transmission))

    @classmethod
    def hom_bench(cls, model: WavepacketModel, reflectivity: float = 0.5) -> 'Apparatus':
        """Both photons H polarized, so BS1 shows the ordinary path-space dip."""
        return cls(model,
                   hwp=ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=0.0),
                   cleanup_b=ElementSpec(ElementSpec.POLARIZER, angle=0.0),
                   bs1=ElementSpec(ElementSpec.BEAM_SPLITTER, reflectivity=reflectivity))

    def prepare(self, delay: float) -> PhotonicState:
        """
        The normalized pre-BS1 state for a given delay of photon b. `delay=math.inf` gives fully
        distinguishable photons.
        """
        state = create(create(vacuum(), ModeLabel(A, H, 0)), ModeLabel(B, H, 0))
        state = apply_transform(state, self.hwp.to_transform(B))
        state = apply_transform(state, self.cleanup_a.to_transform(A))
        state = apply_transform(state, self.cleanup_b.to_transform(B))
        if norm(state) ** 2 < 1e-12:
            raise ValueError("Clean-up polarizers block the prepared photons")
        state = normalize(state)
        delay_line = ElementSpec(ElementSpec.DELAY_LINE, delay=delay)
        return apply_transform(state, delay_line.to_transform(B, model=self.model))

    def combine(self, state: PhotonicState, output_path: str = A_OUT) -> Tuple[PhotonicState, float]:
        """BS1 followed by post-selection of both photons leaving through `output_path`."""
        mixed = apply_transform(state, self.bs1.to_transform(A))
        return post_select_same_output(mixed, output_path)

    def split(self, state):
        """BS1 without post-selection."""
        return apply_transform(state, self.bs1.to_transform(A))

    def project(self, state):
        """Probability that both photons of a post-selected state pass the analysis polarizer."""
        return norm(apply_transform(state, self.analyzer.to_transform(A_OUT))) ** 2

    def count_pairs(self, state):
        """Probability that both pair-counter detectors click for a state confined to a'."""
        counter = beam_splitter_transform(self.bs2.reflectivity, inputs=(A_OUT, B_OUT), outputs=(OUT1, OUT2))
        return coincidence_probability(apply_transform(state, counter), OUT1, OUT2)

    def hom_coincidence(self, delay):
        """Cross-output coincidence probability right after BS1."""
        return coincidence_probability(self.split(self.prepare(delay)), A_OUT, B_OUT)

    def hom_same_output(self, delay):
        split = self.split(self.prepare(delay))
        return (subspace_probability(split, lambda occ: all(m.path == A_OUT for m in occ.modes))
                + subspace_probability(split, lambda occ: all(m.path == B_OUT for m in occ.modes)))

    def pre_bs1_density_matrix(self, delay: float = 0.0) -> np.ndarray:
        """
        Polarization density matrix of the pre-BS1 pair over (HH, HV, VH, VV), the first letter being the
        photon in path a. The temporal degree of freedom is traced out.
        """
        state = self.prepare(delay)
        vectors = {}
        for occ, amp in state.amplitudes.items():
            photon_a = next(m for m in occ.modes if m.path == A)
            photon_b = next(m for m in occ.modes if m.path == B)
            vec = vectors.setdefault((photon_a.temporal, photon_b.temporal), np.zeros(4, dtype=complex))
            vec[2 * POLARIZATION_INDEX[photon_a.polarization] + POLARIZATION_INDEX[photon_b.polarization]] += amp
        rho = sum(np.outer(vec, vec.conj()) for vec in vectors.values())
        return rho / np.trace(rho).real

    def get_status(self):
        """Returns a dictionary of the element settings."""
        return {
            "coherence_time_fs": self.model.coherence_time,
            "wavepacket_shape": self.model.shape,
            "hwp": self.hwp.get_status(),
            "cleanup_a": self.cleanup_a.get_status(),
            "cleanup_b": self.cleanup_b.get_status(),
            "bs1": self.bs1.get_status(),
            "analyzer": self.analyzer.get_status(),
            "bs2": self.bs2.get_status(),
        }

    def __str__(self):
        return (f"Apparatus Status:\n"
                f"Coherence Time: {self.model.coherence_time} fs ({self.model.shape})\n"
                f"HWP: {math.degrees(self.hwp.angle):.1f} deg\n"
                f"Clean-up Polarizers: a {math.degrees(self.cleanup_a.angle):.1f} deg, "
                f"b {math.degrees(self.cleanup_b.angle):.1f} deg\n"
                f"BS1 Reflectivity: {self.bs1.reflectivity}\n"
                f"Analyzer: {math.degrees(self.analyzer.angle):.1f} deg, T={self.analyzer.transmission}\n"
                f"BS2 Reflectivity: {self.bs2.reflectivity}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    bench = Apparatus.projection_bench(WavepacketModel(210.0))
    print(bench)
    for delay in (-533.7, -210.0, 0.0, 210.0, 533.7):
        state, p_bs1 = bench.combine(bench.prepare(delay))
        print(f"delay {delay:+7.1f} fs: BS1 selection {p_bs1:.4f}, |D>|D> {bench.project(state):.4f}, "
              f"pair counter {bench.count_pairs(state):.4f}")
