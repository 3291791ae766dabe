"""Synthetic encoding datasets with known ground truth.

Descriptor values are drawn independently per sequence; encoding times are
generated from the time model with the content factor taken from one chosen
descriptor pairing, so fits on that pairing can recover the generator.
"""

from typing import Dict, List, Tuple

import numpy as np

from .descriptors import BlockGridSpec, DescriptorSet
from .models import (ContentFactorSpec, EncodingRecord, EnergyModelParams, TimeModelParams,
                     content_factor, default_intra_count, predict_time_kpix)

GENERATOR_PARAMS = TimeModelParams(alpha=1.0, beta=-0.45, gamma=2.0, delta=0.3, xi=1.0, t0=0.0)
GENERATOR_ENERGY = EnergyModelParams(e0=2.0, p=17.7)
PRESETS = tuple(range(1, 14))
CRFS = (32, 43, 55, 63)
CLASSES = {"A2": (1920, 1080), "A3": (1280, 720), "A4": (640, 360)}

# descriptor -> uniform draw range
_RANGES = {
    "c_s_si": (20.0, 120.0),
    "c_s_vca": (7.5, 33.0),
    "c_s_var": (2.0, 40.0),
    "c_t_ti": (2.0, 40.0),
    "c_t_vca": (2.0, 10.0),
    "c_t_flow": (0.2, 5.0),
    "c_ultrafast": (0.001, 0.01),
}


def synthetic_dataset(seed: int = 0, per_class: int = 6,
                      params: TimeModelParams = GENERATOR_PARAMS,
                      spec: ContentFactorSpec = ContentFactorSpec("vca", "vca"),
                      time_noise: float = 0.0,
                      energy: EnergyModelParams = GENERATOR_ENERGY,
                      energy_noise: float = 0.0,
                      presets=PRESETS, crfs=CRFS) -> Tuple[List[EncodingRecord], Dict[str, DescriptorSet]]:
    """Records on the full preset x CRF grid plus per-sequence descriptors.

    Measured time is the model time times (1 + time_noise * N(0, 1)); measured
    energy is the energy line at the measured time times
    (1 + energy_noise * N(0, 1)).
    """
    rng = np.random.default_rng(seed)
    records, descriptors = [], {}
    for cls, (w, h) in CLASSES.items():
        for k in range(per_class):
            seq = f"{cls}_seq{k:02d}"
            n_frames = int(rng.choice([130, 300]))
            fps = int(rng.choice([24, 30, 60]))
            values = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in _RANGES.items()}
            ds = DescriptorSet(sequence_id=seq, frame_count=n_frames, width=w, height=h,
                               block_spec=BlockGridSpec(), **values)
            descriptors[seq] = ds
            c = content_factor(ds, spec)
            n_intra = default_intra_count(n_frames, fps)
            for preset in presets:
                for crf in crfs:
                    t_kpix = predict_time_kpix(params, c, n_intra, crf, preset)
                    time_s = t_kpix * w * h / 1000.0 * n_frames
                    time_s *= max(1e-3, 1.0 + time_noise * rng.standard_normal())
                    energy_j = None
                    if energy is not None:
                        energy_j = energy.e0 + energy.p * time_s
                        energy_j *= max(1e-3, 1.0 + energy_noise * rng.standard_normal())
                    records.append(EncodingRecord(seq, cls, w, h, n_frames, preset, crf, time_s,
                                                  n_intra=n_intra, fps_num=fps, fps_den=1,
                                                  energy_j=energy_j))
    return records, descriptors
