"""
Deterministic, splittable standard-Gaussian streams.

Each (master_seed, lane, trajectory_index) triple is hashed by numpy's
SeedSequence into a 128-bit Philox key; the Philox counter starts at zero.
Raw 64-bit outputs become uniforms ((u >> 11) + 0.5) * 2^-53 in (0, 1) and
then normals through the inverse normal CDF (scipy.special.ndtri). No
rejection step is involved, so every vector costs exactly d raw draws and
sequences are bit-stable.
"""
import numpy as np
from scipy.special import ndtri

import config

_SEED_MASK = (1 << 64) - 1
_UNIT = 2.0 ** -53


class NoiseStream:
    """Counter-based Gaussian vector stream of one trajectory"""

    def __init__(self, master_seed: int, trajectory_index: int, lane: int = config.PRIMARY_LANE):
        if trajectory_index < 0 or lane < 0:
            raise ValueError("trajectory_index and lane must be nonnegative")
        self.master_seed = master_seed
        self.trajectory_index = trajectory_index
        self.lane = lane
        self.step_counter = 0
        sequence = np.random.SeedSequence(entropy=master_seed & _SEED_MASK,
                                          spawn_key=(lane, trajectory_index))
        key = sequence.generate_state(2, dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    def clone(self) -> "NoiseStream":
        twin = NoiseStream.__new__(NoiseStream)
        twin.master_seed = self.master_seed
        twin.trajectory_index = self.trajectory_index
        twin.lane = self.lane
        twin.step_counter = self.step_counter
        twin._bitgen = np.random.Philox()
        twin._bitgen.state = self._bitgen.state
        return twin

    def _normals(self, count: int) -> np.ndarray:
        raw = self._bitgen.random_raw(count)
        uniforms = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _UNIT
        return ndtri(uniforms)


def derive_stream(master_seed: int, trajectory_index: int, lane: int = config.PRIMARY_LANE) -> NoiseStream:
    return NoiseStream(master_seed, trajectory_index, lane)


def next_gaussian_vector(stream: NoiseStream, d: int) -> np.ndarray:
    """d i.i.d. N(0,1) draws; advances the stream by one vector"""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    vector = stream._normals(d)
    stream.step_counter += 1
    return vector


def gaussian_block(stream: NoiseStream, n_vectors: int, d: int) -> np.ndarray:
    """n_vectors successive Gaussian vectors as an (n_vectors, d) array"""
    block = stream._normals(n_vectors * d).reshape(n_vectors, d)
    stream.step_counter += n_vectors
    return block


def coarse_increment(fine: np.ndarray, m: int) -> np.ndarray:
    """(xi_1 + ... + xi_m) / sqrt(m) over axis -2, summed in index order"""
    if m == 1:
        return fine[..., 0, :]
    total = fine[..., 0, :]
    for j in range(1, m):
        total = total + fine[..., j, :]
    return total / np.sqrt(m)
