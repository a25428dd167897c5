"""Counter-based random streams for reproducible parallel Monte Carlo.

Every sample of an experiment owns an independent stream addressed by
(master seed, sample index).  Gaussian draws come from a Philox generator
keyed on that pair; edge-crossing coins come from a stateless 64-bit hash
of (master seed, sample index, edge id).  Results therefore depend only on
the addressing, never on worker count or traversal order.
"""

from __future__ import annotations

import numpy as np

# splitmix64 constants
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF


def mix64(z: int) -> int:
    """splitmix64 finalizer on python ints (mod 2^64)."""
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def sample_key(seed: int, index: int) -> int:
    """64-bit key for one sample's edge-coin stream."""
    return mix64(mix64(seed & _MASK) ^ ((index & _MASK) * _GAMMA & _MASK))


def edge_uniforms(key: int, edge_ids) -> np.ndarray:
    """Uniform(0,1) coin for each edge id, as a pure function of (key, id).

    Vectorized numpy implementation; the numba kernels inline the same
    arithmetic (see kernels.py) so both paths flip identical coins.
    """
    z = (np.asarray(edge_ids, dtype=np.uint64) + np.uint64(1)) * np.uint64(_GAMMA)
    z += np.uint64(key)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal_generator(seed: int, index: int) -> np.random.Generator:
    """Philox generator keyed on (seed, sample index)."""
    key = np.array([seed & _MASK, index & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class SampleStream:
    """Random source for a single sample, addressed by (seed, index).

    normals() consumes from the per-sample Philox stream in call order;
    edge_uniform() is stateless and may be queried in any order.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        self._gen = None
        self._key = sample_key(self.seed, self.index)

    def normals(self, n: int) -> np.ndarray:
        if self._gen is None:
            self._gen = normal_generator(self.seed, self.index)
        return self._gen.standard_normal(n)

    def edge_uniform(self, edge_ids) -> np.ndarray:
        return edge_uniforms(self._key, edge_ids)

    def cable_uniform(self, vertex_ids) -> np.ndarray:
        """Independent coin family for per-vertex killing-cable depths."""
        return edge_uniforms(mix64(self._key ^ 0xC2B2AE3D27D4EB4F), vertex_ids)

    @property
    def key(self) -> np.uint64:
        return np.uint64(self._key)

    def state(self) -> dict:
        return {"seed": self.seed, "index": self.index}
