"""Générateur pseudo-aléatoire splitmix64, identique sur toutes les plateformes.

Tirages :
  - u64 : splitmix64 sur l'état incrémenté de GOLDEN à chaque tirage
  - uniforme [0, 1) : (u64 >> 11) * 2**-53
  - normale : Box-Muller sur deux uniformes, u1 remplacé par 1 - u1 pour éviter log(0)
"""
import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(state):
    """Un pas scalaire : retourne (nouvel état, sortie)."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(master, offset):
    _, out = splitmix64((master + offset * GOLDEN) & MASK64)
    return out


class Rng:
    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self.state = self.seed

    def next_u64(self, n):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN) & MASK64
        return z

    def uniform(self, shape, low=0.0, high=1.0):
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return (low + (high - low) * u).reshape(shape)

    def normal(self, shape, mean=0.0, std=1.0):
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u1 = 1.0 - self.uniform(n)
        u2 = self.uniform(n)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return (mean + std * z).reshape(shape)

    def integers(self, high, size):
        """Entiers uniformes dans [0, high)."""
        return np.minimum(np.floor(self.uniform(size) * high), high - 1).astype(np.int64)

    def permutation(self, n):
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self, offset):
        return Rng(derive_seed(self.seed, offset))


def _as_shape(shape):
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)
