"""Counter-based 64-bit hashing used for every random draw in the simulator.

Rewards are a pure function of ``(master_seed, arm, pull_index)`` so that the
order in which arms are touched never changes what they pay out.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MEAN_SALT = 0xD1B54A32D192ED03

_GOLDEN = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S11, _S27, _S30, _S31 = (np.uint64(s) for s in (11, 27, 30, 31))
_TWO53 = float(1 << 53)


def mix64(x):
    """splitmix64 finalizer on a Python int (bijective on 64-bit words)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _mix64_array(x):
    x = x ^ (x >> _S30)
    x *= _M1
    x ^= x >> _S27
    x *= _M2
    x ^= x >> _S31
    return x


def derive_seed(master_seed, trial_id):
    """Per-trial seed; independent of execution order."""
    return mix64(mix64(master_seed) + ((trial_id + 1) * GOLDEN))


def arm_key(master_seed, arm):
    return mix64(mix64(master_seed ^ _MEAN_SALT) + (arm + 1) * GOLDEN)


def mean_uniform(keys):
    """Uniform in [0, 1) used to draw each arm's mean, one per key."""
    k = np.asarray(keys, dtype=np.uint64) ^ np.uint64(_MEAN_SALT)
    return (_mix64_array(k) >> _S11).astype(np.float64) / _TWO53


def reward_bits(key, start, count):
    """53-bit integers for pulls ``start+1 .. start+count`` of one arm."""
    c = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    c *= _GOLDEN
    c += np.uint64(key)
    return _mix64_array(c) >> _S11


def reward_bits_matrix(keys, start, count):
    """Same as :func:`reward_bits` for several arms sharing a pull offset."""
    c = np.arange(start + 1, start + count + 1, dtype=np.uint64) * _GOLDEN
    c = c[None, :] + np.asarray(keys, dtype=np.uint64)[:, None]
    return _mix64_array(c) >> _S11


def success_threshold(p):
    """Integer threshold t with ``bits < t`` iff ``bits / 2**53 < p``."""
    return np.ceil(np.asarray(p, dtype=np.float64) * _TWO53).astype(np.uint64)
