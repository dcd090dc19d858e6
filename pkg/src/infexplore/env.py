"""Seeded Bernoulli bandit environment over a reservoir of arms.

Arm ``i`` has mean ``inverse_cdf(1 - u_i)`` where ``u_i`` is hashed from
``(master_seed, i)``, and its ``n``-th reward is hashed from
``(master_seed, i, n)``. Nothing depends on the order in which arms are
created or pulled.
"""
from dataclasses import dataclass

import numpy as np

from . import _rng
from ._validation import check_count

__all__ = ["BanditEnv", "ArmRecord", "BudgetExhausted"]


class BudgetExhausted(RuntimeError):
    """Raised after the last affordable pull has been served.

    ``arm`` is the arm whose request was cut short and ``served`` how many of
    its requested pulls went through before the budget ran out.
    """

    def __init__(self, arm, served):
        super().__init__(f"sample budget exhausted while pulling arm {arm}")
        self.arm = arm
        self.served = served


@dataclass(frozen=True)
class ArmRecord:
    true_mean: float
    pulls: int
    total_reward: int

    @property
    def empirical_mean(self):
        if self.pulls == 0:
            raise ValueError("empirical mean undefined before the first pull")
        return self.total_reward / self.pulls


class BanditEnv:
    """Environment serving Bernoulli rewards, optionally under a hard budget.

    Parameters
    ----------
    reservoir : Reservoir
        Distribution of arm means.
    master_seed : int
        Any integer; reduced modulo 2**64.
    budget : int or None
        Maximum total number of pulls.
    """

    def __init__(self, reservoir, master_seed=0, budget=None):
        self.reservoir = reservoir
        self.master_seed = int(master_seed) & _rng.MASK64
        self.budget = None if budget is None else check_count(budget, "budget")
        self.samples_used = 0
        self._n_arms = 0
        self._cap = 0
        self._keys = np.empty(0, dtype=np.uint64)
        self._means = np.empty(0, dtype=np.float64)
        self._thresh = np.empty(0, dtype=np.uint64)
        self._pulls = np.empty(0, dtype=np.int64)
        self._rewards = np.empty(0, dtype=np.int64)

    # arm bookkeeping -------------------------------------------------

    @property
    def n_arms(self):
        return self._n_arms

    @property
    def remaining(self):
        """Pulls left under the budget (``None`` when unbounded)."""
        return None if self.budget is None else self.budget - self.samples_used

    def _grow(self, upto):
        if upto <= self._cap:
            return
        cap = max(upto, 2 * self._cap, 64)
        idx = np.arange(cap, dtype=np.uint64)
        keys = self._keys_for(idx)
        u = _rng.mean_uniform(keys)
        means = np.asarray(self.reservoir.inverse_cdf(1.0 - u), dtype=np.float64)
        pulls = np.zeros(cap, dtype=np.int64)
        rewards = np.zeros(cap, dtype=np.int64)
        pulls[:self._cap] = self._pulls
        rewards[:self._cap] = self._rewards
        self._keys, self._means = keys, means
        self._thresh = _rng.success_threshold(means)
        self._pulls, self._rewards = pulls, rewards
        self._cap = cap

    def _keys_for(self, idx):
        # vector form of _rng.arm_key
        base = np.uint64(_rng.mix64(self.master_seed ^ _rng._MEAN_SALT))
        with np.errstate(over="ignore"):
            c = base + (idx + np.uint64(1)) * _rng._GOLDEN
        return _rng._mix64_array(c)

    def new_arm(self):
        """Index of a fresh, never-pulled arm."""
        self._grow(self._n_arms + 1)
        self._n_arms += 1
        return self._n_arms - 1

    def new_arms(self, m):
        start = self._n_arms
        self._grow(start + m)
        self._n_arms += m
        return np.arange(start, start + m, dtype=np.int64)

    def _check_arm(self, i):
        if not 0 <= i < self._n_arms:
            raise IndexError(f"arm {i} has not been instantiated")

    def true_mean(self, i):
        self._check_arm(i)
        return float(self._means[i])

    def true_means(self, indices):
        return self._means[np.asarray(indices, dtype=np.int64)]

    def arm(self, i):
        self._check_arm(i)
        return ArmRecord(float(self._means[i]), int(self._pulls[i]), int(self._rewards[i]))

    def pulls(self, i):
        self._check_arm(i)
        return int(self._pulls[i])

    def total_reward(self, i):
        self._check_arm(i)
        return int(self._rewards[i])

    # reward streams --------------------------------------------------

    def _stream(self, i, start, count):
        bits = _rng.reward_bits(int(self._keys[i]), start, count)
        return (bits < self._thresh[i]).astype(np.int8)

    def peek_sums(self, indices, start, count):
        """Reward sums over pulls ``start+1 .. start+count`` of each arm,
        without charging the budget or moving any counter."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and idx.max() >= self._n_arms:
            self._grow(int(idx.max()) + 1)
        if count <= 0 or idx.size == 0:
            return np.zeros(idx.size, dtype=np.int64)
        out = np.empty(idx.size, dtype=np.int64)
        # keep temporaries around a few MB
        step = max(1, (1 << 19) // count)
        for a in range(0, idx.size, step):
            sl = idx[a:a + step]
            bits = _rng.reward_bits_matrix(self._keys[sl], start, count)
            out[a:a + step] = (bits < self._thresh[sl][:, None]).sum(axis=1)
        return out

    def _take(self, want):
        """Number of pulls affordable out of ``want``."""
        if self.budget is None:
            return want
        return min(want, self.budget - self.samples_used)

    def pull_batch(self, i, m):
        """Pull arm ``i`` ``m`` times and return the 0/1 rewards in order.

        If the budget runs out part way, the affordable prefix is served and
        recorded and then :class:`BudgetExhausted` is raised.
        """
        self._check_arm(i)
        m = check_count(m, "m")
        got = self._take(m)
        r = self._stream(i, int(self._pulls[i]), got) if got else np.zeros(0, np.int8)
        s = int(r.sum())
        self._pulls[i] += got
        self._rewards[i] += s
        self.samples_used += got
        if got < m:
            raise BudgetExhausted(i, got)
        return r

    def pull(self, i):
        return int(self.pull_batch(i, 1)[0])

    def pull_sum(self, i, m):
        self._check_arm(i)
        m = check_count(m, "m")
        got = self._take(m)
        s = 0
        if got:
            s = int(self.peek_sums([i], int(self._pulls[i]), got)[0])
            self._pulls[i] += got
            self._rewards[i] += s
            self.samples_used += got
        if got < m:
            raise BudgetExhausted(i, got)
        return s

    def pull_many(self, indices, counts):
        """Pull ``indices[j]`` exactly ``counts[j]`` times, in order.

        Returns the per-entry reward sums. Indices must be distinct. Budget
        exhaustion serves a prefix (possibly partial on one arm) and raises.
        """
        idx = np.asarray(indices, dtype=np.int64)
        cnt = np.asarray(counts, dtype=np.int64)
        if idx.shape != cnt.shape or idx.ndim != 1:
            raise ValueError("indices and counts must be 1-d and equal length")
        if idx.size == 0:
            return np.zeros(0, dtype=np.int64)
        if idx.min() < 0 or idx.max() >= self._n_arms:
            raise IndexError("pull_many on an arm that has not been instantiated")
        if cnt.min() < 0:
            raise ValueError("counts must be nonnegative")
        if np.unique(idx).size != idx.size:
            raise ValueError("pull_many needs distinct arm indices")
        cum = np.cumsum(cnt)
        total = int(cum[-1])
        short = None
        if self.budget is not None and total > self.budget - self.samples_used:
            avail = self.budget - self.samples_used
            cut = int(np.searchsorted(cum, avail, side="right"))
            served = avail - (int(cum[cut - 1]) if cut else 0)
            short = (int(idx[cut]), served)
            cnt = cnt.copy()
            cnt[cut] = served
            cnt[cut + 1:] = 0
            cum = np.cumsum(cnt)
            total = int(cum[-1])
        sums = np.zeros(idx.size, dtype=np.int64)
        full = cnt > 0
        if total and np.all(cnt[full] == cnt[full][0]):
            sums[full] = self._equal_sums(idx[full], int(cnt[full][0]))
        elif total:
            chunk = 1 << 21
            starts = cum - cnt
            lo = 0
            while lo < idx.size:
                # group whole arms into chunks of about `chunk` pulls
                hi = int(np.searchsorted(cum, starts[lo] + chunk, side="right"))
                hi = max(hi, lo + 1)
                sums[lo:hi] = self._ragged_sums(idx[lo:hi], cnt[lo:hi])
                lo = hi
        self._pulls[idx] += cnt
        self._rewards[idx] += sums
        self.samples_used += total
        if short is not None:
            raise BudgetExhausted(*short)
        return sums

    def _equal_sums(self, idx, count):
        # pull s+j of an arm hashes (s+j)*G + key = j*G + (s*G + key)
        with np.errstate(over="ignore"):
            base = self._pulls[idx].astype(np.uint64) * _rng._GOLDEN + self._keys[idx]
        steps = np.arange(1, count + 1, dtype=np.uint64) * _rng._GOLDEN
        out = np.empty(idx.size, dtype=np.int64)
        rows = max(1, (1 << 19) // count)
        for a in range(0, idx.size, rows):
            c = steps[None, :] + base[a:a + rows, None]
            bits = _rng._mix64_array(c) >> _rng._S11
            out[a:a + rows] = (bits < self._thresh[idx[a:a + rows]][:, None]).sum(axis=1)
        return out

    def _ragged_sums(self, idx, cnt):
        total = int(cnt.sum())
        out = np.zeros(idx.size, dtype=np.int64)
        if total == 0:
            return out
        nz = cnt > 0
        i2, c2 = idx[nz], cnt[nz]
        owner = np.repeat(np.arange(i2.size), c2)
        first = np.cumsum(c2) - c2
        offset = np.arange(total, dtype=np.int64) - first[owner]
        counter = (self._pulls[i2][owner] + offset + 1).astype(np.uint64)
        with np.errstate(over="ignore"):
            c = counter * _rng._GOLDEN + self._keys[i2][owner]
        bits = _rng._mix64_array(c) >> _rng._S11
        hit = (bits < self._thresh[i2][owner]).astype(np.int64)
        out[nz] = np.add.reduceat(hit, first)
        return out

    def pull_arms(self, indices, m):
        """Pull each listed arm ``m`` more times; returns reward sums."""
        idx = np.asarray(indices, dtype=np.int64)
        return self.pull_many(idx, np.full(idx.size, check_count(m, "m"), dtype=np.int64))
