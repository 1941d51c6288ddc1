"""Chinese restaurant process trajectories and the observables extracted from them.

Everything is driven by the insertion draws: at step n the new element opens a
block with probability theta/(theta+n-1), otherwise it joins the block of an
element chosen uniformly from 1..n-1.  The draws are independent across
steps, which is what makes both the vectorized run and the event-skipping
singleton sampler below exact.

A trajectory is summarised by its *prefix table*: for every block, its first
``N_max + 1`` elements in ascending order (``horizon + 1`` where the block has
not grown that far).  Point-measure atoms, block counts, the first singleton,
and short-lived singletons are all read off this table.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math
import zlib

import numpy as np

from .special import log_gamma_ratio

__all__ = [
    "CrpParams",
    "InsertionDraw",
    "TrackerConfig",
    "PartitionState",
    "TrajectoryObservables",
    "PointMeasure",
    "ShortLived",
    "N_MAX_CAP",
    "replicate_rng",
    "insertion_targets",
    "initial_state",
    "step",
    "run",
    "run_singletons",
    "block_labels",
    "permutation_run",
    "extract_point_measure",
    "observe_first_singleton",
    "observe_shortlived",
    "observe_q_path",
    "atoms_csv",
]

N_MAX_CAP = 16


@dataclass(frozen=True)
class CrpParams:
    theta: float
    seed: int
    horizon: int

    def __post_init__(self):
        if not (self.theta > 0) or math.isinf(self.theta):
            raise ValueError(f"theta must be a positive finite number, got {self.theta!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class InsertionDraw:
    """Draw for step ``step``: ``target`` None opens a block, else joins element ``target``."""

    step: int
    target: int | None = None

    @property
    def new_block(self):
        return self.target is None


@dataclass(frozen=True)
class TrackerConfig:
    N_max: int = 1
    snapshot_steps: tuple = ()

    def __post_init__(self):
        if not 1 <= self.N_max <= N_MAX_CAP:
            raise ValueError(f"N_max must be in 1..{N_MAX_CAP}, got {self.N_max}")
        object.__setattr__(self, "snapshot_steps", tuple(int(s) for s in self.snapshot_steps))

    def validate(self, horizon):
        bad = [s for s in self.snapshot_steps if not 1 <= s <= horizon]
        if bad:
            raise ValueError(f"snapshot steps {bad} fall outside 1..{horizon}")


def _purpose_code(purpose):
    return zlib.crc32(purpose.encode())


def replicate_rng(seed, replicate=0, purpose="trajectory"):
    """Independent stream for (seed, replicate, purpose)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), _purpose_code(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def insertion_targets(theta, start, stop, rng):
    """Draws for steps start..stop: entry equals the step for a new block, else the joined element."""
    steps = np.arange(start, stop + 1, dtype=np.int64)
    w = rng.random(steps.size) * (theta + steps - 1)
    join = np.floor(w - theta).astype(np.int64) + 1
    # w < theta opens a block; the clip guards the w -> theta+n-1 rounding edge
    return np.where(w < theta, steps, np.minimum(join, steps - 1))


# -- sequential engine -------------------------------------------------------

@dataclass
class PartitionState:
    """Explicit partition state for step-by-step simulation.

    Block ids are least elements.  Member lists are dropped once a block
    outgrows ``N_max + 1``; ``size_counts[k]`` is C_k for k <= N_max and the
    last entry counts larger blocks.
    """

    N_max: int = 1
    n: int = 0
    element_block: list = field(default_factory=list)
    block_sizes: dict = field(default_factory=dict)
    small_block_members: dict = field(default_factory=dict)
    size_counts: np.ndarray = None
    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.size_counts is None:
            self.size_counts = np.zeros(self.N_max + 2, dtype=np.int64)
        for N in range(1, self.N_max + 1):
            self.atoms.setdefault(N, [])

    def _bucket(self, size):
        return size if size <= self.N_max else self.N_max + 1

    def partition(self):
        blocks = {}
        for e, b in enumerate(self.element_block, start=1):
            blocks.setdefault(b, []).append(e)
        return tuple(tuple(blocks[b]) for b in sorted(blocks))


def initial_state(N_max=1):
    return PartitionState(N_max=N_max)


def step(state, draw):
    """Insert element ``state.n + 1`` according to ``draw`` (in place; returns the state)."""
    n = state.n + 1
    if draw.step != n:
        raise ValueError(f"draw for step {draw.step} applied at step {n}: trajectory out of sync")
    if draw.new_block:
        block = n
        state.block_sizes[block] = 1
        state.small_block_members[block] = [n]
        state.size_counts[state._bucket(1)] += 1
    else:
        k = draw.target
        if not 1 <= k < n:
            raise ValueError(f"join target {k} is not an existing element at step {n}")
        block = state.element_block[k - 1]
        old = state.block_sizes[block]
        state.size_counts[state._bucket(old)] -= 1
        state.size_counts[state._bucket(old + 1)] += 1
        state.block_sizes[block] = old + 1
        members = state.small_block_members.get(block)
        if members is not None:
            members.append(n)
            if old <= state.N_max:
                state.atoms[old].append((tuple(members[:old]), n))
            if len(members) > state.N_max + 1:
                del state.small_block_members[block]
    state.element_block.append(block)
    state.n = n
    return state


# -- vectorized runs -----------------------------------------------------------

def block_labels(targets):
    """Least element of each element's block, by pointer jumping over the draws."""
    H = targets.size
    idx = np.arange(H, dtype=np.int64)
    parent = np.where(targets == idx + 1, idx, targets - 1)
    while True:
        nxt = parent[parent]
        if np.array_equal(nxt, parent):
            return parent + 1
        parent = nxt


def _prefix_table(labels, width, sentinel):
    order = np.argsort(labels, kind="stable")
    lab = labels[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    sizes = np.diff(np.r_[starts, lab.size])
    table = np.full((starts.size, width), sentinel, dtype=np.int64)
    for r in range(width):
        ok = sizes > r
        table[ok, r] = order[starts[ok] + r] + 1
    return table


@dataclass
class TrajectoryObservables:
    """Compact record of one trajectory.

    ``prefix`` has one row per block born in ``[first_birth, horizon]`` and
    N_max+1 columns: the block's first elements, ``horizon + 1`` when absent.
    """

    theta: float
    horizon: int
    N_max: int
    prefix: np.ndarray
    first_birth: int = 1
    count_snapshots: list = field(default_factory=list)
    seed: int | None = None
    replicate: int = 0

    @property
    def absent(self):
        return self.horizon + 1

    def atoms(self, N):
        """(k, m) pairs of every block that reached size N+1 within the horizon."""
        if not 1 <= N <= self.N_max:
            raise ValueError(f"N={N} not tracked (N_max={self.N_max})")
        rows = self.prefix[self.prefix[:, N] <= self.horizon]
        return rows[:, :N].copy(), rows[:, N].copy()

    @property
    def atoms_by_N(self):
        return {N: self.atoms(N) for N in range(1, self.N_max + 1)}

    def open_singletons(self):
        """Birth steps of blocks that are still singletons at the horizon."""
        return self.prefix[self.prefix[:, 1] > self.horizon, 0].copy()

    def size_counts_at(self, t):
        """(C_1, ..., C_{N_max}) of the partition at step t."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"step {t} outside 1..{self.horizon}")
        if self.first_birth != 1:
            raise ValueError("counts need a trajectory observed from step 1")
        p = self.prefix
        return np.array(
            [np.count_nonzero((p[:, k - 1] <= t) & (p[:, k] > t)) for k in range(1, self.N_max + 1)],
            dtype=np.int64,
        )

    def to_record(self):
        rec = {
            "replicate": self.replicate,
            "seed": self.seed,
            "theta": self.theta,
            "horizon": self.horizon,
            "N_max": self.N_max,
            "first_birth": self.first_birth,
            "atoms": {
                str(N): [list(map(int, k)) + [int(m)] for k, m in zip(*self.atoms(N))]
                for N in range(1, self.N_max + 1)
            },
            "open_singletons": [int(v) for v in self.open_singletons()],
            "count_snapshots": [[int(s), [int(c) for c in cs]] for s, cs in self.count_snapshots],
        }
        return rec

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


def run(params, trackers=TrackerConfig(), replicate=0):
    """Simulate one full trajectory up to ``params.horizon``."""
    trackers.validate(params.horizon)
    rng = replicate_rng(params.seed, replicate)
    targets = insertion_targets(params.theta, 1, params.horizon, rng)
    labels = block_labels(targets)
    prefix = _prefix_table(labels, trackers.N_max + 1, params.horizon + 1)
    obs = TrajectoryObservables(
        params.theta, params.horizon, trackers.N_max, prefix,
        seed=params.seed, replicate=replicate,
    )
    obs.count_snapshots = [(s, obs.size_counts_at(s)) for s in trackers.snapshot_steps]
    return obs


def _log_no_event(theta, a, n, n2):
    # log P{no birth and no hit of the a open singletons during steps n+1..n2}
    return log_gamma_ratio(n - a, n2 - n) - log_gamma_ratio(theta + n, n2 - n)


def run_singletons(params, first_birth=1, replicate=0):
    """Singleton dynamics only, skipping directly from one relevant step to the next.

    Tracks every block born in ``[first_birth, horizon]`` until it first
    grows; the result carries an N_max = 1 prefix table.  At a step with
    ``a`` open singletons the chance that anything relevant happens is
    (theta + a)/(theta + n - 1), so the waiting time to the next event has a
    closed-form survival function in log-gamma terms and is drawn by
    bisection on it.
    """
    theta, H = params.theta, params.horizon
    if not 1 <= first_birth <= H:
        raise ValueError(f"first_birth must lie in 1..{H}")
    rng = replicate_rng(params.seed, replicate, "singletons")
    open_births = []
    rows = []
    n = first_birth - 1
    while n < H:
        a = len(open_births)
        log_u = math.log(rng.random())
        if n - a <= 0:
            nxt = n + 1
        elif _log_no_event(theta, a, n, H) > log_u:
            break
        else:
            lo, hi = n, H  # survival > u at lo, <= u at hi
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _log_no_event(theta, a, n, mid) > log_u:
                    lo = mid
                else:
                    hi = mid
            nxt = hi
        n = nxt
        pick = rng.random() * (theta + a)
        if pick < theta:
            open_births.append(n)
        else:
            j = min(int(pick - theta), a - 1)
            rows.append((open_births.pop(j), n))
    rows.extend((b, H + 1) for b in open_births)
    prefix = np.array(sorted(rows), dtype=np.int64).reshape(-1, 2)
    return TrajectoryObservables(
        theta, H, 1, prefix, first_birth=first_birth, seed=params.seed, replicate=replicate,
    )


def permutation_run(params, replicate=0):
    """Cycles of the permutation built from the same draws as :func:`run`.

    A new element either forms a fixed point or is inserted right after the
    element it joined.  Cycles start at their least element and are sorted.
    """
    if params.horizon > 10 ** 7:
        raise ValueError("permutation_run stores the full permutation; horizon <= 1e7")
    rng = replicate_rng(params.seed, replicate)
    targets = insertion_targets(params.theta, 1, params.horizon, rng)
    succ = np.zeros(params.horizon + 1, dtype=np.int64)
    for n, k in enumerate(targets.tolist(), start=1):
        if k == n:
            succ[n] = n
        else:
            succ[n] = succ[k]
            succ[k] = n
    seen = np.zeros(params.horizon + 1, dtype=bool)
    cycles = []
    for start in range(1, params.horizon + 1):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        j = succ[start]
        while j != start:
            cyc.append(int(j))
            seen[j] = True
            j = succ[j]
        cycles.append(tuple(cyc))
    return cycles


# -- point measures and derived observables ------------------------------------

@dataclass
class PointMeasure:
    """Finite set of scaled atoms (k_1/n, ..., k_N/n, m/n)."""

    N: int
    points: np.ndarray

    def __len__(self):
        return len(self.points)

    def count(self, window):
        if window.N != self.N:
            raise ValueError("window dimension does not match the point measure")
        return window.count(self.points) if len(self.points) else 0


def extract_point_measure(obs, N, scale):
    """Scaled atoms of the N-th point measure: blocks with m <= horizon only."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    ks, ms = obs.atoms(N)
    if ks.size:
        assert np.all(np.diff(np.column_stack([ks, ms]), axis=1) > 0), "atom ordering violated"
    pts = np.column_stack([ks, ms]).astype(float) / scale if ks.size else np.zeros((0, N + 1))
    return PointMeasure(N, pts)


def observe_first_singleton(obs, t_grid, n):
    """First singleton along the grid.

    Returns ``(raw, scaled)``: raw M_{floor(nt)} (``floor(nt)+1`` when there
    is no singleton) and the scaled path that uses the value t in that case.
    """
    if obs.first_birth != 1:
        raise ValueError("first singleton needs a trajectory observed from step 1")
    births = obs.prefix[:, 0]
    grows = obs.prefix[:, 1]
    raw = []
    scaled = []
    for t in np.atleast_1d(t_grid):
        s = int(math.floor(n * t))
        if not 1 <= s <= obs.horizon:
            raise ValueError(f"grid time {t} maps to step {s} outside 1..{obs.horizon}")
        alive = births[(births <= s) & (grows > s)]
        if alive.size:
            m = int(alive.min())
            raw.append(m)
            scaled.append(m / n)
        else:
            raw.append(s + 1)
            scaled.append(float(t))
    return np.array(raw, dtype=np.int64), np.array(scaled)


@dataclass(frozen=True)
class ShortLived:
    birth: int | None
    lifetime: int | None
    censored: bool
    n: int

    @property
    def scaled(self):
        if self.censored:
            return None
        return self.birth / self.n, self.lifetime / self.n


def observe_shortlived(obs, delta, n=None):
    """Singleton born at or after floor(delta n) with the shortest lifetime.

    Ties go to the earlier birth.  The record is censored when nothing
    qualifying completed, or when a singleton still open at the horizon could
    yet beat the best completed lifetime.
    """
    n = obs.horizon if n is None else n
    lo = int(math.floor(delta * n))
    if lo < 1:
        raise ValueError("delta * n must be at least 1")
    if obs.first_birth > lo:
        raise ValueError("trajectory does not cover births from floor(delta n)")
    ks, ms = obs.atoms(1)
    ks = ks[:, 0]
    keep = ks >= lo
    ks, ms = ks[keep], ms[keep]
    if ks.size == 0:
        return ShortLived(None, None, True, n)
    life = ms - ks
    best = np.lexsort((ks, life))[0]
    birth, lifetime = int(ks[best]), int(life[best])
    still = obs.open_singletons()
    still = still[still >= lo]
    if still.size and lifetime > obs.horizon - int(still.max()):
        return ShortLived(birth, lifetime, True, n)
    return ShortLived(birth, lifetime, False, n)


def observe_q_path(obs, delta, t_grid, n=None):
    """Counts of singletons born from floor(delta n) that doubled within floor(n t) steps.

    Returns ``(path, censored)``; ``censored[i]`` flags grid points where a
    singleton still open at the horizon could yet be counted.
    """
    n = obs.horizon if n is None else n
    lo = int(math.floor(delta * n))
    if lo < 1:
        raise ValueError("delta * n must be at least 1")
    ks, ms = obs.atoms(1)
    ks = ks[:, 0]
    keep = ks >= lo
    life = np.sort(ms[keep] - ks[keep])
    still = obs.open_singletons()
    still = still[still >= lo]
    slack = obs.horizon - int(still.max()) if still.size else None
    path, censored = [], []
    for t in np.atleast_1d(t_grid):
        s = int(math.floor(n * t))
        path.append(int(np.searchsorted(life, s, side="right")))
        censored.append(slack is not None and s > slack)
    return np.array(path, dtype=np.int64), np.array(censored, dtype=bool)


def atoms_csv(observables, N):
    """Atoms of several replicates as CSV with header replicate,N,k1,...,kN,m."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "N"] + [f"k{i}" for i in range(1, N + 1)] + ["m"])
    for obs in observables:
        ks, ms = obs.atoms(N)
        for k, m in zip(ks.tolist(), ms.tolist()):
            w.writerow([obs.replicate, N] + k + [m])
    return buf.getvalue()
