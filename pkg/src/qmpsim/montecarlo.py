"""Seeded trajectory sampling of the two-step protocols.

Randomness is counter based: trial ``k`` of a run with seed ``s`` always
consumes the Philox block with key ``s`` and counter ``k`` (four uniforms, of
which two are used).  A shard is just a contiguous range of trial indices, so
the merged counts do not depend on the number of shards, on the order in
which shards run, or on how many workers run them.

Leaf paths are ``"<first>/<second>"`` where ``first`` is the outcome of the
measurement stage and ``second`` the outcome of the postselection detector.
In the null protocol a first click destroys the system, which is recorded as
``click/destroyed``; ``click/click`` is kept as a leaf so that its count,
always zero, is visible in every result.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .detector import DetectorParams, backaction_states
from .dsl import DetectorStage, ProtocolSpec
from .hilbert import Ket, complement
from .nullprotocol import PartialCollapseSpec, partial_collapse

BLOCK = 4
CHUNK = 1 << 20

WV_LEAVES = ("click/click", "click/noclick", "noclick/click", "noclick/noclick")
NWV_LEAVES = ("click/click", "click/destroyed", "noclick/click", "noclick/noclick")


@dataclass(frozen=True)
class TrajectoryOutcome:
    """``post_click`` is ``None`` when the system was destroyed by the first click."""

    first_click: bool
    post_click: bool | None


@dataclass(frozen=True)
class Estimate:
    name: str
    value: float | None
    stderr: float | None


@dataclass(frozen=True)
class EstimatorResult:
    protocol_hash: str
    kind: str
    seed: int
    shards: int
    n_trials: int
    leaves: tuple[tuple[str, int], ...]
    estimates: tuple[Estimate, ...]

    def counts(self) -> dict[str, int]:
        return dict(self.leaves)

    def to_dict(self) -> dict:
        return {
            "protocol_hash": self.protocol_hash,
            "kind": self.kind,
            "seed": self.seed,
            "shards": self.shards,
            "n_trials": self.n_trials,
            "leaves": [{"path": p, "count": c} for p, c in self.leaves],
            "estimates": [{"name": e.name, "value": e.value, "stderr": e.stderr} for e in self.estimates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms for trials ``start .. start+count-1``, shape ``(count, 4)``."""
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[start, 0, 0, 0]))
    return gen.random((count, BLOCK))


def _b_click_state(f: Ket, retain: str) -> Ket:
    # the postselection detector clicks on f when f is retained on a click
    return f if retain == "click" else complement(f)


@dataclass(frozen=True)
class _TreeProbs:
    """Branch probabilities the samplers threshold against."""

    p_first: float
    p_second_after_click: float  # nan in the null protocol: destroyed
    p_second_after_none: float
    destroys: bool


def _wv_tree(i: Ket, d: DetectorParams, f: Ket, retain: str) -> _TreeProbs:
    pair = backaction_states(i, d)
    b = _b_click_state(f.normalize(), retain)
    after = [abs(b.inner(s)) ** 2 if s is not None else 0.0 for s in (pair.i_plus, pair.i_minus)]
    return _TreeProbs(pair.p_click, after[0], after[1], False)


def _nwv_tree(i: Ket, spec: PartialCollapseSpec, f: Ket, retain: str) -> _TreeProbs:
    click, null = partial_collapse(i, spec)
    b = _b_click_state(f.normalize(), retain)
    after = abs(b.inner(null.post_state)) ** 2 if null.post_state is not None else 0.0
    return _TreeProbs(click.probability, float("nan"), after, True)


def _tree(protocol: ProtocolSpec) -> _TreeProbs:
    i, f, m = protocol.preselect_ket(), protocol.postselect_ket(), protocol.measurement
    if protocol.kind == "wv" and isinstance(m, DetectorStage):
        return _wv_tree(i, m.params(), f, protocol.retain)
    if protocol.kind == "nwv" and isinstance(m, PartialCollapseSpec):
        return _nwv_tree(i, m, f, protocol.retain)
    raise ValueError(f"no trajectory model for protocol {protocol.kind!r} with {type(m).__name__}")


def _decide(u: np.ndarray, tree: _TreeProbs) -> tuple[np.ndarray, np.ndarray]:
    first = u[..., 0] < tree.p_first
    if tree.destroys:
        second = ~first & (u[..., 1] < tree.p_second_after_none)
    else:
        second = u[..., 1] < np.where(first, tree.p_second_after_click, tree.p_second_after_none)
    return first, second


def _single(rng: np.random.Generator, tree: _TreeProbs) -> TrajectoryOutcome:
    first, second = _decide(rng.random(BLOCK), tree)
    first = bool(first)
    if first and tree.destroys:
        return TrajectoryOutcome(True, None)
    return TrajectoryOutcome(first, bool(second))


def sample_wv_trajectory(rng: np.random.Generator, i: Ket, d: DetectorParams, f: Ket, retain: str = "click") -> TrajectoryOutcome:
    """One trajectory of the weak-detector tree; consumes four uniforms."""
    return _single(rng, _wv_tree(i, d, f, retain))


def sample_nwv_trajectory(rng: np.random.Generator, i: Ket, spec: PartialCollapseSpec, f: Ket, retain: str = "noclick") -> TrajectoryOutcome:
    """One trajectory of the partial-collapse tree; consumes four uniforms."""
    return _single(rng, _nwv_tree(i, spec, f, retain))


def _count(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    # index order matches WV_LEAVES / NWV_LEAVES
    idx = 2 * (~first).astype(np.int64) + (~second).astype(np.int64)
    return np.bincount(idx, minlength=4)


def shard_bounds(n_trials: int, shards: int) -> list[tuple[int, int]]:
    """Equal shards of ``n_trials // shards``; the last shard takes the remainder."""
    base = n_trials // shards
    bounds = [(s * base, (s + 1) * base) for s in range(shards - 1)]
    bounds.append(((shards - 1) * base, n_trials))
    return bounds


def _run_shard(seed: int, start: int, stop: int, tree: _TreeProbs) -> np.ndarray:
    counts = np.zeros(4, dtype=np.int64)
    for lo in range(start, stop, CHUNK):
        hi = min(lo + CHUNK, stop)
        counts += _count(*_decide(uniforms(seed, lo, hi - lo), tree))
    return counts


def leaf_names(protocol: ProtocolSpec) -> tuple[str, ...]:
    return NWV_LEAVES if protocol.kind == "nwv" else WV_LEAVES


def exact_leaf_probabilities(protocol: ProtocolSpec) -> dict[str, float]:
    t = _tree(protocol)
    p_none = 1.0 - t.p_first
    if t.destroys:
        probs = (0.0, t.p_first, p_none * t.p_second_after_none, p_none * (1 - t.p_second_after_none))
    else:
        probs = (
            t.p_first * t.p_second_after_click,
            t.p_first * (1 - t.p_second_after_click),
            p_none * t.p_second_after_none,
            p_none * (1 - t.p_second_after_none),
        )
    return dict(zip(leaf_names(protocol), probs))


def _retained_leaves(protocol: ProtocolSpec) -> tuple[str, str]:
    """(first-click leaf, first-silent leaf) of the retained second outcome."""
    if protocol.kind == "nwv":
        return ("click/destroyed", "noclick/noclick") if protocol.retain == "noclick" else ("click/click", "noclick/click")
    return (f"click/{protocol.retain}", f"noclick/{protocol.retain}")


def _binomial(k: int, n: int) -> tuple[float | None, float | None]:
    if n == 0:
        return None, None
    p = k / n
    return p, sqrt(p * (1 - p) / n)


def _derived(protocol: ProtocolSpec) -> list[tuple[str, str, float, float]]:
    """Reported quantities as ``(name, base probability, offset, scale)``.

    Each value is ``(P_base - offset) / scale``; shared by the empirical and
    the exact path so that names always refer to the same event.
    """
    m = protocol.measurement
    out = [
        ("P(first_click)", "first", 0.0, 1.0),
        ("P(retained)", "retained", 0.0, 1.0),
        ("P(first_click|retained)", "cond", 0.0, 1.0),
    ]
    if isinstance(m, DetectorStage):
        d = m.params()
        out += [
            ("calibrated_observable", "first", abs(d.delta) ** 2, d.click_gap),
            ("conditional_calibrated", "cond", abs(d.delta) ** 2, d.click_gap),
        ]
    else:
        out += [
            ("click_observable", "first", 0.0, m.p1),
            ("null_conditional_over_p", "cond", 0.0, m.p1),
        ]
    return out


def _empirical_estimates(protocol: ProtocolSpec, counts: dict[str, int], n: int) -> tuple[Estimate, ...]:
    k_first = sum(c for p, c in counts.items() if p.startswith("click/"))
    ret_click, ret_none = _retained_leaves(protocol)
    n_ret = counts[ret_click] + counts[ret_none]
    base = {
        "first": _binomial(k_first, n),
        "retained": _binomial(n_ret, n),
        "cond": _binomial(counts[ret_click], n_ret),
    }
    out = []
    for name, src, offset, scale in _derived(protocol):
        v, se = base[src]
        if v is None or scale == 0:
            out.append(Estimate(name, None, None))
        else:
            out.append(Estimate(name, (v - offset) / scale, se / abs(scale)))
    return tuple(out)


def exact_estimates(protocol: ProtocolSpec) -> dict[str, float | None]:
    """Exact counterparts of :attr:`EstimatorResult.estimates`, same names."""
    leaves = exact_leaf_probabilities(protocol)
    ret_click, ret_none = _retained_leaves(protocol)
    p_ret = leaves[ret_click] + leaves[ret_none]
    base = {
        "first": sum(v for k, v in leaves.items() if k.startswith("click/")),
        "retained": p_ret,
        "cond": leaves[ret_click] / p_ret if p_ret > 0 else None,
    }
    out = {}
    for name, src, offset, scale in _derived(protocol):
        v = base[src]
        out[name] = None if v is None or scale == 0 else (v - offset) / scale
    return out


def estimate(
    protocol: ProtocolSpec,
    n_trials: int | None = None,
    seed: int | None = None,
    shards: int | None = None,
    workers: int = 1,
) -> EstimatorResult:
    """Run ``n_trials`` trajectories and estimate leaf and conditional probabilities.

    Missing arguments fall back to the protocol's ``run`` directive.  Counts
    are identical for any ``shards`` and ``workers`` at a fixed seed.
    """
    run = protocol.run
    n_trials = n_trials if n_trials is not None else (run.trials if run else None)
    seed = seed if seed is not None else (run.seed if run else 0)
    shards = shards if shards is not None else (run.shards if run else 1)
    if n_trials is None or n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if shards < 1:
        raise ValueError("shards must be >= 1")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit non-negative integer")
    tree = _tree(protocol)
    bounds = shard_bounds(n_trials, shards)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_shard(seed, b[0], b[1], tree), bounds))
    else:
        parts = [_run_shard(seed, lo, hi, tree) for lo, hi in bounds]
    total = np.sum(parts, axis=0)
    names = leaf_names(protocol)
    counts = {name: int(c) for name, c in zip(names, total)}
    return EstimatorResult(
        protocol_hash=protocol.protocol_hash(),
        kind=protocol.kind,
        seed=seed,
        shards=shards,
        n_trials=n_trials,
        leaves=tuple(counts.items()),
        estimates=_empirical_estimates(protocol, counts, n_trials),
    )


@dataclass(frozen=True)
class LeafCheck:
    path: str
    frequency: float
    exact: float
    stderr: float
    z: float


def leaf_checks(result: EstimatorResult, protocol: ProtocolSpec) -> list[LeafCheck]:
    """Standardized leaf deviations; the binomial error uses the exact probability."""
    exact = exact_leaf_probabilities(protocol)
    n = result.n_trials
    out = []
    for path, count in result.leaves:
        p = exact[path]
        freq = count / n
        se = sqrt(max(p * (1 - p), 0.0) / n)
        if se == 0.0:
            z = 0.0 if freq == p else float("inf")
        else:
            z = (freq - p) / se
        out.append(LeafCheck(path, freq, p, se, z))
    return out
