"""Counter-based deterministic random streams for travel-time noise.

Every per-leg noise factor is a pure function of (trial_key, position,
leg_kind, leg_index), so the factors a given active position experiences do
not depend on the sizing rule under test, on how many spares exist, or on
the order in which legs are flown. This is what makes shared trial seeds
bit-exact across methods.

The hash is a splitmix64 chain. The simulation kernel carries its own copy
of the same arithmetic (compiled); tests assert the two agree bit-for-bit.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Leg kinds (keys into the per-position counter streams).
KIND_ROUTE = 0    # legs along the pre-computed inspection route, keyed by slot
KIND_RETURN = 1   # return-to-base legs, keyed by per-position return counter
KIND_TRANSIT = 2  # spare transit to a handover point, keyed by handover counter

# Stream tags for SeedSequence-derived generators (one namespace per trial).
STREAM_LAYOUT = 0
STREAM_PARTITION = 1
STREAM_COMMON = 2
STREAM_LEGS = 3


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_word(trial_key: int, position: int, kind: int, index: int) -> int:
    """Keyed 64-bit word for one leg draw."""
    h = mix64((trial_key + _GAMMA) & MASK64)
    h = mix64((h + _GAMMA + position) & MASK64)
    h = mix64((h + _GAMMA + kind) & MASK64)
    h = mix64((h + _GAMMA + index) & MASK64)
    return h


def stream_uniform(trial_key: int, position: int, kind: int, index: int) -> float:
    """Uniform draw in [0, 1) keyed by (trial_key, position, kind, index)."""
    return (stream_word(trial_key, position, kind, index) >> 11) * 2.0**-53


def leg_factor(trial_key: int, position: int, kind: int, index: int, halfwidth: float) -> float:
    """Per-leg multiplicative factor, uniform on [1-halfwidth, 1+halfwidth)."""
    u = stream_uniform(trial_key, position, kind, index)
    return 1.0 - halfwidth + 2.0 * halfwidth * u


def scenario_entropy(name: str) -> int:
    """Stable integer entropy for a scenario name (seed derivation input)."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:16], "little")


def trial_seed_sequence(base_seed: int, scenario_name: str, trial: int, stream: int) -> np.random.SeedSequence:
    """SeedSequence for one named stream of one trial.

    Depends only on (base_seed, scenario, trial, stream) -- never on the
    sizing method -- so every method sees identical layouts and draws.
    """
    return np.random.SeedSequence([base_seed, scenario_entropy(scenario_name), trial, stream])


def trial_leg_key(base_seed: int, scenario_name: str, trial: int) -> int:
    """64-bit key feeding the per-leg counter-based stream for one trial."""
    ss = trial_seed_sequence(base_seed, scenario_name, trial, STREAM_LEGS)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
