"""Security metrics: correct connection rate, Hamming distance, solution-space size."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .netlist import Netlist, random_words, simulate_words

DEFAULT_PATTERNS = 10_000
_CHUNK = 1 << 15


def ccr(true_key: Mapping[str, str], recovered_key: Mapping[str, str]) -> float:
    """Percentage of sinks whose recovered driver matches the true one."""
    if set(true_key) != set(recovered_key):
        raise ValueError("keys cover different sink sets")
    if not true_key:
        return 100.0
    correct = sum(recovered_key[s] == d for s, d in true_key.items())
    return 100.0 * correct / len(true_key)


def hamming_distance(oracle: Netlist, candidate: Netlist, n_patterns: int = DEFAULT_PATTERNS,
                     seed: int = 0) -> float:
    """Percentage of output bits that differ over uniform random patterns."""
    if set(oracle.inputs) != set(candidate.inputs) or set(oracle.outputs) != set(candidate.outputs):
        raise ValueError("netlists expose different input/output interfaces")
    outputs = sorted(set(oracle.outputs))
    if not outputs or n_patterns <= 0:
        return 0.0
    inputs = sorted(oracle.inputs)
    differing = 0
    done = 0
    chunk_seed = 0
    while done < n_patterns:
        width = min(_CHUNK, n_patterns - done)
        words = random_words(inputs, width, f"{seed}:{chunk_seed}")
        a = simulate_words(oracle, words, width)
        b = simulate_words(candidate, words, width)
        differing += sum((a[o] ^ b[o]).bit_count() for o in outputs)
        done += width
        chunk_seed += 1
    return 100.0 * differing / (n_patterns * len(outputs))


@dataclass(frozen=True)
class SolutionSpace:
    d_bot: int
    d_top: int
    with_switchboxes: bool
    log10_count: float
    log10_count_per_box: float | None = None


def log10_factorial(n: int) -> float:
    if n < 0:
        raise ValueError("factorial of a negative number")
    if n <= 170:
        return math.log10(math.factorial(n))
    return math.lgamma(n + 1) / math.log(10)


def solution_space(d_bot: int, d_top: int, with_switchboxes: bool = False) -> SolutionSpace:
    """Number of candidate netlists an attacker faces, in log10.

    Without switchboxes every one-to-one driver/sink mapping is possible:
    ``d_bot! * d_top!``. With switchboxes the count is
    ``4! * (d_bot/4)! * (d_top/4)!``. ``log10_count_per_box`` is the alternative
    reading with one ``4!`` factor per box, reported alongside.
    """
    if d_bot < 0 or d_top < 0:
        raise ValueError("driver counts must be non-negative")
    if not with_switchboxes:
        return SolutionSpace(d_bot, d_top, False, log10_factorial(d_bot) + log10_factorial(d_top))
    if d_bot % 4 or d_top % 4:
        raise ValueError("switchbox counting needs driver counts divisible by 4")
    groups = log10_factorial(d_bot // 4) + log10_factorial(d_top // 4)
    boxes = (d_bot + d_top) // 4
    return SolutionSpace(d_bot, d_top, True, log10_factorial(4) + groups,
                         boxes * log10_factorial(4) + groups)
