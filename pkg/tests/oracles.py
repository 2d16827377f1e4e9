"""Brute-force reference implementations used only by the test suite.

Each function recomputes a production quantity by a method that shares no
code with the library: explicit window counting for the arrival MGF,
exhaustive path enumeration for the service MGF.
"""
import math

import numpy as np
from scipy.special import logsumexp


def arrival_log_mgf_enumeration(delta, tau, theta, t):
    """ln E[e^{theta A(t)}] by counting source epochs in every window phase.

    Epochs sit at integer multiples of tau on the slot line; a window of t
    slots starting at w covers w .. w+t-1 and the phase w is uniform over
    one period.
    """
    counts = []
    for w in range(tau):
        if t == 0:
            counts.append(0)
        else:
            first = math.ceil(w / tau)
            last = math.floor((w + t - 1) / tau)
            counts.append(max(0, last - first + 1))
    return float(logsumexp([theta * delta * n for n in counts]) - math.log(tau))


def service_log_mgf_enumeration(pi, p, rates, theta, t):
    """ln E[e^{-theta S(t)}] summed over all |S|^t state paths, start in pi."""
    n = len(pi)
    if t == 0:
        return 0.0
    paths = np.indices((n,) * t).reshape(t, -1)
    w = pi[paths[0]].astype(float)
    for i in range(1, t):
        w = w * p[paths[i - 1], paths[i]]
    s = rates[paths].sum(axis=0)
    mask = w > 0
    if not mask.any():
        return -math.inf
    return float(logsumexp(-theta * s[mask], b=w[mask]))


def random_chain(rng, n_states, max_rate=3.0, sparse=False):
    """Random row-stochastic chain with nonnegative rates (not necessarily
    reversible or tridiagonal)."""
    p = rng.random((n_states, n_states))
    if sparse:
        p = p * (rng.random((n_states, n_states)) < 0.6)
        p[np.arange(n_states), np.arange(n_states)] += 0.1
    p /= p.sum(axis=1, keepdims=True)
    pi = rng.random(n_states) + 0.05
    pi /= pi.sum()
    rates = np.sort(rng.random(n_states)) * max_rate
    if rng.random() < 0.3:
        rates[0] = 0.0                      # outage-style bottom state
    return pi, p, rates
