from pathlib import Path

import numpy as np

SAMPLES = Path(__file__).resolve().parents[1] / "samples"

# filled by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES = []


def random_unitary(rng, d):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_conditioned(rng, d, cond):
    """Random invertible matrix with condition number exactly ``cond``."""
    s = np.geomspace(1.0, cond, d) if d > 1 else np.ones(1)
    return random_unitary(rng, d) @ np.diag(s) @ random_unitary(rng, d)


def commuting_unitaries(rng, d, k=2):
    q = random_unitary(rng, d)
    return [q @ np.diag(np.exp(2j * np.pi * rng.random(d))) @ q.conj().T for _ in range(k)]
