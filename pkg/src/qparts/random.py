"""Seeded random instances: states, effects, observables, instruments, models.

Every generator takes a ``numpy.random.Generator`` so results are reproducible.
Draws come from continuous ensembles, so "generic" properties hold with
probability one.
"""

from __future__ import annotations

import numpy as np

from . import linalg as la
from .instruments import Instrument, QuantumOperation, _op, trivial
from .models import MeasurementModel
from .observables import Observable


def ginibre(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def unit_vector(rng, n: int) -> np.ndarray:
    v = ginibre(rng, n, 1).reshape(-1)
    return v / np.linalg.norm(v)


def unitary(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(rng, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def isometry(rng, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(rng, rows, cols))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def psd(rng, n: int, rank: int | None = None) -> np.ndarray:
    g = ginibre(rng, n, rank or n)
    m = g @ g.conj().T
    return (m + m.conj().T) / 2


def state(rng, n: int, rank: int | None = None) -> np.ndarray:
    m = psd(rng, n, rank)
    return m / np.trace(m).real


def pure_state(rng, n: int) -> np.ndarray:
    return la.projector(unit_vector(rng, n))


def effect(rng, n: int) -> np.ndarray:
    """Random effect with spectrum spread over ``(0, 1)``."""
    u = unitary(rng, n)
    w = rng.uniform(0.0, 1.0, n)
    m = (u * w) @ u.conj().T
    return (m + m.conj().T) / 2


def projection(rng, n: int, rank: int) -> np.ndarray:
    v = isometry(rng, n, rank)
    return v @ v.conj().T


def observable(rng, n: int, k: int, labels=None) -> Observable:
    """Generic k-outcome POVM: ``A_i = S^{-1/2} G_i S^{-1/2}`` with ``S = sum G_i``."""
    labels = [str(i) for i in range(k)] if labels is None else [str(x) for x in labels]
    gs = [psd(rng, n) for _ in range(k)]
    s = la.inverse_sqrt(sum(gs))
    return Observable({x: s @ g @ s for x, g in zip(labels, gs)})


def projective_observable(rng, n: int, labels=None) -> Observable:
    """Rank-1 projective measurement in a random orthonormal basis (atomic)."""
    labels = [str(i) for i in range(n)] if labels is None else [str(x) for x in labels]
    u = unitary(rng, n)
    return Observable({x: la.projector(u[:, i]) for i, x in enumerate(labels)})


def commuting_pair(rng, n: int, ka: int, kb: int) -> tuple[Observable, Observable]:
    """Two observables diagonal in one random basis."""
    u = unitary(rng, n)

    def diag_obs(k):
        w = rng.uniform(0.05, 1.0, (k, n))
        w /= w.sum(axis=0)
        return Observable({str(i): (u * w[i]) @ u.conj().T for i in range(k)})

    return diag_obs(ka), diag_obs(kb)


def kraus_family(rng, n_out: int, n_in: int, count: int) -> list[np.ndarray]:
    """``count`` operators with ``sum S^dagger S = 1`` from one random isometry."""
    v = isometry(rng, n_out * count, n_in)
    return [v[i * n_out:(i + 1) * n_out] for i in range(count)]


def channel(rng, n: int, rank: int = 2) -> QuantumOperation:
    return _op(kraus_family(rng, n, n, rank))


def instrument(rng, n: int, k: int, ops_per_outcome: int = 2, labels=None) -> Instrument:
    """Generic instrument with ``ops_per_outcome`` Kraus operators per outcome."""
    labels = [str(i) for i in range(k)] if labels is None else [str(x) for x in labels]
    ks = kraus_family(rng, n, n, k * ops_per_outcome)
    return Instrument({
        x: _op(ks[i * ops_per_outcome:(i + 1) * ops_per_outcome]) for i, x in enumerate(labels)
    })


def kraus_instrument(rng, n: int, k: int, labels=None) -> Instrument:
    """One Kraus operator per outcome."""
    return instrument(rng, n, k, 1, labels)


def trivial_instrument(rng, n: int, k: int) -> Instrument:
    return trivial(observable(rng, n, k), state(rng, n))


def model(rng, n: int, k: int, outcomes: int = 2, rank: int = 2) -> MeasurementModel:
    """Random model: generic probe state, interaction channel and probe POVM."""
    return MeasurementModel(n, k, state(rng, k), channel(rng, n * k, rank), observable(rng, k, outcomes))


def surjection_labels(rng, domain: list[str], k: int) -> dict[str, str]:
    """Random onto assignment of ``domain`` to ``k`` labels ``"0".."k-1"``."""
    if k > len(domain):
        raise ValueError("codomain larger than domain")
    while True:
        vals = rng.integers(0, k, len(domain))
        if len(set(vals.tolist())) == k:
            return {d: str(v) for d, v in zip(domain, vals)}
