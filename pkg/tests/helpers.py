"""Random finite-rank signals for tests."""
import numpy as np

from hslra.signals import CanonicalModel, ExpTerm, generate_canonical


def _roots(rng, count, lo, hi, taken, min_gap=0.2):
    out = []
    while len(out) < count:
        z = rng.uniform(lo, hi) * np.exp(1j * rng.uniform(0.3, np.pi - 0.3))
        if all(abs(z - t) > min_gap and abs(z - np.conj(t)) > min_gap for t in taken + out):
            out.append(z)
    return out


def random_canonical(rng, d, head=0, tail=0, lo=0.6, hi=1.1, allow_multiplicity=True):
    """Canonical model of rank ``d`` with ``head``/``tail`` transients and random roots."""
    budget = d - head - tail
    if budget < 0:
        raise ValueError("transients exceed the rank")
    terms, taken = [], []
    while budget > 0:
        mult = 2 if allow_multiplicity and budget >= 2 and rng.random() < 0.25 else 1
        if budget >= 2 * mult and rng.random() < 0.5:
            (z,) = _roots(rng, 1, lo, hi, taken)
            poly = rng.uniform(0.5, 1.5, mult) * np.exp(1j * rng.uniform(0, 2 * np.pi, mult))
            terms += [ExpTerm(z, poly), ExpTerm(np.conj(z), np.conj(poly))]
            taken.append(z)
            budget -= 2 * mult
        else:
            grid = np.concatenate([np.linspace(lo, hi, 5), -np.linspace(lo, hi, 5)])
            free = [g for g in grid if all(abs(g - t) > 0.05 for t in taken)]
            x = float(rng.choice(free)) + rng.uniform(-0.02, 0.02)
            mult = min(mult, budget)
            terms.append(ExpTerm(x, rng.uniform(0.5, 1.5, mult) * rng.choice([-1.0, 1.0], mult)))
            taken.append(complex(x))
            budget -= mult
    model = CanonicalModel(
        head=tuple(rng.uniform(0.5, 1.5, head) * rng.choice([-1.0, 1.0], head)),
        tail=tuple(rng.uniform(0.5, 1.5, tail) * rng.choice([-1.0, 1.0], tail)),
        terms=terms,
    )
    assert model.rank == d
    return model


def random_finite_rank(rng, d, n, head=0, tail=0, **kw):
    model = random_canonical(rng, d, head, tail, **kw)
    return model, generate_canonical(model, n)
