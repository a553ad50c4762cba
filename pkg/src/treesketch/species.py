"""Species detection from a (predicted) parameter dictionary, and texture lookup."""
import warnings
from dataclasses import dataclass

from .params import SPECIES, builtin_profiles


class IdentificationError(ValueError):
    pass


class SpeciesTieWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EligibilityTally:
    counters: dict
    totals: dict

    def percentage(self, species):
        return self.counters[species] / self.totals[species]

    def ranking(self):
        """Species sorted by percentage, ties in species enum order."""
        return sorted(self.counters, key=lambda s: (-self.percentage(s), _order(s)))


def _order(species):
    return SPECIES.index(species) if species in SPECIES else len(SPECIES)


def _matches(value, cp):
    if isinstance(cp.value, str) or isinstance(value, str):
        return value == cp.value
    if isinstance(cp.value, tuple):
        if not isinstance(value, (tuple, list)) or len(value) != len(cp.value):
            return False
        eps = cp.epsilon if isinstance(cp.epsilon, tuple) else (cp.epsilon,) * len(cp.value)
        return all(abs(float(v) - float(c)) <= e for v, c, e in zip(value, cp.value, eps))
    if isinstance(value, (tuple, list)):
        return False
    try:
        return abs(float(value) - float(cp.value)) <= float(cp.epsilon)
    except (TypeError, ValueError):
        return False


def tally(params, profiles):
    counters, totals = {}, {}
    for prof in profiles:
        if not prof.characteristic:
            raise IdentificationError(f"{prof.species}: profile has no characteristic parameters")
        totals[prof.species] = len(prof.characteristic)
        counters[prof.species] = sum(
            1 for cp in prof.characteristic if cp.name in params and _matches(params[cp.name], cp))
    return EligibilityTally(counters, totals)


def identify(params, profiles=None, return_tally=False):
    """Species whose characteristic parameters ``params`` matches best.

    The score is the fraction of a species' characteristic parameters that
    fall within their tolerance. Ties go to the earliest species in enum order
    and raise a :class:`SpeciesTieWarning`.
    """
    profiles = builtin_profiles() if profiles is None else list(profiles)
    if not profiles:
        raise IdentificationError("no species profiles given")
    t = tally(params, profiles)
    if not any(t.counters.values()):
        raise IdentificationError("unidentifiable dictionary")
    rank = t.ranking()
    best = rank[0]
    tied = [s for s in rank if t.percentage(s) == t.percentage(best)]
    if len(tied) > 1:
        warnings.warn(f"species tie between {', '.join(tied)}; picked {best}", SpeciesTieWarning, stacklevel=2)
    return (best, t) if return_tally else best


def texture_for(species, profiles=None):
    """``(bark, leaf)`` asset ids configured for ``species``."""
    profiles = builtin_profiles() if profiles is None else profiles
    for p in profiles:
        if p.species == species:
            return p.texture["bark"], p.texture["leaf"]
    raise IdentificationError(f"unknown species {species!r}")
