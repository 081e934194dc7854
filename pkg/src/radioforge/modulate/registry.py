"""The fixed 100-class modulation catalogue.

Class IDs are 1-based and double as COCO category IDs. The order below is
part of the on-disk format: append, never reorder.
"""

from dataclasses import asdict, dataclass
from functools import lru_cache

from .spec import MULTICARRIER, ModulationSpec
from ..errors import ModulationError


@dataclass(frozen=True)
class RegistryEntry:
    class_id: int
    name: str
    family: str
    order: int
    variant: str = ""
    inner: str = ""
    inner_order: int = 0
    weight: float = 1.0
    experimental: bool = False

    @property
    def is_digital(self):
        return self.family not in ("AM-DSB", "AM-SSB", "AM-VSB", "FM", "PM")

    def as_dict(self):
        return asdict(self)


_PSK = (2, 4, 8, 16, 32, 64)
_QAM = (8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
_ASK = (2, 4, 8, 16)
_INNER = [("ASK", m) for m in _ASK] + [("PSK", m) for m in _PSK] + [("QAM", m) for m in _QAM]

# sampling weights: common single-carrier schemes high, dense QAM and the
# SC-FDMA/OTFS variants low
_TOP = 3.0
_LOW = 0.3


def _catalogue():
    rows = [("2-OOK", "OOK", 2, "", "", 0, _TOP, False)]
    rows += [(f"{m}-ASK", "ASK", m, "", "", 0, 1.0, False) for m in _ASK]
    rows += [(f"{m}-PSK", "PSK", m, "", "", 0, 1.0, False) for m in _PSK]
    rows += [(f"{m}-QAM", "QAM", m, "", "", 0, _LOW if m >= 1024 else 1.0, False) for m in _QAM]
    rows += [(f"{m}-MILQAM", "QAM", m, "MIL", "", 0, _LOW, True) for m in (16, 32, 64)]
    rows += [(f"{m}-FSK", "FSK", m, "", "", 0, 1.0, False) for m in (2, 4, 8)]
    rows += [(f"{m}-GFSK", "FSK", m, "G", "", 0, 1.0, False) for m in (2, 4, 8)]
    rows += [("2-MSK", "MSK", 2, "", "", 0, _TOP, False), ("2-GMSK", "GMSK", 2, "", "", 0, _TOP, False)]
    rows += [(f"{m}-CPFSK", "CPFSK", m, "", "", 0, 1.0, False) for m in (2, 4, 8)]
    rows += [(n, f, 1, "", "", 0, 1.0, False) for n, f in (
        ("DSBAM", "AM-DSB"), ("SSBAM", "AM-SSB"), ("VSBAM", "AM-VSB"), ("FM", "FM"), ("PM", "PM"))]
    for fam in MULTICARRIER:
        for inner, m in _INNER:
            low = fam != "OFDM" or (inner == "QAM" and m >= 1024)
            rows.append((f"{fam}-{m}{inner}", fam, 1, "", inner, m, _LOW if low else 1.0, False))
    return tuple(RegistryEntry(i + 1, *r) for i, r in enumerate(rows))


REGISTRY = _catalogue()
assert len(REGISTRY) == 100


def list_registry():
    """All catalogue entries, ordered by class ID."""
    return REGISTRY


@lru_cache(maxsize=None)
def _by_name():
    return {e.name: e for e in REGISTRY}


def lookup(key):
    """Entry by class ID (int) or name (str)."""
    if isinstance(key, str):
        try:
            return _by_name()[key]
        except KeyError:
            raise ModulationError(f"unknown modulation class {key!r}") from None
    if not 1 <= key <= len(REGISTRY):
        raise ModulationError(f"class id {key} outside 1..{len(REGISTRY)}")
    return REGISTRY[key - 1]


def build_spec(entry, symbol_rate, **params):
    """ModulationSpec for a catalogue entry; ``params`` override defaults."""
    if isinstance(entry, (str, int)):
        entry = lookup(entry)
    return ModulationSpec(
        family=entry.family,
        order=entry.order,
        symbol_rate=symbol_rate,
        name=entry.name,
        class_id=entry.class_id,
        variant=entry.variant,
        inner=entry.inner,
        inner_order=entry.inner_order,
        **params,
    )
