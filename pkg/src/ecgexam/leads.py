"""Canonical 12-lead definitions, anatomical groups, and projection geometry."""

from __future__ import annotations

import math

LEADS: tuple[str, ...] = (
    "I", "II", "III", "aVR", "aVL", "aVF",
    "V1", "V2", "V3", "V4", "V5", "V6",
)

LEAD_INDEX: dict[str, int] = {lead: i for i, lead in enumerate(LEADS)}

CONSENSUS_LEAD = "CONSENSUS"

LIMB_LEADS: tuple[str, ...] = ("I", "II", "III", "aVR", "aVL", "aVF")
PRECORDIAL_LEADS: tuple[str, ...] = ("V1", "V2", "V3", "V4", "V5", "V6")

# Hexaxial reference angles of the frontal-plane limb leads, degrees.
LIMB_ANGLES_DEG: dict[str, float] = {
    "I": 0.0, "II": 60.0, "III": 120.0,
    "aVR": -150.0, "aVL": -30.0, "aVF": 90.0,
}

# Anatomical groups used by criteria and diagnosis configuration.
LEAD_GROUPS: dict[str, tuple[str, ...]] = {
    "anterior": ("V1", "V2", "V3", "V4"),
    "inferior": ("II", "III", "aVF"),
    "lateral": ("I", "aVL", "V5", "V6"),
    "septal": ("V1", "V2"),
    "high_lateral": ("I", "aVL"),
    "limb": LIMB_LEADS,
    "precordial": PRECORDIAL_LEADS,
    "all": LEADS,
}

# Fixed chest-lead scale factors applied to the reference amplitudes by the
# synthetic generator, per wave family.  QRS factors are signed so that the
# normal precordial transition (net-negative V1/V2, net-positive V4-V6)
# emerges from a single positive reference complex.
PRECORDIAL_FACTORS: dict[str, tuple[float, float, float]] = {
    #        (P,    QRS,   T)
    "V1": (0.30, -0.80, 0.20),
    "V2": (0.40, -0.50, 0.60),
    "V3": (0.40, 0.30, 0.80),
    "V4": (0.40, 0.60, 1.00),
    "V5": (0.40, 0.90, 0.90),
    "V6": (0.40, 1.00, 0.80),
}


def limb_projection(axis_deg: float, lead: str) -> float:
    """Cosine projection of a frontal-plane vector onto a limb lead."""
    return math.cos(math.radians(axis_deg - LIMB_ANGLES_DEG[lead]))


def wave_scale(lead: str, axis_deg: float) -> tuple[float, float, float]:
    """Per-lead (P, QRS, T) amplitude scale for a frontal axis in degrees."""
    if lead in LIMB_ANGLES_DEG:
        f = limb_projection(axis_deg, lead)
        return (f, f, f)
    return PRECORDIAL_FACTORS[lead]


def resolve_lead_group(group: str | list[str] | tuple[str, ...]) -> tuple[str, ...]:
    """Resolve a named group or explicit lead list to canonical lead labels."""
    if isinstance(group, str):
        if group not in LEAD_GROUPS:
            raise KeyError(f"unknown lead group: {group!r}")
        return LEAD_GROUPS[group]
    unknown = [lead for lead in group if lead not in LEAD_INDEX]
    if unknown:
        raise KeyError(f"unknown leads: {unknown}")
    return tuple(group)


def canonical_sort(leads: list[str] | tuple[str, ...]) -> list[str]:
    return sorted(leads, key=lambda lead: LEAD_INDEX[lead])
