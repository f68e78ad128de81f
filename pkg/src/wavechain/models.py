"""Reference agent models and chain builders used by presets and tests."""
from __future__ import annotations

from .chain import AbsorberSite, AgentSpec, Reference, build_chain
from .lti import RationalTF


def agent_m1() -> AgentSpec:
    """Double integrator with viscous friction, ``P = 1/(s(s+4))``, ``C = 4(s+1)/s``."""
    p = RationalTF.from_descending([1], [1, 4, 0])
    c = RationalTF.from_descending([4, 4], [1, 0])
    return AgentSpec(p, c, c)


def agent_m2(kp: float = 1.0) -> AgentSpec:
    """``P = 1/(s(s+3))`` with PI controller ``C = (s+kp)/s``."""
    p = RationalTF.from_descending([1], [1, 3, 0])
    c = RationalTF.from_descending([1, kp], [1, 0])
    return AgentSpec(p, c, c)


def m1() -> RationalTF:
    return agent_m1().mf


def m2(kp: float = 1.0) -> RationalTF:
    return agent_m2(kp).mf


def two_segment_chain(n_left: int, n_right: int, kp: float = 1.0, absorbers=(),
                      reference: Reference | None = None, **options):
    """``n_left`` agents of the first model followed by ``n_right`` of the second."""
    agents = [agent_m1()] * n_left + [agent_m2(kp)] * n_right
    return build_chain(agents, absorbers, reference, **options)


def absorbed_family(n: int, kp: float = 1.0):
    """Even-length two-segment chain with both end absorbers and the soft pair."""
    half = n // 2
    sites = [AbsorberSite("leader"), AbsorberSite("rear"), AbsorberSite("soft", half)]
    return two_segment_chain(half, n - half, kp, sites)


def site(text: str) -> AbsorberSite:
    """Parse ``leader``, ``rear``, ``soft@4``, ``soft_left@4``, ``hard@3`` ..."""
    text = text.strip()
    if text in ("leader", "rear"):
        return AbsorberSite(text)
    head, sep, idx = text.partition("@")
    if not sep:
        raise ValueError(f"absorber site {text!r} needs an '@index'")
    kind, _, side = head.partition("_")
    return AbsorberSite(kind, int(idx), side or "both")
