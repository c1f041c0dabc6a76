"""Generalized Maxwell section law on the beam strain measures.

A long-term spring in parallel with m spring-dashpot branches acts directly on
the translational strain and on the curvature change.  Branch strains are
internal variables with first-order evolution laws; their trapezoidal time
discretization turns each branch update into two scalar coefficients

    c_a = h / (2 tau_a + h)        (feeds the current total strain)
    d_a = (2 tau_a - h) / (2 tau_a + h)   (feeds the previous branch strain)

so the branch strain at the end of a step is ``c_a * strain + beta`` with the
history term ``beta = c_a * strain_old + d_a * branch_old`` known at step
start.  All constitutive matrices are diagonal and stored as length-3 vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MaxwellElement:
    """One spring-dashpot branch: Young's modulus E (Pa), relaxation time tau (s)."""
    E: float
    tau: float

    def __post_init__(self):
        if self.E <= 0.0 or self.tau <= 0.0:
            raise ValueError("Maxwell element needs E > 0 and tau > 0")

    def shear_modulus(self, nu: float) -> float:
        return self.E / (2.0 * (1.0 + nu))


@dataclass(frozen=True)
class SectionGeometry:
    """Cross-section integrals: area, shear areas and second moments (m^2, m^4)."""
    A: float
    A2: float
    A3: float
    Jt: float
    J2: float
    J3: float

    def __post_init__(self):
        for name in ("A", "A2", "A3", "Jt", "J2", "J3"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"section property {name} must be positive")

    @classmethod
    def circle(cls, diameter: float) -> "SectionGeometry":
        A = np.pi * diameter ** 2 / 4.0
        I = np.pi * diameter ** 4 / 64.0
        return cls(A=A, A2=A, A3=A, Jt=2.0 * I, J2=I, J3=I)

    @classmethod
    def square(cls, side: float) -> "SectionGeometry":
        # torsion constant defaults to the polar moment J2 + J3
        A = side ** 2
        I = side ** 4 / 12.0
        return cls(A=A, A2=A, A3=A, Jt=2.0 * I, J2=I, J3=I)


@dataclass(frozen=True)
class SectionLaw:
    """Assembled constitutive data of one beam section.

    Diagonals follow the material component ordering (axial/torsion first):
    ``CN_* = (E*A, G*A2, G*A3)`` for forces and ``CM_* = (G*Jt, E*J2, E*J3)``
    for couples.  ``inertia`` is the rotary inertia diagonal
    ``rho * (J2+J3, J2, J3)`` and ``mu = rho * A`` the mass per unit length.
    """
    E_inf: float
    nu: float
    rho: float
    geometry: SectionGeometry
    elements: tuple[MaxwellElement, ...]
    CN_inf: np.ndarray = field(init=False)
    CM_inf: np.ndarray = field(init=False)
    CNv: np.ndarray = field(init=False)
    CMv: np.ndarray = field(init=False)
    taus: np.ndarray = field(init=False)
    CN0: np.ndarray = field(init=False)
    CM0: np.ndarray = field(init=False)
    mu: float = field(init=False)
    inertia: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.E_inf <= 0.0 or self.rho <= 0.0:
            raise ValueError("E_inf and rho must be positive")
        if not -1.0 < self.nu <= 0.5:
            raise ValueError("Poisson's ratio outside (-1, 0.5]")
        g = self.geometry
        G_inf = self.E_inf / (2.0 * (1.0 + self.nu))
        object.__setattr__(self, "CN_inf", np.array(
            [self.E_inf * g.A, G_inf * g.A2, G_inf * g.A3]))
        object.__setattr__(self, "CM_inf", np.array(
            [G_inf * g.Jt, self.E_inf * g.J2, self.E_inf * g.J3]))
        m = len(self.elements)
        CNv = np.zeros((m, 3))
        CMv = np.zeros((m, 3))
        taus = np.zeros(m)
        for a, el in enumerate(self.elements):
            G = el.shear_modulus(self.nu)
            CNv[a] = (el.E * g.A, G * g.A2, G * g.A3)
            CMv[a] = (G * g.Jt, el.E * g.J2, el.E * g.J3)
            taus[a] = el.tau
        object.__setattr__(self, "CNv", CNv)
        object.__setattr__(self, "CMv", CMv)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "CN0", self.CN_inf + CNv.sum(axis=0))
        object.__setattr__(self, "CM0", self.CM_inf + CMv.sum(axis=0))
        object.__setattr__(self, "mu", self.rho * g.A)
        object.__setattr__(self, "inertia", self.rho * np.array(
            [g.J2 + g.J3, g.J2, g.J3]))

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def instantaneous_young(self) -> float:
        return self.E_inf + sum(el.E for el in self.elements)

    def elastic_limit(self) -> "SectionLaw":
        """Rate-independent comparison law with the instantaneous modulus."""
        return SectionLaw(self.instantaneous_young(), self.nu, self.rho,
                          self.geometry, ())


def build_section_law(E_inf: float, nu: float, elements, geometry: SectionGeometry,
                      rho: float) -> SectionLaw:
    """Assemble a SectionLaw; ``elements`` is an iterable of (E, tau) pairs."""
    els = tuple(el if isinstance(el, MaxwellElement) else MaxwellElement(*el)
                for el in elements)
    return SectionLaw(E_inf, nu, rho, geometry, els)


def trapezoidal_coeffs(taus: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-branch update coefficients (c_a, d_a) of the trapezoidal rule."""
    if h <= 0.0:
        raise ValueError("time step must be positive")
    taus = np.asarray(taus, dtype=float)
    den = 2.0 * taus + h
    return h / den, (2.0 * taus - h) / den


def linearize_viscous(h: float, taus) -> np.ndarray:
    """Factor h/(2 tau_a + h) picked up by branch strains under linearization.

    This is exactly the amount by which the instantaneous stiffness is reduced
    to the effective one in the tangent."""
    return trapezoidal_coeffs(taus, h)[0]


def effective_stiffness(law: SectionLaw, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Effective diagonals (CN_bar, CM_bar) of the time-discretized law."""
    if law.n_elements == 0:
        return law.CN0.copy(), law.CM0.copy()
    c, _ = trapezoidal_coeffs(law.taus, h)
    CN_bar = law.CN0 - (c[:, None] * law.CNv).sum(axis=0)
    CM_bar = law.CM0 - (c[:, None] * law.CMv).sum(axis=0)
    return CN_bar, CM_bar


class ViscousState:
    """Branch strains and history terms at a set of points.

    Arrays are shaped (m, n, 3) for m branches and n points; the trailing axis
    is the material component.  ``*_s`` channels hold arc-length derivatives
    and are advanced with the same scalar recursions (the coefficients do not
    depend on s).
    """

    FIELDS = ("Gam", "Gam_s", "Kap", "Kap_s",
              "beta_G", "beta_G_s", "beta_K", "beta_K_s")

    def __init__(self, n_elements: int, n_points: int):
        for name in self.FIELDS:
            setattr(self, name, np.zeros((n_elements, n_points, 3)))
        self.m = n_elements
        self.n = n_points

    def copy(self) -> "ViscousState":
        out = ViscousState(self.m, self.n)
        for name in self.FIELDS:
            setattr(out, name, getattr(self, name).copy())
        return out

    def force_history(self, law: SectionLaw) -> tuple[np.ndarray, np.ndarray]:
        """(sum_a CNv_a beta_Ga, its s-derivative), each (n, 3)."""
        C = law.CNv[:, None, :]
        return (C * self.beta_G).sum(axis=0), (C * self.beta_G_s).sum(axis=0)

    def couple_history(self, law: SectionLaw) -> tuple[np.ndarray, np.ndarray]:
        """(sum_a CMv_a beta_Ka, its s-derivative), each (n, 3)."""
        C = law.CMv[:, None, :]
        return (C * self.beta_K).sum(axis=0), (C * self.beta_K_s).sum(axis=0)


def compute_beta(law: SectionLaw, state: ViscousState, Gam: np.ndarray,
                 Gam_s: np.ndarray, Kap: np.ndarray, Kap_s: np.ndarray,
                 h: float) -> None:
    """Refresh the history terms of ``state`` for a step of size ``h``.

    ``Gam``/``Kap`` are the total strain measures (n, 3) at the step start;
    the state's branch strains must correspond to the same instant.
    """
    c, d = trapezoidal_coeffs(law.taus, h)
    c = c[:, None, None]
    d = d[:, None, None]
    state.beta_G = c * Gam[None] + d * state.Gam
    state.beta_G_s = c * Gam_s[None] + d * state.Gam_s
    state.beta_K = c * Kap[None] + d * state.Kap
    state.beta_K_s = c * Kap_s[None] + d * state.Kap_s


def update_viscous_state(law: SectionLaw, state: ViscousState, Gam: np.ndarray,
                         Gam_s: np.ndarray, Kap: np.ndarray, Kap_s: np.ndarray,
                         h: float) -> None:
    """Advance the branch strains to the step end using the stored betas.

    ``Gam``/``Kap`` are the converged total strain measures (n, 3) at the step
    end; the betas in ``state`` must have been computed at the step start.
    """
    c, _ = trapezoidal_coeffs(law.taus, h)
    c = c[:, None, None]
    state.Gam = c * Gam[None] + state.beta_G
    state.Gam_s = c * Gam_s[None] + state.beta_G_s
    state.Kap = c * Kap[None] + state.beta_K
    state.Kap_s = c * Kap_s[None] + state.beta_K_s


def internal_forces(law: SectionLaw, Gam: np.ndarray, Kap: np.ndarray,
                    state: ViscousState | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Material internal force and couple resultants N, M (n, 3).

    The long-term spring acts on the total strain; each branch contributes in
    proportion to the elastic part ``strain - branch strain``.
    """
    N = law.CN_inf * Gam
    M = law.CM_inf * Kap
    if state is not None and law.n_elements:
        N = N + (law.CNv[:, None, :] * (Gam[None] - state.Gam)).sum(axis=0)
        M = M + (law.CMv[:, None, :] * (Kap[None] - state.Kap)).sum(axis=0)
    elif law.n_elements:
        N = N + (law.CNv.sum(axis=0)) * Gam
        M = M + (law.CMv.sum(axis=0)) * Kap
    return N, M
