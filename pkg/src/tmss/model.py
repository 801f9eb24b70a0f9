"""Effective three-oscillator model: parameters, validity checks, Hamiltonian.

Couplings are angular frequencies (rad/s, or units of Theta when working
dimensionlessly); times are seconds (or units of 1/Theta).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const
import scipy.sparse as sp

from .errors import InvalidArgument, UnsupportedRegime
from .fock import ATOMS1, ATOMS2, CAVITY, CompositeSpace, annihilator

KAPPA_CONVENTIONS = ("lifetime", "half")


class RegimeWarning(UserWarning):
    """Physical parameters violate the dispersive or Stark-balance assumptions."""


@dataclass(frozen=True)
class PhysicalParams:
    """Single-atom chip parameters of the four-level scheme.

    Only ``N1, N2, Omega0, g1, g2, Delta0`` enter the effective couplings;
    ``Omega1, lambda1, lambda2, Delta_r, Delta_s`` are the auxiliary fields
    that cancel the ac-Stark shifts. The hyperfine carrier frequencies
    (classical drive and cavity near nu_a - Delta0) never enter the effective
    model and are not represented.
    """

    N1: float
    N2: float
    Omega0: float
    g1: float
    g2: float
    Delta0: float
    Omega1: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    Delta_r: float = math.inf
    Delta_s: float = math.inf
    dispersive_factor: float = 10.0

    def __post_init__(self):
        for name in ("N1", "N2", "Omega0", "g1", "g2", "Delta0", "Omega1", "lambda1", "lambda2"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")
        if self.Delta0 == 0:
            raise InvalidArgument("Delta0 must be nonzero")
        if self.N1 <= 0 or self.N2 <= 0:
            raise InvalidArgument("atom numbers must be positive")

    @property
    def max_coupling(self) -> float:
        return max(abs(self.Omega0), abs(self.Omega1), abs(self.g1), abs(self.g2),
                   abs(self.lambda1), abs(self.lambda2))

    def dispersive_ratios(self) -> dict[str, float]:
        """|detuning| / largest coupling for each detuning (inf if no coupling)."""
        top = self.max_coupling
        out = {}
        for name in ("Delta0", "Delta_r", "Delta_s"):
            d = abs(getattr(self, name))
            out[name] = math.inf if top == 0 else d / top
        return out

    @property
    def dispersive(self) -> bool:
        return all(v >= self.dispersive_factor for v in self.dispersive_ratios().values())


@dataclass(frozen=True)
class Couplings:
    beta1: complex
    beta2: complex
    dispersive_ratios: dict[str, float]
    dispersive: bool


def derive_couplings(p: PhysicalParams) -> Couplings:
    """beta_i = sqrt(N_i) Omega0 g_i / Delta0; warns outside the dispersive regime."""
    beta1 = complex(math.sqrt(p.N1) * p.Omega0 * p.g1 / p.Delta0)
    beta2 = complex(math.sqrt(p.N2) * p.Omega0 * p.g2 / p.Delta0)
    ratios = p.dispersive_ratios()
    ok = p.dispersive
    if not ok:
        warnings.warn(f"dispersive condition violated: {ratios} < {p.dispersive_factor}",
                      RegimeWarning, stacklevel=2)
    return Couplings(beta1, beta2, ratios, ok)


@dataclass(frozen=True)
class StarkResiduals:
    residual_g: float
    residual_h: tuple[float, float]
    tolerance: float

    @property
    def balanced(self) -> bool:
        return abs(self.residual_g) <= self.tolerance and all(
            abs(r) <= self.tolerance for r in self.residual_h)


def stark_balance(p: PhysicalParams, rtol: float = 1e-9) -> StarkResiduals:
    """Residual ac-Stark shifts of |g> and |h> (per ensemble for |h>).

    ``residual_h`` holds one value per ensemble since the cavity couplings
    differ between clouds.
    """
    for name in ("Delta_r", "Delta_s"):
        if getattr(p, name) == 0:
            raise InvalidArgument(f"{name} must be nonzero")
    res_g = p.Omega0**2 / p.Delta0 + p.Omega1**2 / p.Delta_r
    res_h = tuple(g**2 / p.Delta0 + lam**2 / p.Delta_s
                  for g, lam in ((p.g1, p.lambda1), (p.g2, p.lambda2)))
    tol = rtol * abs(p.Omega0**2 / p.Delta0)
    out = StarkResiduals(res_g, res_h, tol)
    if not out.balanced:
        warnings.warn(f"ac-Stark shifts not cancelled: g {res_g:.3g}, h {res_h}",
                      RegimeWarning, stacklevel=2)
    return out


def squeezing_parameter(r: float) -> float:
    """epsilon = artanh(2r/(1+r^2)) = 2 artanh(1/r) for r > 1."""
    if not r > 1:
        raise UnsupportedRegime(f"squeezing requires r = |xi2/xi1| > 1, got {r}")
    q = 2 * r / (1 + r * r)
    if q > 1 - 1e-12:
        # artanh argument rounds towards 1 near r = 1; the half-angle form does not
        return 2 * math.atanh(1 / r)
    return math.atanh(q)


@dataclass(frozen=True)
class ModelParams:
    """Effective couplings xi1, xi2 and cavity decay rate kappa.

    ``kappa_convention`` fixes how kappa maps onto the Lindblad rate of the
    cavity loss channel: ``"lifetime"`` uses rate kappa (photon lifetime
    1/kappa), ``"half"`` reads the printed equation literally with rate
    2*kappa.
    """

    xi1: complex
    xi2: complex
    kappa: float = 0.0
    kappa_convention: str = "lifetime"
    theta: float = field(init=False)
    r: float = field(init=False)
    T_pi: float = field(init=False)
    epsilon: float = field(init=False)

    def __post_init__(self):
        xi1, xi2 = complex(self.xi1), complex(self.xi2)
        object.__setattr__(self, "xi1", xi1)
        object.__setattr__(self, "xi2", xi2)
        if not abs(xi1) > 0:
            raise UnsupportedRegime("requires |xi1| > 0")
        if not abs(xi2) > abs(xi1):
            raise UnsupportedRegime(f"requires |xi2| > |xi1| (got |xi2|={abs(xi2)}, |xi1|={abs(xi1)})")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise InvalidArgument(f"kappa must be finite and >= 0, got {self.kappa}")
        if self.kappa_convention not in KAPPA_CONVENTIONS:
            raise InvalidArgument(f"kappa_convention must be one of {KAPPA_CONVENTIONS}")
        theta = math.sqrt(abs(xi2) ** 2 - abs(xi1) ** 2)
        if not theta > 0:
            raise UnsupportedRegime("Theta underflows to zero for these couplings")
        r = abs(xi2) / abs(xi1)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "T_pi", math.pi / theta)
        object.__setattr__(self, "epsilon", squeezing_parameter(r))

    @property
    def loss_rate(self) -> float:
        """Lindblad rate of the cavity loss channel."""
        return self.kappa if self.kappa_convention == "lifetime" else 2 * self.kappa

    @property
    def squeeze_phase(self) -> float:
        """Phase of xi1*xi2, which sets the phase of the |n,n> amplitudes."""
        return float(np.angle(self.xi1 * self.xi2))

    @property
    def mean_pair_occupation(self) -> float:
        return math.sinh(self.epsilon) ** 2

    def with_kappa(self, kappa: float) -> "ModelParams":
        return ModelParams(self.xi1, self.xi2, kappa, self.kappa_convention)


def make_model(beta1: complex, beta2: complex, kappa: float = 0.0,
               kappa_convention: str = "lifetime") -> ModelParams:
    """Build the effective model from beta_i = i xi_i."""
    beta1, beta2 = complex(beta1), complex(beta2)
    if not abs(beta2) > abs(beta1):
        raise UnsupportedRegime(f"requires |beta2| > |beta1| (got {abs(beta2)} <= {abs(beta1)})")
    if not abs(beta1) > 0:
        raise UnsupportedRegime("requires |beta1| > 0")
    return ModelParams(beta1 / 1j, beta2 / 1j, kappa, kappa_convention)


def model_from_ratio(r: float, theta: float = 1.0, kappa_over_theta: float = 0.0,
                     kappa_convention: str = "lifetime") -> ModelParams:
    """Real positive couplings with |xi2/xi1| = r, scaled to the requested Theta."""
    if not r > 1:
        raise UnsupportedRegime(f"requires r > 1, got {r}")
    xi1 = theta / math.sqrt(r * r - 1)
    return ModelParams(xi1, r * xi1, kappa_over_theta * theta, kappa_convention)


def build_hamiltonian(m: ModelParams, space: CompositeSpace) -> sp.csr_matrix:
    """H = i xi1 c1^+ a^+ - i xi1* c1 a + i xi2 c2^+ a - i xi2* c2 a^+."""
    a = annihilator(space, CAVITY)
    c1 = annihilator(space, ATOMS1)
    c2 = annihilator(space, ATOMS2)
    pair = 1j * m.xi1 * (c1.conj().T @ a.conj().T)
    swap = 1j * m.xi2 * (c2.conj().T @ a)
    H = pair + pair.conj().T + swap + swap.conj().T
    H = H.tocsr()
    H.sum_duplicates()
    H.eliminate_zeros()
    return H


def mode_frequency(L: float, eps_r: float, m: int = 1) -> float:
    """Angular frequency of the m-th standing-wave mode of a stripline of length L."""
    if not L > 0:
        raise InvalidArgument(f"L must be positive, got {L}")
    if not eps_r >= 1:
        raise InvalidArgument(f"eps_r must be >= 1, got {eps_r}")
    if int(m) != m or m < 1:
        raise InvalidArgument(f"mode number must be a positive integer, got {m}")
    return math.pi * m * const.c / (L * math.sqrt(eps_r))


def estimate_coupling(D: float, omega_c: float, h: float, L: float) -> float:
    """Order-of-magnitude single-atom coupling g ~ D sqrt(2 hbar omega_c / (pi^2 h^2 L)).

    Literal evaluation of the scaling estimate; prefactors of order one are
    not meaningful, only the dependence on ``omega_c``, ``h`` and ``L``.
    """
    for name, v in (("D", D), ("omega_c", omega_c), ("h", h), ("L", L)):
        if not v > 0:
            raise InvalidArgument(f"{name} must be positive, got {v}")
    return D * math.sqrt(2 * const.hbar * omega_c / (math.pi**2 * h**2 * L))
