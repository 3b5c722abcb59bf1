"""Property suites run by ``oddpairing verify`` and the acceptance tests.

Each suite returns a list of :class:`Check` records, one per property, so the
caller can print one line per result and decide on an exit code.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from .errors import PairingError
from .lattice import build_dirac, double
from .localizer import build_taper, taper_bound, taper_commutator_check, taper_fourier_l1
from .models import ModelSpec, chiral_3d_model, identity_model, shift_model
from .specflow import HermitianPath, proof_chain_check, sf_by_signature, spectral_flow


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        info = " ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {info}".rstrip()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _label(model: ModelSpec) -> str:
    pars = ",".join(f"{k}={v}" for k, v in model.params.items())
    return f"{model.name}({pars})"


# --- taper -------------------------------------------------------------------------

def taper_models() -> list[ModelSpec]:
    return [identity_model(), shift_model(1), shift_model(-2), chiral_3d_model(2.0)]


def taper_operators(model: ModelSpec, rho: float):
    """Doubled Hamiltonian and Dirac operator on a box covering supp G_rho plus one hop."""
    pad = model.b + 2
    R = int(np.ceil(rho)) + pad
    radius = None if model.d == 1 else rho + pad
    box = model.box(R, radius)
    A = model.build(box)
    return double(A, build_dirac(box, model.rep))


def taper_suite(rhos=(8, 16, 32), models=None) -> list[Check]:
    out = []
    for rho in rhos:
        q = taper_fourier_l1(rho)
        ok = q["upper_bound"] <= 8 / rho and q["difference"] < 1e-6
        out.append(Check(f"fourier_l1 rho={rho}", ok, {"l1": q["upper_bound"], "bound": 8 / rho,
                                                       "mesh_difference": q["difference"]}))
    for model in models or taper_models():
        comm = model.declared.commNorm
        for rho in rhos:
            t0 = time.perf_counter()
            H, Dp = taper_operators(model, rho)
            val = taper_commutator_check(build_taper(rho), Dp, H)
            bound = taper_bound(rho, comm)
            out.append(Check(f"taper {_label(model)} rho={rho}", val <= bound * (1 + 1e-12) + 1e-12,
                             {"norm": val, "bound": bound, "seconds": time.perf_counter() - t0}))
    return out


# --- spectral-flow axioms ----------------------------------------------------------

def _rand_herm(rng, n, gap=0.2):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = (X + X.conj().T) / 2
    w, v = np.linalg.eigh(H)
    w = np.where(np.abs(w) < gap, np.sign(w + 1e-300) * gap, w)
    return (v * w) @ v.conj().T


def _bent(F0, F1, W, s):
    """Straight line F0 -> F1 bent by s sin(pi t) W; endpoints do not depend on s."""
    lip = np.linalg.norm(F1 - F0, 2) + np.pi * abs(s) * np.linalg.norm(W, 2)
    return HermitianPath.custom(lambda t: (1 - t) * F0 + t * F1 + s * np.sin(np.pi * t) * W, lipschitz=lip)


def _instance(seed, max_dim):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_dim + 1))
    return rng, n


def axiom_homotopy(seed, max_dim=30) -> bool:
    rng, n = _instance(seed, max_dim)
    F0, F1, W = _rand_herm(rng, n), _rand_herm(rng, n), _rand_herm(rng, n, 0)
    return spectral_flow(_bent(F0, F1, W, 0.0)).sf == spectral_flow(_bent(F0, F1, W, 1.0)).sf


def axiom_concatenation(seed, max_dim=30) -> bool:
    rng, n = _instance(seed, max_dim)
    F0, F1, F2 = (_rand_herm(rng, n) for _ in range(3))
    p, q = HermitianPath.straight_line(F0, F1), HermitianPath.straight_line(F1, F2)
    return spectral_flow(p).sf + spectral_flow(q).sf == spectral_flow(p.concat(q)).sf


def axiom_unitary(seed, max_dim=30) -> bool:
    rng, n = _instance(seed, max_dim)
    F0, F1, W = _rand_herm(rng, n), _rand_herm(rng, n), _rand_herm(rng, n, 0)
    U = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
    p = _bent(F0, F1, W, 0.5)
    return spectral_flow(p.conjugate(U)).sf == spectral_flow(p).sf


def axiom_additivity(seed, max_dim=30) -> bool:
    rng, n = _instance(seed, max_dim // 2)
    m = int(rng.integers(1, max_dim - n + 1))
    p = HermitianPath.straight_line(_rand_herm(rng, n), _rand_herm(rng, n))
    q = HermitianPath.straight_line(_rand_herm(rng, m), _rand_herm(rng, m))
    return spectral_flow(p.direct_sum(q)).sf == spectral_flow(p).sf + spectral_flow(q).sf


def axiom_invertible(seed, max_dim=30) -> bool:
    """Isospectral rotation exp(-itK) Lam exp(itK) never meets zero."""
    rng, n = _instance(seed, max_dim)
    lam = rng.choice([-1.0, 1.0], n) * rng.uniform(0.2, 2.0, n)
    w, v = np.linalg.eigh(_rand_herm(rng, n, 0))

    def F(t):
        V = (v * np.exp(1j * t * w)) @ v.conj().T
        return V.conj().T @ np.diag(lam) @ V

    lip = 2 * np.abs(w).max() * np.abs(lam).max()
    return spectral_flow(HermitianPath.custom(F, lipschitz=lip)).sf == 0


def signature_vs_crossings(seed, max_dim=30) -> bool:
    rng, n = _instance(seed, max_dim)
    F0, F1 = _rand_herm(rng, n), _rand_herm(rng, n)
    return sf_by_signature(F0, F1) == spectral_flow(HermitianPath.straight_line(F0, F1)).sf


AXIOMS = {
    "(i) homotopy invariance": axiom_homotopy,
    "(ii) concatenation": axiom_concatenation,
    "(iii) unitary invariance": axiom_unitary,
    "(iv) additivity": axiom_additivity,
    "(v) invertible path": axiom_invertible,
    "signature = crossings": signature_vs_crossings,
}


def axioms_suite(instances: int = 100, seed: int = 0, max_dim: int = 30) -> list[Check]:
    out = []
    for name, fn in AXIOMS.items():
        failures = []
        for i in range(instances):
            try:
                ok = fn(seed + i, max_dim)
            except PairingError:
                ok = False
            if not ok:
                failures.append(seed + i)
        out.append(Check(name, not failures, {"instances": instances, "failures": len(failures),
                                              "failed_seeds": failures[:5]}))
    return out


# --- proof chain -------------------------------------------------------------------

def proofchain_suite(model: ModelSpec | None = None, kappa: float = 1 / 12, rho: float = 25.0) -> list[Check]:
    model = shift_model(1) if model is None else model
    rep = proof_chain_check(model, kappa, rho, raise_on_failure=False)
    out = [Check(f"link ({lk.link})", lk.passed, dict(lk.witness)) for lk in rep.links]
    out.append(Check("chain index", rep.passed, {"index": rep.index}))
    return out


SUITES = {"taper": taper_suite, "axioms": axioms_suite, "proofchain": proofchain_suite}
