"""Shared model builders and independent numerical oracles for the tests.

Oracles here never call the library's decimation/embedding path: closed forms,
transverse mode decompositions, sparse direct inversions of long finite leads,
and an absorbing-boundary scattering solve on a 4000-site lattice.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from embedchan import Model, parse_model_dict

# ---------------------------------------------------------------------------
# model builders


def chain_lead(t=1.0, eps=0.0):
    return {"preset": "chain", "params": {"t": t, "eps": eps}}


def impurity_chain_model(eps_imp=1.0, t=1.0) -> Model:
    return parse_model_dict({
        "lead_left": chain_lead(t),
        "lead_right": chain_lead(t),
        "device": {
            "h": [[eps_imp]],
            "coupling_left": [[1.0]],
            "coupling_right": [[1.0]],
        },
    })


def perfect_chain_model(t=1.0, eps=0.0) -> Model:
    return impurity_chain_model(eps_imp=eps, t=t)


def ladder_lead(t=1.0, t_perp=0.5, t_diag=0.0):
    return {"preset": "ladder", "params": {"t": t, "t_perp": t_perp, "t_diag": t_diag}}


def perfect_ladder_model(t=1.0, t_perp=0.5) -> Model:
    """Two ladder rungs as the device; each lead touches its own rung."""
    return parse_model_dict({
        "lead_left": ladder_lead(t, t_perp),
        "lead_right": ladder_lead(t, t_perp),
        "device": {
            "h": [[0.0, -t_perp, -t, 0.0],
                  [-t_perp, 0.0, 0.0, -t],
                  [-t, 0.0, 0.0, -t_perp],
                  [0.0, -t, -t_perp, 0.0]],
            "coupling_left": [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
            "coupling_right": [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        },
    })


def ladder_impurity_model(t_perp=0.5) -> Model:
    """Two-rung ladder device with a mode-mixing impurity on the first rung."""
    t = 1.0
    return parse_model_dict({
        "lead_left": ladder_lead(t, t_perp),
        "lead_right": ladder_lead(t, t_perp),
        "device": {
            "h": [[0.3, -0.5, -t, 0.0],
                  [-0.5, -0.2, 0.0, -t],
                  [-t, 0.0, 0.0, -t_perp],
                  [0.0, -t, -t_perp, 0.0]],
            "coupling_left": [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
            "coupling_right": [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        },
    })


def dimer_lead(t1, t2, eps=0.0):
    return {"preset": "dimer_chain", "params": {"t1": t1, "t2": t2, "eps": eps}}


def dimer_model(t1, t2) -> Model:
    """Perfect dimer chain: one-cell device continuing the lead pattern."""
    return parse_model_dict({
        "lead_left": dimer_lead(t1, t2),
        "lead_right": dimer_lead(t1, t2),
        "device": {
            "h": [[0.0, -t1], [-t1, 0.0]],
            "coupling_left": [[0.0, 0.0], [1.0, 0.0]],
            "coupling_right": [[0.0, 0.0], [0.0, 1.0]],
        },
    })


def strip_model(width=3, t=1.0) -> Model:
    """Two strip columns as the device; each lead touches its own column."""
    n = 2 * width
    h = np.zeros((n, n))
    for col in (0, 1):
        for i in range(width - 1):
            a = col * width + i
            h[a, a + 1] = h[a + 1, a] = -t
    for i in range(width):
        h[i, width + i] = h[width + i, i] = -t
    cl = np.zeros((width, n))
    cr = np.zeros((width, n))
    cl[:, :width] = np.eye(width)
    cr[:, width:] = np.eye(width)
    return parse_model_dict({
        "lead_left": {"preset": "square_strip", "params": {"t": t, "width": width}},
        "lead_right": {"preset": "square_strip", "params": {"t": t, "width": width}},
        "device": {"h": h.tolist(), "coupling_left": cl.tolist(),
                   "coupling_right": cr.tolist()},
    })


def periodic_strip_model(width=2, t=1.0) -> Model:
    """Transverse-periodic strip; per-momentum surface dimension is 1."""
    return parse_model_dict({
        "lead_left": {"preset": "square_strip",
                      "params": {"t": t, "width": width, "periodic": True}},
        "lead_right": {"preset": "square_strip",
                       "params": {"t": t, "width": width, "periodic": True}},
        "device": {"h": [[0.0]], "coupling_left": [[1.0]], "coupling_right": [[1.0]]},
    })


# ---------------------------------------------------------------------------
# closed forms


def chain_g(e, t=1.0, eta=0.0):
    """Retarded surface Green function of the uniform chain, closed form."""
    z = complex(e, eta)
    return (z - np.sqrt(z - 2 * t) * np.sqrt(z + 2 * t)) / (2 * t * t)


def chain_velocity(e, t=1.0):
    """Group velocity 2 t sin k with e = -2 t cos k, inside the band."""
    k = np.arccos(-e / (2 * t))
    return 2.0 * t * np.sin(k)


def ladder_mode_basis():
    """Orthonormal symmetric/antisymmetric rung modes of the two-leg ladder."""
    return np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def band_edges(kind, params):
    """Analytic band intervals (union of [lo, hi]) for each preset."""
    if kind == "chain":
        t, eps = params.get("t", 1.0), params.get("eps", 0.0)
        return [(eps - 2 * t, eps + 2 * t)]
    if kind == "ladder":
        t, tp = params.get("t", 1.0), params.get("t_perp", 0.5)
        eps = params.get("eps", 0.0)
        return [(eps - tp - 2 * t, eps - tp + 2 * t), (eps + tp - 2 * t, eps + tp + 2 * t)]
    if kind == "dimer_chain":
        t1, t2 = params["t1"], params["t2"]
        lo, hi = abs(t1 - t2), t1 + t2
        return [(-hi, -lo), (lo, hi)]
    if kind == "square_strip":
        t, w = params.get("t", 1.0), params["width"]
        eps = params.get("eps", 0.0)
        modes = [eps - 2 * t * np.cos(np.pi * n / (w + 1)) for n in range(1, w + 1)]
        return [(m - 2 * t, m + 2 * t) for m in modes]
    raise ValueError(kind)


def open_count_analytic(kind, params, e):
    return sum(1 for lo, hi in band_edges(kind, params) if lo < e < hi)


# ---------------------------------------------------------------------------
# heavy oracles


def truncated_lead_sigma(h00, h01, e, eta, layers=2000):
    """Self-energy from a directly inverted finite lead of `layers` layers.

    Builds the block-tridiagonal (E + i eta - H) of the truncated lead, solves
    for the surface-block columns of its inverse, and forms h01 g h01^dag.
    Valid wherever the semi-infinite limit is reached within `layers`
    (evanescent energies: gaps and outside bands).
    """
    h00 = np.asarray(h00, complex)
    h01 = np.asarray(h01, complex)
    n = h00.shape[0]
    z = complex(e, eta)
    blocks = sp.eye(layers, format="csr")
    a = sp.kron(sp.eye(layers), z * np.eye(n) - h00, format="lil")
    up = sp.eye(layers, layers, 1, format="csr")
    a = a - sp.kron(up, h01) - sp.kron(up.T, h01.conj().T)
    a = a.tocsc()
    lu = spla.splu(a)
    g = np.zeros((n, n), complex)
    for j in range(n):
        rhs = np.zeros(layers * n, complex)
        rhs[j] = 1.0
        g[:, j] = lu.solve(rhs)[:n]
    return h01 @ g @ h01.conj().T


def impurity_chain_direct(eps_imp, e, nsites=4000, absorber=1200, w0=0.10, ramp_power=4):
    """Scattering off a single impurity on a 4000-site chain with absorbing ends.

    The incident wave is the unit-flux Bloch state, phase-anchored so its
    amplitude at the impurity site is real positive.  The scattered field
    solves (E - H + iW) psi_out = V psi_inc with the impurity as the only
    source; ramped absorbers swallow outgoing waves at both ends.

    Returns (total wave at the impurity site, reflection probability).
    """
    c = nsites // 2
    k = np.arccos(-e / 2.0)
    v = 2.0 * np.sin(k)
    u = 1.0 / np.sqrt(v)
    w = np.zeros(nsites)
    ramp = (np.arange(1, absorber + 1) / absorber) ** ramp_power * w0
    w[:absorber] = ramp[::-1]
    w[-absorber:] = ramp
    main = np.full(nsites, e, complex) + 1j * w
    main[c] -= eps_imp
    a = sp.diags([np.ones(nsites - 1), main, np.ones(nsites - 1)], [-1, 0, 1], format="csc")
    m_idx = np.arange(nsites)
    psi_inc = u * np.exp(1j * k * (m_idx - c))
    rhs = np.zeros(nsites, complex)
    rhs[c] = eps_imp * psi_inc[c]
    psi_out = spla.spsolve(a, rhs)
    psi_tot = psi_inc + psi_out
    # left-mover amplitude in the scattered-field region left of the impurity
    m_probe = c - 700
    basis = np.array([
        [np.exp(-1j * k * (m_probe - c)), np.exp(1j * k * (m_probe - c))],
        [np.exp(-1j * k * (m_probe + 1 - c)), np.exp(1j * k * (m_probe + 1 - c))],
    ])
    rho, _ = np.linalg.solve(basis, np.array([psi_out[m_probe], psi_out[m_probe + 1]]))
    reflection = abs(rho / u) ** 2
    return psi_tot[c], reflection
