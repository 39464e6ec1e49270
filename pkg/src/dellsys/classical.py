"""Classical limit: the Manakov matrix L(z, lambda), Hamiltonians from
det L, Poisson brackets, Hamiltonian flow and the L-A-B residual.

The Hamiltonians are the lambda^k Fourier coefficients of det L(z, lambda)
at a fixed generic z. Because the averaged matrix is a Laurent polynomial
of degree M in lambda, det L is a Laurent polynomial of degree N*M, and
the discrete Fourier transform is exact once the sample count exceeds 2NM.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import inv_guarded, rel_residual, solve_guarded
from .errors import (
    AliasingError,
    DerivativeUnstable,
    DomainError,
    GuardTripped,
    IllConditioned,
    NearSingular,
)
from .intertwiner import Positions, XiVariant
from .lax import (
    ModelParams,
    PhaseState,
    average_from_stack,
    classical_rs_lax,
    rs_lax_stack,
    theta_operator_Theta,
)


@dataclass(frozen=True)
class FlowParams:
    """Numerical settings for Hamiltonian extraction and flows."""

    k: int = -1
    z0: complex = 0.1 + 0.45j
    radius: float = 1.0
    fourier_samples: int = 64
    derivative_step: float = 1e-5
    contour_radius: float = 5e-3
    contour_points: int = 16
    gradient: str = "contour"
    dt: float = 1e-3
    horizon: float = 1.0
    aliasing_tolerance: float = 1e-12
    richardson_tolerance: float = 1e-5

    def __post_init__(self):
        F = int(self.fourier_samples)
        if F < 4 or F & (F - 1):
            raise DomainError("fourier_samples must be a power of two >= 4")
        if F < 4 * abs(self.k):
            raise DomainError("fourier_samples must be at least 4*|k|")
        for name in ("radius", "derivative_step", "contour_radius", "dt", "horizon"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if int(self.contour_points) < 4 or int(self.contour_points) % 2:
            raise DomainError("contour_points must be an even integer >= 4")
        if self.gradient not in ("contour", "richardson"):
            raise DomainError("gradient must be 'contour' or 'richardson'")
        object.__setattr__(self, "z0", complex(self.z0))

    def replace(self, **kw) -> "FlowParams":
        from dataclasses import replace

        return replace(self, **kw)


def _state(q, p) -> PhaseState:
    return PhaseState(Positions(q), p)


def L_manakov(z, lam, state: PhaseState, params: ModelParams, variant=XiVariant.ELLIPTIC) -> np.ndarray:
    """L(z, lambda) = calL(z, 1)^{-1} calL(z, lambda)."""
    lam = complex(lam)
    scale = max(abs(lam), 1 / abs(lam), 1.0) if lam != 0 else 1.0
    stack = rs_lax_stack(z, state, params, scale, variant)
    return solve_guarded(average_from_stack(stack, 1.0), average_from_stack(stack, lam), what="calL(z,1)")


def det_L_samples(z, state: PhaseState, params: ModelParams, radius: float, F: int,
                  variant=XiVariant.ELLIPTIC) -> tuple[np.ndarray, np.ndarray]:
    """(lambda samples on the circle, det L at those samples)."""
    lam = radius * np.exp(2j * np.pi * np.arange(F) / F)
    scale = max(radius, 1 / radius, 1.0)
    ns, w, mats = rs_lax_stack(z, state, params, scale, variant)
    coef = w[None, :] * (-lam[:, None]) ** ns[None, :].astype(float)
    calL = np.tensordot(coef, mats, axes=1)  # (F, N, N)
    d1 = np.linalg.det(average_from_stack((ns, w, mats), 1.0))
    if abs(d1) < 1e-14 * max(1.0, float(np.max(np.abs(mats)))) ** state.N:
        raise IllConditioned("calL(z,1) is singular")
    return lam, np.linalg.det(calL) / d1


def det_L_coefficients(z, state: PhaseState, params: ModelParams, flow: FlowParams,
                       check_aliasing: bool = False, variant=XiVariant.ELLIPTIC) -> dict[int, complex]:
    """All Laurent coefficients {k: H_k} of det L(z, lambda) in lambda."""
    F = int(flow.fourier_samples)
    r = flow.radius
    _, vals = det_L_samples(z, state, params, r, F, variant)
    c = np.fft.fft(vals) / F
    ks = np.fft.fftfreq(F, 1.0 / F).astype(int)
    coeffs = c / r ** ks.astype(float)
    out = {int(k): complex(v) for k, v in zip(ks, coeffs)}
    if check_aliasing:
        _, vals2 = det_L_samples(z, state, params, r, 2 * F, variant)
        c2 = np.fft.fft(vals2) / (2 * F)
        ks2 = np.fft.fftfreq(2 * F, 1.0 / (2 * F)).astype(int)
        ref = {int(k): complex(v) / r ** float(k) for k, v in zip(ks2, c2)}
        scale = max(1.0, max(abs(v) for v in ref.values()))
        worst = max(abs(out[k] - ref[k]) for k in out if abs(k) < F // 4)
        if worst > flow.aliasing_tolerance * scale:
            raise AliasingError(f"Fourier coefficients changed by {worst:.3g} when doubling samples")
    return out


def hamiltonian_extract(k: int, z, state: PhaseState, params: ModelParams, flow: FlowParams,
                        check_aliasing: bool = True, variant=XiVariant.ELLIPTIC) -> complex:
    """Coefficient of lambda^k in det L(z, lambda)."""
    return det_L_coefficients(z, state, params, flow, check_aliasing, variant).get(int(k), 0j)


def _central(f, x0: np.ndarray, direction: np.ndarray, h: float):
    return (f(x0 + h * direction) - f(x0 - h * direction)) / (2 * h)


CONTOUR_HALVINGS = 3  # retries at rho/2, rho/4, rho/8 when a singularity is close


def _contour_derivative(f, x0, direction, rho, npts, tol, what):
    """Derivative of a holomorphic f along ``direction`` via the trapezoidal
    Cauchy integral on a circle of radius ``rho`` (complex displacements).

    The estimate from every second node is used as the convergence check,
    relative to the result but never below the round-off floor of the
    samples (so identically vanishing derivatives pass). A failed check
    means a singularity within a few rho; the radius is then halved, at most
    ``CONTOUR_HALVINGS`` times.
    """
    for _ in range(CONTOUR_HALVINGS + 1):
        s = rho * np.exp(2j * np.pi * np.arange(npts) / npts)
        fv = [np.asarray(f(x0 + sk * direction)) for sk in s]
        vals = [v / sk for v, sk in zip(fv, s)]
        full = sum(vals) / npts
        half = sum(vals[::2]) / (npts // 2)
        # rounding in the samples alone produces differences of order eps*|f|/rho
        floor = 64 * np.finfo(float).eps * max(float(np.max(np.abs(v))) for v in fv) / rho
        if float(np.max(np.abs(full - half))) <= max(tol * float(np.max(np.abs(full))), floor):
            return full
        rho /= 2
    raise DerivativeUnstable(f"{what}: contour estimates disagree beyond {tol:g}")


def hamiltonian_gradients(ks, z, state: PhaseState, params: ModelParams, flow: FlowParams,
                          h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(dH/dq, dH/dp), each of shape (len(ks), N), differentiated along each
    coordinate direction.

    H_k is holomorphic in (q, p), so the default ``flow.gradient == "contour"``
    uses the Cauchy-integral derivative (round-off ~ eps|H|/rho). With
    ``"richardson"`` (or an explicit ``h``) Richardson-refined central
    differences of step h are used instead.
    """
    ks = list(ks)
    N = state.N
    x0 = np.concatenate([state.pos.q, state.mom])

    def f(x):
        c = det_L_coefficients(z, _state(x[:N], x[N:]), params, flow)
        return np.array([c.get(int(k), 0j) for k in ks])

    r = np.empty((len(ks), 2 * N), complex)
    if flow.gradient == "contour" and h is None:
        for a in range(2 * N):
            e = np.zeros(2 * N)
            e[a] = 1.0
            r[:, a] = _contour_derivative(f, x0, e, flow.contour_radius, int(flow.contour_points),
                                          flow.richardson_tolerance, "gradient of H")
        return r[:, :N], r[:, N:]
    h = flow.derivative_step if h is None else h
    d1 = np.empty_like(r)
    d2 = np.empty_like(r)
    for a in range(2 * N):
        e = np.zeros(2 * N)
        e[a] = 1.0
        d1[:, a] = _central(f, x0, e, h)
        d2[:, a] = _central(f, x0, e, h / 2)
    r = (4 * d2 - d1) / 3
    for i in range(len(ks)):
        scale = max(float(np.max(np.abs(r[i]))), 1e-300)
        if float(np.max(np.abs(r[i] - d2[i]))) > flow.richardson_tolerance * scale:
            raise DerivativeUnstable(f"gradient of H_{ks[i]}: Richardson disagreement too large")
    return r[:, :N], r[:, N:]


def eom_rhs(k: int, z, state: PhaseState, params: ModelParams, flow: FlowParams,
            h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(dq/dt, dp/dt) = (dH_k/dp, -dH_k/dq)."""
    gq, gp = hamiltonian_gradients([k], z, state, params, flow, h)
    return gp[0], -gq[0]


def poisson_bracket(k1: int, k2: int, z, state: PhaseState, params: ModelParams, flow: FlowParams,
                    scaled: bool = False) -> complex:
    """{H_k1, H_k2} = sum_i dH1/dp_i dH2/dq_i - dH1/dq_i dH2/dp_i.

    With ``scaled`` the bracket is divided by |grad H1| |grad H2|.
    """
    gq, gp = hamiltonian_gradients([k1, k2], z, state, params, flow)
    val = complex(np.sum(gp[0] * gq[1] - gq[0] * gp[1]))
    if scaled:
        n1 = np.linalg.norm(np.concatenate([gq[0], gp[0]]))
        n2 = np.linalg.norm(np.concatenate([gq[1], gp[1]]))
        return val / (n1 * n2) if n1 * n2 > 0 else 0j
    return val


def cross_z_bracket(k1: int, z1, k2: int, z2, state: PhaseState, params: ModelParams, flow: FlowParams) -> complex:
    """Scaled {H_k1(z1), H_k2(z2)} (measured, not asserted)."""
    g1q, g1p = hamiltonian_gradients([k1], z1, state, params, flow)
    g2q, g2p = hamiltonian_gradients([k2], z2, state, params, flow)
    val = complex(np.sum(g1p[0] * g2q[0] - g1q[0] * g2p[0]))
    n = np.linalg.norm(np.concatenate([g1q[0], g1p[0]])) * np.linalg.norm(np.concatenate([g2q[0], g2p[0]]))
    return val / n if n else 0j


def theta_gauge_check(z, lam, state: PhaseState, params: ModelParams) -> float:
    """Theta(z,1)^{-1} Theta(z,lam) against E^{-1} L(z,lam) E, E = e^{z P/(N c eta)}."""
    th = solve_guarded(theta_operator_Theta(z, 1.0, state, params),
                       theta_operator_Theta(z, lam, state, params), what="Theta(z,1)")
    e = np.exp(z * state.mom / (state.N * params.c * params.eta))
    L = L_manakov(z, lam, state, params)
    return rel_residual(th, L * e[None, :] / e[:, None])


def omega_zero_manakov_check(z, lam, state: PhaseState, params: ModelParams) -> float:
    """At omega = 0, L(z,lam) = lam + (1 - lam)(1 - L^RS)^{-1}."""
    p0 = params.replace(omega=0.0)
    N = state.N
    L = L_manakov(z, lam, state, p0)
    inv = inv_guarded(np.eye(N) - classical_rs_lax(z, state, p0), what="1 - L^RS")
    lam = complex(lam)
    return rel_residual(L, lam * np.eye(N) + (1 - lam) * inv)


@dataclass
class ManakovReport:
    residual_eq: float
    trace_B: complex
    form_spread: float
    residual_forms: tuple = field(default_factory=tuple)


def manakov_check(k: int, z, lam, state: PhaseState, params: ModelParams, flow: FlowParams) -> ManakovReport:
    """Check dL/dt = [L, M(1)] + L B along the H_k flow.

    M(lambda) = calL(lambda)^{-1} d calL(lambda)/dt and B = M(lambda) - M(1);
    time derivatives are directional derivatives along eom_rhs. dL/dt is
    differentiated independently of the M route.
    """
    N = state.N
    dq, dp = eom_rhs(k, z, state, params, flow)
    v = np.concatenate([dq, dp])
    nv = float(np.linalg.norm(v))
    x0 = np.concatenate([state.pos.q, state.mom])
    lam = complex(lam)
    scale = max(abs(lam), 1 / abs(lam), 1.0)
    if nv == 0:
        dcal1 = dcall = dL = np.zeros((N, N), complex)
    else:
        u = v / nv

        def calL_pair(x):
            st = _state(x[:N], x[N:])
            stack = rs_lax_stack(z, st, params, scale)
            return np.stack([average_from_stack(stack, 1.0), average_from_stack(stack, lam)])

        def Lfun(x):
            c = calL_pair(x)
            return solve_guarded(c[0], c[1], what="calL(z,1)")

        rho, npts = flow.contour_radius, int(flow.contour_points)
        tol = flow.richardson_tolerance
        dpair = _contour_derivative(calL_pair, x0, u, rho, npts, tol, "d calL/dt") * nv
        dcal1, dcall = dpair[0], dpair[1]
        dL = _contour_derivative(Lfun, x0, u, rho, npts, tol, "dL/dt") * nv
    stack = rs_lax_stack(z, state, params, scale)
    cal1 = average_from_stack(stack, 1.0)
    call = average_from_stack(stack, lam)
    L = solve_guarded(cal1, call, what="calL(z,1)")
    M1 = solve_guarded(cal1, dcal1, what="calL(z,1)")
    Ml = solve_guarded(call, dcall, what="calL(z,lambda)")
    B = Ml - M1
    forms = (
        L @ Ml - M1 @ L,
        (L @ Ml - Ml @ L) + B @ L,
        (L @ M1 - M1 @ L) + L @ B,
    )
    # below this level a quantity is contour round-off (e.g. dL/dt = 0 when lambda = 1)
    floor = 64 * np.finfo(float).eps * float(np.max(np.abs(L))) * nv / flow.contour_radius

    def resid(a, b):
        if max(float(np.max(np.abs(a))), float(np.max(np.abs(b)))) <= floor:
            return 0.0  # both sides vanish to working precision
        return rel_residual(a, b)

    res = tuple(resid(dL, f) for f in forms)
    spread = max(resid(forms[a], forms[b]) for a in range(3) for b in range(a + 1, 3))
    return ManakovReport(residual_eq=res[2], trace_B=complex(np.trace(B)), form_spread=spread,
                         residual_forms=res)


@dataclass
class FlowResult:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    det_probe: np.ndarray
    drift: np.ndarray
    probe_lambda: complex

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def _probe_det(z, state, params, lam) -> complex:
    return complex(np.linalg.det(L_manakov(z, lam, state, params)))


def flow_integrate(k: int, z, state0: PhaseState, params: ModelParams, flow: FlowParams,
                   probe_lambda=None, record_every: int = 1) -> FlowResult:
    """Fixed-step RK4 integration of the H_k flow with det L monitoring."""
    N = state0.N
    lam = complex(probe_lambda) if probe_lambda is not None else flow.radius * np.exp(0.7j)
    steps = int(round(flow.horizon / flow.dt))
    dt = flow.dt
    q = np.array(state0.pos.q, complex)
    p = np.array(state0.mom, complex)

    def rhs(qq, pp, step):
        try:
            return eom_rhs(k, z, _state(qq, pp), params, flow)
        except (NearSingular, IllConditioned, DomainError) as exc:
            raise GuardTripped(f"flow guard tripped at step {step}: {exc}", step) from exc

    try:
        d0 = _probe_det(z, state0, params, lam)
    except (NearSingular, IllConditioned) as exc:
        raise GuardTripped(f"initial state is singular: {exc}", 0) from exc
    times, qs, ps, dets = [0.0], [q.copy()], [p.copy()], [d0]
    for s in range(1, steps + 1):
        k1 = rhs(q, p, s)
        k2 = rhs(q + dt / 2 * k1[0], p + dt / 2 * k1[1], s)
        k3 = rhs(q + dt / 2 * k2[0], p + dt / 2 * k2[1], s)
        k4 = rhs(q + dt * k3[0], p + dt * k3[1], s)
        q = q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise GuardTripped(f"non-finite state at step {s}", s)
        if s % record_every == 0 or s == steps:
            try:
                d = _probe_det(z, _state(q, p), params, lam)
            except (NearSingular, IllConditioned, DomainError) as exc:
                raise GuardTripped(f"flow guard tripped at step {s}: {exc}", s) from exc
            times.append(s * dt)
            qs.append(q.copy())
            ps.append(p.copy())
            dets.append(d)
    dets = np.array(dets)
    drift = np.abs(dets - d0) / abs(d0)
    return FlowResult(np.array(times), np.array(qs), np.array(ps), dets, drift, lam)
