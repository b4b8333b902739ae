"""Construction of the enhanced noise (the seven stochastic objects), the
sharp-cutoff standard objects, analytic second-moment oracles via Wick
contractions, Monte Carlo moment audits, and the regularity diagnostic.

Component tags (in chaos order):
    one : the free field trajectory (kept for reconstruction/coupling)
    c0  : V''''(sqrt(eps) X) / (6 lambda)
    c1  : V'''(sqrt(eps) X) / (6 lambda sqrt(eps))
    c2  : V''(sqrt(eps) X) / (3 lambda eps) - C1
    c30 : stationary Duhamel integral of the centered cubic noise
    c31 : resonance(c30, c1) - C3
    c22 : resonance(c20, c2) - C2
    c32 : resonance(c30, c2) - (3 C2 + 2 C3) X
plus the single field c20_0 (the integrated Wick square at t = 0) used by the
solver.  The stationary integrals start at t = -burn_in on a graded mesh
whose step coarsens geometrically away from t = 0 (run resolution adjacent to
the main window), so the discrete Duhamel recursion on t >= 0 is at the run
resolution at logarithmic burn-in cost.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import besov, renorm
from .errors import GridError
from .fourier import (ExponentialQuadrature, FourierField, from_physical,
                      semigroup_multiplier, to_physical)
from .gaussian import advance, sample_stationary

X_EXPONENTS = {  # Besov regularity slot per component at smoothness budget kappa
    "c0": lambda k: -k,
    "c1": lambda k: -0.5 - k,
    "c2": lambda k: -1.0 - k,
    "c30": lambda k: 0.5 - k,
    "c31": lambda k: -k,
    "c22": lambda k: -k,
    "c32": lambda k: -0.5 - k,
}


@dataclass
class EnhancedNoise:
    """Time-indexed component fields of one enhanced-noise realization."""

    grid: object
    Q: object
    eps: float
    t_grid: np.ndarray
    components: dict
    c20_0: np.ndarray
    provenance: dict = field(default_factory=dict)

    def field(self, tag, i):
        return FourierField(self.grid, self.components[tag][i], hermitian=True)

    def traj(self, tag):
        return self.components[tag]


@dataclass
class MomentReport:
    symbol: object
    k: tuple
    mean: float
    se: float
    oracle: float
    z: float
    M: int


def _uniform_dt(t_grid):
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if len(t_grid) < 2 or abs(t_grid[0]) > 1e-14:
        raise GridError("time grid must start at 0 with at least two points")
    dt = float(t_grid[1] - t_grid[0])
    if not np.allclose(np.diff(t_grid), dt, rtol=0, atol=1e-12 + 1e-9 * dt):
        raise GridError("time grid must be uniform")
    return dt


class _NoiseEvaluator:
    """Pointwise polynomial noises of the free field on a shared padded grid."""

    def __init__(self, grid, V, eps, lam, C1):
        self.grid = grid
        self.V = V
        self.eps = eps
        self.lam = lam
        self.C1 = C1
        self.P = grid.pad_size(max(2 * V.n - 1, 2))

    def physical(self, coeffs):
        return to_physical(coeffs, self.grid, self.P).real

    def project(self, phys):
        return from_physical(phys, self.grid, self.P)

    def quadratic_cubic(self, coeffs):
        """(c2, c3) cube spectra of the centered quadratic and cubic noises."""
        x = self.physical(coeffs)
        psi = np.sqrt(self.eps) * x
        q = self.V.eval(psi, 2) / (3.0 * self.lam * self.eps) - self.C1
        c = self.V.eval(psi, 1) / (self.lam * self.eps**1.5) - 3.0 * self.C1 * x
        return self.project(q), self.project(c)

    def all_noises(self, coeffs):
        """(c0, c1, c2, c3) cube spectra."""
        x = self.physical(coeffs)
        psi = np.sqrt(self.eps) * x
        n0 = self.V.eval(psi, 4) / (6.0 * self.lam)
        n1 = self.V.eval(psi, 3) / (6.0 * self.lam * np.sqrt(self.eps))
        n2 = self.V.eval(psi, 2) / (3.0 * self.lam * self.eps) - self.C1
        n3 = self.V.eval(psi, 1) / (self.lam * self.eps**1.5) - 3.0 * self.C1 * x
        return (self.project(n0), self.project(n1), self.project(n2), self.project(n3))


class _StandardEvaluator:
    """Wick square/cube of the mollified field for the eps = 0 standard objects."""

    def __init__(self, grid, c1_std, lam):
        self.grid = grid
        self.nu = c1_std
        self.lam = lam
        self.P = grid.pad_size(3)

    def physical(self, coeffs):
        return to_physical(coeffs, self.grid, self.P).real

    def project(self, phys):
        return from_physical(phys, self.grid, self.P)

    def quadratic_cubic(self, coeffs):
        x = self.physical(coeffs)
        q = x**2 - self.nu
        c = x**3 - 3.0 * self.nu * x
        return self.project(q), self.project(c)

    def all_noises(self, coeffs):
        q, c = self.quadratic_cubic(coeffs)
        ones = np.zeros_like(q)
        ones[0, 0, 0] = 1.0
        return ones, np.asarray(coeffs), q, c


def _burn_phases(dt, burn_in, coarse_dt, fine_window):
    """Graded burn-in mesh, finest steps next to t = 0.

    Returns phases [(n, h), ...] ordered from the earliest: the step h starts
    at the run resolution dt adjacent to t = 0 and coarsens by factors of 4 up
    to coarse_dt going backwards, each level covering at most `fine_window`
    time units (in units of 256 steps), so the cost is logarithmic in
    coarse_dt / dt instead of linear in fine_window / dt.
    """
    phases = []
    remaining = burn_in
    h = dt
    first_cap = math.ceil(min(fine_window, burn_in) / dt)
    cap = min(first_cap, 256)
    while remaining > 1e-12 and h < coarse_dt:
        n = min(math.ceil(remaining / h), cap)
        phases.append((n, h))
        remaining -= n * h
        h *= 4.0
        cap = 256
    if remaining > 1e-12:
        n = max(1, round(remaining / coarse_dt))
        phases.append((n, remaining / n))
    return phases[::-1]


def _build_common(seed, grid, Q, evaluator, t_grid, sample, band,
                  burn_in, coarse_dt, fine_window):
    """Shared burn-in + main loop; returns trajectories and the OU path info."""
    dt = _uniform_dt(t_grid)
    nsteps = len(t_grid) - 1
    phases = _burn_phases(dt, burn_in, coarse_dt, fine_window)
    total_burn = sum(n * h for n, h in phases)
    ens = sample_stationary(seed, grid, Q, sample=sample, t0=-total_burn,
                            band=band)
    shape = (grid.n,) * 3
    I2 = np.zeros(shape, dtype=np.complex128)
    I3 = np.zeros(shape, dtype=np.complex128)

    def burn(nsteps_phase, h):
        nonlocal ens, I2, I3
        if nsteps_phase == 0:
            return
        quad = ExponentialQuadrature(grid, Q, h)
        for _ in range(nsteps_phase):
            q, c = evaluator.quadratic_cubic(ens.coeffs)
            I2 = quad.advance(I2, q)
            I3 = quad.advance(I3, c)
            ens = advance(ens, h)

    for n, h in phases:
        burn(n, h)
    step_offset = ens.step

    T = nsteps + 1
    one = np.empty((T,) + shape, dtype=np.complex128)
    n0 = np.empty_like(one)
    n1 = np.empty_like(one)
    n2 = np.empty_like(one)
    c30 = np.empty_like(one)
    c20 = np.empty_like(one)
    c20_0 = None
    quad = ExponentialQuadrature(grid, Q, dt)
    for i in range(T):
        one[i] = ens.coeffs
        a0, a1, a2, a3 = evaluator.all_noises(ens.coeffs)
        n0[i], n1[i], n2[i] = a0, a1, a2
        c30[i] = I3
        c20[i] = I2
        if i == 0:
            c20_0 = I2.copy()
        if i < nsteps:
            I2 = quad.advance(I2, a2)
            I3 = quad.advance(I3, a3)
            ens = advance(ens, dt)
    return dict(one=one, c0=n0, c1=n1, c2=n2, c30=c30, c20=c20), c20_0, step_offset


def _resonance_traj(fa, fb, grid, chunk=16):
    out = np.empty_like(fa)
    for s in range(0, fa.shape[0], chunk):
        e = min(s + chunk, fa.shape[0])
        out[s:e] = besov.resonance_batch(fa[s:e], fb[s:e], grid)
    return out


def build_upsilon(seed, grid, Q, V, eps, t_grid, renorm_set, sample=0, band=None,
                  burn_in=10.0, coarse_dt=0.02, fine_window=1.0):
    """Assemble the seven-component enhanced noise at eps > 0."""
    if abs(renorm_set.eps - eps) > 1e-12 or Q.eps != eps:
        raise GridError("renorm constants / symbol eps mismatch")
    ev = _NoiseEvaluator(grid, V, eps, renorm_set.lam, renorm_set.C1)
    traj, c20_0, step_offset = _build_common(
        seed, grid, Q, ev, t_grid, sample, band, burn_in, coarse_dt, fine_window)
    C2, C3 = renorm_set.C2, renorm_set.C3
    # counterterm subtractions are constant-function shifts (0-mode only)
    c31 = traj_const_shift(_resonance_traj(traj["c30"], traj["c1"], grid), -C3)
    c22 = traj_const_shift(_resonance_traj(traj["c20"], traj["c2"], grid), -C2)
    c32 = _resonance_traj(traj["c30"], traj["c2"], grid) \
        - (3.0 * C2 + 2.0 * C3) * traj["one"]
    comps = dict(one=traj["one"], c0=traj["c0"], c1=traj["c1"], c2=traj["c2"],
                 c30=traj["c30"], c31=c31, c22=c22, c32=c32)
    prov = dict(master=seed.master, sample=sample, step_offset=step_offset,
                band=band, burn_in=burn_in, coarse_dt=coarse_dt,
                fine_window=fine_window, lam=renorm_set.lam, renorm=renorm_set)
    return EnhancedNoise(grid, Q, eps, np.asarray(t_grid, dtype=np.float64),
                         comps, c20_0, prov)


def traj_const_shift(traj, delta):
    """Add a spatial constant to every time slice (0-mode shift)."""
    traj[:, 0, 0, 0] += delta
    return traj


def build_limit_upsilon(seed, grid, eps_cutoff, t_grid, lam=1.0, sample=0,
                        burn_in=10.0, coarse_dt=0.02, fine_window=1.0):
    """The standard sharp-cutoff objects (Q = z^2, eps = 0), coupled by seed.

    eps_cutoff > 0 restricts the driving noise to |k|_inf <= floor(1/eps_cutoff);
    eps_cutoff = 0 uses the full lattice.  The same noise counters as
    build_upsilon are used, so matched seeds give coupled realizations.
    """
    from .fourier import DispersionQ

    Q0 = DispersionQ.laplacian(0.0)
    if eps_cutoff and eps_cutoff > 0:
        band = min(grid.K, int(math.floor(1.0 / eps_cutoff)))
    else:
        band = grid.K
    c1_std, c2_std = renorm.standard_constants(None, K=band)
    ev = _StandardEvaluator(grid, c1_std, lam)
    traj, c20_0, step_offset = _build_common(
        seed, grid, Q0, ev, t_grid, sample, band if band < grid.K else None,
        burn_in, coarse_dt, fine_window)
    c31 = _resonance_traj(traj["c30"], traj["c1"], grid)
    c22 = traj_const_shift(_resonance_traj(traj["c20"], traj["c2"], grid),
                           -2.0 * c2_std)
    c32 = _resonance_traj(traj["c30"], traj["c2"], grid) \
        - 6.0 * c2_std * traj["one"]
    comps = dict(one=traj["one"], c0=traj["c0"], c1=traj["c1"], c2=traj["c2"],
                 c30=traj["c30"], c31=c31, c22=c22, c32=c32)
    prov = dict(master=seed.master, sample=sample, step_offset=step_offset,
                band=band, burn_in=burn_in, coarse_dt=coarse_dt,
                fine_window=fine_window, lam=lam, c1_std=c1_std, c2_std=c2_std)
    return EnhancedNoise(grid, Q0, 0.0, np.asarray(t_grid, dtype=np.float64),
                         comps, c20_0, prov)


# ---------------------------------------------------------------------------
# analytic second moments (Wick contraction sums)


def _mode_index(grid, k):
    return tuple(int(ki) % grid.n for ki in k)


def _conv_power_weighted(Q, n, K, tau=0.0):
    """Cube array of n! sum_{P(n,k)} prod_j e^{-tau b_j}/(2 b_j)."""
    grid = renorm.FrequencyLattice(K)
    bsq = Q.bracket_sq_grid(grid)
    A = np.exp(-tau * bsq) * 0.5 / bsq
    P = grid.pad_size(n)
    Ax = to_physical(A.astype(np.complex128), grid, P).real
    conv = from_physical(Ax**n, grid, P).real
    return math.factorial(n) * conv


def second_moment_oracle(symbol, k, t_pair, Q, eps, K, V=None, renorm_set=None):
    """Analytic E[tau-hat(s,k) tau-hat(t,-k)] for the supported symbols.

    symbol is 'one', ('wick', n), 'c1', 'c2', or 'c30' (equal-time only for
    'c30').
    """
    if Q.eps != eps:
        Q = Q.with_eps(eps)
    s, t = (t_pair if isinstance(t_pair, (tuple, list)) else (t_pair, t_pair))
    tau = abs(t - s)
    grid = renorm.FrequencyLattice(K)
    bsq = Q.bracket_sq_grid(grid)
    idx = _mode_index(grid, k)
    if symbol == "one":
        return float(np.exp(-tau * bsq[idx]) * 0.5 / bsq[idx])
    if isinstance(symbol, tuple) and symbol[0] == "wick":
        n = int(symbol[1])
        return float(_conv_power_weighted(Q, n, K, tau)[idx])
    if symbol in ("c1", "c2"):
        if V is None or renorm_set is None:
            raise ValueError("polynomial-noise oracles need V and renorm_set")
        a = renorm_set.a_m
        total = 0.0
        for m in range(1, V.n):
            if symbol == "c1":
                coeff, legs = a[m - 1], 2 * m - 1
            else:
                coeff, legs = a[m - 1] / m, 2 * m
            total += coeff**2 * eps ** (2 * (m - 1)) * \
                float(_conv_power_weighted(Q, legs, K, tau)[idx])
        return total
    if symbol == "c30":
        if tau > 1e-12:
            raise ValueError("the integrated-cubic oracle is equal-time only")
        if V is None or renorm_set is None:
            raise ValueError("needs V and renorm_set")
        a = renorm_set.a_m
        total = 0.0
        for m in range(1, V.n):
            coeff = 3.0 * a[m - 1] / (m * (2 * m + 1))
            ti = renorm.time_integrated_chaos_moment(Q, 2 * m + 1, K)
            total += coeff**2 * eps ** (2 * (m - 1)) * float(ti[idx])
        return total
    raise ValueError(f"unsupported symbol {symbol!r}")


def _jackknife_se(values):
    M = len(values)
    if M < 2:
        return float("nan")
    mean = np.mean(values)
    loo = (mean * M - values) / (M - 1)
    return float(np.sqrt((M - 1) / M * np.sum((loo - np.mean(loo)) ** 2)))


def mc_moment(symbol, k, t, M, seed, grid, Q, V=None, renorm_set=None,
              t_pair=None, band=None):
    """Monte Carlo estimate of the second moment at mode k vs the oracle."""
    if M < 1:
        raise ValueError("need at least one sample")
    eps = Q.eps
    idx = _mode_index(grid, k)
    if V is not None and renorm_set is not None and eps > 0:
        ev = _NoiseEvaluator(grid, V, eps, renorm_set.lam, renorm_set.C1)
        nu = renorm_set.sigma2_eps / eps
    else:
        ev = None
        nu = None
    vals = np.empty(M)
    for m in range(M):
        ens = sample_stationary(seed, grid, Q, sample=m, band=band)
        if t_pair is not None:
            dt = t_pair[1] - t_pair[0]
            ens2 = advance(ens, dt)
            vals[m] = (ens.coeffs[idx] * np.conj(ens2.coeffs[idx])).real
            continue
        if symbol == "one":
            vals[m] = np.abs(ens.coeffs[idx]) ** 2
        elif isinstance(symbol, tuple) and symbol[0] == "wick":
            n = int(symbol[1])
            P = grid.pad_size(n)
            x = to_physical(ens.coeffs, grid, P).real
            from .gaussian import wick_power
            w = from_physical(wick_power(x, n, nu if nu is not None
                                         else _pointwise_var(grid, Q)), grid, P)
            vals[m] = np.abs(w[idx]) ** 2
        elif symbol in ("c1", "c2"):
            _, a1, a2, _ = ev.all_noises(ens.coeffs)
            vals[m] = np.abs((a1 if symbol == "c1" else a2)[idx]) ** 2
        else:
            raise ValueError(f"unsupported symbol {symbol!r}")
    mean = float(np.mean(vals))
    se = _jackknife_se(vals)
    if t_pair is not None:
        oracle = second_moment_oracle("one", k, t_pair, Q, eps, grid.K)
    else:
        oracle = second_moment_oracle(symbol, k, t, Q, eps, grid.K, V, renorm_set)
    z = (mean - oracle) / se if np.isfinite(se) and se > 0 else float("nan")
    return MomentReport(symbol=symbol, k=tuple(k), mean=mean, se=se,
                        oracle=oracle, z=z, M=M)


def _pointwise_var(grid, Q):
    return float(np.sum(0.5 / Q.bracket_sq_grid(grid)))


# ---------------------------------------------------------------------------
# regularity diagnostic and the enhanced-noise norm


def regularity_diagnostic(moments, brackets, alpha, d=3):
    """Weighted sup sup_k <k>^(d+2 alpha) E|tau-hat(k)|^2 and its shell trend."""
    moments = np.asarray(moments, dtype=np.float64)
    weighted = brackets ** (d + 2.0 * alpha) * moments
    sup = float(np.max(weighted))
    arg = np.unravel_index(int(np.argmax(weighted)), weighted.shape)
    # dyadic shells in |bracket| (brackets >= 1 always)
    levels = np.floor(np.log2(brackets)).astype(int)
    shells = {}
    for j in range(0, int(levels.max()) + 1):
        sel = levels == j
        if np.any(sel):
            shells[j] = float(np.max(weighted[sel]))
    vals = [v for v in shells.values() if v > 0]
    trend = max(vals) / min(vals) if vals else float("inf")
    return dict(sup=sup, argmax=arg, shells=shells, trend_ratio=trend)


def x_norm(U, T, kappa=0.05, holder_stride=None):
    """Sum of component sup-in-time Besov norms at the slot exponents plus the
    1/8-Hoelder seminorm of the integrated cubic component at level 1/4 - kappa."""
    sel = U.t_grid <= T + 1e-12
    if not np.any(sel):
        raise GridError("time grid does not reach into [0, T]")
    times = np.where(sel)[0]
    total = 0.0
    for tag, expo in X_EXPONENTS.items():
        alpha = expo(kappa)
        best = 0.0
        for i in times:
            best = max(best, besov.besov_norm(U.field(tag, i), alpha))
        total += best
    idxs = times if holder_stride is None else times[::holder_stride]
    c30 = U.traj("c30")
    hold = 0.0
    for a in range(len(idxs)):
        for b in range(a + 1, len(idxs)):
            i, j = idxs[a], idxs[b]
            diff = FourierField(U.grid, c30[j] - c30[i], hermitian=True)
            dtv = abs(U.t_grid[j] - U.t_grid[i])
            hold = max(hold, besov.besov_norm(diff, 0.25 - kappa) / dtv**0.125)
    return total + hold
