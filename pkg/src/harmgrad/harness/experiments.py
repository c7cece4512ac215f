"""Registry of named experiments.

Each entry maps a parameter table and a seed to an :class:`ExperimentReport`.
Unknown parameter names are rejected so that typos in configs fail loudly.
"""
from __future__ import annotations

import numpy as np

from .. import density, lincal, quasilinear, quasimode, stationary_phase
from ..errors import ConfigError, ConstructionError
from ..fields import Field, Grid, integrate_array
from ..harmonic import calderon_pair, calderon_wave, coordinate, harmonic_polynomials, parse_descriptor
from ..jets import Jet
from ..profiles import GaussianBump, cutoff
from ..report import ExperimentReport

REGISTRY = {}


def experiment(name, **defaults):
    def wrap(fn):
        REGISTRY[name] = (fn, defaults)
        return fn
    return wrap


def _merge(name, params):
    fn, defaults = REGISTRY[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"{name}: unknown parameters {sorted(unknown)}")
    return fn, {**defaults, **params}


def run_experiment(name, params, seed) -> ExperimentReport:
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; known: {sorted(REGISTRY)}")
    fn, p = _merge(name, params)
    rep = fn(p, seed)
    if not rep.metrics:
        raise ConfigError(f"{name} produced no metrics")
    rep.seed = seed
    return rep


def _cplx(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    return complex(v)


# ---------------------------------------------------------------------------

@experiment("quasimode-residual", M=4, eps=0.5, delta=0.5, lam=100.0, p3=0.0, p4=0.0, p5=0.0, q1=0.0,
            x1=1.0, random_constants=True, lambdas=None)
def _quasimode(p, seed):
    rng = np.random.default_rng(seed)
    consts = {k: _cplx(p[k]) for k in ("p3", "p4", "p5", "q1")}
    eps = float(p["eps"])
    for _ in range(50):
        if p["random_constants"]:
            eps = float(rng.uniform(0.3, 0.8))
            consts = {k: complex(*rng.uniform(-0.5, 0.5, 2)) for k in consts}
        params = quasimode.QuasimodeParams(lam=p["lam"], eps=eps, delta=p["delta"], M=int(p["M"]), **consts)
        try:
            phase = quasimode.build_phase(params)
            break
        except ConstructionError:
            # redraw constants whose phase loses Im Psi > 0 on the cutoff support
            if not p["random_constants"]:
                raise
    else:
        raise ConstructionError("no admissible random constants in 50 draws; reduce delta")
    amp = quasimode.build_amplitude(params, phase)
    lambdas = None if p["lambdas"] is None else np.asarray(p["lambdas"], dtype=float)
    return quasimode.conjugated_residual(params, phase, amp, x1=p["x1"], lambdas=lambdas, seed=seed)


@experiment("stationary-phase", family="gaussian", lambdas=None, ks=[1, 2, 3], a=[0.7, 0.5],
            x1=1.0, eps=0.5, T=1.0, jet_order=24)
def _stationary(p, seed):
    a = _cplx(p["a"])
    ks = [int(k) for k in p["ks"]]
    order = int(p["jet_order"])
    if p["family"] == "gaussian":
        lambdas = p["lambdas"] or np.geomspace(50, 800, 5)
        F_jet = Jet([0.0, 0.0, 1j], order)

        def F_fn(t):
            return 1j * t**2

        def U_fn(t):
            return cutoff(t / 2) * np.exp(a * t)

        U_jet = Jet.exp(a, order)
        interval = (-2.0, 2.0)
    elif p["family"] == "quasimode":
        lambdas = p["lambdas"] or np.geomspace(100, 1600, 5)
        prof = stationary_phase.phase_profile(p["x1"], p["eps"], order=order)
        F_jet = prof.F2_jet
        F_fn = F_jet
        T = float(p["T"])

        def U_fn(t):
            return cutoff(t / T)

        U_jet = Jet.constant(1.0, order)
        interval = (-T, T)
    else:
        raise ConfigError(f"unknown stationary-phase family {p['family']!r}")
    return stationary_phase.expansion_error_sweep(F_fn, F_jet, U_fn, U_jet, lambdas, ks=ks,
                                                  interval=interval, name="stationary-phase", seed=seed)


@experiment("density-check", kind="structure", n=33, kmax=2, n_xi=24, moment_jmax=50)
def _density(p, seed):
    rng = np.random.default_rng(seed)
    g = Grid.cube(-1.0, 1.0, int(p["n"]))
    x = g.coords()
    bump = np.broadcast_to(GaussianBump((0.0, 0.0, 0.0), 0.15, 0.7).value(x), g.resolution)
    rep = ExperimentReport("density-check", params=dict(p), seed=seed)
    if p["kind"] == "structure":
        coefs = rng.normal(size=(3, 3))
        b = np.stack([bump * (coefs[j, 0] + coefs[j, 1] * np.asarray(x[1]) + coefs[j, 2] * np.asarray(x[0]))
                      for j in range(3)])
        B = Field(g, density.structure_tensor(b), 3)
        fit = density.structure_fit(B)
        rep.check_le("structure_fit_residual", fit.residual, 1e-12)
        xis = density.lattice_xis(g, kmax=int(p["kmax"]), limit=int(p["n_xi"]), seed=seed)
        rec = density.calderon_recover_b(B, xis)
        oracle = density.fft_oracle(Field(g, b, 1), rec.freq)
        err = float(np.max(np.abs(rec.b_hat - oracle)) / np.max(np.abs(oracle)))
        rep.check_le("recovery_relative_error", err, 1e-6)
        rep.add_table("recovered", ["freq", "b_hat", "oracle"],
                      [[list(f), list(bh), list(o)] for f, bh, o in zip(rec.freq, rec.b_hat, oracle)])
    elif p["kind"] == "levi-civita":
        bn = 0.1 * bump / integrate_array(bump, g).real
        B = Field(g, np.einsum("jkl,...->jkl...", density.levi_civita(), bn), 3)
        val = density.triple_identity(B, coordinate(3, 0), coordinate(3, 1), coordinate(3, 2))
        rep.check_close("triple_identity_value", val.real, 0.1, 1e-10)
        fit = density.structure_fit(B)
        rep.check_le("fitted_b_max", fit.b.max_abs(), 1e-15)
        rep.check_close("structure_residual_over_max_bump", fit.residual / np.max(np.abs(bn)), 1.0, 1e-12)
    else:
        raise ConfigError(f"unknown density kind {p['kind']!r}")
    coeffs = density.jacobi_moment_coeffs(int(p["moment_jmax"]))
    jet = density.jacobi_generating_jet(int(p["moment_jmax"])).coeffs.real
    rep.add("jacobi_min_coeff", min(coeffs), "> 0", min(coeffs) > 0)
    rep.check_le("jacobi_jet_relative_gap", float(np.max(np.abs(np.array(coeffs) - jet) / np.array(coeffs))), 1e-9)
    return rep


def _lincal_pair(n, seed, **kw):
    return lincal.random_obstruction_pair(Grid.cube(-1.0, 1.0, n), np.random.default_rng(seed), **kw)


def harmonic_pair_dictionary(rng, size, dim=3, xi_scale=1.5):
    """Alternating Calderon-wave pairs and random harmonic-polynomial pairs."""
    polys = harmonic_polynomials(3, dim)[1:]
    out = []
    while len(out) < size:
        xi = rng.normal(size=dim) * xi_scale
        q, _ = np.linalg.qr(np.column_stack([xi, rng.normal(size=dim)]))
        pair = calderon_pair(xi, q[:, 1])
        out.append((calderon_wave(pair.zeta_plus), calderon_wave(pair.zeta_minus)))
        out.append((polys[rng.integers(len(polys))], polys[rng.integers(len(polys))]))
    return out[:size]


@experiment("lincal-plant", n=49, n_pairs=20, n_harmonic=100)
def _lincal_plant(p, seed):
    rng = np.random.default_rng(seed)
    g = Grid.cube(-1.0, 1.0, int(p["n"]))
    pairs = [lincal.random_obstruction_pair(g, rng) for _ in range(int(p["n_pairs"]))]
    return lincal.sufficiency_check(pairs, harmonic_pair_dictionary(rng, int(p["n_harmonic"])), seed=seed)


@experiment("lincal-decompose", resolutions=[65, 81, 97, 113], width=0.18, method="fd2")
def _lincal_decompose(p, seed):
    res = [int(n) for n in p["resolutions"]]
    kw = dict(width=float(p["width"]), radius=0.78, r_flat=0.6, method=p["method"])
    rep = lincal.roundtrip_convergence(lambda n: _lincal_pair(n, seed, **kw), res, method=p["method"], seed=seed)

    def plant(n):
        g = Grid.cube(-1.0, 1.0, n)
        b = GaussianBump((0.0, 0.0, 0.0), 0.15, 0.7).value(g.coords())
        return Field(g, np.einsum("jk,...->jk...", np.eye(3), b), 2)

    floor = lincal.non_obstruction_floor(plant, res[:3], method=p["method"], seed=seed)
    rep.metrics.extend(floor.metrics)
    rep.tables.update(floor.tables)
    return rep


@experiment("lincal-tartar", t_list=[2e-2, 1e-2, 5e-3, 2.5e-3], n=12, steps=64)
def _lincal_tartar(p, seed):
    rng = np.random.default_rng(seed)
    v = lincal.bump_vector_field(GaussianBump((0.0, 0.0, 0.0), 0.2, 0.8), rng.normal(size=3))
    return lincal.tartar_linearization(v, p["t_list"], Grid.cube(-1.0, 1.0, int(p["n"])),
                                       steps=int(p["steps"]), seed=seed)


def _qls_setup(p, seed):
    g = Grid.cube(-1.0, 1.0, int(p["n"]))
    A = quasilinear.planted_tensors(g, seed=seed, amplitude=float(p["amplitude"]))
    data = quasilinear.BoundaryData(parse_descriptor(p["f1"]), parse_descriptor(p["f2"]))
    return g, A, data


_QLS = dict(n=49, amplitude=1.0, f1="kind=coord;dim=3;j=0", f2="kind=poly;dim=3;terms=1@1.1.0",
            eps_list=list(quasilinear.DEFAULT_EPS))


@experiment("qls-forward", tol=1e-13, **_QLS)
def _qls_forward(p, seed):
    _, A, data = _qls_setup(p, seed)
    return quasilinear.eps_order_experiment(A, data, p["eps_list"], tol=float(p["tol"]), seed=seed)


@experiment("qls-dtn", w="kind=coord;dim=3;j=2", rel_tol=1e-3, **_QLS)
def _qls_dtn(p, seed):
    _, A, data = _qls_setup(p, seed)
    return quasilinear.c2_oracle_experiment(A, data, parse_descriptor(p["w"]), p["eps_list"],
                                            rel_tol=float(p["rel_tol"]), seed=seed)


@experiment("qls-unique", perturbation="levi-civita", total=0.1, **_QLS)
def _qls_unique(p, seed):
    g, A, _ = _qls_setup(p, seed)
    kind = p["perturbation"]
    if kind == "none":
        At = A
    elif kind == "levi-civita":
        P, _ = quasilinear.levi_civita_perturbation(g, float(p["total"]))
        At = A.replace(0, 1, A.A[0][1] + P)
    elif kind == "symmetric":
        P, _ = quasilinear.symmetric_perturbation(g, float(p["total"]))
        At = A.replace(0, 0, A.A[0][0] + P)
    else:
        raise ConfigError(f"unknown perturbation {kind!r}")
    rep = quasilinear.uniqueness_experiment(A, At, quasilinear.linear_dictionary(), p["eps_list"], seed=seed)
    rep.params["perturbation"] = kind
    return rep
