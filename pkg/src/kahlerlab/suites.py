"""Residual suites behind the CLI subcommands.

Each suite takes a :class:`~kahlerlab.config.RunConfig`, a seed and a sample
count and returns a :class:`ResidualReport` plus plot-ready tables
``{name: (header, rows)}``.
"""

from __future__ import annotations

import numpy as np

from . import biconf as bc
from . import canonical as cn
from . import chartlab as cl
from . import fibermodel as fm
from . import jets as J
from . import obstruction as ob
from . import u2inv
from .config import RunConfig, parse_projective
from .profiles import builtin_profile, validate_profile
from .report import ResidualReport
from .scalarfun import Interval, from_monomials

Tables = dict


def _rng(seed: int):
    return np.random.default_rng(seed)


def _profile_table(model) -> tuple:
    iv = model.inner
    tau = iv.grid(41)
    y = np.mean(model.base.box, axis=1)
    rows = np.column_stack([tau, model.profile.Q(tau), model.Y_along(tau, y), model.radius.radius(tau)])
    return ("tau", "Q", "Y", "r"), rows


def build_model(cfg: RunConfig, seed: int, points: int) -> tuple[ResidualReport, Tables]:
    model = cfg.model()
    pts = model.sample(points, _rng(seed))
    rep = ResidualReport()
    rep.extend(validate_profile(model.profile), "profile: ")
    rep.extend(cl.check_kahler(model.chart, pts))
    rep.extend(model.check_connection(pts))
    kd = fm.killing_data(model, pts)
    rep.add("g(v,v) - Q(tau)", np.max(np.abs(kd.Q_metric - kd.Q)), 1e-8, "Q = g(v, v)", points)
    rep.add("Lap tau - Y closed form", np.max(np.abs(kd.Y_laplacian - kd.Y)), 1e-7,
            "Lap tau = Q/(tau - c) + Q'", points)
    rep.add("v - grad tau", np.max(np.abs(kd.v - kd.v_gradient)), 1e-8, "v = grad tau", points)
    rm = model.radius
    tau = rm.interval.grid(201)
    dlog = rm.logr.derivatives(tau, 1)[1]
    P = model.profile
    rep.add("dlog r/dtau - a/Q", np.max(np.abs(dlog * P.Q(tau) - P.a) / P.a), 1e-9, "dr/dtau = a r / Q", len(tau))
    if cfg["profile"]["name"] == "quadratic":
        lo, hi = P.interval.tau_min, P.interval.tau_max
        closed = np.sqrt((tau - lo) / (hi - tau))
        rep.add("radius vs closed form", np.max(np.abs(rm.radius(tau) - closed) / closed), 1e-9,
                "r = sqrt((tau - tau_min)/(tau_max - tau))", len(tau))
    return rep, {"profile": _profile_table(model)}


def _psi_default(model):
    def psi(X):
        return J.sin(X[0]) * model.tau(X) + X[2] * X[1]
    return psi


def _omega_of(model):
    def eta(X):
        return J.einsum("nca,ncb->nab", model.cstruct(X), model.metric(X))
    return eta


def verify_identities(cfg: RunConfig, seed: int, points: int) -> tuple[ResidualReport, Tables]:
    model = cfg.model()
    pts = model.sample(points, _rng(seed))
    rep = cl.check_identities(model.chart, model.tau, _psi_default(model), _omega_of(model), pts)
    rep.extend(cn.soliton_identity_check(model, model.tau, cfg["family"]["lambda"], pts), "soliton: ")
    sk = cn.skrp_check(model, pts)
    for e in sk.entries:
        rep.add("skrp: " + e.check_name, e.max_residual, e.tolerance, e.anchor, e.num_points, informational=True,
                note="holds exactly when c is constant on the base")
    return rep, {"profile": _profile_table(model)}


def _model_and_change(cfg: RunConfig, pts_seed: int, points: int):
    ch_cfg, fam = cfg["change"], cfg["family"]
    mode, preset = ch_cfg["mode"], ch_cfg["preset"]
    iv = cfg.interval()
    model = cfg.model()
    if mode == "SH" and preset == "ke":
        c = parse_projective(cfg["base"]["c"], "base", "c")
        model = cn.ke_model(fam["lambda"], fam["a"], c, iv, cfg["profile"]["epsilon"])
    elif mode == "SH" and preset == "confeinstein":
        c = parse_projective(cfg["base"]["c"], "base", "c")
        model = cn.extremal_model(c.value, fam["c"], iv, cfg["profile"]["epsilon"])
    pts = model.sample(points, _rng(pts_seed))

    if mode == "SH":
        if preset in ("ke", "soliton", "confeinstein"):
            spec = cn.FamilySpec(preset, fam["lambda"], fam["c"], fam["a"])
            S, H = cn.family_SH(spec, iv)
            tol = 1e-5 if preset == "confeinstein" else bc.HYPOTHESIS_TOL
        elif preset == "skrp":
            S = cfg.coefficients("change", "S")
            H = bc.H_from_S(model, S)
            tol = bc.HYPOTHESIS_TOL
        else:
            S, H = cfg.coefficients("change", "S"), cfg.coefficients("change", "H")
            tol = bc.HYPOTHESIS_TOL
        return model, pts, bc.from_SH(model, S, H, points=pts, tol=tol)
    if mode == "theta-from-H":
        H = from_monomials([0.0, 1.0, -3.0, 2.0], iv) if preset == "legendre3" else cfg.coefficients("change", "H")
        theta, trep = fm.theta_from_H(model, H)
        change = bc.from_theta_field(model, theta, H, points=pts)
        change.report.extend(trep, "theta_from_H: ")
        return model, pts, change
    coeffs = ch_cfg["psi"] or [0.0, 0.0, 0.5]
    G = from_monomials(coeffs, iv)

    def psi(X):
        return J.apply_tau_function(G, model.tau(X))

    return model, pts, bc.from_potential_psi(model, psi, points=pts)


def biconf(cfg: RunConfig, seed: int, points: int) -> tuple[ResidualReport, Tables]:
    model, pts, change = _model_and_change(cfg, seed, points)
    rep = ResidualReport()
    rep.extend(change.report, "construction: ")
    rep.extend(bc.verify_change(model, change, pts))
    header = ["tau", "f", "theta", "H"]
    y = np.mean(model.base.box, axis=1)
    tau = model.inner.grid(41)
    line = np.array([model.point(y[0], y[1], t) for t in tau])
    Xc = [J.Jet.constant(c) for c in line.T]
    cols = [tau, J.value(change.f(Xc)), J.value(change.theta(Xc)) * np.ones_like(tau),
            J.value(change.H_field(Xc)) * np.ones_like(tau)]
    if cfg["change"]["curvature"]:
        rep.extend(cn.curvature_relations_check(model, change, pts[: min(points, 50)]), "curvature: ")
        hat = cl.Geometry(bc.HatMetric(model, change).chart, line)
        header.append("s_hat")
        cols.append(hat.scalar.value)
    return rep, {"change": (tuple(header), np.column_stack(cols))}


def obstruction(cfg: RunConfig, seed: int, points: int) -> tuple[ResidualReport, Tables]:
    o = cfg["obstruction"]
    P = cfg.profile()
    c = parse_projective(o["c"], "obstruction", "c")
    p = ob.CurveProblem(P, c, cfg.coefficients("obstruction", "H_prime"), T=o["T"], n=int(o["n"]))
    t, tau = ob.integrate_curve(p)
    _, zeta = ob.zeta_weight(p)
    rep = ResidualReport()
    rep.add("zeta vs Q |tau - c| closed form", np.max(np.abs(zeta - ob.zeta_closed_form(p, tau))), 1e-6,
            "zeta = exp(int Y dt)", len(t))
    obs = ob.obstruction_integral(p)
    rep.add("obstruction: t-quadrature vs tau-substitution", abs(obs.value - obs.tau_value), 1e-5,
            "int zeta W dt = int (zeta/Q) W dtau", len(t))
    sol = ob.solve_theta_ode(p)
    if sol.bounded:
        rep.extend(ob.limit_report(p, sol))
    rep.extras.update(obstruction=obs.value, obstruction_tau=obs.tau_value, bounded=sol.bounded,
                      bound_threshold=sol.threshold, max_abs_theta=sol.max_abs(),
                      limit_minus=sol.limit_minus, limit_plus=sol.limit_plus,
                      endpoint_ratios=list(p.endpoint_ratios()))
    rows = np.column_stack([t, tau, zeta, sol.theta_of_t])
    return rep, {"curve": (("t", "tau", "zeta", "theta"), rows)}


def u2_invariant(cfg: RunConfig, seed: int, points: int) -> tuple[ResidualReport, Tables]:
    u = cfg["u2"]
    P = cfg.profile()
    c = parse_projective(u["c"], "u2", "c")
    iv_hat = Interval(u["tau_min"], u["tau_max"])
    Phat = builtin_profile(u["profile"], iv_hat, u["a"], {"bump": u["bump"], "coeffs": u["coeffs"]})
    chat = parse_projective(u["c_hat"], "u2", "c_hat")
    pair = u2inv.pair_from_profiles(P, c, Phat, chat)
    d = u2inv.dd_invariant(pair)
    rep = ResidualReport()
    for side in ("hat", "base"):
        worst = max(abs(u2inv.dd_invariant(u2inv.central_automorphism(pair, r, side)) - d) for r in (0.5, 2.0, 10.0))
        rep.add(f"d invariance under central automorphisms ({side})", worst, 1e-10, "d unchanged", 3)
    rep.add("d under orientation flip", abs(u2inv.dd_invariant(pair.endpoints().flipped()) - d), 1e-14,
            "d symmetric in the exceptional orbits")
    verdict = u2inv.is_special_after_recentering(pair, u["tol"])
    rep.extend(verdict.report)
    rep.extras.update(d=d, r=verdict.r, special_after_recentering=verdict.special,
                      endpoints=vars(pair.endpoints()))
    tau = pair.interval.grid(41)
    rows = np.column_stack([tau, pair.f(tau), pair.chi(tau)])
    return rep, {"pair": (("tau", "f", "chi"), rows)}


SUITES = {
    "build-model": build_model,
    "verify-identities": verify_identities,
    "biconf": biconf,
    "obstruction": obstruction,
    "u2-invariant": u2_invariant,
}
