"""Acceptance criteria 1-11, one verdict line each (printed in the terminal summary)."""

import json
import time

import numpy as np
import pytest

from kahlerlab import biconf as bc
from kahlerlab import canonical as cn
from kahlerlab import chartlab as cl
from kahlerlab import fibermodel as fm
from kahlerlab import jets as J
from kahlerlab import obstruction as ob
from kahlerlab import u2inv as u
from kahlerlab.cli import main
from kahlerlab.jets import Jet
from kahlerlab.profiles import builtin_profile
from kahlerlab.scalarfun import Interval, cheb_fit, constant, from_monomials

FIXTURES = ("flat-const", "flat-var")


@pytest.fixture(scope="module")
def models():
    return {name: fm.fixture(name) for name in FIXTURES}


@pytest.fixture(scope="module")
def pts100(models):
    return {name: m.sample(100, np.random.default_rng(100 + i)) for i, (name, m) in enumerate(models.items())}


@pytest.fixture(scope="module")
def pts50(models):
    return {name: m.sample(50, np.random.default_rng(50 + i)) for i, (name, m) in enumerate(models.items())}


def _omega(m):
    return lambda X: J.einsum("nca,ncb->nab", m.cstruct(X), m.metric(X))


def _psi(m):
    return lambda X: J.sin(X[0]) * m.tau(X) + X[2] * X[1]


def test_criterion_01_kahler_construction(models, pts100, criterion):
    start = time.perf_counter()
    worst = 0.0
    for name, m in models.items():
        rep = cl.check_kahler(m.chart, pts100[name])
        worst = max(worst, *(e.max_residual for e in rep.entries if e.tolerance > 0))
        assert rep["metric positivity"].passed
    elapsed = time.perf_counter() - start
    assert criterion(1, worst < 1e-7 and elapsed < 10, f"worst residual {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_killing_potential(models, pts100, criterion):
    worst = {}
    for name, m in models.items():
        rep = cl.check_identities(m.chart, m.tau, _psi(m), None, pts100[name])
        for key in ("Hess tau Hermitian", "2 Ric(v,.) + dY", "2 Hess tau(v,.) - dQ"):
            worst[key] = max(worst.get(key, 0.0), rep[key].max_residual)
    ok = all(v < 1e-6 for v in worst.values())
    assert criterion(2, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_03_closed_forms(models, pts100, criterion):
    lap = gvv = 0.0
    for name, m in models.items():
        kd = fm.killing_data(m, pts100[name])
        lap = max(lap, float(np.max(np.abs(kd.Y_laplacian - kd.Y))))
        gvv = max(gvv, float(np.max(np.abs(kd.Q_metric - kd.Q))))
    R = models["flat-const"].radius
    t = R.interval.grid(401)
    rad = float(np.max(np.abs(R.radius(t) - np.sqrt(t / (1 - t))) / np.sqrt(t / (1 - t))))
    ok = lap < 1e-7 and gvv < 1e-8 and rad < 1e-9
    assert criterion(3, ok, f"Lap tau {lap:.1e}, g(v,v) {gvv:.1e}, radius {rad:.1e}")


def _non_closed(m):
    def eta(X):
        z = X[3] * 0.01
        zero = Jet.constant(np.zeros(X[0].shape))
        bad = J.block([[zero, zero, z, zero], [zero, zero, zero, zero], [-z, zero, zero, zero],
                       [zero, zero, zero, zero]])
        return _omega(m)(X) + bad
    return eta


def _bent_J(m):
    def Jm(X):
        E = np.zeros((X[0].shape[0], 4, 4))
        E[:, 0, 2] = 0.01
        return m.cstruct(X) + Jet.constant(E)
    return cl.ChartMetric(m.metric, Jm, m.chart.box)


def test_criterion_04_identity_suite(models, pts50, criterion):
    clean_worst, missed, physical = 0.0, [], 0
    for name, m in models.items():
        pts = pts50[name]
        clean = cl.check_identities(m.chart, m.tau, _psi(m), _omega(m), pts)
        checked = [e.check_name for e in clean.entries if not e.informational]
        clean_worst = max(clean_worst, *(clean[k].max_residual for k in checked))
        injected = cl.check_identities(m.chart, m.tau, _psi(m), _omega(m), pts, defect=1e-2)
        missed += [f"{name}: {k}" for k in checked if not injected[k].max_residual > 1e-4]
        # geometric defects: non-Killing tau, non-closed eta, non-integrable J
        runs = [
            cl.check_identities(m.chart, lambda X, m=m: m.tau(X) + 0.01 * X[0] * X[0], _psi(m), _omega(m), pts),
            cl.check_identities(m.chart, m.tau, _psi(m), _non_closed(m), pts, eta_is_closed=False),
            cl.check_identities(_bent_J(m), m.tau, _psi(m), _omega(m), pts),
        ]
        physical += sum(any(r[k].max_residual > 1e-4 for r in runs) for k in checked)
    ok = clean_worst < 1e-7 and not missed
    assert criterion(4, ok, f"clean worst {clean_worst:.1e}; injected defect detected by every identity "
                            f"({physical} identity/fixture pairs also react to a geometric defect)")
    assert not missed, missed


@pytest.fixture(scope="module")
def square_change(models, pts100):
    m = models["flat-const"]
    S = from_monomials([0.0, 0.0, 1.0], m.interval)
    return bc.from_SH(m, S, bc.H_from_S(m, S), points=pts100["flat-const"])


LEMMA = ("(i) dtauhat ^ dtau", "(ii) f - Q theta - H(tau)", "(iii) d_u theta", "(iii) d_v theta + theta Y + H'",
         "(iv) positivity f > max(Q theta, 0)")


def _change_verdict(rep):
    keys = LEMMA + ("d omega_hat", "ghat(v,.) - dtauhat")
    worst = max(rep[k].max_residual for k in keys)
    return worst < 1e-6 and all(rep[k].passed for k in keys), worst


def test_criterion_05_square_potential(models, pts100, square_change, criterion):
    hyp = square_change.report["Lap[S(tau)] + H'(tau)"].max_residual
    rep = bc.verify_change(models["flat-const"], square_change, pts100["flat-const"])
    ok, worst = _change_verdict(rep)
    assert criterion(5, ok and hyp < 1e-6 and rep.passed, f"hypothesis {hyp:.1e}, change residuals {worst:.1e}")


def test_criterion_06_theta_from_H(models, pts100, criterion):
    m, pts = models["flat-var"], pts100["flat-var"]
    H = from_monomials([0.0, 1.0, -3.0, 2.0], m.interval)
    theta, trep = fm.theta_from_H(m, H)
    Fy = trep["F_y(tau_max) over sampled y"].max_residual
    change = bc.from_theta_field(m, theta, H, points=pts)
    rep = bc.verify_change(m, change, pts)
    ok, worst = _change_verdict(rep)
    hat = bc.hat_metric(m, change, points=pts)
    g = m.chart.values(pts)[0]
    # eigenvalues of ghat relative to g, i.e. of g^-1/2 ghat g^-1/2
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    rel = np.einsum("nab,nbc,ndc->nad", Li, hat.chart.values(pts)[0], Li)
    margin = float(np.min(np.linalg.eigvalsh(rel)))
    with pytest.raises(ValueError, match="L2-orthogonal"):
        fm.theta_from_H(m, from_monomials([0.0, 0.0, 0.5], m.interval))
    ok = ok and rep.passed and Fy < 1e-10 and margin > 0
    assert criterion(6, ok, f"F_y {Fy:.1e}, change residuals {worst:.1e}, smallest eigenvalue of ghat relative to g {margin:.3f}, "
                            "H'=tau rejected")


def test_criterion_07_obstruction(criterion):
    iv = Interval(0.0, 1.0)
    P = builtin_profile("quadratic", iv)
    c = fm.ProjectiveValue(-1.0, 1.0)
    good = ob.CurveProblem(P, c, from_monomials([-5 / 9, 1.0], iv))
    sol = ob.solve_theta_ode(good)
    obs_good = abs(ob.obstruction_integral(good).value)
    bad = ob.CurveProblem(P, c, from_monomials([0.0, 1.0], iv))
    obs_bad = ob.obstruction_integral(bad).value
    k = ob.fiber_reduction_constant(bad)
    bad_sol = ob.solve_theta_ode(bad)
    cases = ob.sweep(P)
    agree = all(x.agrees for x in cases)
    reduction = max(abs(x.obstruction - ob.fiber_reduction_constant(
        ob.CurveProblem(P, x.c, constant(0.0, iv))) * x.endpoint_residual) for x in cases)
    pattern = all((abs(x.obstruction) < 1e-7) == (abs(x.endpoint_residual) < 1e-7) for x in cases)
    ok = (obs_good < 1e-8 and sol.bounded and abs(sol.limit_plus - 2 / 9) < 1e-4
          and abs(abs(obs_bad) - 5 / 6 * abs(k)) < 1e-8 and not bad_sol.bounded
          and agree and pattern and len(cases) == 20)
    assert criterion(7, ok, f"|obs| {obs_good:.1e}, theta(+inf)-2/9 {sol.limit_plus - 2 / 9:.1e}, "
                            f"H'=tau obs {obs_bad:.4f} = -(5/6)({abs(k):.4f}), sweep 20/20 agree={agree}, "
                            f"reduction {reduction:.1e}")


@pytest.fixture(scope="module")
def curvature_runs(models, pts50):
    m0, m1 = models["flat-const"], models["flat-var"]
    S = from_monomials([0.0, 0.0, 1.0], m0.interval)
    c0 = bc.from_SH(m0, S, bc.H_from_S(m0, S), points=pts50["flat-const"])
    H = from_monomials([0.0, 1.0, -3.0, 2.0], m1.interval)
    theta, _ = fm.theta_from_H(m1, H)
    c1 = bc.from_theta_field(m1, theta, H, points=pts50["flat-var"])
    out = []
    for m, ch, pts in ((m0, c0, pts50["flat-const"]), (m1, c1, pts50["flat-var"])):
        rep = cn.curvature_relations_check(m, ch, pts)
        X = [Jet.constant(col) for col in pts.T]
        gamma = J.value(ch.H_field(X)) * J.value(ch.f(X))
        g0, _ = m.chart.values(pts)
        gh, Jh = bc.HatMetric(m, ch).chart.values(pts)
        om = np.einsum("nca,ncb->nab", Jh, gh)
        vol_hat = np.einsum("nab,ncd,abcd->n", om, om, _levi_civita()) / 4
        vol = 2 * np.sqrt(np.linalg.det(g0))
        out.append((rep, float(np.max(np.abs(vol_hat / vol - gamma)))))
    return out


def _levi_civita():
    from itertools import permutations

    eps = np.zeros((4,) * 4)
    for perm in permutations(range(4)):
        inversions = sum(perm[i] > perm[j] for i in range(4) for j in range(i + 1, 4))
        eps[perm] = (-1) ** inversions
    return eps


def _curvature_detail(curvature_runs, key):
    return max(rep[key].max_residual for rep, _ in curvature_runs)


def test_criterion_08_curvature_relations(curvature_runs, criterion):
    rho = _curvature_detail(curvature_runs, "rho_hat relation (relative)")
    fixed = _curvature_detail(curvature_runs, "gamma s_hat relation, corrected sign (relative)")
    vol = max(v for _, v in curvature_runs)
    quoted = _curvature_detail(curvature_runs, "gamma s_hat relation (relative)")
    detail = (f"rho_hat {rho:.1e}, volume ratio {vol:.1e}, s_hat as quoted {quoted:.2f}, "
              f"s_hat with corrected sign {fixed:.1e}")
    criterion(8, rho < 1e-5 and vol < 1e-8 and quoted < 1e-5, detail)
    assert rho < 1e-5 and vol < 1e-8 and fixed < 1e-5


@pytest.mark.xfail(strict=True, reason="quoted sign of the theta d_v(d_v log gamma) term fails; see notes")
def test_criterion_08_scalar_relation_as_quoted(curvature_runs):
    assert _curvature_detail(curvature_runs, "gamma s_hat relation (relative)") < 1e-5


def test_criterion_09_families(criterion):
    iv = Interval(0.2, 2.0)
    spots = (0.25, 0.5, 1.25)
    S, H = cn.family_SH(cn.FamilySpec("ke", 1.5, a_const=2.0), iv)
    fam = max(abs(S(t) - t) + abs(H(t) - (1.5 * t * t - 2 * t)) for t in spots)
    S, H = cn.family_SH(cn.FamilySpec("soliton", 0.5, c_const=1 / 3), iv)
    fam = max(fam, *(abs(S(t) - np.exp(-t)) + abs(H(t) - (t + 1 - 1 / 3) * np.exp(-t)) for t in spots))
    S, H = cn.family_SH(cn.FamilySpec("confeinstein", c_const=2.0), iv)
    fam = max(fam, *(abs(S(t) + 1 / t) + abs(H(t) - (2 / t**2 + t / 6)) for t in spots))

    unit = Interval(0.0, 1.0)
    cm1 = fm.ProjectiveValue.finite(-1.0)
    ke_sol = cn.ke_profile_solve(1.0, 2.0, cm1, unit)
    ke_ode = ke_sol.report["KE ODE residual"].max_residual
    ke = cn.ke_model(1.0, 2.0, cm1, unit)
    kpts = ke.sample(30, np.random.default_rng(9))
    S, H = cn.family_SH(cn.FamilySpec("ke", 1.0, a_const=2.0), unit)
    ke_change = bc.from_SH(ke, S, H, points=kpts)
    ke_ok = bc.verify_change(ke, ke_change, kpts).passed

    ext_iv = Interval(1.0, 2.0)
    ext_sol = cn.extremal_profile_solve(-1.0, 1.0, ext_iv)
    cubic = ext_sol.report["extremal ODE residual"].max_residual
    ext = cn.extremal_model(-1.0, 1.0, ext_iv)
    form = cn.confeinstein_form_check(ext, ext.sample(30, np.random.default_rng(10)), 1.0)
    ricci_form = form["rho + 2i ddbar log s vs closed form"].max_residual

    chain = 0.0
    for name in ("flat-const", "flat-var", "flat-infinite"):
        m = fm.fixture(name)
        rep = cn.soliton_identity_check(m, m.tau, 1.0, m.sample(30, np.random.default_rng(1)))
        chain = max(chain, rep["Lap e^-tau - e^-tau (Q - Y)"].max_residual)
    chain = max(chain, cn.soliton_identity_check(ke, ke.tau, 1.0, kpts)["Lap e^-tau - e^-tau (Q - Y)"].max_residual)

    ok = fam < 1e-12 and ke_ode < 1e-8 and ke_ok and cubic < 1e-7 and ricci_form < 1e-5 and chain < 1e-7
    assert criterion(9, ok, f"families {fam:.1e}, KE ODE {ke_ode:.1e} (S=tau change passes: {ke_ok}), "
                            f"cubic {cubic:.1e}, Ricci form {ricci_form:.1e}, chain rule {chain:.1e}")


def test_criterion_10_invariant(models, pts50, square_change, criterion):
    unit = Interval(0.0, 1.0)
    P = builtin_profile("quadratic", unit)
    cm1 = fm.ProjectiveValue(-1.0, 1.0)
    Ph = builtin_profile("quartic", Interval(0.5, 2.0), 1.5, {"bump": 1.0})
    pair = u.pair_from_profiles(P, cm1, Ph, fm.ProjectiveValue(-0.5, 1.0))
    d = u.dd_invariant(pair)
    grid = np.geomspace(0.25, 4.0, 5)
    inv = max(abs(u.dd_invariant(u.central_automorphism(u.central_automorphism(pair, rb, "base"), rh)) - d)
              for rb in grid for rh in grid)

    m = models["flat-const"]
    H = from_monomials([0.0, 1.0, -3.0, 2.0], unit)
    theta, _ = fm.theta_from_H(m, H)
    specials = [square_change, bc.from_theta_field(m, theta, H, points=pts50["flat-const"])]
    special = max(abs(u.dd_invariant(u.pair_from_change(m, ch)) - 1) for ch in specials)

    f = from_monomials([1.0, 0.5], unit)
    chi = cheb_fit(lambda t: f(t) * (1 + t - 0.5 * (1 - t)), unit, 16)
    verdict = u.is_special_after_recentering(u.BlowupPair(f, chi, P, cm1))
    e = verdict.pair.endpoints()
    post = max(abs(e.chi_plus - e.f_plus), abs(e.chi_minus - e.f_minus))
    ok = inv < 1e-10 and special < 1e-8 and post < 1e-10 and verdict.special
    assert criterion(10, ok, f"5x5 grid {inv:.1e}, special pairs |d-1| {special:.1e}, "
                             f"recentering r={verdict.r:.6f} post {post:.1e}")


def _runs(directory):
    return sorted(p for p in directory.glob("*.json") if p.name != "summary.json")


def test_criterion_11_determinism_and_exit_status(tmp_path, criterion):
    docs = []
    for out in ("a", "b"):
        code = main(["biconf", "--out", str(tmp_path / out), "--seed", "7", "--points", "40", "--quiet"])
        (path,) = _runs(tmp_path / out)
        doc = json.loads(path.read_text())
        doc.pop("wall_time")
        docs.append((code, doc))
    identical = docs[0][1] == docs[1][1]
    contract = []
    psi_cfg = tmp_path / "psi.toml"
    psi_cfg.write_text("[change]\nmode = \"psi\"\n")
    for args in (["biconf"], ["obstruction", "--h-prime", "0,1"], ["u2-invariant"],
                 ["biconf", "--config", str(psi_cfg)]):
        out = tmp_path / f"run{len(contract)}"
        code = main(args + ["--out", str(out), "--quiet"])
        (path,) = _runs(out)
        doc = json.loads(path.read_text())
        contract.append((code == 0) == all(e["pass"] for e in doc["entries"]) == doc["pass"])
    ok = identical and all(contract) and docs[0][0] == 0
    assert criterion(11, ok, f"bit-identical reports: {identical}, exit status matches verdict in "
                             f"{sum(contract)}/{len(contract)} runs")
