import math

import numpy as np
import pytest

from glossva import adiff, linalg
from glossva.models import (
    LinearGaussianData,
    linear_gaussian_model,
    load_csv,
    export_csv,
    logistic_mixed_model,
    mmnl_model,
    poisson_mixed_model,
    simulate_linear_gaussian,
    simulate_logistic,
    simulate_mmnl,
    simulate_poisson,
)
from glossva.models.io import SchemaError
from glossva.models.mmnl import _log_prior_global_factory

LOG_2PI = math.log(2.0 * math.pi)


def fd_gradient(func, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for k in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        out[k] = (func(list(xp)) - func(list(xm))) / (2.0 * h)
    return out


@pytest.fixture(scope="module")
def logistic():
    return logistic_mixed_model(
        simulate_logistic(5, 4, beta=[0.5, -0.5, 0.3, 0.1], eta=0.2, seed=1)
    )


@pytest.fixture(scope="module")
def poisson():
    return poisson_mixed_model(
        simulate_poisson(
            4, 5, beta=[0.2, 0.1, -0.1, 0.0, 0.1, 0.3],
            chol_cov=[[0.5, 0.0], [0.2, 0.4]], seed=2,
        )
    )


@pytest.fixture(scope="module")
def mmnl():
    return mmnl_model(
        simulate_mmnl(
            3, beta=[0.5, -0.5, -0.8, 0.2, 0.1],
            chol_precision=[[1.2, 0, 0], [0.3, 1.0, 0], [-0.2, 0.1, 0.9]], seed=3,
        )
    )


class TestSignatures:
    def test_dimensions(self, logistic, poisson, mmnl):
        assert (logistic.signature.d, logistic.signature.d_i[0]) == (5, 1)
        assert (poisson.signature.d, poisson.signature.d_i[0]) == (9, 2)
        assert (mmnl.signature.d, mmnl.signature.d_i[0]) == (14, 3)

    def test_theta_labels(self, logistic):
        labels = logistic.signature.theta_labels()
        assert labels[:5] == ["beta0", "beta_smoke", "beta_age", "beta_smoke_age", "eta"]
        assert labels[5] == "b[0]" and len(labels) == 10


class TestJointKernel:
    def test_no_group_prior_only(self):
        model = linear_gaussian_model(LinearGaussianData(y=[]))
        assert model.log_h_joint([0.0]) == pytest.approx(-0.5 * LOG_2PI)

    def test_additivity(self, logistic):
        rng = np.random.default_rng(4)
        theta = list(rng.normal(size=logistic.signature.dim_total))
        theta_g, locals_ = logistic.split_theta(theta)
        total = logistic.log_prior_global(theta_g)
        for i, b in enumerate(locals_):
            total += logistic.log_h_local(i, b, theta_g)
        assert logistic.log_h_joint(theta) == total

    def test_dimension_mismatch(self, logistic):
        with pytest.raises(ValueError):
            logistic.log_h_joint([0.0] * 3)

    @pytest.mark.parametrize("fixture", ["logistic", "poisson", "mmnl"])
    def test_finite_at_zero_and_random(self, fixture, request):
        model = request.getfixturevalue(fixture)
        assert math.isfinite(model.log_h_joint([0.0] * model.signature.dim_total))
        rng = np.random.default_rng(5)
        for _ in range(100):
            theta = list(rng.standard_normal(model.signature.dim_total))
            assert math.isfinite(model.log_h_joint(theta))


class TestGradients:
    @pytest.mark.parametrize("fixture", ["logistic", "poisson", "mmnl"])
    def test_local_gradients_match_finite_differences(self, fixture, request):
        model = request.getfixturevalue(fixture)
        sig = model.signature
        rng = np.random.default_rng(6)
        for _ in range(20):
            b = rng.normal(size=sig.d_i[0]) * 0.5
            tg = rng.normal(size=sig.d) * 0.5
            gb, gt = model.grad_log_h_local(0, list(b), list(tg))
            fd_b = fd_gradient(lambda x: model.log_h_local(0, x, list(tg)), b)
            fd_t = fd_gradient(lambda x: model.log_h_local(0, list(b), x), tg)
            assert np.allclose(gb, fd_b, rtol=1e-6, atol=1e-6)
            assert np.allclose(gt, fd_t, rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("fixture", ["logistic", "poisson", "mmnl"])
    def test_prior_gradient_matches_finite_differences(self, fixture, request):
        model = request.getfixturevalue(fixture)
        rng = np.random.default_rng(7)
        tg = rng.normal(size=model.signature.d) * 0.5
        from glossva.adiff import Tape

        tape = Tape()
        leaves = [tape.var(v) for v in tg]
        grads = tape.gradient(model.log_prior_global(leaves), leaves)
        fd = fd_gradient(model.log_prior_global, tg)
        assert np.allclose(grads, fd, rtol=1e-5, atol=1e-6)

    def test_quadratic_toy_gradient(self):
        model = linear_gaussian_model(
            LinearGaussianData(y=[np.zeros(0)], sigma_b=1.0)
        )
        gb, _ = model.grad_log_h_local(0, [1.5], [0.0])
        assert gb[0] == pytest.approx(-1.5)


class TestLogistic:
    def test_zero_covariates_likelihood_is_log_half(self):
        data = simulate_logistic(1, 1, beta=[0.0] * 4, eta=0.0, seed=8)
        data.x[0][:] = 0.0
        model = logistic_mixed_model(data)
        # subtract the local-prior part to isolate the likelihood term
        lh = adiff.value(model.log_h_local(0, [0.0], [0.0] * 5))
        local_prior = -0.5 * LOG_2PI
        assert lh - local_prior == pytest.approx(math.log(0.5))

    def test_prior_curvature_is_variance_100(self, logistic):
        # d^2/dt^2 log p = -1/100 for each coordinate
        f = lambda t: logistic.log_prior_global([t, 0.0, 0.0, 0.0, 0.0])
        h = 1e-3
        second = (f(h) - 2.0 * f(0.0) + f(-h)) / h**2
        assert second == pytest.approx(-0.01, rel=1e-4)

    def test_huang_wand_prior_differs_and_is_finite(self):
        data = simulate_logistic(3, 4, beta=[0.0] * 4, eta=0.0, seed=9)
        default = logistic_mixed_model(data)
        halft = logistic_mixed_model(data, prior="huang_wand")
        tg = [0.1, -0.2, 0.3, 0.0, 0.5]
        a, b = default.log_prior_global(tg), halft.log_prior_global(tg)
        assert math.isfinite(a) and math.isfinite(b) and a != b
        fd = fd_gradient(halft.log_prior_global, tg)
        from glossva.adiff import Tape

        tape = Tape()
        leaves = [tape.var(v) for v in tg]
        grads = tape.gradient(halft.log_prior_global(leaves), leaves)
        assert np.allclose(grads, fd, rtol=1e-6, atol=1e-8)

    def test_unknown_prior_rejected(self):
        data = simulate_logistic(1, 2, beta=[0.0] * 4, eta=0.0, seed=10)
        with pytest.raises(ValueError):
            logistic_mixed_model(data, prior="flat")

    def test_locality(self):
        d1 = simulate_logistic(3, 4, beta=[0.2] * 4, eta=0.0, seed=11)
        d2 = simulate_logistic(3, 4, beta=[0.2] * 4, eta=0.0, seed=11)
        d2.y[2] = 1.0 - d2.y[2]  # perturb another group's data
        m1, m2 = logistic_mixed_model(d1), logistic_mixed_model(d2)
        tg = [0.1, 0.2, -0.3, 0.0, 0.4]
        assert m1.log_h_local(0, [0.3], tg) == m2.log_h_local(0, [0.3], tg)

    def test_group_order_permutes_locals(self):
        data = simulate_logistic(3, 4, beta=[0.2] * 4, eta=0.0, seed=12)
        swapped = type(data)(x=[data.x[1], data.x[0], data.x[2]],
                             y=[data.y[1], data.y[0], data.y[2]])
        m, ms = logistic_mixed_model(data), logistic_mixed_model(swapped)
        tg = [0.0, 0.1, 0.2, -0.1, 0.3]
        assert m.log_h_local(0, [0.2], tg) == ms.log_h_local(1, [0.2], tg)
        assert m.log_h_local(1, [0.2], tg) == ms.log_h_local(0, [0.2], tg)


class TestPoisson:
    def test_identity_cov_local_prior(self, poisson):
        # C = I (zero star coordinates), b = 0: standard bivariate normal at 0
        data = poisson.extra["data"]
        model = poisson_mixed_model(data)
        tg = [0.0] * 9
        lh = adiff.value(model.log_h_local(0, [0.0, 0.0], tg))
        lik = sum(
            -1.0 - math.lgamma(y + 1.0) for y in data.y[0]
        )  # lp = 0 -> y*0 - e^0
        assert lh - lik == pytest.approx(-LOG_2PI)


class TestMmnl:
    def test_equal_utilities_give_third(self, mmnl):
        data = mmnl.extra["data"]
        data_eq = type(data)(
            at=[np.ones_like(a) for a in data.at],
            td=[np.ones_like(a) for a in data.td],
            fee=[np.zeros_like(a) for a in data.fee],
            li=data.li,
            res=data.res,
            chosen=data.chosen,
        )
        model = mmnl_model(data_eq)
        tg = [0.4, -0.3, 0.2, 0.1, 0.0] + [0.0] * 9
        lh = adiff.value(model.log_h_local(0, [0.0, 0.0, 0.0], tg))
        n_scen = data.at[0].shape[0]
        # likelihood = n_scen * log(1/3); local prior at b=0 with C=I
        assert lh == pytest.approx(n_scen * math.log(1.0 / 3.0) - 1.5 * LOG_2PI)

    def test_scalar_change_of_variables_oracle(self):
        """Independent hand-coded transformed prior at one random effect."""
        log_prior = _log_prior_global_factory(1)
        rng = np.random.default_rng(13)
        SIGMA_SQ, NU, A2 = 1.0e6, 2.0, 1.0e6
        for _ in range(20):
            beta = rng.normal(size=5)
            cstar = rng.normal() * 0.5
            la = rng.normal() * 0.5
            c = math.exp(cstar)
            omega = c * c
            a = math.exp(la)
            df = NU  # NU + d_l - 1 with d_l = 1
            v = 1.0 / (2.0 * NU * a)
            expected = (
                -2.5 * (LOG_2PI + math.log(SIGMA_SQ))
                - float(beta @ beta) / (2.0 * SIGMA_SQ)
                # Wishart(df, v) density of omega
                + 0.5 * (df - 2.0) * math.log(omega)
                - 0.5 * omega / v
                - 0.5 * df * math.log(2.0)
                - 0.5 * df * math.log(v)
                - math.lgamma(df / 2.0)
                # d omega / d cstar = 2 c * c
                + math.log(2.0 * c * c)
                # Gamma(1/2, rate 1/A^2) on a, log transform
                + la
                - 0.5 * math.log(A2)
                - math.lgamma(0.5)
                - 0.5 * math.log(a)
                - a / A2
            )
            got = log_prior(list(beta) + [cstar, la])
            assert got == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("p", [2, 3])
    def test_cholesky_jacobian_determinant_closed_form(self, p):
        """det(L (I+K) (C kron I) L') = 2^p prod_i C_ii^(p-i+1)."""
        rng = np.random.default_rng(p)
        for _ in range(10):
            c = np.tril(rng.normal(size=(p, p)))
            c[np.diag_indices(p)] = np.abs(np.diag(c)) + 0.3
            L = linalg.elimination(p)
            K = linalg.commutation(p)
            jac = L @ (np.eye(p * p) + K) @ np.kron(c, np.eye(p)) @ L.T
            expected = 2.0**p * np.prod([c[i, i] ** (p - i) for i in range(p)])
            assert np.linalg.det(jac) == pytest.approx(expected, rel=1e-10)

    def test_jacobian_against_finite_differences(self):
        """Full |d vech(CC') / d vech(C*)| at p = 3 vs an FD Jacobian."""
        p = 3
        rng = np.random.default_rng(14)
        cstar = rng.normal(size=6) * 0.4

        def vech_omega(cs):
            c = linalg.star_inverse(linalg.unvech(list(cs), p)).to_numpy()
            omega = c @ c.T
            return np.array(linalg.vech(linalg.Matrix.from_rows(omega.tolist())))

        h = 1e-6
        jac = np.empty((6, 6))
        for k in range(6):
            xp, xm = cstar.copy(), cstar.copy()
            xp[k] += h
            xm[k] -= h
            jac[:, k] = (vech_omega(xp) - vech_omega(xm)) / (2.0 * h)
        fd_logabsdet = math.log(abs(np.linalg.det(jac)))

        c = linalg.star_inverse(linalg.unvech(list(cstar), p))
        L = linalg.elimination(p)
        K = linalg.commutation(p)
        analytic = L @ (np.eye(p * p) + K) @ np.kron(c.to_numpy(), np.eye(p)) @ L.T
        log_det = math.log(abs(np.linalg.det(analytic))) + sum(
            math.log(d) for d in c.diagonal()
        )
        assert log_det == pytest.approx(fd_logabsdet, abs=1e-5)


class TestSimulators:
    def test_logistic_tiny_variance_half_rate(self):
        data = simulate_logistic(100, 100, beta=[0.0] * 4, eta=6.0, seed=15)
        rate = np.mean([y.mean() for y in data.y])
        assert rate == pytest.approx(0.5, abs=0.02)

    def test_poisson_zero_predictor_unit_mean(self):
        data = simulate_poisson(
            200, 50, beta=[0.0] * 6, chol_cov=[[1e-6, 0.0], [0.0, 1e-6]], seed=16
        )
        assert np.mean([y.mean() for y in data.y]) == pytest.approx(1.0, abs=0.02)

    def test_mmnl_zero_utilities_uniform_choices(self):
        data = simulate_mmnl(
            100,
            beta=[0.0] * 5,
            chol_precision=np.eye(3) * 1e3,
            seed=17,
            n_scenarios=30,
        )
        counts = np.bincount(np.concatenate(data.chosen), minlength=3)
        assert np.allclose(counts / counts.sum(), 1.0 / 3.0, atol=0.02)

    def test_reproducible(self):
        a = simulate_logistic(4, 3, beta=[0.1] * 4, eta=0.5, seed=18)
        b = simulate_logistic(4, 3, beta=[0.1] * 4, eta=0.5, seed=18)
        assert all((x == y).all() for x, y in zip(a.y, b.y))


class TestCsv:
    @pytest.mark.parametrize("kind", ["logistic", "poisson", "mmnl"])
    def test_round_trip(self, kind, tmp_path):
        if kind == "logistic":
            data = simulate_logistic(2, 3, beta=[0.3] * 4, eta=0.1, seed=19)
        elif kind == "poisson":
            data = simulate_poisson(
                2, 3, beta=[0.1] * 6, chol_cov=[[0.5, 0.0], [0.1, 0.4]], seed=20
            )
        else:
            data = simulate_mmnl(
                2, beta=[0.2] * 5, chol_precision=np.eye(3), seed=21, n_scenarios=2
            )
        path = tmp_path / f"{kind}.csv"
        export_csv(data, path)
        loaded = load_csv(path, kind)
        model_a = {"logistic": logistic_mixed_model,
                   "poisson": poisson_mixed_model,
                   "mmnl": mmnl_model}[kind]
        ma, mb = model_a(data), model_a(loaded)
        theta = [0.1] * ma.signature.dim_total
        assert adiff.value(ma.log_h_joint(theta)) == pytest.approx(
            adiff.value(mb.log_h_joint(theta)), rel=1e-12
        )

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("group,smoke,age,y\n")
        with pytest.raises(SchemaError):
            load_csv(path, "logistic")

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,age,y\n1,0,1\n")
        with pytest.raises(SchemaError):
            load_csv(path, "logistic")

    def test_bad_response_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,smoke,age,y\n1,0,0.5,1\n1,0,1.5,2\n")
        with pytest.raises(SchemaError, match="row 3"):
            load_csv(path, "logistic")

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_csv("/nonexistent/file.csv", "logistic")

    def test_mmnl_missing_alternative_rejected(self, tmp_path):
        path = tmp_path / "mmnl.csv"
        path.write_text(
            "resp,scenario,alt,at,td,fee,li,res,chosen\n"
            "1,1,0,1.0,1.0,0.0,0,1,1\n"
            "1,1,1,0.5,0.5,1.0,0,1,0\n"
        )
        with pytest.raises(SchemaError, match="3 alternatives"):
            load_csv(path, "mmnl")

    def test_mmnl_alt_names_accepted(self, tmp_path):
        path = tmp_path / "mmnl.csv"
        rows = ["resp,scenario,alt,at,td,fee,li,res,chosen"]
        for alt, chosen in (("FSP", 1), ("PSP", 0), ("PUP", 0)):
            rows.append(f"1,1,{alt},1.0,1.0,0.5,0,1,{chosen}")
        path.write_text("\n".join(rows) + "\n")
        data = load_csv(path, "mmnl")
        assert data.n == 1 and data.chosen[0].tolist() == [0]


def test_wheeze_shaped_file_loads_with_537_groups(tmp_path):
    rng = np.random.default_rng(22)
    rows = ["group,smoke,age,y"]
    for g in range(537):
        smoke = int(rng.random() < 0.5)
        for age in (-1.5, -0.5, 0.5, 1.5):
            rows.append(f"{g},{smoke},{age},{int(rng.random() < 0.5)}")
    path = tmp_path / "wheeze.csv"
    path.write_text("\n".join(rows) + "\n")
    data = load_csv(path, "logistic")
    assert data.n == 537 and all(len(y) == 4 for y in data.y)
