import importlib.util
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import sparsegp.training as training
from sparsegp.data import Dataset
from sparsegp.errors import DataError
from sparsegp.harness import (
    ConfigError,
    ModelTemplate,
    RunConfig,
    bench_scaling,
    emit_report,
    fold_indices,
    grid_shape,
    kfold_cv,
    lattice_data,
    load_csv,
    log_predictive_density,
    make_blocks,
    make_inducing_grid,
    read_report,
)
from sparsegp.harness.bench import format_table
from sparsegp.harness.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from sparsegp.harness.io import prediction_table
from sparsegp.kernels import make_kernel
from sparsegp.models import PredictiveDistribution, fit_state
from sparsegp.training import FlatPrior, HalfStudentTPrior, TrainConfig

ROOT = Path(__file__).resolve().parents[1]


def load_fetch_script():
    spec = importlib.util.spec_from_file_location("fetch_data", ROOT / "scripts" / "fetch_data.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def write(path, text):
    path.write_text(text)
    return path


def wave_csv(path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 10, n))
    y = 3.0 * np.sin(x) + 0.3 * rng.standard_normal(n) + 50.0
    lines = ["x,y"] + [f"{a:.17g},{b:.17g}" for a, b in zip(x, y)]
    return write(path, "\n".join(lines) + "\n")


class TestLoadCsv:
    def test_missing_row_dropped(self, tmp_path):
        d = load_csv(write(tmp_path / "d.csv", "x,y\n1,2\n2,NaN\n3,4\n"))
        assert d.n == 2 and d.dropped == 1
        np.testing.assert_array_equal(d.y, [2.0, 4.0])

    def test_column_selection(self, tmp_path):
        d = load_csv(write(tmp_path / "d.csv", "a,b,c\n1,2,3\n4,5,6\n"), inputs=["c"], target="a")
        np.testing.assert_array_equal(d.X[:, 0], [3, 6])
        np.testing.assert_array_equal(d.y, [1, 4])
        assert d.columns == ("c", "a")

    def test_custom_missing_token(self, tmp_path):
        d = load_csv(write(tmp_path / "d.csv", "x,y\n1,-99.99\n2,3\n"), missing=["-99.99"])
        assert d.n == 1 and d.dropped == 1

    def test_header_only(self, tmp_path):
        with pytest.raises(DataError, match="no usable rows"):
            load_csv(write(tmp_path / "d.csv", "x,y\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_csv(write(tmp_path / "d.csv", ""))

    def test_bad_value_reports_line(self, tmp_path):
        with pytest.raises(DataError, match=r"d\.csv:3"):
            load_csv(write(tmp_path / "d.csv", "x,y\n1,2\nabc,3\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DataError, match=r":2: expected 2 fields"):
            load_csv(write(tmp_path / "d.csv", "x,y\n1,2,3\n"))

    def test_unknown_column(self, tmp_path):
        with pytest.raises(DataError, match="no column"):
            load_csv(write(tmp_path / "d.csv", "x,y\n1,2\n"), target="z")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "absent.csv")


class TestInducing:
    def test_one_dimensional_grid(self):
        data = Dataset(np.linspace(0, 10, 30), np.zeros(30))
        Xu = make_inducing_grid(data, 3)
        np.testing.assert_array_equal(Xu.X[:, 0], [0.0, 5.0, 10.0])

    def test_single_point_is_midpoint(self):
        data = Dataset(np.linspace(2, 4, 5), np.zeros(5))
        np.testing.assert_array_equal(make_inducing_grid(data, 1).X, [[3.0]])

    @pytest.mark.parametrize("m,ranges,shape", [(24, [10, 5], (6, 4)), (24, [5, 10], (4, 6)),
                                                (3, [10], (3,)), (7, [1, 1], (7, 1)),
                                                (36, [1, 1], (6, 6))])
    def test_grid_shape(self, m, ranges, shape):
        assert grid_shape(m, ranges) == shape

    def test_two_dimensional_grid(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.uniform(0, 1, (50, 2)) * [10, 5], np.zeros(50))
        Xu = make_inducing_grid(data, 24).X
        assert Xu.shape == (24, 2)
        assert len(np.unique(Xu[:, 0])) == 6 and len(np.unique(Xu[:, 1])) == 4

    def test_subset_is_seeded(self):
        data = Dataset(np.arange(40.0), np.zeros(40))
        a = make_inducing_grid(data, 5, "subset", seed=3).X
        b = make_inducing_grid(data, 5, "subset", seed=3).X
        np.testing.assert_array_equal(a, b)
        assert np.all(np.isin(a[:, 0], data.X[:, 0])) and len(np.unique(a)) == 5

    def test_subset_too_large(self):
        with pytest.raises(ValueError):
            make_inducing_grid(Dataset(np.arange(4.0), np.zeros(4)), 5, "subset", seed=0)


class TestBlocks:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.data = Dataset(rng.uniform(0, 1, (900, 2)), np.zeros(900))

    def test_one_block(self):
        assert make_blocks(self.data, self.data.n).count == 1

    def test_singletons(self):
        small = self.data.subset(np.arange(50))
        bp = make_blocks(small, 1)
        assert bp.count == 50 and np.all(bp.sizes() == 1)

    def test_uniform_sizes_bounded(self):
        bp = make_blocks(self.data, 90)
        assert bp.sizes().max() <= 4 * 90
        assert bp.count >= 10
        assert np.sort(np.concatenate(bp.blocks)).tolist() == list(range(900))

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            make_blocks(self.data, 0)


class TestFolds:
    @given(st.integers(2, 300), st.integers(2, 20), st.integers(0, 2**32 - 1))
    def test_partition(self, n, k, seed):
        if k > n:
            with pytest.raises(ValueError):
                fold_indices(n, k, seed)
            return
        folds = fold_indices(n, k, seed)
        assert len(folds) == k
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(n))
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_seeded(self):
        a, b = fold_indices(50, 5, 7), fold_indices(50, 5, 7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


class TestMetrics:
    def test_log_density_closed_form(self):
        val = log_predictive_density(np.array([1.0]), np.array([0.0]), np.array([4.0]))
        assert val[0] == pytest.approx(-0.5 * np.log(2 * np.pi * 4.0) - 1.0 / 8.0, rel=1e-15)

    def test_constant_predictor(self):
        rng = np.random.default_rng(2)
        y = rng.normal(5.0, 2.0, 1000)
        mu, var = y.mean(), y.var()
        rmse = np.sqrt(np.mean((y - mu) ** 2))
        assert rmse == pytest.approx(np.std(y), rel=1e-12)
        mlpd = log_predictive_density(y, mu, var).mean()
        assert mlpd == pytest.approx(-0.5 * np.log(2 * np.pi * var) - 0.5, rel=1e-12)

    def test_cv_in_original_units(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 10, 60)
        y = np.sin(X) + 0.2 * rng.standard_normal(60)
        t = ModelTemplate("full", (make_kernel("se", 1.0, 1.0, 1, "f"),))
        cfg = TrainConfig(restarts=1)
        a = kfold_cv(t, Dataset(X, y), k=3, seed=0, cfg=cfg)
        b = kfold_cv(t, Dataset(X, 1000.0 * y + 5.0), k=3, seed=0, cfg=cfg)
        assert b.rmse == pytest.approx(1000.0 * a.rmse, rel=1e-5)
        assert b.mlpd == pytest.approx(a.mlpd - np.log(1000.0), abs=1e-5)

    def test_pooled_rmse(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 10, 47)
        t = ModelTemplate("full", (make_kernel("se", 1.0, 1.0, 1, "f"),))
        rep = kfold_cv(t, Dataset(X, np.cos(X)), k=4, seed=1, cfg=TrainConfig(restarts=1))
        sizes = np.array([f["n_test"] for f in rep.folds])
        per_fold = np.array([f["rmse"] for f in rep.folds])
        assert rep.rmse == pytest.approx(np.sqrt(np.sum(sizes * per_fold ** 2) / sizes.sum()),
                                         rel=1e-12)
        assert rep.n_points == 47 and rep.n_failed == 0 and rep.coverage == 1.0

    def test_failed_fold_recorded(self, monkeypatch):
        from sparsegp.errors import NumericalError

        def broken(spec, theta, data):
            raise NumericalError("forced", theta)
        monkeypatch.setattr(training, "objective_and_grad", broken)
        t = ModelTemplate("full", (make_kernel("se"),))
        rep = kfold_cv(t, Dataset(np.arange(10.0), np.zeros(10)), k=2, cfg=TrainConfig(restarts=1))
        assert rep.n_failed == 2 and np.isnan(rep.rmse) and rep.coverage == 0.0


class TestReport:
    def test_round_trip(self, tmp_path):
        res = {"theta": np.array([0.5, -1.0]), "objective": np.float64(3.25), "n": 4}
        paths = emit_report(res, tmp_path / "out")
        back = read_report(paths["report"])
        assert back == {"theta": [0.5, -1.0], "objective": 3.25, "n": 4}

    def test_empty(self, tmp_path):
        paths = emit_report({}, tmp_path)
        assert read_report(paths["report"]) == {}

    def test_prediction_csv(self, tmp_path):
        pred = PredictiveDistribution(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]), 0.5)
        comps = {"a": PredictiveDistribution(np.zeros(3), np.zeros(3), 0.5)}
        table = prediction_table(np.arange(3.0), pred, np.ones(3), comps)
        paths = emit_report({}, tmp_path, table)
        lines = paths["predictions"].read_text().strip().splitlines()
        assert lines[0] == "x0,truth,mean,var,obs_var,mean[a]"
        assert len(lines) == 4
        assert lines[1].split(",")[4] == "0.6"

    def test_unwritable(self, tmp_path):
        blocker = write(tmp_path / "file", "")
        with pytest.raises(OSError):
            emit_report({}, blocker / "sub")


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        ks = cfg.make_kernels(1)
        assert [k.kind for k in ks] == ["se", "pp"]
        assert cfg.prior_table()["noise"] == HalfStudentTPrior(0.3, 2.0)

    def test_load(self, tmp_path):
        path = write(tmp_path / "c.yaml", """
model: {kind: pic, m: 12, block_size: 10, pic_test: block}
kernels:
  - {name: trend, type: se, magnitude: 2.0, lengthscale: 5.0}
priors: {noise: flat, lengthscale: {nu: 4, scale: 1}}
optimizer: {restarts: 3, max_iter: 50}
data: {target: co2, missing: ["-99.99"]}
""")
        cfg = RunConfig.load(path)
        t = cfg.template(1)
        assert (t.kind, t.m, t.block_size, t.pic_test) == ("pic", 12, 10, "block")
        assert t.kernels[0].magnitude == pytest.approx(2.0)
        assert cfg.prior_table()["noise"] == FlatPrior()
        assert cfg.prior_table()["lengthscale"] == HalfStudentTPrior(4.0, 1.0)
        tc = cfg.train_config(seed=5)
        assert (tc.restarts, tc.max_iter, tc.seed) == (3, 50, 5)
        assert cfg.data_schema()["missing"] == ("-99.99",)
        assert cfg.template(1, kind="fic", m=8).m == 8

    @pytest.mark.parametrize("text", ["extra: 1\n", "optimizer: {bogus: 1}\n",
                                      "optimizer: {gtol: -1}\n", "- 1\n- 2\n",
                                      "model: [unclosed\n"])
    def test_errors(self, tmp_path, text):
        with pytest.raises(ConfigError):
            RunConfig.load(write(tmp_path / "c.yaml", text))

    def test_bad_prior(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"priors": {"magnitude": "wide"}}).prior_table()

    def test_kernel_without_type(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"kernels": [{"name": "a"}]}).make_kernels(1)


class TestCli:
    def run(self, *argv):
        return main([str(a) for a in argv])

    def test_fit_and_predict(self, tmp_path, capsys):
        data = wave_csv(tmp_path / "d.csv")
        out = tmp_path / "o"
        assert self.run("fit", "--data", data, "--model", "csfic", "--m", 8, "--out", out) == EXIT_OK
        fit = read_report(out / "fit.json")
        assert fit["data"]["n"] == 60 and fit["model"]["kind"] == "csfic"
        lines = (out / "fit_predictions.csv").read_text().splitlines()
        assert len(lines) == 61 and "mean[long]" in lines[0]
        test = write(tmp_path / "t.csv", "x\n1.0\n2.5\n")
        rc = self.run("predict", "--data", data, "--model", "csfic", "--m", 8,
                      "--params", out / "fit.json", "--test", test, "--out", out)
        assert rc == EXIT_OK
        rows = (out / "predict_predictions.csv").read_text().splitlines()
        assert len(rows) == 3
        mean = float(rows[1].split(",")[1])
        assert abs(mean - (50 + 3 * np.sin(1.0))) < 1.0

    def test_seeded_runs_identical(self, tmp_path):
        data = wave_csv(tmp_path / "d.csv", n=40)
        for name in ("a", "b"):
            assert self.run("fit", "--data", data, "--model", "fic", "--m", 6, "--seed", 4,
                            "--out", tmp_path / name) == EXIT_OK
        a = read_report(tmp_path / "a" / "fit.json")["train"]
        b = read_report(tmp_path / "b" / "fit.json")["train"]
        assert a["theta"] == b["theta"] and a["objective"] == b["objective"]

    def test_cv(self, tmp_path):
        data = wave_csv(tmp_path / "d.csv", n=40)
        cfg = write(tmp_path / "c.yaml", "optimizer: {restarts: 1}\n")
        assert self.run("cv", "--data", data, "--model", "full", "--folds", 4,
                        "--kernels", cfg, "--out", tmp_path) == EXIT_OK
        rep = read_report(tmp_path / "cv.json")
        assert len(rep["folds"]) == 4 and rep["rmse"] < 1.0

    def test_bench(self, tmp_path, capsys):
        assert self.run("bench", "--model", "csfic", "--m", 10, "--sizes", "100,200",
                        "--repeats", 1, "--out", tmp_path) == EXIT_OK
        rows = read_report(tmp_path / "bench.json")["rows"]
        assert [r["n"] for r in rows] == [100, 200]
        assert "takahashi_ops" in capsys.readouterr().out

    def test_usage_errors(self, tmp_path):
        assert self.run("fit") == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            self.run("fit", "--bogus")
        assert info.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            self.run("bench", "--sizes", "10,x")
        assert info.value.code == EXIT_USAGE
        assert self.run("fit", "--data", wave_csv(tmp_path / "d.csv"),
                        "--kernels", tmp_path / "absent.yaml") == EXIT_USAGE

    def test_data_errors(self, tmp_path):
        assert self.run("fit", "--data", tmp_path / "absent.csv") == EXIT_DATA
        bad = write(tmp_path / "bad.csv", "x,y\n1,2\n2,oops\n")
        assert self.run("fit", "--data", bad, "--out", tmp_path) == EXIT_DATA

    def test_numerical_failure(self, tmp_path, monkeypatch):
        from sparsegp.errors import NumericalError

        def broken(spec, theta, data):
            raise NumericalError("forced", theta)
        monkeypatch.setattr(training, "objective_and_grad", broken)
        data = wave_csv(tmp_path / "d.csv", n=20)
        assert self.run("fit", "--data", data, "--model", "full", "--out", tmp_path) == EXIT_NUMERIC


class TestBench:
    def test_rows_and_table(self):
        t = ModelTemplate("csfic", (make_kernel("se", 1.0, 30.0, 1, "l"),
                                    make_kernel("pp", 1.0, 3.0, 1, "s")), m=10)
        rows = bench_scaling(t, [100, 200], repeats=1, warmup=False)
        assert [r["n"] for r in rows] == [100, 200]
        assert rows[1]["lambda_nnz"] > rows[0]["lambda_nnz"]
        assert rows[0]["lambda_density"] < 0.1
        text = format_table(rows)
        assert len(text.splitlines()) == 3

    def test_ascending_sizes_required(self):
        t = ModelTemplate("fic", (make_kernel("se"),), m=5)
        with pytest.raises(ValueError):
            bench_scaling(t, [200, 100])

    def test_banded_factor(self):
        # a unit-spaced lattice with support radius 2.5 gives a band of width 2
        data = lattice_data(300)
        t = ModelTemplate("csfic", (make_kernel("se", 1.0, 30.0, 1, "l"),
                                    make_kernel("pp", 1.0, 2.5, 1, "s")), m=10)
        state = fit_state(t.build(data), None, data)
        gamma = state.lam.factor.gamma
        assert gamma.max() <= 2
        assert state.lam.A.nnz_full <= 300 * 5

    def test_lattice_generators(self):
        assert lattice_data(50, "lattice2d").X.shape == (50, 2)
        with pytest.raises(ValueError):
            lattice_data(10, "spiral")


class TestFetchData:
    def setup_method(self):
        self.mod = load_fetch_script()

    def test_parse_noaa(self):
        text = ("# comment\nyear,month,decimal date,average,deseasonalized\n"
                "1958,2,1958.12,-99.99,0\n1958,3,1958.20,315.70,314.4\n"
                "1958,4,1958.29,317.45,315.2\n2005,1,2005.04,378.4,378\n")
        t = self.mod.parse_noaa(text)
        np.testing.assert_allclose(t, [[1958 + 2.5 / 12, 315.70], [1958 + 3.5 / 12, 317.45]])

    def test_parse_cdiac(self):
        row = "1958 " + " ".join(["-99.99", "-99.99"] + [f"{310 + i}.0" for i in range(10)]) + " 0"
        t = self.mod.parse_cdiac("header line\n" + row + "\n")
        assert t.shape == (10, 2)
        assert t[0, 0] == pytest.approx(1958 + 2.5 / 12)

    def test_annual_precipitation(self):
        rows = [("a", 1.0, 2.0, 1995, m, 10.0) for m in range(1, 13)]
        rows += [("b", 3.0, 4.0, 1995, m, 5.0) for m in range(1, 12)]
        rows += [("c", 5.0, 6.0, 1995, m, None if m == 6 else 1.0) for m in range(1, 13)]
        rows += [("a", 1.0, 2.0, 1996, 1, 99.0)]
        np.testing.assert_array_equal(self.mod.annual_precipitation(rows), [[1.0, 2.0, 120.0]])

    def test_write_table(self, tmp_path):
        p = self.mod.write_table(tmp_path / "x" / "t.csv", ["year", "co2"], [[1958.2, 315.7]])
        d = load_csv(p)
        assert d.n == 1 and d.columns == ("year", "co2")
        assert json.loads(json.dumps(d.y.tolist())) == [315.7]
