import csv
import io

import pytest

from fracvol.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    InsufficientRows,
    ResultRow,
    fit_convergence_rate,
    fixed_path_study,
    reference_resolution,
    rows_to_csv,
    run_convergence,
    run_table,
)
from fracvol.model import ModelParams, VolSpec
from fracvol.payoff import PayoffSpec

TABLE1 = PayoffSpec.call_plus_digital()


def table5_config(**kw):
    base = dict(
        model=ModelParams(hurst=0.75),
        vol=VolSpec.abs_shift(0.2),
        payoff=TABLE1,
        methods=("level1", "level2", "direct"),
        n_list=(125, 250, 500, 1000, 2000, 4000, 8000),
        n_paths=100,
        master_seed=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestFitRate:
    def test_power_law(self):
        rows = [(n, 0.0, 5 * n**-0.6) for n in (100, 200, 400, 800)]
        assert fit_convergence_rate(rows) == pytest.approx(-0.6, abs=1e-12)

    def test_constant_errors(self):
        rows = [(n, 0.0, 0.01) for n in (100, 200, 400)]
        assert fit_convergence_rate(rows) == pytest.approx(0.0, abs=1e-12)

    def test_reference_and_tiny_rows_dropped(self):
        rows = [(n, 0.0, 2 * n**-1.0) for n in (10, 20, 40)] + [(80, 0.0, 1e-15), (160, 0.0, 0.0)]
        assert fit_convergence_rate(rows, reference_n=160) == pytest.approx(-1.0)

    def test_insufficient(self):
        with pytest.raises(InsufficientRows):
            fit_convergence_rate([(10, 0, 1.0), (20, 0, 0.5), (40, 0, 0.0)])


class TestReference:
    @pytest.mark.parametrize(
        "n_list,ref", [((125, 250), 1024), ((128, 512), 2048), ((1000, 2000), 8192), ((8000,), 8192)]
    )
    def test_reference_resolution(self, n_list, ref):
        assert reference_resolution(n_list) == ref


class TestRunTable:
    def test_table5_structure(self):
        rows = run_table(table5_config())
        assert len(rows) == 21
        assert [r.method for r in rows[:3]] == ["level1", "level2", "direct"]
        assert sorted({r.n_grid for r in rows}) == [125, 250, 500, 1000, 2000, 4000, 8000]

    def test_single_cell(self):
        rows = run_table(table5_config(methods=("level2",), n_list=(125,)))
        assert len(rows) == 1 and rows[0].method == "level2"

    def test_csv_deterministic(self):
        cfg = table5_config(n_list=(125, 250), n_paths=200)
        a = rows_to_csv(run_table(cfg))
        b = rows_to_csv(run_table(cfg, threads=3))
        assert a == b

    def test_csv_format(self):
        text = rows_to_csv([ResultRow("level2", 125, 100, 7, 1 / 3, 0.0012345678912345, 12.5)])
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert rows[1] == ["level2", "125", "100", "7", "0.3333333333", "0.001234567891", "0"]
        timed = list(csv.reader(io.StringIO(rows_to_csv([ResultRow("x", 1, 1, 1, 1.0, 0.0, 12.5)], timing=True))))
        assert timed[1][-1] == "12.5"

    def test_shared_realizations_across_methods(self):
        rows = run_table(table5_config(n_list=(250,), n_paths=2000, methods=("direct", "level1")))
        # common paths make the two estimates strongly tied; independent draws would not
        assert abs(rows[0].value - rows[1].value) < 2 * max(rows[0].std_error, rows[1].std_error)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            table5_config(n_list=())
        with pytest.raises(ValueError):
            table5_config(n_list=(250, 125))
        with pytest.raises(ValueError):
            table5_config(n_paths=50)
        with pytest.raises(ValueError):
            table5_config(methods=("level7",))


class TestConvergence:
    def test_report(self):
        cfg = table5_config(methods=("level2",), n_list=(64, 128, 256, 512), n_paths=200)
        rep = run_convergence(cfg)
        assert rep.reference_n == 2048
        assert [r[0] for r in rep.rows] == [64, 128, 256, 512, 2048]
        assert rep.rows[-1][2] == 0.0
        assert rep.predicted_slope == pytest.approx(-0.75)
        assert rep.fitted_slope < 0
        text = rep.to_csv()
        assert text.startswith("n_grid,value,abs_error\n")
        assert "fitted_slope" in text and "predicted_slope" in text

    def test_report_rejects_non_divisors(self):
        with pytest.raises(ValueError):
            run_convergence(table5_config(methods=("level2",), n_list=(125, 250)))

    def test_fixed_path_slope(self):
        res = fixed_path_study(ModelParams(hurst=0.6), VolSpec.sqrt_quadratic(), TABLE1, n_paths=50)
        assert len(res["slopes"]) == 50
        assert res["mean_slope"] <= -0.35
        assert res["predicted_slope"] == pytest.approx(-0.6)
