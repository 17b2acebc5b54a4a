import json

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from src import cli, variableselection
from src.dataset import TimeSeriesDataset, save_csv
from src.exceptions import ValidationError
from src.simulation import resolve_threads

from .conftest import make_data

SMALL_DESIGN = """
N = 5
T = 25
R = 2
methods = ocmt, oracle
protocols = none, est-weighted
weights = light
seed = 3
calibration_reps = 10
"""


@pytest.fixture
def sample(tmp_path):
    data = make_data(T=60, N=6, seed=8)
    named = TimeSeriesDataset.from_arrays(data.y, data.X, target_name="y",
                                          covariate_names=["a", "b", "c", "d", "e", "f"])
    path = tmp_path / "sample.csv"
    save_csv(named, str(path))
    return str(path)


def test_select_writes_every_covariate(tmp_path, sample, capsys):
    out = str(tmp_path / "selection.csv")
    assert cli.main(["select", "-d", sample, "-t", "y", "-o", out]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["lambda", "covariate", "selected", "t_stat", "coefficient"]
    assert (frame["lambda"] == 1.0).all()
    assert list(frame["covariate"]) == ["a", "b", "c", "d", "e", "f"]
    assert frame["selected"][0] and frame["selected"][1]
    assert "#critical value" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "selection.manifest.json").read_text())
    assert manifest["command"] == "select"
    assert "numpy" in manifest["versions"]


def test_selection_on_downweighted_data(tmp_path, sample, capsys):
    out = str(tmp_path / "selection.csv")
    assert cli.main(["select", "-d", sample, "-t", "y", "-w", "heavy", "-o", out]) == 0
    assert len(pd.read_csv(out)) == 6
    capsys.readouterr()

    assert cli.main(["select", "-d", sample, "-t", "y", "-w", "heavy", "-ds", "-o", out]) == 0
    frame = pd.read_csv(out)
    np.testing.assert_allclose(sorted(frame["lambda"].unique()), [0.95, 0.96, 0.97, 0.98, 0.99, 1.0])
    assert len(frame) == 36
    assert capsys.readouterr().out.count("#lambda") == 6

    assert cli.main(["select", "-d", sample, "-t", "y", "-w", "heavy", "-lg", "0.9,1", "-ds", "-o", out]) == 0
    assert sorted(pd.read_csv(out)["lambda"].unique()) == [0.9, 1.0]
    assert cli.main(["select", "-d", sample, "-t", "y", "-lg", "1.5", "-ds", "-o", out]) == 1


def test_downweight_selection_flag_selects_the_protocol(tmp_path, sample):
    flag, named = str(tmp_path / "flag.csv"), str(tmp_path / "named.csv")
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-ds", "-lg", "0.9,1", "-o", flag]) == 0
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-pr", "both-weighted", "-lg", "0.9,1", "-o", named]) == 0
    first, second = pd.read_csv(flag), pd.read_csv(named)
    assert first["protocol"][0] == "both-weighted"
    assert first["weights"][0] == "custom"
    pd.testing.assert_frame_equal(first, second)


def test_lasso_selection_is_reproducible(tmp_path, sample):
    first, second = str(tmp_path / "one.csv"), str(tmp_path / "two.csv")
    for out in (first, second):
        assert cli.main(["select", "-d", sample, "-t", "y", "-m", "lasso", "-s", "4", "-o", out]) == 0
    pd.testing.assert_frame_equal(pd.read_csv(first), pd.read_csv(second))


def test_invalid_input_exits_with_one(tmp_path, sample, capsys):
    assert cli.main(["select", "-d", sample, "-t", "nope"]) == 1
    assert cli.main(["select", "-d", sample, "-t", "y", "-m", "lasso"]) == 1
    assert "seed" in capsys.readouterr().err


def test_numerical_failure_exits_with_two(tmp_path, capsys):
    path = tmp_path / "collinear.csv"
    rows = ["y,c,x1,x2"] + ["{},5,{},{}".format(i % 3, i, (i * 7) % 5) for i in range(12)]
    path.write_text("\n".join(rows) + "\n")
    assert cli.main(["select", "-d", str(path), "-t", "y", "-z", "c"]) == 2
    assert "rank-deficient" in capsys.readouterr().err


@pytest.mark.parametrize("error", [np.linalg.LinAlgError("Singular matrix"), FloatingPointError("overflow")])
def test_library_numerical_errors_exit_with_two(monkeypatch, sample, capsys, error):
    def failing(*args, **kwargs):
        raise error

    monkeypatch.setattr(variableselection, "select", failing)
    assert cli.main(["select", "-d", sample, "-t", "y"]) == 2
    assert str(error) in capsys.readouterr().err
    assert variableselection.main(["-d", sample, "-t", "y"]) == 2


def test_forecast_holds_out_the_last_row(tmp_path, sample):
    out = str(tmp_path / "forecast.csv")
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-m", "ocmt", "-w", "heavy", "-o", out]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 1
    assert frame["period"][0] == 60
    assert frame["realized"][0] == pytest.approx(pd.read_csv(sample)["y"].iloc[-1])
    assert frame["weights"][0] == "heavy"


def test_forecast_next_row(tmp_path, sample):
    nxt = tmp_path / "next.csv"
    nxt.write_text("a,b,c,d,e,f\n0,0,0,0,0,0\n")
    out = str(tmp_path / "forecast.csv")
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-m", "oracle", "-sg", "a,b", "-pr", "none",
                     "-n", str(nxt), "-o", out]) == 0
    frame = pd.read_csv(out)
    # only the intercept contributes at x = 0
    data = pd.read_csv(sample)
    X = np.column_stack([np.ones(len(data)), data[["a", "b"]].to_numpy()])
    intercept = np.linalg.lstsq(X, data["y"].to_numpy(), rcond=None)[0][0]
    assert frame["forecast"][0] == pytest.approx(intercept)
    assert np.isnan(frame["realized"][0])


def test_oracle_needs_signals(tmp_path, sample):
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-m", "oracle", "-o", str(tmp_path / "f.csv")]) == 1


def test_expanding_forecasts_and_evaluation(tmp_path, sample, capsys):
    ocmt = str(tmp_path / "ocmt.csv")
    oracle = str(tmp_path / "oracle.csv")
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-x", "40", "-o", ocmt]) == 0
    assert cli.main(["forecast", "-d", sample, "-t", "y", "-m", "oracle", "-sg", "a,b", "-pr", "none", "-x", "40",
                     "-o", oracle]) == 0
    frame = pd.read_csv(ocmt)
    assert list(frame["period"]) == list(range(41, 61))

    result = str(tmp_path / "msfe.csv")
    assert cli.main(["evaluate", "-me", "msfe", "-a", ocmt, "-o", result]) == 0
    expected = ((frame["realized"] - frame["forecast"]) ** 2).mean()
    assert pd.read_csv(result)["value"][0] == pytest.approx(expected)

    # down-weighted against unweighted estimation, so the losses differ
    assert not np.allclose(frame["forecast"], pd.read_csv(oracle)["forecast"])
    assert cli.main(["evaluate", "-me", "dm", "-a", ocmt, "-b", oracle, "-o", result]) == 0
    dm = pd.read_csv(result)
    assert dm["forecasts"][0] == 20
    assert 0.0 <= dm["p_value"][0] <= 1.0
    assert cli.main(["evaluate", "-me", "pt", "-a", ocmt, "-o", result]) == 0
    pt = pd.read_csv(result)
    assert pt["p_value"][0] == pytest.approx(norm.sf(pt["value"][0]))
    assert cli.main(["evaluate", "-me", "mdfa", "-a", ocmt, "-o", result]) == 0
    assert 0.0 <= pd.read_csv(result)["value"][0] <= 100.0
    assert cli.main(["evaluate", "-me", "dm", "-a", ocmt, "-o", result]) == 1


def test_identical_forecasts_have_no_dm_statistic(tmp_path, sample, capsys):
    first, second = str(tmp_path / "one.csv"), str(tmp_path / "two.csv")
    for out in (first, second):
        assert cli.main(["forecast", "-d", sample, "-t", "y", "-x", "50", "-o", out]) == 0
    assert cli.main(["evaluate", "-me", "dm", "-a", first, "-b", second, "-o", str(tmp_path / "dm.csv")]) == 2
    assert "variance" in capsys.readouterr().err.lower()


def test_evaluate_irc(tmp_path, sample):
    result = str(tmp_path / "irc.csv")
    assert cli.main(["evaluate", "-me", "irc", "-d", sample, "-t", "y", "-sg", "a,b", "-sn", "+,-",
                     "-o", result]) == 0
    frame = pd.read_csv(result)
    assert frame["metric"][0] == "irc"
    assert bool(frame["satisfied"][0]) == (frame["value"][0] <= 1.0)
    assert cli.main(["evaluate", "-me", "irc", "-d", sample, "-t", "y", "-sg", "zz", "-o", result]) == 1


def test_simulate_writes_tables(tmp_path):
    config = tmp_path / "small.cfg"
    config.write_text(SMALL_DESIGN)
    out = tmp_path / "run"
    assert cli.main(["simulate", "-c", str(config), "-o", str(out), "-p", "1"]) == 0
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == ["method", "protocol", "weights", "N", "T", "khat", "tpr", "fpr", "msfe",
                                     "instability", "experiments", "replications", "failures"]
    assert len(summary) == 4
    assert (summary["experiments"] == 1).all()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["seed"] == 3
    assert manifest["parameters"]["threads"] == 1
    assert manifest["calibration"][0]["tau_u"] > 0
    assert (out / "table.txt").exists()
    assert "A: no instability" in (out / "table.txt").read_text()

    again = tmp_path / "again"
    assert cli.main(["simulate", "-c", str(config), "-o", str(again), "-p", "1"]) == 0
    pd.testing.assert_frame_equal(pd.read_csv(out / "replications.csv"), pd.read_csv(again / "replications.csv"))


def test_thread_resolution(monkeypatch):
    monkeypatch.delenv("OCMT_THREADS", raising=False)
    assert resolve_threads(2, 5) == 2
    assert resolve_threads(None, 5) == 5
    assert resolve_threads(None, None) >= 1
    monkeypatch.setenv("OCMT_THREADS", "3")
    assert resolve_threads(2, 5) == 3
    monkeypatch.setenv("OCMT_THREADS", "three")
    with pytest.raises(ValidationError):
        resolve_threads(None, None)
    monkeypatch.setenv("OCMT_THREADS", "0")
    with pytest.raises(ValidationError):
        resolve_threads(None, None)
