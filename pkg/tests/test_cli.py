import pytest

from singular_em import harness as H
from singular_em.cli import main
from singular_em.errors import NumericalError


def test_constants_prints_all_entries(capsys):
    assert main(["constants", "--model", "indicator-1d"]) == 0
    out = capsys.readouterr().out
    for name in ("gamma0", "kappa0", "lambda1", "lambda2", "lambda3", "alpha0", "beta_T", "hat_beta_T", "hat_alpha0"):
        assert name in out


@pytest.mark.parametrize("argv", [["converge", "--bogus"], ["nope"], [], ["converge", "--paths", "x"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_help_exits_0(capsys):
    assert main(["converge", "--help"]) == 0
    assert "Precedence" in capsys.readouterr().out


def test_bad_config_key_names_line(tmp_path, capsys):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("model = zero\nwhat = 1\n")
    assert main(["converge", "--config", str(cfg)]) == 2
    assert f"{cfg}:2" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["converge", "--config", str(tmp_path / "none.cfg")]) == 2


def test_numerical_error_exit_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalError("engine.simulate", "non-finite state", path_index=4, step_index=2)

    monkeypatch.setattr(H, "run_convergence", boom)
    assert main(["converge", "--paths", "10"]) == 3
    assert "engine.simulate" in capsys.readouterr().err


def test_failed_check_exit_1():
    assert main(["converge", "--paths", "100", "--deltas", "2^-3,2^-4,2^-5", "--margin", "-2"]) == 1


def test_flags_override_config_and_input_untouched(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("model = indicator-1d\ndeltas = 2^-3, 2^-4\nn_paths = 50\nseed = 4\n")
    before = cfg.read_bytes()
    out = tmp_path / "o.csv"
    assert main(["converge", "--config", str(cfg), "--paths", "60", "--seed", "8", "--out", str(out)]) == 0
    assert cfg.read_bytes() == before
    text = capsys.readouterr().out
    assert "n_paths=60" in text and "seed=8" in text
    assert H.read_csv(out).n_paths == 60
    assert sorted(p.name for p in tmp_path.iterdir()) == ["o.csv", "s.cfg"]


def test_seed_environment_fallback(tmp_path, monkeypatch):
    paths = [tmp_path / f"{i}.csv" for i in range(3)]
    monkeypatch.setenv("SINGULAR_EM_SEED", "5")
    main(["simulate", "--paths", "2", "--delta", "0.25", "--out", str(paths[0])])
    main(["simulate", "--paths", "2", "--delta", "0.25", "--out", str(paths[1]), "--seed", "5"])
    monkeypatch.delenv("SINGULAR_EM_SEED")
    main(["simulate", "--paths", "2", "--delta", "0.25", "--out", str(paths[2])])
    assert paths[0].read_text() == paths[1].read_text() != paths[2].read_text()


def test_bad_seed_environment(monkeypatch):
    monkeypatch.setenv("SINGULAR_EM_SEED", "abc")
    assert main(["simulate", "--paths", "1"]) == 2


def test_krylov_density_regularity_csv(tmp_path):
    k = tmp_path / "k.csv"
    assert main(["krylov", "--paths", "200", "--delta", "2^-5", "--lam", "1", "--out", str(k)]) == 0
    assert k.read_text().startswith("lam,functional_mean")
    d = tmp_path / "d.csv"
    assert main(["density", "--paths", "2000", "--bins", "20", "--out", str(d)]) == 0
    assert len(d.read_text().splitlines()) == 21
    r = tmp_path / "r.csv"
    assert main(["regularity", "--model", "sin", "--out", str(r)]) == 0
    assert r.read_text().splitlines()[0] == "s,offset,modulus"


def test_density_without_paths_is_degenerate(capsys):
    assert main(["density", "--paths", "0"]) == 0
    assert "degenerate" in capsys.readouterr().out


def test_unknown_model_exit_2(capsys):
    assert main(["constants", "--model", "nope"]) == 2
    assert "models.get_model" in capsys.readouterr().err


def test_oracle_model_constants_rejected():
    assert main(["constants", "--model", "gbm"]) == 2
