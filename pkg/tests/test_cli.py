import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkan.cli import main
from rkan.config import ConfigError, parse_config
from rkan.runner import (CSV_COLUMNS, REPLICATIONS, ResultRow, read_csv, replication_configs, run,
                         summarize, write_csv)

MINIMAL = "target = F2\nlayer = jacobi-rkan\nK = 2\n"

SMALL = """[experiment]
experiment = regression
target = F1
seeds = 0, 1

[network]
K = 2
architecture = 1, 4, 1

[optimizer]
epochs = 5
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.experiment == "regression" and cfg.target == "F2"
    assert cfg.optimizer.name == "lbfgs" and cfg.optimizer.epochs == 50
    assert cfg.network.architecture == (1, 10, 1) and cfg.network.degree == 2
    assert cfg.seeds == [0]


def test_unknown_key_named_with_line():
    with pytest.raises(ConfigError, match=r"line 2: unknown key 'lerning_rate'"):
        parse_config("target = F1\nlerning_rate = 0.1\n")


@pytest.mark.parametrize("text, fragment", [
    ("target = F1\nK = -1\n", "line 2: K must be non-negative"),
    ("target = F1\np = -2\n", "line 2: p must be non-negative"),
    ("target = F1\nK = two\n", "line 2: K must be an integer"),
    ("target = F1\nlr = fast\n", "line 2: lr must be a number"),
    ("target = F1\nlayer = spline\n", "line 2: layer must be one of"),
    ("target = F1\narchitecture = 5\n", "line 2: architecture needs at least 2"),
    ("target = F1\nseeds = ,\n", "line 2: seeds must not be empty"),
    ("target = F1\n[optimizer]\nK = 3\n", "line 3: key 'K' belongs in [network]"),
    ("target = F1\n[solver]\n", "line 2: unknown section"),
    ("target = F1\ntarget = F2\n", "line 2: duplicate key"),
    ("target = F1\njust words\n", "line 2: expected 'key = value'"),
    ("experiment = lane-emden\nw = 7\n", "line 2: w must be in 0..4"),
    ("experiment = regression\n", "needs a 'target'"),
    ("experiment = lane-emden\n", "needs a 'w'"),
    ("experiment = gradcheck\ntarget = F1\n", "line 2: 'target' only applies"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_sections_comments_and_lists():
    cfg = parse_config("# sweep\n[experiment]\nexperiment = lane-emden ; poly\nw = 3\nseeds = [4, 5 6]\n"
                       "[network]\nlayer = pade-rkan\np = 6\n")
    assert cfg.w == 3 and cfg.seeds == [4, 5, 6]
    assert cfg.network.layer == "pade-rkan" and cfg.network.den_degree == 6
    assert cfg.network.degree == 6 and cfg.optimizer.epochs == 1000 and cfg.optimizer.history == 50


def test_hash_ignores_seeds_but_not_settings():
    a = parse_config(MINIMAL + "seeds = 1\n")
    b = parse_config(MINIMAL + "seeds = 2, 3\n")
    c = parse_config(MINIMAL.replace("K = 2", "K = 3"))
    assert a.hash() == b.hash() != c.hash()


def test_every_bundled_replication_parses():
    for name in REPLICATIONS:
        pairs = replication_configs(name)
        assert pairs
    t2 = [cfg for _, cfg in replication_configs("table2")]
    assert all(cfg.target == "F2" and cfg.seeds == [0, 1, 2, 3, 4] for cfg in t2)


finite_or_none = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["regression", "lane-emden", "gradcheck"]), st.integers(0, 10**6),
       st.sampled_from(["jacobi-rkan", "pade-rkan:kan"]), st.integers(0, 9), st.integers(0, 9),
       finite_or_none, finite_or_none, finite_or_none, finite_or_none, finite_or_none,
       st.floats(0, 1e4), st.sampled_from(["ok", "diverged", "no-root"]))
def test_csv_round_trip(tmp_path_factory, experiment, seed, layer, K, p, a, b, c, d, e, wall, status):
    row = ResultRow(experiment, seed, layer, K, p, "inf-alg", a, b, c, d, e, wall, status)
    path = tmp_path_factory.mktemp("rt") / "rows.csv"
    write_csv([row], path)
    (back,) = read_csv(path)
    assert back.wall_s == pytest.approx(wall, abs=5e-4)
    back.wall_s = row.wall_s
    assert back == row


def test_csv_header_exact(tmp_path):
    path = tmp_path / "r.csv"
    write_csv([], path)
    assert path.read_text().strip() == ",".join(CSV_COLUMNS)


def test_run_one_row_per_seed_and_summary(tmp_path, capsys):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    out = tmp_path / "out.csv"
    code = main(["run", str(cfg_path), "--out", str(out)])
    text = capsys.readouterr().out
    rows = read_csv(out)
    assert [r.seed for r in rows] == [0, 1]
    assert text.count("median") == 1
    assert code == (0 if all(r.status == "ok" for r in rows) else 1)
    assert (tmp_path / "out.csv.config.json").exists()


def test_rerun_identical_modulo_wall_time(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    outs = []
    for name in ("a.csv", "b.csv"):
        main(["run", str(cfg_path), "--out", str(tmp_path / name)])
        with open(tmp_path / name) as fh:
            outs.append([{k: v for k, v in rec.items() if k != "wall_s"} for rec in csv.DictReader(fh)])
    assert outs[0] == outs[1]


def test_parallel_matches_serial():
    cfg = parse_config(SMALL)
    strip = lambda rows: [(r.seed, r.train_mse, r.test_mse, r.status) for r in rows]
    assert strip(run(cfg, parallel=2)) == strip(run(cfg))


def test_seed_precedence(monkeypatch):
    cfg = parse_config(SMALL.replace("epochs = 5", "epochs = 1"))
    monkeypatch.setenv("RKAN_SEED", "7,8,9")
    assert [r.seed for r in run(cfg)] == [7, 8, 9]
    assert [r.seed for r in run(cfg, seeds=[3])] == [3]
    monkeypatch.delenv("RKAN_SEED")
    assert [r.seed for r in run(cfg)] == [0, 1]


def test_cli_seeds_flag(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    main(["run", str(cfg_path), "--out", str(tmp_path / "o.csv"), "--seeds", "5,6,7"])
    assert [r.seed for r in read_csv(tmp_path / "o.csv")] == [5, 6, 7]


def test_gradcheck_command(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gradcheck", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 8
    assert all(r.status == "ok" and r.max_abs_err < 1e-5 for r in rows)
    assert {r.layer.split(":")[0] for r in rows} == {"jacobi-rkan", "pade-rkan", "fjacobi-rkan", "fpade-rkan"}


def test_exit_code_nonzero_when_a_seed_fails(tmp_path):
    cfg_path = tmp_path / "bad.ini"
    cfg_path.write_text(SMALL.replace("epochs = 5", "optimizer = adam\nepochs = 3\nlr = 1e300"))
    code = main(["run", str(cfg_path), "--out", str(tmp_path / "o.csv")])
    rows = read_csv(tmp_path / "o.csv")
    assert code == 1 and len(rows) == 2
    assert {r.status for r in rows} == {"diverged"}


def test_config_error_exit_code(tmp_path, capsys):
    cfg_path = tmp_path / "typo.ini"
    cfg_path.write_text("target = F1\nlerning_rate = 1\n")
    assert main(["run", str(cfg_path)]) == 2
    assert "lerning_rate" in capsys.readouterr().err


def test_summary_uses_ok_rows_only():
    rows = [ResultRow("regression", s, "jacobi-rkan", 2, 2, "inf-alg", test_mse=v, status=st_)
            for s, (v, st_) in enumerate([(1.0, "ok"), (3.0, "ok"), (None, "diverged")])]
    line = summarize(rows)
    assert "2/3 ok" in line and "test_mse=2.0000e+00" in line


def test_replicate_rejects_unknown_target():
    with pytest.raises(SystemExit):
        main(["replicate", "table4"])
