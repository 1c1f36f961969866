import json

import numpy as np
import pytest

from tcpgds.activation import parse_activation_list
from tcpgds.cli import main
from tcpgds.errors import TcpInputError
from tcpgds.harness import (
    ExperimentConfig,
    RunSummary,
    builtin_tensor,
    file_label,
    load_builtin,
    parse_vector,
    report_table,
    resolve_problem,
    run_experiment,
    sweep_activations,
)
from tcpgds.ncp import phi, save_problem
from tcpgds.tensor import contract_m1

EG2_SWEEP = "lin;bs:q=7;ps:p=5,q=7;sps:p=5,q=9"


def test_builtin_nonzeros_exact():
    assert builtin_tensor("eg1").nonzeros() == [
        ((1, 1, 1, 1), 1.0), ((1, 1, 2, 2), 1.0), ((1, 2, 2, 2), -1.0),
        ((2, 1, 1, 1), -1.0), ((2, 2, 1, 1), 1.0), ((2, 2, 2, 2), 1.0),
    ]
    assert builtin_tensor("eg2").nonzeros() == [
        ((1, 1, 1, 1, 1), 1.0), ((2, 2, 2, 2, 2), 2.0), ((3, 3, 3, 3, 3), 3.0),
    ]
    assert builtin_tensor("eg3").nonzeros() == [
        ((1, 1, 1, 1), 1.0), ((1, 1, 1, 2), -2.0), ((1, 1, 2, 2), 1.0), ((2, 2, 2, 2), 1.0),
    ]


def test_load_builtin_examples():
    pb = load_builtin("eg2", (-3, -2, -3))
    assert pb.order == 5 and pb.tensor.nnz() == 3
    np.testing.assert_allclose(contract_m1(load_builtin("eg1", (5, 3)).tensor, [1.0, 1.0]), [1, 1], atol=1e-15)
    np.testing.assert_array_equal(phi(load_builtin("eg3", (0, -1)), [0, 1]), [0, 0])


@pytest.mark.parametrize("name,q", [("eg4", None), ("eg1", (1, 2, 3)), ("eg2", (1, 2))])
def test_load_builtin_errors(name, q):
    with pytest.raises(TcpInputError):
        load_builtin(name, q)


def test_parse_vector():
    np.testing.assert_array_equal(parse_vector("1, -2.5,3e-1"), [1, -2.5, 0.3])
    np.testing.assert_array_equal(parse_vector("(0.1,0.5)"), [0.1, 0.5])
    for bad in ["", "a,b", ","]:
        with pytest.raises(TcpInputError):
            parse_vector(bad)


def test_resolve_problem_sources(tmp_path):
    assert resolve_problem("builtin:eg3").problem.dim == 2
    assert resolve_problem("eg1", [1.0, 1.0]).defaults_key == "eg1"
    src = resolve_problem("diag:m=4,n=3,seed=42")
    assert src.problem.order == 4 and src.known_solution.shape == (3,)
    path = tmp_path / "p.json"
    save_problem(load_builtin("eg3", (0, -1)), path)
    src = resolve_problem(f"file:{path}", [1.0, 2.0])
    np.testing.assert_array_equal(src.problem.q, [1, 2])
    for bad in ["builtin:eg9", "diag:m=4", "diag:m=4,n=2,k=1", "diag:m=x,n=2", "zip:foo", f"file:{tmp_path}/nope.json"]:
        with pytest.raises(TcpInputError):
            resolve_problem(bad)
    with pytest.raises(TcpInputError):
        resolve_problem("diag:m=4,n=2", [1.0, 1.0])


def test_sweep_defaults_per_example():
    labels = [a.label for a in sweep_activations(resolve_problem("eg1"))]
    assert labels == ["lin", "bs:q=5", "ps:p=3,q=5", "sps:p=3,q=7"]
    labels = [a.label for a in sweep_activations(resolve_problem("eg3"), "bs;sps:q=13")]
    assert labels == ["bs:q=7", "sps:p=7,q=13"]


def test_file_label():
    assert file_label("ps:p=5,q=7") == "ps_p5_q7"
    assert file_label("lin") == "lin"


def _cfg(tmp_path, spec="builtin:eg2", q=(1, 2, 3), acts=EG2_SWEEP, x0=None, **kw):
    src = resolve_problem(spec, q)
    return ExperimentConfig(src, sweep_activations(src, acts), x0=x0, out_dir=tmp_path, **kw)


def test_run_experiment_eg2_trivial(tmp_path):
    summaries = run_experiment(_cfg(tmp_path))
    assert len(summaries) == 4
    for s in summaries:
        assert s.converged and s.verified and s.final_residual <= 1e-8
        np.testing.assert_allclose(s.final_state, 0.0, atol=1e-8)
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["all_converged"] is True
    assert doc["config"]["activations"] == EG2_SWEEP.split(";")
    assert doc["config"]["x0_source"] == "seed:0"
    assert doc["config"]["integrator"]["res_tol"] == 1e-8
    assert [r["csv"] for r in doc["runs"]] == ["lin.csv", "bs_q7.csv", "ps_p5_q7.csv", "sps_p5_q9.csv"]
    for r in doc["runs"]:
        lines = (tmp_path / r["csv"]).read_text().splitlines()
        assert lines[0] == "tau,t,x1,x2,x3,res"
        assert float(lines[-1].split(",")[-1]) == r["final_residual"]
    # all four share the same x0
    starts = {(tmp_path / r["csv"]).read_text().splitlines()[1] for r in doc["runs"]}
    assert len({s.split(",", 2)[2] for s in starts}) == 1


def test_run_experiment_eg3_and_diag(tmp_path):
    s, = run_experiment(_cfg(tmp_path / "a", "builtin:eg3", (0, -1), "ps", x0=[0.1, 0.5]))
    assert s.converged
    np.testing.assert_allclose(s.final_state, [0, 1], atol=1e-5)
    cfg = _cfg(tmp_path / "b", "diag:m=4,n=3,seed=42", None, "lin;sps:p=3,q=5")
    for s in run_experiment(cfg):
        assert s.converged
        np.testing.assert_allclose(s.final_state, cfg.source.known_solution, atol=1e-5)
    assert "known_solution" in json.loads((tmp_path / "b" / "summary.json").read_text())["config"]


def test_converged_implies_verified(tmp_path):
    for q in [(-5, -3), (-1, 2), (2, -1), (5, 3)]:
        for s in run_experiment(_cfg(None, "builtin:eg1", q, "lin;bs:q=5;ps:p=3,q=5;sps:p=3,q=7")):
            assert s.converged and s.verified, s


def test_parallel_matches_serial(tmp_path):
    a = run_experiment(_cfg(tmp_path / "a"))
    b = run_experiment(_cfg(tmp_path / "b", jobs=3))
    assert [x.to_dict() for x in a] == [x.to_dict() for x in b]
    for name in ["summary.json", "lin.csv", "sps_p5_q9.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(TcpInputError, match="cannot write"):
        run_experiment(_cfg(blocker / "sub", acts="lin"))


def test_config_invariants():
    with pytest.raises(TcpInputError):
        ExperimentConfig(resolve_problem("eg3"), [])
    with pytest.raises(TcpInputError):
        ExperimentConfig(resolve_problem("eg3"), parse_activation_list("lin"), x0=[1, 2, 3]).initial_state()


def _summary(label, converged, res, steps=10, tau=1.0):
    return RunSummary(label, "converged" if converged else "horizon_reached", converged, res, steps,
                      tau if converged else None, tau if converged else None, [0.0], converged, "")


def test_report_table():
    text = report_table([_summary("lin", True, 3e-9)])
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[0].split() == ["activation", "converged", "steps", "tau_to_tol", "final_res"]
    assert lines[2].split() == ["lin", "true", "10", "1", "3.000e-09"]
    text = report_table([_summary("bs:q=7", False, 0.2, 99), _summary("lin", True, 1e-9)])
    rows = text.splitlines()[2:]
    assert rows[0].split()[:3] == ["bs:q=7", "false", "99"] and rows[0].split()[3] == "-"
    assert rows[1].split()[1] == "true"
    assert len({len(line) for line in text.splitlines()}) == 1
    with pytest.raises(TcpInputError):
        report_table([])


# ---- CLI ----


def test_cli_solve_ok(tmp_path, capsys):
    code = main(["solve", "--problem", "builtin:eg2", "--q", "1,2,3", "--act", EG2_SWEEP, "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("true") == 4
    assert (tmp_path / "summary.json").exists()


def test_cli_solve_not_converged(capsys):
    code = main(["solve", "--problem", "eg3", "--x0", "1.5,1.1", "--act", "lin", "--tmax", "1"])
    assert code == 1
    assert "false" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "eg9"],
    ["solve", "--problem", "eg3", "--act", "tanh"],
    ["solve", "--problem", "eg3", "--act", "ps:p=4,q=5"],
    ["solve", "--problem", "eg3", "--q", "1,2,3"],
    ["solve", "--problem", "eg3", "--x0", "1,2,3"],
    ["solve", "--problem", "eg3", "--x0", "seed:x"],
    ["solve", "--problem", "eg3", "--gamma", "-1"],
    ["solve", "--problem", "eg3", "--tol", "0"],
    ["solve", "--problem", "file:/nonexistent/p.json"],
    ["verify", "--problem", "eg3", "--x", "1"],
])
def test_cli_input_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("tcpgds: error:")


def test_cli_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["solve", "--problem", "eg3", "--act", "lin", "--out", str(blocker / "d")]) == 2


def test_cli_verify(capsys):
    assert main(["verify", "--problem", "eg3", "--q", "0,-1", "--x", "1,1"]) == 0
    assert "solution" in capsys.readouterr().out
    assert main(["verify", "--problem", "eg3", "--q", "0,-1", "--x", "0.5,0.5"]) == 1
    assert "violated" in capsys.readouterr().out


def test_cli_check_ptensor(capsys):
    assert main(["check-ptensor", "--problem", "eg1", "--trials", "2000", "--seed", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "no-counterexample-found"
    assert main(["check-ptensor", "--problem", "eg2", "--trials", "100"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "counterexample" and doc["max_xi_Axi"] <= 0


def test_seed_env_var(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TCPGDS_SEED", "7")
    main(["solve", "--problem", "eg3", "--act", "lin", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["config"]["x0_source"] == "seed:7"
    np.testing.assert_array_equal(doc["config"]["x0"], np.random.default_rng(7).uniform(0, 1, 2))
    monkeypatch.setenv("TCPGDS_SEED", "abc")
    assert main(["solve", "--problem", "eg3", "--act", "lin"]) == 2


def test_cli_explicit_seed_x0(tmp_path, capsys):
    main(["solve", "--problem", "eg3", "--act", "lin", "--x0", "seed:3", "--out", str(tmp_path)])
    assert json.loads((tmp_path / "summary.json").read_text())["config"]["x0_source"] == "seed:3"


def test_cli_reproducible(tmp_path, capsys):
    argv = ["solve", "--problem", "diag:m=4,n=3,seed=5", "--act", "lin;ps:p=3,q=5", "--record-every", "3"]
    main(argv + ["--out", str(tmp_path / "a")])
    main(argv + ["--out", str(tmp_path / "b")])
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["lin.csv", "ps_p3_q5.csv", "summary.json"]
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
