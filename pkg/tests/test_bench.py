import json

import numpy as np
import pytest

from recykl.bench import (
    MethodSpec,
    default_methods,
    load_methods_file,
    output_error_run,
    run_methods,
    weight_study,
    write_run_outputs,
    write_rows_csv,
)
from recykl.errors import RecyklError
from recykl.problems import gen_diffusion_sequence, gen_output_matrix


@pytest.fixture(scope="module")
def small_seq():
    seq = gen_diffusion_sequence((8, 8), p=5, delta=0.03, seed=60, tol=1e-8)
    seq.C = gen_output_matrix(10, seq.n, seed=61)
    return seq


class TestMethodSpec:
    def test_from_dict_round_trip(self):
        raw = {
            "name": "pod-test",
            "truncation": {"strategy": "pod-a-rbf", "nu_y": 0.99, "nu_w": 0.5,
                           "storage_cap": 30, "max_dim": 20, "full_orth": True},
            "mode": "cg",
            "precond": "ssor:1.5",
            "tolerances": {"eps_hat_factor": 1e-5, "eps_inner_factor": 1e-3},
        }
        spec = MethodSpec.from_dict(raw)
        assert spec.config.truncation.full_orth
        assert spec.config.mode == "cg"
        tols = spec.tolerance_schedule()(1, 1e-6)
        assert tols.eps_hat == pytest.approx(1e-11)
        assert tols.eps_inner == pytest.approx(1e-9)

    def test_deflate_strategy_string(self):
        spec = MethodSpec.from_dict({"name": "df", "truncation": {"strategy": "deflate:7"}})
        assert spec.config.truncation.deflate_dim == 7

    def test_missing_name_rejected(self):
        with pytest.raises(RecyklError):
            MethodSpec.from_dict({"truncation": {}})

    def test_load_methods_file(self, tmp_path):
        path = tmp_path / "methods.json"
        path.write_text(json.dumps([{"name": "plain", "recycle": False}]))
        specs = load_methods_file(path)
        assert specs[0].name == "plain" and not specs[0].config.recycle

    def test_default_roster_names(self):
        names = [m.name for m in default_methods(storage_cap=20)]
        assert names[0] == "pcg" and "no-trunc" in names
        assert any(n.startswith("df(") for n in names)
        assert any(n.endswith(")it") for n in names)


class TestRunMethods:
    def test_threaded_matches_serial(self, small_seq):
        methods = default_methods(storage_cap=16, precond="jacobi")[:4]
        serial = run_methods(small_seq, methods, threads=1)
        threaded = run_methods(small_seq, methods, threads=3)
        for a, b in zip(serial, threaded):
            assert [r.stage3_iters for r in a.reports] == [r.stage3_iters for r in b.reports]
            assert [r.matvecs for r in a.reports] == [r.matvecs for r in b.reports]

    def test_tol_override(self, small_seq):
        methods = [default_methods(storage_cap=16)[0]]  # plain pcg
        loose = run_methods(small_seq, methods, tol_override=1e-2)[0]
        tight = run_methods(small_seq, methods, tol_override=1e-10)[0]
        assert sum(r.stage3_iters for r in loose.reports) < sum(
            r.stage3_iters for r in tight.reports
        )

    def test_write_outputs_schema(self, small_seq, tmp_path):
        methods = default_methods(storage_cap=16)[:2]
        runs = run_methods(small_seq, methods)
        paths = write_run_outputs(runs, tmp_path)
        header = open(paths["systems"]).readline().strip().split(",")
        assert header == ["method", "j", "matvecs", "precond_apps", "stage1_dim",
                          "stage2_iters", "stage3_iters", "wall_ms", "final_residual"]
        summary = json.loads(open(paths["summary"]).read())
        assert set(summary) == {m.name for m in methods}


class TestOutputErrorRun:
    def test_infinite_tau_zero_cost(self, small_seq):
        methods = [default_methods(storage_cap=16)[1]]  # no-trunc
        rows = output_error_run(small_seq, methods, [np.inf])
        assert rows[0]["avg_matvecs"] == 0.0
        assert rows[0]["avg_precond_apps"] == 0.0
        assert rows[0]["systems_met"] == small_seq.p

    def test_exact_recycling_met_before_stage3(self):
        seq = gen_diffusion_sequence((7, 7), p=3, delta=0.0, seed=62, tol=1e-10,
                                     load_drift=0.0)
        seq.C = gen_output_matrix(8, seq.n, seed=63)
        methods = [default_methods(storage_cap=100)[1]]
        rows = output_error_run(seq, methods, [1e-6])
        row = rows[0]
        # systems 2..p meet the threshold at stage 1, so the average number
        # of preconditioner applications sits below one full solve's worth
        assert row["systems_met"] == seq.p
        assert row["avg_precond_apps"] < row["avg_matvecs"]

    def test_requires_output_matrix(self):
        seq = gen_diffusion_sequence((5, 5), p=2, delta=0.0, seed=64)
        with pytest.raises(RecyklError):
            output_error_run(seq, default_methods(storage_cap=8)[:1], [1e-3])


class TestWeightStudy:
    def test_small_protocol(self):
        seq = gen_diffusion_sequence((8, 8), p=6, delta=0.03, seed=65, tol=1e-9)
        rows = weight_study(seq, dims=[3, 6], warmup=5)
        schemes = {r["scheme"] for r in rows}
        assert schemes == {"ideal", "prev", "rbf"}
        assert all(r["stage2_residual"] > 0 for r in rows)

    def test_full_rank_truncation_identical_residuals(self):
        # keeping the whole block makes the weight choice irrelevant
        seq = gen_diffusion_sequence((6, 6), p=4, delta=0.02, seed=66, tol=1e-9)
        rows = weight_study(seq, dims=[200], warmup=3)
        # the block spans the whole space here, so every scheme's Galerkin
        # solve is exact and the residuals all sit at roundoff level
        assert all(r["stage2_residual"] <= 1e-10 for r in rows)
        assert all(r["stage3_iters"] == 0 for r in rows)

    def test_needs_enough_systems(self):
        seq = gen_diffusion_sequence((5, 5), p=3, delta=0.0, seed=67)
        with pytest.raises(RecyklError):
            weight_study(seq, warmup=5)

    def test_write_rows(self, tmp_path):
        rows = [{"a": 1, "b": 2.5}]
        path = tmp_path / "rows.csv"
        write_rows_csv(rows, path)
        assert open(path).read().splitlines() == ["a,b", "1,2.5"]
