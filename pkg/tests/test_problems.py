import numpy as np
import pytest
import scipy.io

from recykl.errors import ManifestError
from recykl.linalg import SparseSpdMatrix
from recykl.mmio import read_array, read_matrix, write_array, write_symmetric_matrix
from recykl.problems import (
    gen_diffusion_sequence,
    gen_output_matrix,
    load_sequence_manifest,
    write_sequence,
)
from recykl.rng import Xorshift64Star


class TestRng:
    def test_deterministic_stream(self):
        a = Xorshift64Star(7)
        b = Xorshift64Star(7)
        assert [a.next_word() for _ in range(5)] == [b.next_word() for _ in range(5)]

    def test_seed_zero_legal_and_distinct(self):
        assert Xorshift64Star(0).next_word() != Xorshift64Star(1).next_word()

    def test_uniform_range(self):
        u = Xorshift64Star(3).uniforms(1000)
        assert all(0.0 <= x < 1.0 for x in u)
        assert 0.4 < float(np.mean(u)) < 0.6


class TestDiffusionSequence:
    def test_zero_drift_invariant_matrices(self):
        seq = gen_diffusion_sequence((4, 4), p=3, delta=0.0, seed=1)
        ref = seq[0].A.to_dense()
        for sys_spec in seq:
            assert np.array_equal(sys_spec.A.to_dense(), ref)

    def test_single_node_grid_scalar_solution(self):
        seq = gen_diffusion_sequence((1, 1), p=2, delta=0.1, seed=2)
        for sys_spec in seq:
            a = sys_spec.A.to_dense()[0, 0]
            assert a > 0
            assert np.allclose(np.linalg.solve(sys_spec.A.to_dense(), sys_spec.b), sys_spec.b / a)

    def test_matrices_spd_by_cholesky(self):
        seq = gen_diffusion_sequence((7, 5), p=4, delta=0.1, seed=3)
        for sys_spec in seq:
            np.linalg.cholesky(sys_spec.A.to_dense())  # raises if not SPD

    def test_consecutive_relative_difference_small(self):
        p, delta = 20, 0.1
        seq = gen_diffusion_sequence((6, 6), p=p, delta=delta, seed=4)
        for j in range(1, p):
            diff = seq[j].A.to_dense() - seq[j - 1].A.to_dense()
            rel = np.linalg.norm(diff) / np.linalg.norm(seq[j].A.to_dense())
            assert rel <= 10.0 * delta / p

    def test_seed_reproducibility_bit_exact(self):
        a = gen_diffusion_sequence((5, 4), p=3, delta=0.2, seed=9)
        b = gen_diffusion_sequence((5, 4), p=3, delta=0.2, seed=9)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.A.values, sb.A.values)
            assert np.array_equal(sa.b, sb.b)

    def test_bad_grid_rejected(self):
        from recykl.errors import RecyklError

        with pytest.raises(RecyklError):
            gen_diffusion_sequence((0, 3), p=2, delta=0.1)
        with pytest.raises(RecyklError):
            gen_diffusion_sequence((3, 3), p=2, delta=1.0)


class TestOutputMatrix:
    def test_shape_and_range(self):
        C = gen_output_matrix(100, 30, seed=5)
        assert C.shape == (100, 30)
        assert np.all((C >= 0.0) & (C < 1.0))

    def test_seed_repeatable(self):
        assert np.array_equal(gen_output_matrix(10, 10, seed=6), gen_output_matrix(10, 10, seed=6))

    def test_roughly_uniform_mean(self):
        C = gen_output_matrix(100, 120, seed=7)
        assert 0.45 <= C.mean() <= 0.55


class TestMatrixMarketIO:
    def test_matrix_round_trip_bit_exact(self, tmp_path):
        seq = gen_diffusion_sequence((5, 5), p=1, delta=0.3, seed=8)
        A = seq[0].A
        path = tmp_path / "A.mtx"
        write_symmetric_matrix(path, A)
        back = read_matrix(path)
        assert np.array_equal(back.to_dense(), A.to_dense())

    def test_array_round_trip_bit_exact(self, tmp_path):
        v = np.random.default_rng(10).standard_normal(40)
        path = tmp_path / "b.mtx"
        write_array(path, v)
        assert np.array_equal(read_array(path), v)

    def test_matrix_round_trip_2d_array(self, tmp_path):
        C = gen_output_matrix(6, 9, seed=11)
        path = tmp_path / "C.mtx"
        write_array(path, C)
        assert np.array_equal(read_array(path), C)

    def test_scipy_reads_our_files(self, tmp_path):
        # cross-check the format against an independent reader
        seq = gen_diffusion_sequence((4, 4), p=1, delta=0.2, seed=12)
        A = seq[0].A
        write_symmetric_matrix(tmp_path / "A.mtx", A)
        via_scipy = scipy.io.mmread(tmp_path / "A.mtx").toarray()
        assert np.array_equal(via_scipy, A.to_dense())
        write_array(tmp_path / "b.mtx", seq[0].b)
        assert np.allclose(np.asarray(scipy.io.mmread(tmp_path / "b.mtx")).ravel(), seq[0].b)

    def test_we_read_scipy_files(self, tmp_path):
        A = gen_diffusion_sequence((4, 3), p=1, delta=0.1, seed=13)[0].A
        scipy.io.mmwrite(tmp_path / "A.mtx", scipy.sparse.tril(A.to_scipy()), symmetry="symmetric")
        back = read_matrix(tmp_path / "A.mtx")
        assert np.allclose(back.to_dense(), A.to_dense())

    def test_malformed_header_names_file(self, tmp_path):
        bad = tmp_path / "bad.mtx"
        bad.write_text("%%MatrixMarket tensor coordinate real symmetric\n1 1 0\n")
        with pytest.raises(ManifestError, match="bad.mtx"):
            read_matrix(bad)

    def test_malformed_entry_reports_line(self, tmp_path):
        bad = tmp_path / "bad.mtx"
        bad.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 oops 3.0\n"
        )
        with pytest.raises(ManifestError, match=":4"):
            read_matrix(bad)

    def test_missing_entries_detected(self, tmp_path):
        bad = tmp_path / "bad.mtx"
        bad.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n")
        with pytest.raises(ManifestError, match="expected 2 entries"):
            read_matrix(bad)


class TestManifest:
    def test_round_trip(self, tmp_path):
        seq = gen_diffusion_sequence((4, 4), p=3, delta=0.2, seed=14)
        seq.C = gen_output_matrix(5, seq.n, seed=15)
        manifest = write_sequence(seq, tmp_path)
        back = load_sequence_manifest(manifest)
        assert back.n == seq.n and back.p == seq.p
        for orig, loaded in zip(seq, back):
            assert np.array_equal(orig.A.to_dense(), loaded.A.to_dense())
            assert np.array_equal(orig.b, loaded.b)
            assert loaded.tol == orig.tol
        assert np.array_equal(back.C, seq.C)

    def test_identity_system_manifest(self, tmp_path):
        from recykl.krylov import pcg
        from recykl.problems import LinearSystemSpec, SystemSequence

        seq = SystemSequence(
            n=3,
            systems=[
                LinearSystemSpec(
                    A=SparseSpdMatrix.identity(3), b=np.array([1.0, 2.0, 3.0]), xbar=None, tol=1e-12
                )
            ],
        )
        manifest = write_sequence(seq, tmp_path)
        back = load_sequence_manifest(manifest)
        res = pcg(back[0].A, back[0].b, tol=back[0].tol)
        assert res.k == 1

    def test_dimension_mismatch_detected(self, tmp_path):
        seq = gen_diffusion_sequence((3, 3), p=1, delta=0.1, seed=16)
        manifest = write_sequence(seq, tmp_path)
        import json

        data = json.loads(open(manifest).read())
        data["n"] = 5
        open(manifest, "w").write(json.dumps(data))
        with pytest.raises(ManifestError, match="dimension mismatch"):
            load_sequence_manifest(manifest)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"n": 3,\n "systems": [}\n')
        with pytest.raises(ManifestError, match="manifest.json:2"):
            load_sequence_manifest(path)
