import numpy as np
import pytest

from otkit import instance as im


class TestGridCost:
    def test_linf_diagonal_neighbor(self):
        spec = im.GridMetric(2, 2, "LINF")
        # position 0 is (0,0), position 3 is (1,1)
        assert im.grid_cost(spec, 0, 3) == 1.0

    def test_zero_on_identical_positions(self):
        for metric in ("L1", "L2", "LINF"):
            spec = im.GridMetric(3, 3, metric)
            for p in range(spec.size):
                assert im.grid_cost(spec, p, p) == 0.0

    def test_l1_opposite_corners_32(self):
        spec = im.GridMetric(32, 32, "L1")
        assert im.grid_cost(spec, 0, spec.size - 1) == 62.0

    def test_out_of_range(self):
        spec = im.GridMetric(2, 2, "L2")
        with pytest.raises(IndexError):
            im.grid_cost(spec, 0, 4)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for metric in ("L1", "L2", "LINF"):
            spec = im.GridMetric(4, 4, metric)
            for _ in range(50):
                i, j = rng.integers(0, spec.size, 2)
                assert im.grid_cost(spec, int(i), int(j)) == \
                    im.grid_cost(spec, int(j), int(i))

    @pytest.mark.parametrize("metric", ["L1", "L2", "LINF"])
    def test_triangle_inequality_exhaustive(self, metric):
        spec = im.GridMetric(8, 8, metric)
        pos = spec.positions().astype(float)
        d = np.abs(pos[:, None, :] - pos[None, :, :])
        if metric == "L1":
            D = d.sum(axis=2)
        elif metric == "L2":
            D = np.hypot(d[:, :, 0], d[:, :, 1])
        else:
            D = d.max(axis=2)
        # D[i,k] <= D[i,j] + D[j,k] for all i, j, k
        through = (D[:, :, None] + D[None, :, :]).min(axis=1)
        assert np.all(D <= through + 1e-12)


class TestCostView:
    def test_matches_grid_cost_on_small_grid(self):
        inst = im.make_synthetic_instance(2, "uniform-random", 0, metric="L2")
        view = inst.cost_view()
        m = inst.m
        for j in range(m * m):
            assert view.c(j) == pytest.approx(
                im.grid_cost(inst.cost, j % m, j // m))

    def test_cmax_scales_linearly_with_res(self):
        c8 = im.make_synthetic_instance(8, "uniform-random", 0).cost_view()
        c16 = im.make_synthetic_instance(16, "uniform-random", 0).cost_view()
        c32 = im.make_synthetic_instance(32, "uniform-random", 0).cost_view()
        assert c16.c_max_threshold == pytest.approx(2 * c8.c_max_threshold)
        assert c32.c_max_threshold == pytest.approx(2 * c16.c_max_threshold)

    def test_explicit_cmax_is_low_percentile(self):
        C = np.arange(100, dtype=float).reshape(10, 10)
        inst = im.OTInstance(a=np.full(10, 0.1), b=np.full(10, 0.1),
                             cost=im.Explicit(C))
        view = inst.cost_view()
        frac = (C < view.c_max_threshold).mean()
        assert 0.05 <= frac <= 0.15

    def test_out_of_range_index(self):
        inst = im.make_synthetic_instance(2, "uniform-random", 0)
        with pytest.raises(IndexError):
            inst.cost_view().c(np.array([16]))


class TestInstanceValidation:
    def test_unbalanced_rejected(self):
        with pytest.raises(im.InstanceError):
            im.OTInstance(a=np.array([1.0]), b=np.array([0.9]),
                          cost=im.Explicit(np.zeros((1, 1))))

    def test_negative_mass_rejected(self):
        with pytest.raises(im.InstanceError):
            im.OTInstance(a=np.array([1.0, -1.0]), b=np.array([0.0]),
                          cost=im.Explicit(np.zeros((2, 1))))

    def test_negative_cost_rejected(self):
        with pytest.raises(im.InstanceError):
            im.Explicit(np.array([[-1.0]]))

    def test_zero_mass_bins_allowed(self):
        inst = im.OTInstance(a=np.array([1.0, 0.0]), b=np.array([0.0, 1.0]),
                             cost=im.Explicit(np.ones((2, 2))))
        assert inst.m == 2

    def test_f_stacks_marginals(self):
        inst = im.OTInstance(a=np.array([0.3, 0.7]), b=np.array([0.5, 0.5]),
                             cost=im.Explicit(np.ones((2, 2))))
        np.testing.assert_allclose(inst.f, [0.3, 0.7, 0.5, 0.5])


class TestGenerators:
    def test_res32_dimensions(self):
        inst = im.make_synthetic_instance(32, "uniform-random", 0)
        assert inst.m + inst.n == 2048
        assert inst.m * inst.n == 1_048_576

    def test_res64_dimensions(self):
        inst = im.make_synthetic_instance(64, "uniform-random", 0)
        assert inst.m + inst.n == 8192
        assert inst.m * inst.n == 16_777_216

    def test_determinism(self):
        x = im.make_synthetic_instance(2, "uniform-random", 7)
        y = im.make_synthetic_instance(2, "uniform-random", 7)
        np.testing.assert_array_equal(x.a, y.a)
        np.testing.assert_array_equal(x.b, y.b)

    @pytest.mark.parametrize("kind", im.GENERATOR_KINDS)
    def test_all_kinds_balanced_unit_mass(self, kind):
        inst = im.make_synthetic_instance(4, kind, 3)
        assert inst.a.sum() == pytest.approx(1.0, rel=1e-12)
        assert inst.b.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all(inst.a >= 0) and np.all(inst.b >= 0)

    def test_res_too_small(self):
        with pytest.raises(im.InstanceError):
            im.make_synthetic_instance(1, "uniform-random", 0)


class TestFileFormats:
    def test_otlp_direct_encoding(self, tmp_path):
        p = tmp_path / "t.otlp"
        p.write_text("OTLP 2 2\n0.5 0.5\n0.5 0.5\n0 1\n1 0\n")
        inst = im.read_instance(p)
        np.testing.assert_allclose(inst.a, [0.5, 0.5])
        np.testing.assert_allclose(inst.b, [0.5, 0.5])
        np.testing.assert_allclose(inst.cost.C, [[0, 1], [1, 0]])

    def test_comments_ignored(self, tmp_path):
        p = tmp_path / "t.otlp"
        p.write_text("# header comment\nOTLP 1 1\n1.0  # inline\n1.0\n0.0\n")
        inst = im.read_instance(p)
        assert inst.m == 1

    @pytest.mark.parametrize("kind", ["uniform-random", "gaussian-blob"])
    def test_otimg_round_trip(self, tmp_path, kind):
        inst = im.make_synthetic_instance(3, kind, 5, metric="LINF")
        p = tmp_path / "t.otimg"
        im.write_instance(inst, p)
        back = im.read_instance(p)
        np.testing.assert_allclose(back.a, inst.a, rtol=1e-15)
        np.testing.assert_allclose(back.b, inst.b, rtol=1e-15)
        assert back.cost == inst.cost

    def test_otlp_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        a = rng.random(3)
        b = rng.random(4)
        b *= a.sum() / b.sum()
        inst = im.OTInstance(a=a, b=b, cost=im.Explicit(rng.random((3, 4))))
        p = tmp_path / "t.otlp"
        im.write_instance(inst, p)
        back = im.read_instance(p)
        np.testing.assert_allclose(back.a, inst.a, rtol=1e-15)
        np.testing.assert_allclose(back.cost.C, inst.cost.C, rtol=1e-15)

    def test_unbalanced_file_rejected_with_line(self, tmp_path):
        p = tmp_path / "t.otlp"
        p.write_text("OTLP 2 2\n0.6 0.5\n0.5 0.5\n0 1\n1 0\n")
        with pytest.raises(im.ParseError, match="unbalanced") as exc:
            im.read_instance(p)
        assert exc.value.line is not None

    def test_negative_mass_rejected(self, tmp_path):
        p = tmp_path / "t.otlp"
        p.write_text("OTLP 2 2\n-0.5 1.5\n0.5 0.5\n0 1\n1 0\n")
        with pytest.raises(im.ParseError, match="negative mass"):
            im.read_instance(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "t.bad"
        p.write_text("NOPE 2 2\n")
        with pytest.raises(im.ParseError, match="unknown header") as exc:
            im.read_instance(p)
        assert exc.value.line == 1

    def test_truncated_image_block(self, tmp_path):
        p = tmp_path / "t.otimg"
        p.write_text("OTIMG 2\n1 1 1 1\n1 1 1\nmetric L2\n")
        with pytest.raises(im.ParseError):
            im.read_instance(p)

    def test_missing_metric_line(self, tmp_path):
        vals = " ".join(["0.25"] * 8)
        p = tmp_path / "t.otimg"
        p.write_text(f"OTIMG 2\n{vals}\n")
        with pytest.raises(im.ParseError, match="metric"):
            im.read_instance(p)
