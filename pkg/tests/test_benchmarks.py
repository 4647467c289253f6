import numpy as np
import pytest

from etolab.benchmarks import (
    BASE_FUNCTIONS,
    BASE_NAMES,
    SUITE_KINDS,
    ObjectiveSpec,
    build_suite,
    evaluate_objective,
    load_suite,
    random_orthogonal,
    save_suite,
    suite_from_manifest,
    suite_to_manifest,
)


class TestBaseFunctions:
    def test_all_vanish_at_origin(self):
        x = np.zeros(8)
        for name, fn in BASE_FUNCTIONS.items():
            assert abs(float(fn(x))) < 1e-9, name

    def test_all_nonnegative_on_fuzz(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.uniform(-100, 100, size=rng.integers(2, 12))
            for name, fn in BASE_FUNCTIONS.items():
                assert float(fn(x)) >= -1e-9, name

    def test_batch_axis_semantics(self):
        rng = np.random.default_rng(1)
        batch = rng.uniform(-5, 5, size=(6, 4))
        for name, fn in BASE_FUNCTIONS.items():
            vec = fn(batch)
            assert vec.shape == (6,), name
            loop = np.array([float(fn(row)) for row in batch])
            np.testing.assert_allclose(vec, loop, rtol=1e-12, err_msg=name)

    def test_sphere_value(self):
        assert float(BASE_FUNCTIONS["sphere"](np.array([3.0, 4.0]))) == 25.0

    def test_rastrigin_value(self):
        # cos(2 pi k) = 1 at integer coordinates: only the quadratic term is left
        x = np.array([1.0, 2.0])
        assert float(BASE_FUNCTIONS["rastrigin"](x)) == pytest.approx(5.0)

    def test_ten_bases_declared(self):
        assert len(BASE_NAMES) == 10
        assert SUITE_KINDS == ("basic", "shifted", "shift_rotated")


class TestRandomOrthogonal:
    def test_orthonormal(self):
        q = random_orthogonal(12, seed=5)
        np.testing.assert_allclose(q @ q.T, np.eye(12), atol=1e-10)

    def test_deterministic_and_seed_sensitive(self):
        np.testing.assert_array_equal(random_orthogonal(6, 9),
                                      random_orthogonal(6, 9))
        assert not np.array_equal(random_orthogonal(6, 9),
                                  random_orthogonal(6, 10))

    def test_rejects_bad_dim(self):
        with pytest.raises(ValueError):
            random_orthogonal(0, 1)


class TestObjectiveSpec:
    def test_shift_moves_the_optimum(self):
        shift = np.array([2.0, -3.0, 0.5])
        spec = ObjectiveSpec(name="f", base="sphere", dim=3, shift=shift)
        assert spec(shift) == pytest.approx(0.0, abs=1e-12)
        assert spec(np.zeros(3)) == pytest.approx(float(np.sum(shift ** 2)))

    def test_rotation_preserves_the_optimum(self):
        shift = np.array([1.0, 1.0, -2.0, 4.0])
        spec = ObjectiveSpec(name="f", base="rastrigin", dim=4, shift=shift,
                             rotation=random_orthogonal(4, 3), rotation_seed=3)
        assert spec(shift) == pytest.approx(0.0, abs=1e-9)

    def test_rotation_preserves_sphere_everywhere(self):
        # an orthogonal map cannot change a radius
        rng = np.random.default_rng(2)
        spec_plain = ObjectiveSpec(name="p", base="sphere", dim=5)
        spec_rot = ObjectiveSpec(name="r", base="sphere", dim=5,
                                 rotation=random_orthogonal(5, 8))
        for _ in range(10):
            x = rng.uniform(-10, 10, 5)
            assert spec_rot(x) == pytest.approx(spec_plain(x), rel=1e-12)

    def test_bias_is_added(self):
        spec = ObjectiveSpec(name="f", base="sphere", dim=2, bias=70.0)
        assert spec(np.zeros(2)) == pytest.approx(70.0)

    def test_batch_matches_scalar_calls(self):
        spec = ObjectiveSpec(name="f", base="ackley", dim=3,
                             shift=np.array([1.0, 2.0, 3.0]),
                             rotation=random_orthogonal(3, 4))
        batch = np.random.default_rng(7).uniform(-5, 5, size=(9, 3))
        np.testing.assert_allclose(spec.evaluate_batch(batch),
                                   [spec(row) for row in batch], rtol=1e-12)

    def test_trailing_dimension_checked(self):
        spec = ObjectiveSpec(name="f", base="sphere", dim=3)
        with pytest.raises(ValueError, match="trailing dimension"):
            spec.evaluate_batch(np.zeros((4, 2)))

    def test_validation(self):
        with pytest.raises(ValueError):
            ObjectiveSpec(name="f", base="nope", dim=3)
        with pytest.raises(ValueError):
            ObjectiveSpec(name="f", base="sphere", dim=3,
                          shift=np.zeros(2))
        with pytest.raises(ValueError):
            ObjectiveSpec(name="f", base="sphere", dim=3,
                          rotation=np.zeros((2, 3)))

    def test_evaluate_objective_helper(self):
        spec = ObjectiveSpec(name="f", base="sphere", dim=2)
        assert evaluate_objective(spec, np.array([1.0, 2.0])) == 5.0


class TestBuildSuite:
    def test_basic_suite_has_no_transforms(self):
        suite = build_suite("basic", 10, 10, seed=0)
        assert [f.name for f in suite.functions][:2] == ["f01_sphere",
                                                         "f02_elliptic"]
        assert all(f.shift is None and f.rotation is None
                   for f in suite.functions)

    def test_basic_caps_at_ten(self):
        with pytest.raises(ValueError, match="at most 10"):
            build_suite("basic", 11, 10, seed=0)

    def test_shifted_suite_shifts_inside_central_band(self):
        suite = build_suite("shifted", 10, 6, seed=3)
        for f in suite.functions:
            assert f.shift is not None and f.rotation is None
            assert np.all(f.shift >= -80.0) and np.all(f.shift <= 80.0)
            # the optimum moved to the shift
            assert f(f.shift) == pytest.approx(0.0, abs=1e-9)

    def test_shift_rotated_29_function_layout(self):
        suite = build_suite("shift_rotated", 29, 5, seed=1)
        assert len(suite.functions) == 29
        # bases cycle; repeated bases get fresh transforms
        assert suite.functions[0].base == suite.functions[10].base == "sphere"
        assert not np.array_equal(suite.functions[0].shift,
                                  suite.functions[10].shift)
        assert suite.functions[0].rotation_seed \
            != suite.functions[10].rotation_seed
        for f in suite.functions:
            assert f.rotation is not None
            assert f(f.shift) == pytest.approx(0.0, abs=1e-8)

    def test_deterministic(self):
        a = build_suite("shift_rotated", 4, 7, seed=5)
        b = build_suite("shift_rotated", 4, 7, seed=5)
        for fa, fb in zip(a.functions, b.functions):
            np.testing.assert_array_equal(fa.shift, fb.shift)
            np.testing.assert_array_equal(fa.rotation, fb.rotation)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown suite kind"):
            build_suite("rotated", 5, 5, seed=0)

    def test_custom_name_and_bounds(self):
        suite = build_suite("basic", 3, 4, seed=0, lower=-5, upper=5,
                            name="tiny")
        assert suite.name == "tiny"
        assert suite.space.lower == -5 and suite.space.upper == 5


class TestManifestRoundTrip:
    def test_values_survive_json(self, tmp_path):
        suite = build_suite("shift_rotated", 6, 5, seed=11)
        path = tmp_path / "suite.json"
        save_suite(suite, path)
        loaded = load_suite(path)
        assert loaded.name == suite.name
        assert loaded.kind == suite.kind
        assert loaded.space == suite.space
        rng = np.random.default_rng(0)
        points = rng.uniform(-50, 50, size=(5, 5))
        for fa, fb in zip(suite.functions, loaded.functions):
            assert fa.name == fb.name
            np.testing.assert_array_equal(fa.shift, fb.shift)
            np.testing.assert_array_equal(fa.rotation, fb.rotation)
            np.testing.assert_array_equal(fa.evaluate_batch(points),
                                          fb.evaluate_batch(points))

    def test_manifest_is_plain_data(self):
        suite = build_suite("shifted", 2, 3, seed=0)
        manifest = suite_to_manifest(suite)
        rebuilt = suite_from_manifest(manifest)
        assert rebuilt.functions[0].name == suite.functions[0].name
        np.testing.assert_array_equal(rebuilt.functions[0].shift,
                                      suite.functions[0].shift)
