import unittest

import numpy as np

from common.errors import CovariateError
from prior_glm.covariates import CovariateMatrix, Transform


class TestTransform(unittest.TestCase):

    def test_parse_aliases(self):
        self.assertIs(Transform.parse("none"), Transform.IDENTITY)
        self.assertIs(Transform.parse("log(x+1)"), Transform.LOG1P)
        self.assertIs(Transform.parse(" LOG "), Transform.LOG)
        with self.assertRaises(CovariateError):
            Transform.parse("sqrt")

    def test_apply(self):
        np.testing.assert_allclose(Transform.LOG1P.apply(np.array([0.0, np.e - 1])), [0.0, 1.0])


class TestCovariateMatrix(unittest.TestCase):

    def setUp(self):
        self.raw = np.array([[1.0, 10.0], [np.e, np.nan], [np.e**2, 30.0]])

    def test_from_raw_with_transforms(self):
        z = CovariateMatrix.from_raw(self.raw, ["rain", "temp"], transforms={"rain": "log"})
        np.testing.assert_allclose(z.values[:, 0], [0.0, 1.0, 2.0])
        self.assertEqual(z.transforms, (Transform.LOG, Transform.IDENTITY))
        self.assertTrue(z.has_missing)
        self.assertEqual(z.missing_columns, [1])
        np.testing.assert_array_equal(z.missing_rows(1), [1])

    def test_missing_cells_stay_missing_after_transform(self):
        z = CovariateMatrix.from_raw(self.raw, ["rain", "temp"], transforms={"temp": "log"})
        self.assertTrue(np.isnan(z.values[1, 1]))

    def test_values_outside_transform_domain(self):
        with self.assertRaises(CovariateError):
            CovariateMatrix.from_raw(np.array([[1.0], [0.0]]), ["rain"], transforms={"rain": "log"})

    def test_transform_for_unknown_column(self):
        with self.assertRaises(CovariateError):
            CovariateMatrix.from_raw(self.raw, ["rain", "temp"], transforms={"wind": "log"})

    def test_standardize_and_intercept(self):
        z = CovariateMatrix.from_raw(self.raw, ["rain", "temp"], standardize=True, intercept=True)
        self.assertEqual(z.labels, ("intercept", "rain", "temp"))
        np.testing.assert_array_equal(z.values[:, 0], 1.0)
        observed = z.values[~np.isnan(z.values[:, 2]), 2]
        self.assertAlmostEqual(observed.mean(), 0.0)
        self.assertAlmostEqual(observed.std(ddof=1), 1.0)
        self.assertEqual(z.centers[2], 20.0)

    def test_all_missing_column(self):
        with self.assertRaises(CovariateError):
            CovariateMatrix(values=np.array([[1.0, np.nan], [2.0, np.nan]]))

    def test_design_and_filled(self):
        z = CovariateMatrix(values=self.raw[:, 1])
        with self.assertRaises(CovariateError):
            z.design()
        np.testing.assert_allclose(z.filled(np.full((3, 1), 20.0))[:, 0], [10.0, 20.0, 30.0])
        with self.assertRaises(ValueError):
            z.filled(np.zeros((2, 1)))
        with self.assertRaises(CovariateError):
            z.check_rows(4)

    def test_values_are_read_only(self):
        z = CovariateMatrix(values=np.ones((2, 1)))
        with self.assertRaises(ValueError):
            z.values[0, 0] = 2.0

    def test_aligned_grid(self):
        z = CovariateMatrix(values=np.ones((3, 1)), times=(1.0, 2.0, 3.0))
        self.assertEqual(z.aligned_grid("intervals").points, (1.0, 2.0))
        z = CovariateMatrix(values=np.ones((3, 1)), times=(0.0, 2.0, 3.0))
        self.assertEqual(z.aligned_grid("points").points, (2.0, 3.0))
        with self.assertRaises(CovariateError):
            CovariateMatrix(values=np.ones((3, 1)), times=(1.0, 2.0, 3.0)).aligned_grid("points")
        with self.assertRaises(CovariateError):
            CovariateMatrix(values=np.ones((3, 1)), times=(3.0, 2.0, 1.0)).aligned_grid("intervals")
        with self.assertRaises(CovariateError):
            CovariateMatrix(values=np.ones((3, 1))).aligned_grid()

    def test_empty(self):
        z = CovariateMatrix.empty(4)
        self.assertEqual((z.n_rows, z.n_columns), (4, 0))
        self.assertFalse(z.has_missing)


if __name__ == '__main__':
    unittest.main()
