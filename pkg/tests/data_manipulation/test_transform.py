import unittest

import numpy as np
import pandas as pd

from data_manipulation.transform import diagnostics, effect_sizes, plot_data, scalar_summary, summarize_trajectory
from sampler.trace import Trace, merge_traces


def _trace(seed=0, n=200, labels=("rain", "temp")):
    rng = np.random.default_rng(seed)
    return Trace(
        gamma=rng.normal(loc=[0.0, 1.0, 2.0], size=(n, 3)),
        tau=rng.gamma(2.0, size=n),
        beta=rng.normal(loc=[1.0, -1.0][: len(labels)], size=(n, len(labels))),
        kappa=rng.gamma(3.0, size=n),
        log_posterior=rng.normal(size=n),
        labels=tuple(labels),
    )


class TestTransform(unittest.TestCase):

    def test_summarize_trajectory(self):
        df = summarize_trajectory(_trace(), grid_points=[1.0, 2.5], anchor=2020.0)
        self.assertEqual(list(df["interval"]), [0, 1, 2])
        self.assertEqual(list(df["start"]), [0.0, 1.0, 2.5])
        self.assertTrue(np.isinf(df["end"].iloc[-1]))
        self.assertEqual(list(df["start_year"]), [2020.0, 2019.0, 2017.5])
        self.assertTrue(np.all(df["lower"] <= df["median"]))
        self.assertTrue(np.all(df["median"] <= df["upper"]))
        np.testing.assert_allclose(df["mean_log10"], df["mean"] / np.log(10.0))

    def test_summary_is_unchanged_by_duplicating_the_trace(self):
        trace = _trace()
        once = summarize_trajectory(trace)
        twice = summarize_trajectory(merge_traces([trace, trace]))
        pd.testing.assert_frame_equal(once, twice)
        pd.testing.assert_frame_equal(effect_sizes(trace).drop(columns="sd"), effect_sizes(merge_traces([trace, trace])).drop(columns="sd"))

    def test_summarize_errors(self):
        with self.assertRaises(ValueError):
            summarize_trajectory(Trace.empty(3))
        with self.assertRaises(ValueError):
            summarize_trajectory(_trace(), grid_points=[1.0])

    def test_effect_sizes(self):
        df = effect_sizes(_trace())
        self.assertEqual(list(df["covariate"]), ["rain", "temp"])
        self.assertGreater(df["prob_positive"].iloc[0], 0.7)
        self.assertLess(df["prob_positive"].iloc[1], 0.3)
        empty = effect_sizes(_trace(labels=()))
        self.assertTrue(empty.empty)
        self.assertIn("prob_positive", empty.columns)

    def test_scalar_summary(self):
        df = scalar_summary(_trace())
        self.assertEqual(list(df["parameter"]), ["tau", "kappa"])

    def test_plot_data(self):
        summary = summarize_trajectory(_trace(), grid_points=[1.0, 2.5], anchor=2020.0)
        overlay = pd.DataFrame({"rain": [0.1, 0.2, 0.3]})
        df = plot_data(summary, overlay)
        self.assertEqual(len(df), 6)
        self.assertEqual(list(df["time"]), [0.0, 1.0, 1.0, 2.5, 2.5, 4.0])
        self.assertEqual(list(df["rain"]), [0.1, 0.1, 0.2, 0.2, 0.3, 0.3])
        self.assertEqual(df["year"].iloc[-1], 2016.0)
        self.assertEqual(plot_data(summary, horizon=10.0)["time"].iloc[-1], 10.0)
        with self.assertRaises(ValueError):
            plot_data(summarize_trajectory(_trace()))

    def test_diagnostics(self):
        df = diagnostics([_trace(1), _trace(2)])
        self.assertEqual(list(df.columns), ["parameter", "ess", "rhat"])
        self.assertEqual(len(df), 3 + 1 + 2 + 2)
        self.assertTrue(np.all(df["rhat"] < 1.1))
        self.assertTrue(np.all(df["ess"] > 100))


if __name__ == '__main__':
    unittest.main()
