import unittest
from unittest.mock import MagicMock, patch

import pandas as pd

from data_visualization.graphing import create_barplot, plot_trajectory_band


class TestGraphing(unittest.TestCase):

    def setUp(self):
        self.effects = pd.DataFrame(
            {
                "covariate": ["rain", "temp", "wind"],
                "mean": [0.4, -0.2, 1.1],
                "lower": [0.1, -0.5, 0.6],
                "upper": [0.7, 0.1, 1.6],
            }
        )
        self.plot_data = pd.DataFrame(
            {
                "time": [0.0, 1.0, 1.0, 2.0],
                "mean": [0.0, 0.0, 1.0, 1.0],
                "lower": [-0.5, -0.5, 0.4, 0.4],
                "upper": [0.5, 0.5, 1.6, 1.6],
                "rain": [0.1, 0.1, 0.3, 0.3],
            }
        )

    @patch("seaborn.barplot")
    def test_create_barplot(self, mock_barplot):
        ax = MagicMock()
        mock_barplot.return_value = ax
        result = create_barplot(self.effects, limit=2, sort_by="desc")

        self.assertIs(result, ax)
        shown = mock_barplot.call_args.args[0]
        self.assertEqual(list(shown["covariate"]), ["wind", "rain"])
        self.assertEqual(mock_barplot.call_args.kwargs["orient"], "h")
        ax.errorbar.assert_called_once()

    @patch("seaborn.barplot")
    def test_create_barplot_ascending_without_intervals(self, mock_barplot):
        ax = MagicMock()
        mock_barplot.return_value = ax
        create_barplot(self.effects[["covariate", "mean"]], sort_by="asc")
        self.assertEqual(list(mock_barplot.call_args.args[0]["covariate"]), ["temp", "rain", "wind"])
        ax.errorbar.assert_not_called()

    def test_create_barplot_invalid_sort_by(self):
        with self.assertRaises(ValueError) as context:
            create_barplot(self.effects, sort_by="invalid")
        self.assertEqual(str(context.exception), "sort_by must be either 'desc' or 'asc'")

    @patch("seaborn.lineplot")
    def test_plot_trajectory_band(self, mock_lineplot):
        ax = MagicMock()
        mock_lineplot.return_value = ax
        result = plot_trajectory_band(self.plot_data, overlay="rain")

        self.assertIs(result, ax)
        self.assertEqual(mock_lineplot.call_count, 2)
        ax.fill_between.assert_called_once()
        ax.twinx.assert_called_once()
        ax.invert_xaxis.assert_called_once()

    @patch("seaborn.lineplot")
    def test_plot_trajectory_band_by_year(self, mock_lineplot):
        ax = MagicMock()
        mock_lineplot.return_value = ax
        data = self.plot_data.rename(columns={"time": "year"})
        plot_trajectory_band(data, time="year")
        ax.invert_xaxis.assert_not_called()
        with self.assertRaises(ValueError):
            plot_trajectory_band(data.drop(columns="upper"), time="year")


if __name__ == '__main__':
    unittest.main()
