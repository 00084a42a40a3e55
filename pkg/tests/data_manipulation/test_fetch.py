import tempfile
import unittest
from pathlib import Path

import numpy as np

from common.errors import CovariateError, GenealogyError, TraceError
from data_manipulation.fetch import read_covariates, read_manifest, read_tip_dates, read_trace, read_trees
from data_manipulation.persist import write_frame, write_json
from sampler.trace import Trace


class TestFetch(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_read_trees(self):
        single = self._write("flu.nwk", "((A:1,B:1):1,C:2);\n")
        self.assertEqual(read_trees(single), [("flu", "((A:1,B:1):1,C:2);")])
        several = self._write("loci.nwk", "(A:1,B:1);\n(A:2,B:2);\n")
        self.assertEqual([locus for locus, _ in read_trees(several)], ["loci_1", "loci_2"])
        with self.assertRaises(GenealogyError):
            read_trees(self._write("empty.nwk", "\n"))

    def test_read_tip_dates(self):
        with_header = self._write("dates.tsv", "label\tdate\nA\t1.5\nB\t0\n")
        self.assertEqual(read_tip_dates(with_header), {"A": 1.5, "B": 0.0})
        without_header = self._write("bare.tsv", "A\t2001.25\nB\t2000\n")
        self.assertEqual(read_tip_dates(without_header), {"A": 2001.25, "B": 2000.0})

    def test_read_tip_dates_errors(self):
        for name, text in (
            ("bad.tsv", "label\tdate\nA\tsoon\n"),
            ("dup.tsv", "A\t1\nA\t2\n"),
            ("wide.tsv", "A\t1\t2\n"),
            ("empty.tsv", ""),
        ):
            with self.subTest(name=name):
                with self.assertRaises(GenealogyError):
                    read_tip_dates(self._write(name, text))

    def test_read_covariates(self):
        path = self._write("cov.csv", "time, rain, temp\n1.0, 3.0, 10\n2.0, , 11\n3.0, 5.0,\n")
        times, raw, labels = read_covariates(path)
        np.testing.assert_array_equal(times, [1.0, 2.0, 3.0])
        self.assertEqual(labels, ["rain", "temp"])
        self.assertTrue(np.isnan(raw[1, 0]))
        self.assertTrue(np.isnan(raw[2, 1]))
        self.assertEqual(raw[0, 1], 10.0)

    def test_read_covariates_errors(self):
        for name, text in (
            ("text.csv", "time,rain\n1,wet\n"),
            ("order.csv", "time,rain\n2,1\n1,2\n"),
            ("notime.csv", "time,rain\n,1\n"),
            ("narrow.csv", "time\n1\n"),
            ("empty.csv", ""),
        ):
            with self.subTest(name=name):
                with self.assertRaises(CovariateError):
                    read_covariates(self._write(name, text))

    def test_read_trace_with_sibling_manifest(self):
        trace = Trace(
            gamma=np.array([[0.1, 0.2], [0.3, 0.4]]),
            tau=np.array([1.0, 2.0]),
            beta=np.zeros((2, 0)),
            kappa=np.array([1.0, 1.0]),
            log_posterior=np.array([-3.0, -2.5]),
            seed=9,
        )
        trace.attempts["block"], trace.accepted["block"] = 10, 4
        write_frame(trace.to_frame(), self.dir / "trace_chain1.csv")
        write_json({"chain_manifests": [trace.manifest(file="trace_chain1.csv")]}, self.dir / "manifest.json")
        loaded = read_trace(self.dir / "trace_chain1.csv")
        np.testing.assert_array_equal(loaded.gamma, trace.gamma)
        self.assertEqual(loaded.seed, 9)
        self.assertEqual(loaded.acceptance_rates()["block"], 0.4)
        self.assertEqual(read_manifest(self.dir / "manifest.json")["chain_manifests"][0]["file"], "trace_chain1.csv")

    def test_read_trace_errors(self):
        with self.assertRaises(TraceError):
            read_trace(self._write("bad.csv", "a,b\n1,2\n"))
        with self.assertRaises(TraceError):
            read_trace(self._write("blank.csv", ""))


if __name__ == '__main__':
    unittest.main()
