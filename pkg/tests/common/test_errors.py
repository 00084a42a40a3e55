import unittest

from common.errors import (
    ConfigError,
    CovariateError,
    DataError,
    GenealogyError,
    NumericalError,
    SkygridError,
    TraceError,
    exit_code_for,
)


class TestErrors(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(exit_code_for(ConfigError("bad key")), 2)
        self.assertEqual(exit_code_for(GenealogyError("bad tree")), 3)
        self.assertEqual(exit_code_for(CovariateError("bad csv")), 3)
        self.assertEqual(exit_code_for(TraceError("bad header")), 3)
        self.assertEqual(exit_code_for(NumericalError("no mode")), 4)
        self.assertEqual(exit_code_for(SkygridError("other")), 1)

    def test_io_errors_are_data_errors(self):
        self.assertEqual(exit_code_for(FileNotFoundError("missing.nwk")), 3)

    def test_unexpected_errors(self):
        self.assertEqual(exit_code_for(RuntimeError("boom")), 1)

    def test_hierarchy(self):
        self.assertTrue(issubclass(GenealogyError, DataError))
        self.assertTrue(issubclass(ConfigError, ValueError))
        self.assertTrue(issubclass(NumericalError, ArithmeticError))


if __name__ == '__main__':
    unittest.main()
