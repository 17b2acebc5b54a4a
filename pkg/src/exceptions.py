"""
Error types raised by the selection, forecasting and simulation routines.

Input problems derive from ValidationError (a ValueError), numerical problems
from NumericalError (an ArithmeticError). The command line tools map the two
branches onto exit codes 1 and 2.
"""
import numpy


class OcmtError(Exception):
    pass


class ValidationError(OcmtError, ValueError):
    """
        Bad user input: missing columns, non-numeric cells, parameters out of range.
    """
    pass


class NumericalError(OcmtError, ArithmeticError):
    pass


class DimensionError(NumericalError):
    pass


class DegenerateCovariateError(NumericalError):

    def __init__(self, message, index=None):
        super(DegenerateCovariateError, self).__init__(message)
        self.index = index


class RankDeficiencyError(NumericalError):

    def __init__(self, message, columns=()):
        super(RankDeficiencyError, self).__init__(message)
        self.columns = tuple(columns)


class PerfectFitError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """
        Raised when coordinate descent exhausts its sweep budget.

        :param numpy.ndarray last_iterate: coefficients after the final sweep
        :param int sweeps: number of completed sweeps
    """

    def __init__(self, message, last_iterate=None, sweeps=0):
        super(ConvergenceError, self).__init__(message)
        self.last_iterate = last_iterate
        self.sweeps = sweeps


class CalibrationError(NumericalError):

    def __init__(self, message, bracket=None):
        super(CalibrationError, self).__init__(message)
        self.bracket = bracket


class DegenerateVarianceError(NumericalError):
    pass


def exit_status(err):
    """
    exit code of a command line tool for an error: 1 for bad input, 2 for numerical failures
    """
    if isinstance(err, ValidationError):
        return 1
    return 2


# errors a command line tool reports instead of a traceback; numpy and the
# interpreter raise the last two outside our own checks
TOOL_ERRORS = (OcmtError, numpy.linalg.LinAlgError, ArithmeticError)
