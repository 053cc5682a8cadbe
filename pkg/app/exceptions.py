class FeedbackError(Exception):
    """Base error; exit_code is what the CLI returns."""

    exit_code = 2


class UsageError(FeedbackError):
    exit_code = 1


class DataError(FeedbackError):
    exit_code = 2


class NumericalError(FeedbackError):
    exit_code = 3
