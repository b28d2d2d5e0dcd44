class SparseCountError(Exception):
    """
    Base exception class for everything raised by the sparsecount library.
    Commands map it to exit code 2.
    """
    pass
