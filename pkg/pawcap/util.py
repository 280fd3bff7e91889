class PawcapError(RuntimeError):
    """Base class for errors caused by bad input data.

    The command line maps these to exit code 3.
    """
    pass
