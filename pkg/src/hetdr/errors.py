class NumericalError(RuntimeError):
    """Optimization produced non-finite values (bad learning rate, bad scaling)."""
