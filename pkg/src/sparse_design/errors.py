"""Exception types shared across the package."""


class SparseDesignError(Exception):
    """Base class for package-specific errors."""


class DataFormatError(SparseDesignError):
    """An input file violates its declared schema."""


class SmoothingError(SparseDesignError):
    """A local-linear system could not be solved."""


class ConditioningError(SparseDesignError):
    """A design submatrix failed the invertibility gate."""


class SearchError(SparseDesignError):
    """No feasible design exists for a search request."""


class RidgeSelectionError(SparseDesignError):
    """Ridge cross-validation could not score any candidate."""
