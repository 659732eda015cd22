class QamError(Exception):
    """Base class for every error raised by the search engine."""


class IngestError(QamError, OSError):
    pass


class EmptyCatalogError(QamError, ValueError):
    pass


class InvalidRecordError(QamError, ValueError):
    pass


class EmptyQueryError(QamError, ValueError):
    pass


class ConfigurationError(QamError, ValueError):
    pass


class ProductNotFoundError(QamError, KeyError):
    def __init__(self, product_id: str):
        super().__init__(product_id)
        self.product_id = product_id

    def __str__(self) -> str:
        return f"Unknown product id: {self.product_id!r}"


class DimensionMismatchError(QamError, ValueError):
    pass


class ProviderMismatchError(QamError, ValueError):
    pass


class VersionMismatchError(QamError, RuntimeError):
    pass


class RemoteServiceError(QamError, RuntimeError):
    pass


class EmptyInputError(QamError, ValueError):
    pass


class WorkspaceLockedError(QamError, RuntimeError):
    pass
