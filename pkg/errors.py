"""Exceptions partagées par la bibliothèque et codes de sortie de la CLI."""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_MODE = 4


class CreditArfError(Exception):
    exit_code = 1


class InputError(CreditArfError):
    """Entrée invalide : fichier, schéma, configuration."""
    exit_code = EXIT_INPUT


class SchemaError(InputError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UnknownRatingError(InputError):
    pass


class EmptyDocumentError(InputError):
    pass


class MissingEmbeddingError(InputError):
    def __init__(self, corporation, year):
        super().__init__(f"Aucun plongement en cache pour ({corporation}, {year})")
        self.corporation = corporation
        self.year = year


class DimensionMismatchError(InputError):
    pass


class FormatError(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("Configuration invalide : " + "; ".join(self.problems))


class TestSetMismatchError(InputError):
    __test__ = False


class NumericError(CreditArfError):
    """NaN/Inf rencontré pendant l'entraînement ou l'optimisation."""
    exit_code = EXIT_NUMERIC


class ModeMismatchError(CreditArfError):
    exit_code = EXIT_MODE


class ShapeError(ValueError):
    pass
