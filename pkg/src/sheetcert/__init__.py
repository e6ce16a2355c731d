"""Check spreadsheets against a code of good and bad practice and certify compliance."""

__version__ = "0.1.0"
