"""Distance-based quantum classifier: channel form, open-walk and recycling variants."""

__version__ = "0.1.0"
