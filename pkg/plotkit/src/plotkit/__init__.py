from .figures import KINDS, FigureSpec, SchemaError, mp_density, mp_support_edges, render

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "mp_density",
    "mp_support_edges",
    "render",
]
