"""embed_export: raw fake-news dataset trees -> hetformer input files."""

from .encoders import ScalarFeatures, TextEncoder, stub_image_vector, stub_text_vector
from .errors import BadRecipe, EncoderUnavailable, ExportError, MalformedRecord
from .export import AttributeSpec, ExportRecipe, export, write_hetemb1
from .raw import RawDataset, read_fakenewsnet, read_pheme, read_raw

__version__ = "0.1.0"

__all__ = [
    "AttributeSpec",
    "BadRecipe",
    "EncoderUnavailable",
    "ExportError",
    "ExportRecipe",
    "MalformedRecord",
    "RawDataset",
    "ScalarFeatures",
    "TextEncoder",
    "export",
    "read_fakenewsnet",
    "read_pheme",
    "read_raw",
    "stub_image_vector",
    "stub_text_vector",
    "write_hetemb1",
]
