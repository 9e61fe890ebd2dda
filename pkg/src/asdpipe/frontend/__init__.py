"""Frontends: autoencoder, discriminative multi-branch, raw spectral features."""
from .ae import AutoEncoderFrontend
from .discriminative import DiscriminativeFrontend
from .extract import extract, load_waveforms
from .labels import MetaLabelEncoder
from .raw import RawSpecFrontend
from .store import EmbeddingSet, load_embeddings, store_embeddings

__all__ = [
    "AutoEncoderFrontend",
    "DiscriminativeFrontend",
    "EmbeddingSet",
    "MetaLabelEncoder",
    "RawSpecFrontend",
    "extract",
    "load_embeddings",
    "load_waveforms",
    "store_embeddings",
]
