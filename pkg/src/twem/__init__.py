"""Transformed word embedding (TWEM) text classifier and evaluation toolkit."""

from .corpus import Dataset, LabeledExample, class_counts, load_csv, stratified_folds
from .embed import build_vocab, encode, load_pretrained
from .evaluation import ar_test, confusion, cross_validate, metrics
from .model import TrainConfig, TwemModel, load_model, param_count, predict, save_model, train
from .text import PreprocessScheme, apply_scheme, tokenize_basic

__version__ = "0.1.0"
