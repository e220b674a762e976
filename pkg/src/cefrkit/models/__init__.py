"""Classifier families: softmax regression, random forest, embedding-softmax
networks (word/char/combined and multitask), and the stacked combiner."""

from .adadelta import AdadeltaState, adadelta_step
from .embedding import (
    EmbeddingSoftmaxModel,
    MultitaskModel,
    NeuralHyper,
    build_vocab,
    initialize_embedding_model,
    initialize_multitask_model,
    train_embedding_softmax,
    train_multitask,
)
from .forest import RandomForestModel, train_random_forest
from .persist import load_model, model_from_text, model_to_text, save_model
from .softmax import SoftmaxLinearModel, softmax, train_softmax
from .stacking import ModelSpec, StackedModel, cross_val_probas, fit_model, train_stacked

__all__ = [
    "AdadeltaState",
    "adadelta_step",
    "EmbeddingSoftmaxModel",
    "MultitaskModel",
    "NeuralHyper",
    "build_vocab",
    "initialize_embedding_model",
    "initialize_multitask_model",
    "train_embedding_softmax",
    "train_multitask",
    "RandomForestModel",
    "train_random_forest",
    "load_model",
    "model_from_text",
    "model_to_text",
    "save_model",
    "SoftmaxLinearModel",
    "softmax",
    "train_softmax",
    "ModelSpec",
    "StackedModel",
    "cross_val_probas",
    "fit_model",
    "train_stacked",
]
