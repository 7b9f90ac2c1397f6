"""Controllable extractive summarization with sub-aspect control codes.

Pipeline stages: build extractive oracles from abstractive references
(semantic or lexical matching), label them with [importance, diversity,
position] control codes, optionally augment sentence labels via an
adversarially trained autoencoder plus k-means, train a conditional
BiLSTM sentence selector, and evaluate (ROUGE, position bias, shuffle
robustness, cross-domain inference).
"""

__version__ = "0.1.0"
