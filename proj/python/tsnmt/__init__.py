from ._core import Error, Translator, corpus_bleu, read_metrics, run, sentence_bleu

__all__ = ["Error", "Translator", "corpus_bleu", "read_metrics", "run", "sentence_bleu"]
