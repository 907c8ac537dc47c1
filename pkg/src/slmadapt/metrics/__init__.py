from slmadapt.metrics.bertscore import BertScore, HashEmbedder, OrthogonalEmbedder, TokenEmbedder, bert_score
from slmadapt.metrics.evaluate import (
    METRIC_GROUPS,
    ExampleScore,
    HeldOutGold,
    MetricReport,
    PredictionMismatch,
    evaluate_split,
    read_predictions,
    write_predictions,
)
from slmadapt.metrics.lexical import Score, bleu, lcs_length, qa_f1, rouge_l, rouge_n, token_f1
from slmadapt.metrics.tokenize import TokenSequence, hindi_words, tokenize_hindi

__all__ = [
    "BertScore",
    "ExampleScore",
    "HashEmbedder",
    "HeldOutGold",
    "METRIC_GROUPS",
    "MetricReport",
    "OrthogonalEmbedder",
    "PredictionMismatch",
    "Score",
    "TokenEmbedder",
    "TokenSequence",
    "bert_score",
    "bleu",
    "evaluate_split",
    "hindi_words",
    "lcs_length",
    "qa_f1",
    "read_predictions",
    "rouge_l",
    "rouge_n",
    "token_f1",
    "tokenize_hindi",
    "write_predictions",
]
