"""Adapt small language models to low-resource QA domains.

The toolkit covers three batch stages: synthetic QA generation from
contexts, staged finetuning plans (baseline, continued, multi-source),
and lexical/semantic evaluation with a Devanagari-aware tokenizer.
"""

__version__ = "0.1.0"
