"""Hospital-course summarization benchmark toolkit.

Builds paired (EMR input, brief-hospital-course) datasets from raw clinical
note tables, fetches model summaries from OpenAI-compatible backends, scores
them with ROUGE / BERTScore, and runs the CHoCoSA blinded reader study.
"""

__version__ = "0.1.0"
