"""Electrolaryngeal-to-natural speech conversion toolkit.

Subpackages/modules: ``io`` (WAV, landmark CSV, ELF1 feature files),
``features`` (log-mel, mel-cepstrum, MCD), ``wsola`` (time-scale
modification), ``align`` (DTW variants), ``visual`` (lip features, layer
normalization, weighted-sum fusion), ``neural`` (numpy conversion models),
``evaluation`` (MCD reports) and ``cli``.
"""

__version__ = "0.1.0"
