"""Driving maneuver recognition from windowed telematics sequences.

Subpackages and modules:

- datamodel: sensor frame / recording types and CSV ingestion
- preprocessing: partitioned splitting, robust scaling, windowing
- nn: stacked-LSTM classifier with hand-written gradients
- training: epoch loop, evaluation, prediction
- evaluation: confusion/recall/precision matrices and reports
- svgplot: deterministic SVG heatmaps and training curves
- synthgen: synthetic telematics scenario generator
- archive: dataset and model persistence
- cli: command-line entry point
"""

__version__ = "0.1.0"
