"""Cochlear-implant insertion planning, post-operative position evaluation,
and cohort statistics.

Subpackages:

* `artifact.geometry`: meshes, tubes, the cochlear reference frame, angular
  coordinates, and a synthetic cochlea generator.
* `artifact.electrode`: the resting shape of a pre-curved electrode array
  and rigid posing of that shape.
* `artifact.planning`: array-to-anatomy registration, candidate insertion
  plans, clock-face readouts, and the printable plan text.
* `artifact.postop`: per-case position metrics (angular insertion depth,
  modiolar distances, scalar position, fold detection, depth error).
* `artifact.cohort`: cohort ingestion, group summaries, the statistical
  test battery, and prospective sample-size search.
* `artifact.cli`: the command-line interface.
"""

__version__ = "1.0.0"
