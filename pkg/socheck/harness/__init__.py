"""Problem files, reports, the ground-truth corpus and the grid oracle."""
