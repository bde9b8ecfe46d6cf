"""Linear programming and multiplier certificates."""
