"""Second-order subdifferentials, weak directional derivatives and cones."""
