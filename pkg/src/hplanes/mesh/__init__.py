"""Triangle meshes in the Poincaré ball and the energies evaluated on them."""
