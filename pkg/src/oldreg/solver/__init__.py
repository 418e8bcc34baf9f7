"""MAC-grid discretization: fields, stencils, pressure projection, time stepping and checkpoints."""
